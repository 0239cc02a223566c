use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use super::TimePanel;
use crate::error::{Error, Result};
use crate::linalg::least_squares;

/// Shortest series accepted by the unit-root regression.
pub const MIN_ADF_OBS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KurtosisConvention {
    /// Fourth standardized moment minus 3.
    #[default]
    Excess,
    /// Fourth standardized moment.
    Raw,
}

/// Deterministic terms in the unit-root regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdfDeterministic {
    None,
    #[default]
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryOptions {
    pub adf_lags: usize,
    pub adf_deterministic: AdfDeterministic,
    pub kurtosis: KurtosisConvention,
}

impl Default for SummaryOptions {
    fn default() -> Self {
        Self {
            adf_lags: 1,
            adf_deterministic: AdfDeterministic::Constant,
            kurtosis: KurtosisConvention::Excess,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesSummary {
    pub name: String,
    pub mean: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
    pub range: f64,
    pub skewness: f64,
    pub kurtosis: f64,
    pub adf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryReport {
    pub kurtosis: KurtosisConvention,
    pub adf_lags: usize,
    pub series: Vec<SeriesSummary>,
}

/// Descriptive statistics per column with excess kurtosis.
pub fn summary_stats(panel: &TimePanel, adf_lags: usize) -> Result<SummaryReport> {
    summary_stats_with(
        panel,
        SummaryOptions {
            adf_lags,
            ..SummaryOptions::default()
        },
    )
}

pub fn summary_stats_with(panel: &TimePanel, opts: SummaryOptions) -> Result<SummaryReport> {
    let series = panel
        .names()
        .iter()
        .enumerate()
        .map(|(k, name)| summarize(name, panel.column(k), opts))
        .collect::<Result<Vec<_>>>()?;
    Ok(SummaryReport {
        kurtosis: opts.kurtosis,
        adf_lags: opts.adf_lags,
        series,
    })
}

fn summarize(name: &str, x: ArrayView1<f64>, opts: SummaryOptions) -> Result<SeriesSummary> {
    let n = x.len() as f64;
    let mean = x.sum() / n;
    let (m2, m3, m4) = x.iter().fold((0.0, 0.0, 0.0), |(a, b, c), v| {
        let d = v - mean;
        let d2 = d * d;
        (a + d2, b + d2 * d, c + d2 * d2)
    });
    let (m2, m3, m4) = (m2 / n, m3 / n, m4 / n);
    let skewness = m3 / m2.powf(1.5);
    let raw_kurt = m4 / (m2 * m2);
    let kurtosis = match opts.kurtosis {
        KurtosisConvention::Excess => raw_kurt - 3.0,
        KurtosisConvention::Raw => raw_kurt,
    };
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let len = sorted.len();
    let median = if len % 2 == 1 {
        sorted[len / 2]
    } else {
        0.5 * (sorted[len / 2 - 1] + sorted[len / 2])
    };
    let min = sorted[0];
    let max = sorted[len - 1];
    let adf = adf_statistic_with(x, opts.adf_lags, opts.adf_deterministic)
        .map_err(|e| Error::InsufficientData(format!("series '{name}': {e}")))?;
    Ok(SeriesSummary {
        name: name.to_string(),
        mean,
        median,
        min,
        max,
        range: max - min,
        skewness,
        kurtosis,
        adf,
    })
}

/// Augmented Dickey-Fuller t-statistic on the lagged level in
/// `Δy_t = c + γ y_{t-1} + Σ_{i=1..lags} δ_i Δy_{t-i} + e_t`.
///
/// More negative values are stronger evidence against a unit root; the
/// asymptotic 5% and 10% critical values for this specification are about
/// −2.86 and −2.57.
pub fn adf_statistic(series: ArrayView1<f64>, lags: usize) -> Result<f64> {
    adf_statistic_with(series, lags, AdfDeterministic::Constant)
}

/// [`adf_statistic`] with a choice of deterministic terms. Without the
/// constant the 5% critical value is about −1.95.
pub fn adf_statistic_with(
    series: ArrayView1<f64>,
    lags: usize,
    deterministic: AdfDeterministic,
) -> Result<f64> {
    let t = series.len();
    if t < MIN_ADF_OBS {
        return Err(Error::InsufficientData(format!(
            "unit-root regression needs at least {MIN_ADF_OBS} observations, got {t}"
        )));
    }
    let offset = match deterministic {
        AdfDeterministic::None => 0,
        AdfDeterministic::Constant => 1,
    };
    let cols = offset + 1 + lags;
    // rows available: t - 1 differences, minus `lags` for augmentation
    let rows = t.saturating_sub(1 + lags);
    if rows <= cols + 1 {
        return Err(Error::InsufficientData(format!(
            "{t} observations cannot support {lags} augmentation lags"
        )));
    }
    let diff: Array1<f64> = Array1::from_iter((1..t).map(|i| series[i] - series[i - 1]));
    let mut design = Array2::<f64>::zeros((rows, cols));
    let mut target = Array1::<f64>::zeros(rows);
    for r in 0..rows {
        // diff index of the dependent variable
        let d = r + lags;
        target[r] = diff[d];
        if offset == 1 {
            design[[r, 0]] = 1.0;
        }
        design[[r, offset]] = series[d];
        for i in 1..=lags {
            design[[r, offset + i]] = diff[d - i];
        }
    }
    let fit = least_squares(design.view(), target.view()).map_err(|_| {
        Error::InsufficientData("degenerate unit-root regression (constant series?)".into())
    })?;
    let se = fit.standard_errors();
    Ok(fit.coefficients[offset] / se[offset])
}
