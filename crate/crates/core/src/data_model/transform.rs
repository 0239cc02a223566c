use ndarray::{Array1, Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use super::TimePanel;
use crate::error::{Error, Result};

/// Per-column location and population scale used to standardize a panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationStats {
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

impl StandardizationStats {
    /// Stats that leave values unchanged.
    pub fn identity(k: usize) -> Self {
        Self {
            means: vec![0.0; k],
            sds: vec![1.0; k],
        }
    }

    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }

    pub fn scale_row(&self, row: ArrayView1<f64>) -> Array1<f64> {
        Array1::from_iter(
            row.iter()
                .zip(self.means.iter().zip(&self.sds))
                .map(|(x, (m, s))| (x - m) / s),
        )
    }

    pub fn unscale_row(&self, row: ArrayView1<f64>) -> Array1<f64> {
        Array1::from_iter(
            row.iter()
                .zip(self.means.iter().zip(&self.sds))
                .map(|(x, (m, s))| x * s + m),
        )
    }

    /// Applies these stats to another panel of the same width.
    pub fn apply(&self, panel: &TimePanel) -> Result<TimePanel> {
        self.check_width(panel)?;
        let mut values = panel.values().to_owned();
        for (k, mut col) in values.axis_iter_mut(Axis(1)).enumerate() {
            let (m, s) = (self.means[k], self.sds[k]);
            col.mapv_inplace(|x| (x - m) / s);
        }
        panel.with_values(values)
    }

    fn check_width(&self, panel: &TimePanel) -> Result<()> {
        if self.means.len() != panel.width() || self.sds.len() != panel.width() {
            return Err(Error::DimensionMismatch(format!(
                "stats for {} columns, panel has {}",
                self.means.len(),
                panel.width()
            )));
        }
        Ok(())
    }
}

/// Daily log returns `ln(P_t) - ln(P_{t-1})`, dated at the later day.
pub fn log_returns(prices: &TimePanel) -> Result<TimePanel> {
    let t = prices.len();
    if t < 2 {
        return Err(Error::InsufficientData(format!(
            "log returns need at least 2 prices, got {t}"
        )));
    }
    for ((row, k), &v) in prices.values().indexed_iter() {
        if !(v > 0.0) {
            return Err(Error::NonPositivePrice {
                series: prices.names()[k].clone(),
                date: prices.dates()[row],
                value: v,
            });
        }
    }
    let logs = prices.values().mapv(f64::ln);
    let diff = &logs.slice(ndarray::s![1.., ..]) - &logs.slice(ndarray::s![..-1, ..]);
    TimePanel::new(prices.dates()[1..].to_vec(), prices.names().to_vec(), diff)
}

/// Centers each column and divides by its population standard deviation.
pub fn standardize(panel: &TimePanel) -> Result<(TimePanel, StandardizationStats)> {
    let stats = standardization_stats(panel)?;
    let out = stats.apply(panel)?;
    Ok((out, stats))
}

/// Location/scale of every column, computed without transforming.
pub fn standardization_stats(panel: &TimePanel) -> Result<StandardizationStats> {
    if panel.len() < 2 {
        return Err(Error::InsufficientData(
            "standardization needs at least 2 observations".into(),
        ));
    }
    let n = panel.len() as f64;
    let mut means = Vec::with_capacity(panel.width());
    let mut sds = Vec::with_capacity(panel.width());
    for (k, col) in panel.values().axis_iter(Axis(1)).enumerate() {
        let mean = col.sum() / n;
        // Second pass on centered data keeps the residual mean at rounding level.
        let resid_mean = col.iter().map(|x| x - mean).sum::<f64>() / n;
        let mean = mean + resid_mean;
        let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let sd = var.sqrt();
        if !(sd > 0.0) || sd <= f64::EPSILON * mean.abs() {
            return Err(Error::ZeroVariance(panel.names()[k].clone()));
        }
        means.push(mean);
        sds.push(sd);
    }
    Ok(StandardizationStats { means, sds })
}

/// Inverse of [`standardize`]: `x * sd + mean` per column.
pub fn destandardize(panel: &TimePanel, stats: &StandardizationStats) -> Result<TimePanel> {
    stats.check_width(panel)?;
    let mut values = panel.values().to_owned();
    for (k, mut col) in values.axis_iter_mut(Axis(1)).enumerate() {
        let (m, s) = (stats.means[k], stats.sds[k]);
        col.mapv_inplace(|x| x * s + m);
    }
    panel.with_values(values)
}

/// Targets and stacked lag regressors of a VAR(p).
///
/// `y` is K×N and `z` is (Kp)×N with N = T − p. Column `τ` of `z` stacks
/// `[y_{τ+p-1}; …; y_τ]` (most recent lag first), so column `τ` of `y` is
/// `y_{τ+p}` and a coefficient block `[A_1, …, A_p]` multiplies `z`
/// directly.
#[derive(Debug, Clone)]
pub struct LagEmbedding {
    pub y: Array2<f64>,
    pub z: Array2<f64>,
    pub p: usize,
    pub names: Vec<String>,
}

impl LagEmbedding {
    pub fn k(&self) -> usize {
        self.y.nrows()
    }

    /// Effective sample size N = T − p.
    pub fn n(&self) -> usize {
        self.y.ncols()
    }

    /// Regressor label such as `btc.l3` for row `row` of `z`.
    pub fn regressor_name(&self, row: usize) -> String {
        let k = self.k();
        format!("{}.l{}", self.names[row % k], row / k + 1)
    }
}

pub fn lag_embed(panel: &TimePanel, p: usize) -> Result<LagEmbedding> {
    let t = panel.len();
    let k = panel.width();
    if p == 0 {
        return Err(Error::InvalidConfig("lag order must be at least 1".into()));
    }
    if p >= t {
        return Err(Error::InsufficientData(format!(
            "lag order {p} needs more than {t} observations"
        )));
    }
    let n = t - p;
    let v = panel.values();
    let y = v.slice(ndarray::s![p.., ..]).t().to_owned();
    let mut z = Array2::<f64>::zeros((k * p, n));
    for lag in 1..=p {
        let block = v.slice(ndarray::s![p - lag..t - lag, ..]);
        z.slice_mut(ndarray::s![(lag - 1) * k..lag * k, ..])
            .assign(&block.t());
    }
    Ok(LagEmbedding {
        y,
        z,
        p,
        names: panel.names().to_vec(),
    })
}

/// Stacked lag vector `[y_{t-1}; …; y_{t-p}]` for the row index `t` of a
/// values matrix (rows are observations).
pub fn lag_vector(values: ndarray::ArrayView2<f64>, t: usize, p: usize) -> Array1<f64> {
    let k = values.ncols();
    let mut out = Array1::<f64>::zeros(k * p);
    for lag in 1..=p {
        out.slice_mut(ndarray::s![(lag - 1) * k..lag * k])
            .assign(&values.row(t - lag));
    }
    out
}
