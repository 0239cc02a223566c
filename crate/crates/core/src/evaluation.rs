//! Forecast accuracy metrics and pairwise equal-accuracy tests.

use std::io::Write;

use chrono::NaiveDate;
use log::warn;
use serde::{Deserialize, Serialize};

use crate::data_model::TimePanel;
use crate::error::{Error, Result};
use crate::forecasting::ForecastSet;
use crate::io::fmt_f64;

/// Shortest error series accepted by [`epa_test`].
pub const MIN_EPA_LEN: usize = 10;
/// Series label of the cross-series average rows.
pub const AVERAGE_LABEL: &str = "AVERAGE";

/// Root mean squared error.
pub fn rmse(errors: &[f64]) -> Result<f64> {
    if errors.is_empty() {
        return Err(Error::InsufficientData(
            "rmse of an empty error series".into(),
        ));
    }
    let ss: f64 = errors.iter().map(|e| e * e).sum();
    Ok((ss / errors.len() as f64).sqrt())
}

/// Which forecast difference is compared with the actual change.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MdaForm {
    /// `sign(f_{t+1} − f_t)`.
    #[default]
    ForecastChange,
    /// `sign(f_{t+1} − y_t)`: forecast relative to the last actual.
    ForecastVsPreviousActual,
}

fn sign(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// Share of steps where forecast and actual move the same way, comparing
/// consecutive differences of each series.
pub fn mda(actual: &[f64], forecast: &[f64]) -> Result<f64> {
    mda_with(actual, forecast, MdaForm::ForecastChange)
}

pub fn mda_with(actual: &[f64], forecast: &[f64], form: MdaForm) -> Result<f64> {
    if actual.len() != forecast.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} actuals vs {} forecasts",
            actual.len(),
            forecast.len()
        )));
    }
    if actual.len() < 2 {
        return Err(Error::InsufficientData(
            "directional accuracy needs at least 2 points".into(),
        ));
    }
    let hits = (1..actual.len())
        .filter(|&t| {
            let da = sign(actual[t] - actual[t - 1]);
            let df = match form {
                MdaForm::ForecastChange => sign(forecast[t] - forecast[t - 1]),
                MdaForm::ForecastVsPreviousActual => sign(forecast[t] - actual[t - 1]),
            };
            da == df
        })
        .count();
    Ok(hits as f64 / (actual.len() - 1) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpaResult {
    /// HAC-studentized mean loss differential with the small-sample
    /// correction applied.
    pub statistic: f64,
    /// Two-sided, standard normal.
    pub p_value: f64,
    /// `e1² − e2²`.
    pub loss: Vec<f64>,
}

/// Equal predictive accuracy test on squared-error loss for `h`-step
/// forecasts. Positive statistics mean the first model has larger losses.
pub fn epa_test(e1: &[f64], e2: &[f64], h: usize) -> Result<EpaResult> {
    if e1.len() != e2.len() {
        return Err(Error::DimensionMismatch(format!(
            "error series of length {} and {}",
            e1.len(),
            e2.len()
        )));
    }
    if h < 1 {
        return Err(Error::InvalidConfig("horizon must be at least 1".into()));
    }
    let n = e1.len();
    if n < MIN_EPA_LEN {
        return Err(Error::InsufficientData(format!(
            "equal-accuracy test needs at least {MIN_EPA_LEN} points, got {n}"
        )));
    }
    let loss: Vec<f64> = e1.iter().zip(e2).map(|(a, b)| a * a - b * b).collect();
    let nf = n as f64;
    let mean = loss.iter().sum::<f64>() / nf;
    let dev: Vec<f64> = loss.iter().map(|d| d - mean).collect();
    let autocov = |j: usize| (j..n).map(|t| dev[t] * dev[t - j]).sum::<f64>() / nf;
    let mut omega = autocov(0);
    for j in 1..h.min(n) {
        omega += 2.0 * (1.0 - j as f64 / h as f64) * autocov(j);
    }
    if !(omega > 0.0) {
        if mean != 0.0 {
            warn!("loss differential has zero variance but nonzero mean {mean}");
        }
        return Ok(EpaResult {
            statistic: 0.0,
            p_value: 1.0,
            loss,
        });
    }
    let hf = h as f64;
    let correction = ((nf + 1.0 - 2.0 * hf + hf * (hf - 1.0) / nf) / nf).sqrt();
    let statistic = mean / (omega / nf).sqrt() * correction;
    let p_value = statrs::function::erf::erfc(statistic.abs() / std::f64::consts::SQRT_2).min(1.0);
    Ok(EpaResult {
        statistic,
        p_value,
        loss,
    })
}

/// `***`, `**`, `*` below 1%, 5% and 10%.
pub fn star_marks(p: f64) -> &'static str {
    if p < 0.01 {
        "***"
    } else if p < 0.05 {
        "**"
    } else if p < 0.10 {
        "*"
    } else {
        ""
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalCell {
    pub model: String,
    pub series: String,
    pub horizon: usize,
    pub rmse: f64,
    pub mda: f64,
    /// Evaluated forecasts.
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpaCell {
    pub model: String,
    pub benchmark: String,
    pub series: String,
    pub horizon: usize,
    pub statistic: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvalOptions {
    pub mda_form: MdaForm,
    /// Models every other model is tested against.
    pub benchmarks: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub cells: Vec<EvalCell>,
    /// Per model and horizon, the plain mean of the per-series values.
    pub averages: Vec<EvalCell>,
    pub epa: Vec<EpaCell>,
}

/// Actual and forecast values of one (model, horizon, series) cell.
type CellSeries = (Vec<f64>, Vec<f64>);

/// Aligned (actual, forecast) pairs per model, horizon and series.
struct Aligned {
    /// model → horizon → series
    data: Vec<Vec<Vec<CellSeries>>>,
}

fn align(models: &[(String, ForecastSet)], actuals: Option<&TimePanel>) -> Result<Aligned> {
    let (_, first) = models
        .first()
        .ok_or_else(|| Error::InvalidConfig("no forecasts to evaluate".into()))?;
    for (name, set) in models {
        if set.names != first.names || set.horizons != first.horizons {
            return Err(Error::DimensionMismatch(format!(
                "model '{name}' has series {:?} and {} horizons, expected {:?} and {}",
                set.names, set.horizons, first.names, first.horizons
            )));
        }
        if set.origins != first.origins {
            let missing: Vec<String> = set
                .origins
                .iter()
                .filter(|d| !first.origins.contains(d))
                .chain(first.origins.iter().filter(|d| !set.origins.contains(d)))
                .map(|d| d.to_string())
                .collect();
            return Err(Error::InvalidPanel(format!(
                "model '{name}' origins differ from '{}' at {}",
                models[0].0,
                missing.join(", ")
            )));
        }
    }
    let column_of = |panel: &TimePanel, series: &str| {
        panel
            .column_index(series)
            .ok_or_else(|| Error::InvalidPanel(format!("actuals panel has no series '{series}'")))
    };
    if let Some(panel) = actuals {
        let mut missing: Vec<NaiveDate> = Vec::new();
        for o in 0..first.origins.len() {
            for h in 1..=first.horizons {
                let d = first.target_date(o, h);
                if panel.date_index(d).is_none() && !missing.contains(&d) {
                    missing.push(d);
                }
            }
        }
        if !missing.is_empty() {
            return Err(Error::InvalidPanel(format!(
                "no actual values for target dates {}",
                missing
                    .iter()
                    .map(|d| d.to_string())
                    .collect::<Vec<_>>()
                    .join(", ")
            )));
        }
        for s in &first.names {
            column_of(panel, s)?;
        }
    }
    let mut data = Vec::with_capacity(models.len());
    for (_, set) in models {
        let mut per_h = Vec::with_capacity(set.horizons);
        for h in 0..set.horizons {
            let mut per_s = Vec::with_capacity(set.names.len());
            for (k, series) in set.names.iter().enumerate() {
                let mut a = Vec::new();
                let mut f = Vec::new();
                for o in 0..set.origins.len() {
                    let actual = match actuals {
                        Some(panel) => {
                            let row = panel
                                .date_index(set.target_date(o, h + 1))
                                .expect("checked");
                            Some(panel.values()[[row, column_of(panel, series)?]])
                        }
                        None => set.actuals[[o, h, k]],
                    };
                    if let Some(v) = actual {
                        a.push(v);
                        f.push(set.values[[o, h, k]]);
                    }
                }
                per_s.push((a, f));
            }
            per_h.push(per_s);
        }
        data.push(per_h);
    }
    Ok(Aligned { data })
}

/// RMSE, MDA and equal-accuracy tests for every model, series and horizon.
///
/// Actual values come from `actuals` when given (looked up by target date)
/// and otherwise from the forecast sets themselves. All models must share
/// origins, horizons and series.
pub fn evaluate(
    models: &[(String, ForecastSet)],
    actuals: Option<&TimePanel>,
    opts: &EvalOptions,
) -> Result<EvaluationReport> {
    let aligned = align(models, actuals)?;
    for b in &opts.benchmarks {
        if !models.iter().any(|(n, _)| n == b) {
            return Err(Error::InvalidConfig(format!(
                "benchmark '{b}' is not among the models"
            )));
        }
    }
    let names = &models[0].1.names;
    let horizons = models[0].1.horizons;
    let mut cells = Vec::new();
    let mut averages = Vec::new();
    for (m, (model, _)) in models.iter().enumerate() {
        for h in 0..horizons {
            let mut row = Vec::with_capacity(names.len());
            for (k, series) in names.iter().enumerate() {
                let (a, f) = &aligned.data[m][h][k];
                let errors: Vec<f64> = a.iter().zip(f).map(|(x, y)| x - y).collect();
                let cell = EvalCell {
                    model: model.clone(),
                    series: series.clone(),
                    horizon: h + 1,
                    rmse: rmse(&errors).map_err(|_| {
                        Error::InsufficientData(format!(
                            "model '{model}' has no actual values for {series} at horizon {}",
                            h + 1
                        ))
                    })?,
                    mda: mda_with(a, f, opts.mda_form)?,
                    count: errors.len(),
                };
                row.push(cell);
            }
            let kf = row.len() as f64;
            averages.push(EvalCell {
                model: model.clone(),
                series: AVERAGE_LABEL.to_string(),
                horizon: h + 1,
                rmse: row.iter().map(|c| c.rmse).sum::<f64>() / kf,
                mda: row.iter().map(|c| c.mda).sum::<f64>() / kf,
                count: row.iter().map(|c| c.count).sum(),
            });
            cells.extend(row);
        }
    }

    let mut epa = Vec::new();
    for bench in &opts.benchmarks {
        let b = models
            .iter()
            .position(|(n, _)| n == bench)
            .expect("checked");
        for (m, (model, _)) in models.iter().enumerate() {
            if m == b {
                continue;
            }
            for h in 0..horizons {
                for (k, series) in names.iter().enumerate() {
                    let (a, f) = &aligned.data[m][h][k];
                    let (ab, fb) = &aligned.data[b][h][k];
                    let e1: Vec<f64> = a.iter().zip(f).map(|(x, y)| x - y).collect();
                    let e2: Vec<f64> = ab.iter().zip(fb).map(|(x, y)| x - y).collect();
                    match epa_test(&e1, &e2, h + 1) {
                        Ok(r) => epa.push(EpaCell {
                            model: model.clone(),
                            benchmark: bench.clone(),
                            series: series.clone(),
                            horizon: h + 1,
                            statistic: r.statistic,
                            p_value: r.p_value,
                        }),
                        Err(e) => warn!(
                            "skipping test of {model} vs {bench} ({series}, h={}): {e}",
                            h + 1
                        ),
                    }
                }
            }
        }
    }
    Ok(EvaluationReport {
        cells,
        averages,
        epa,
    })
}

impl EvaluationReport {
    /// `model,series,horizon,metric,value,stars`.
    ///
    /// Metrics are `rmse`, `mda` and `count` per series plus the `AVERAGE`
    /// rows, then `epa_stat:<benchmark>` and `epa_p:<benchmark>` for each
    /// test, with stars from the p-value. An `rmse` row carries the stars of
    /// its test against the first benchmark.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["model", "series", "horizon", "metric", "value", "stars"])?;
        let first_bench = self.epa.first().map(|c| c.benchmark.clone());
        let rmse_stars = |c: &EvalCell| -> &'static str {
            self.epa
                .iter()
                .find(|e| {
                    Some(&e.benchmark) == first_bench.as_ref()
                        && e.model == c.model
                        && e.series == c.series
                        && e.horizon == c.horizon
                })
                .map(|e| star_marks(e.p_value))
                .unwrap_or("")
        };
        let mut cells: Vec<&EvalCell> = Vec::new();
        // per model and horizon: series rows, then the average row
        let mut avg = self.averages.iter();
        let mut current: Option<(&str, usize)> = None;
        for c in &self.cells {
            let key = (c.model.as_str(), c.horizon);
            if current.is_some_and(|k| k != key) {
                cells.extend(avg.next());
            }
            current = Some(key);
            cells.push(c);
        }
        cells.extend(avg);
        for c in cells {
            let h = c.horizon.to_string();
            w.write_record([
                &c.model,
                &c.series,
                &h,
                "rmse",
                &fmt_f64(c.rmse),
                rmse_stars(c),
            ])?;
            w.write_record([&c.model, &c.series, &h, "mda", &fmt_f64(c.mda), ""])?;
            w.write_record([&c.model, &c.series, &h, "count", &c.count.to_string(), ""])?;
        }
        for e in &self.epa {
            let h = e.horizon.to_string();
            let stars = star_marks(e.p_value);
            w.write_record([
                &e.model,
                &e.series,
                &h,
                &format!("epa_stat:{}", e.benchmark),
                &fmt_f64(e.statistic),
                stars,
            ])?;
            w.write_record([
                &e.model,
                &e.series,
                &h,
                &format!("epa_p:{}", e.benchmark),
                &fmt_f64(e.p_value),
                stars,
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
