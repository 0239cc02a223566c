//! Iterated point forecasts and the expanding-origin out-of-sample exercise.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use chrono::NaiveDate;
use log::warn;
use ndarray::{s, Array2, Array3, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cross_validation::{select_lambda, WalkForwardPlan};
use crate::data_model::{lag_vector, TimePanel};
use crate::error::{Error, Result};
use crate::io::{fmt_f64, parse_date, parse_f64};
use crate::lasso_var::{fit_panel, Estimator, LassoConfig, VarModel};

/// Forecasts for steps `1..=h` (rows) from the last `p` observations.
///
/// `history` is p×K in chronological order. When the model carries
/// standardization stats the history is taken in raw units and the output
/// is returned in raw units; otherwise both are in model units.
pub fn iterate_forecast(
    model: &VarModel,
    history: ArrayView2<f64>,
    h: usize,
) -> Result<Array2<f64>> {
    let (p, k) = (model.p, model.k());
    if h < 1 {
        return Err(Error::InvalidConfig(
            "forecast horizon must be at least 1".into(),
        ));
    }
    if history.dim() != (p, k) {
        return Err(Error::DimensionMismatch(format!(
            "history is {}x{}, model needs {p}x{k}",
            history.nrows(),
            history.ncols()
        )));
    }
    let mut path = Array2::<f64>::zeros((p + h, k));
    for (i, row) in history.rows().into_iter().enumerate() {
        let scaled = match &model.stats {
            Some(st) => st.scale_row(row),
            None => row.to_owned(),
        };
        path.row_mut(i).assign(&scaled);
    }
    for t in p..p + h {
        let z = lag_vector(path.view(), t, p);
        let next = model.predict(z.view());
        path.row_mut(t).assign(&next);
    }
    let mut out = path.slice(s![p.., ..]).to_owned();
    if let Some(st) = &model.stats {
        for mut row in out.rows_mut() {
            let raw = st.unscale_row(row.view());
            row.assign(&raw);
        }
    }
    Ok(out)
}

/// How the penalty is chosen as the origin moves.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RefitPolicy {
    /// Use `LassoConfig::lambda` everywhere.
    Fixed,
    /// Cross-validate at the first origin, then hold λ fixed.
    #[default]
    CvFirstOrigin,
    /// Cross-validate at every origin.
    CvEveryOrigin,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExerciseConfig {
    pub p: usize,
    pub lasso: LassoConfig,
    pub plan: WalkForwardPlan,
    pub estimator: Estimator,
    pub start_origin: NaiveDate,
    pub end_origin: NaiveDate,
    pub horizons: usize,
    pub policy: RefitPolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OriginInfo {
    pub origin: NaiveDate,
    /// Rows of the panel used for the fit (all data up to the origin).
    pub train_len: usize,
    pub lambda: f64,
    pub converged: bool,
}

/// Point forecasts indexed by origin, horizon and series.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastSet {
    pub names: Vec<String>,
    pub origins: Vec<NaiveDate>,
    pub horizons: usize,
    /// origin × horizon × series, raw units.
    pub values: Array3<f64>,
    pub actuals: Array3<Option<f64>>,
    /// Fit metadata per origin; empty for imported sets.
    pub info: Vec<OriginInfo>,
}

impl ForecastSet {
    /// Date targeted by `(origin index, horizon)`.
    pub fn target_date(&self, origin: usize, h: usize) -> NaiveDate {
        self.origins[origin] + chrono::Days::new(h as u64)
    }

    /// `origin,horizon,series,forecast,actual`; missing actuals are empty.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["origin", "horizon", "series", "forecast", "actual"])?;
        for (o, date) in self.origins.iter().enumerate() {
            for h in 0..self.horizons {
                for (k, name) in self.names.iter().enumerate() {
                    let actual = self.actuals[[o, h, k]].map(fmt_f64).unwrap_or_default();
                    w.write_record([
                        date.format(crate::io::DATE_FORMAT).to_string(),
                        (h + 1).to_string(),
                        name.clone(),
                        fmt_f64(self.values[[o, h, k]]),
                        actual,
                    ])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the CSV layout of [`ForecastSet::write_csv`]. Every
    /// (origin, horizon, series) cell must be present exactly once.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let headers = r.headers()?.clone();
        let expected = ["origin", "horizon", "series", "forecast", "actual"];
        if headers.iter().map(str::trim).ne(expected.iter().copied()) {
            return Err(Error::Parse(format!(
                "forecast header must be {}, got {}",
                expected.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut cells: BTreeMap<(NaiveDate, usize, String), (f64, Option<f64>)> = BTreeMap::new();
        let mut names: Vec<String> = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            let ctx = format!("forecast row {}", line + 2);
            let origin = parse_date(rec.get(0).unwrap_or(""))?;
            let h: usize = rec
                .get(1)
                .unwrap_or("")
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("{ctx}: bad horizon")))?;
            if h == 0 {
                return Err(Error::Parse(format!("{ctx}: horizon must be >= 1")));
            }
            let name = rec.get(2).unwrap_or("").trim().to_string();
            if !names.contains(&name) {
                names.push(name.clone());
            }
            let value = parse_f64(rec.get(3).unwrap_or(""), &ctx)?;
            let actual = match rec.get(4).map(str::trim) {
                None | Some("") => None,
                Some(v) => Some(parse_f64(v, &ctx)?),
            };
            if cells
                .insert((origin, h, name.clone()), (value, actual))
                .is_some()
            {
                return Err(Error::Parse(format!(
                    "{ctx}: duplicate cell {origin} h={h} {name}"
                )));
            }
        }
        let mut origins: Vec<NaiveDate> = cells.keys().map(|(d, _, _)| *d).collect();
        origins.dedup();
        let horizons = cells.keys().map(|(_, h, _)| *h).max().unwrap_or(0);
        let dim = (origins.len(), horizons, names.len());
        if cells.len() != dim.0 * dim.1 * dim.2 {
            return Err(Error::Parse(format!(
                "forecast file has {} cells, expected {} origins x {} horizons x {} series",
                cells.len(),
                dim.0,
                dim.1,
                dim.2
            )));
        }
        let mut values = Array3::<f64>::zeros(dim);
        let mut actuals = Array3::<Option<f64>>::from_elem(dim, None);
        for ((d, h, name), (v, a)) in cells {
            let o = origins.binary_search(&d).expect("collected origin");
            let k = names
                .iter()
                .position(|n| *n == name)
                .expect("collected name");
            values[[o, h - 1, k]] = v;
            actuals[[o, h - 1, k]] = a;
        }
        Ok(Self {
            names,
            origins,
            horizons,
            values,
            actuals,
            info: Vec::new(),
        })
    }
}

fn fit_and_forecast(
    panel: &TimePanel,
    origin_idx: usize,
    cfg: &ExerciseConfig,
    lambda: f64,
) -> Result<(Array2<f64>, OriginInfo)> {
    let train = panel.slice_rows(0..origin_idx + 1);
    let model = fit_panel(&train, cfg.p, &cfg.lasso.with_lambda(lambda), cfg.estimator)?;
    let history = train
        .values()
        .slice(s![train.len() - cfg.p.., ..])
        .to_owned();
    let values = iterate_forecast(&model, history.view(), cfg.horizons)?;
    if !model.converged() {
        warn!(
            "fit at origin {} did not converge",
            panel.dates()[origin_idx]
        );
    }
    Ok((
        values,
        OriginInfo {
            origin: panel.dates()[origin_idx],
            train_len: train.len(),
            lambda,
            converged: model.converged(),
        },
    ))
}

fn choose_lambda(train: &TimePanel, cfg: &ExerciseConfig) -> Result<f64> {
    if cfg.estimator == Estimator::Ols {
        return Ok(0.0);
    }
    Ok(select_lambda(train, cfg.p, &cfg.lasso, &cfg.plan, cfg.estimator)?.lambda)
}

/// Re-fits on all data up to each origin (inclusive) and forecasts
/// `1..=horizons` steps ahead. Origins run daily from `start_origin` to
/// `end_origin`.
pub fn recursive_exercise(panel: &TimePanel, cfg: &ExerciseConfig) -> Result<ForecastSet> {
    cfg.lasso.validate()?;
    if cfg.horizons < 1 || cfg.p < 1 {
        return Err(Error::InvalidConfig(
            "lag order and horizon must be at least 1".into(),
        ));
    }
    if cfg.end_origin < cfg.start_origin {
        return Err(Error::InvalidConfig(format!(
            "end origin {} precedes start origin {}",
            cfg.end_origin, cfg.start_origin
        )));
    }
    let locate = |d: NaiveDate| {
        panel
            .date_index(d)
            .ok_or_else(|| Error::InsufficientData(format!("origin {d} is not in the panel")))
    };
    let first = locate(cfg.start_origin)?;
    let last = locate(cfg.end_origin)?;
    let needed = cfg.p + cfg.plan.min_train;
    if first + 1 < needed {
        return Err(Error::InsufficientData(format!(
            "origin {} leaves {} observations of history, need at least {needed}",
            cfg.start_origin,
            first + 1
        )));
    }
    let first_lambda = match cfg.policy {
        RefitPolicy::Fixed => Some(cfg.lasso.lambda),
        RefitPolicy::CvFirstOrigin => Some(choose_lambda(&panel.slice_rows(0..first + 1), cfg)?),
        RefitPolicy::CvEveryOrigin => None,
    };
    let results = (first..=last)
        .into_par_iter()
        .map(|o| {
            let lambda = match first_lambda {
                Some(l) => l,
                None => choose_lambda(&panel.slice_rows(0..o + 1), cfg)?,
            };
            fit_and_forecast(panel, o, cfg, lambda)
        })
        .collect::<Result<Vec<_>>>()?;

    let (n_o, k) = (results.len(), panel.width());
    let mut values = Array3::<f64>::zeros((n_o, cfg.horizons, k));
    let mut actuals = Array3::<Option<f64>>::from_elem((n_o, cfg.horizons, k), None);
    let mut info = Vec::with_capacity(n_o);
    let observed = panel.values();
    for (i, (v, meta)) in results.into_iter().enumerate() {
        let o = first + i;
        values.slice_mut(s![i, .., ..]).assign(&v);
        for h in 0..cfg.horizons {
            let target = o + h + 1;
            if target < panel.len() {
                for kk in 0..k {
                    actuals[[i, h, kk]] = Some(observed[[target, kk]]);
                }
            }
        }
        info.push(meta);
    }
    Ok(ForecastSet {
        names: panel.names().to_vec(),
        origins: info.iter().map(|m| m.origin).collect(),
        horizons: cfg.horizons,
        values,
        actuals,
        info,
    })
}
