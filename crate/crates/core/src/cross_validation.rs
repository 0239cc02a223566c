//! Anchored walk-forward cross-validation of the LASSO penalty.
//!
//! Every fold trains on a prefix of the sample that starts at the first
//! observation and validates on the block right after it. Training data
//! are standardized with their own statistics; validation rows reuse them.

use std::io::Write;
use std::ops::Range;

use log::warn;
use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data_model::{
    lag_embed, lag_vector, standardization_stats, LagEmbedding, StandardizationStats, TimePanel,
};
use crate::error::{Error, Result};
use crate::io::fmt_f64;
use crate::lasso_var::{fit_path, lambda_max, Estimator, LassoConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WalkForwardPlan {
    pub n_splits: usize,
    pub test_size: usize,
    pub min_train: usize,
}

impl WalkForwardPlan {
    pub fn new(n_splits: usize, test_size: usize, min_train: usize) -> Self {
        Self {
            n_splits,
            test_size,
            min_train,
        }
    }

    /// Observations the plan consumes.
    pub fn span(&self) -> usize {
        self.min_train + self.n_splits * self.test_size
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Range<usize>,
    pub validation: Range<usize>,
}

/// Split `i` trains on `[0, min_train + i·test_size)` and validates on the
/// following `test_size` observations.
pub fn make_splits(t: usize, plan: &WalkForwardPlan) -> Result<Vec<Split>> {
    if plan.n_splits == 0 || plan.test_size == 0 || plan.min_train == 0 {
        return Err(Error::InvalidConfig(format!(
            "walk-forward plan needs positive n_splits, test_size and min_train, got {plan:?}"
        )));
    }
    if plan.span() > t {
        return Err(Error::InsufficientData(format!(
            "plan needs {} observations (min_train {} + {} splits x {}), sample has {t}",
            plan.span(),
            plan.min_train,
            plan.n_splits,
            plan.test_size
        )));
    }
    Ok((0..plan.n_splits)
        .map(|i| {
            let end = plan.min_train + i * plan.test_size;
            Split {
                train: 0..end,
                validation: end..end + plan.test_size,
            }
        })
        .collect())
}

/// Per-fold bookkeeping kept for leakage audits.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldReport {
    pub split: Split,
    pub stats: StandardizationStats,
    pub lambda_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LambdaSelection {
    pub lambda: f64,
    /// Descending penalty grid.
    pub grid: Vec<f64>,
    /// grid × fold validation loss; NaN where the fit did not converge.
    pub losses: Array2<f64>,
    /// Mean loss across folds per grid point; NaN for excluded points.
    pub mean_loss: Vec<f64>,
    pub excluded: Vec<f64>,
    pub folds: Vec<FoldReport>,
}

impl LambdaSelection {
    /// `lambda,fold,loss` rows (fold is 1-based; excluded cells have an
    /// empty loss).
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["lambda", "fold", "loss"])?;
        for (i, lam) in self.grid.iter().enumerate() {
            for f in 0..self.losses.ncols() {
                let loss = self.losses[[i, f]];
                let loss = if loss.is_nan() {
                    String::new()
                } else {
                    fmt_f64(loss)
                };
                w.write_record([fmt_f64(*lam), (f + 1).to_string(), loss])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn summary_line(&self) -> String {
        let best = self
            .grid
            .iter()
            .position(|l| *l == self.lambda)
            .map(|i| self.mean_loss[i])
            .unwrap_or(f64::NAN);
        format!(
            "selected lambda={} mean_loss={} grid_points={} excluded={}",
            fmt_f64(self.lambda),
            fmt_f64(best),
            self.grid.len(),
            self.excluded.len()
        )
    }
}

struct PreparedFold {
    split: Split,
    stats: StandardizationStats,
    /// Rows `[0, validation.end)` in the fold's standardized units.
    scaled: Array2<f64>,
    embed: LagEmbedding,
    lambda_max: f64,
}

fn prepare_fold(panel: &TimePanel, p: usize, split: Split) -> Result<PreparedFold> {
    if split.train.len() <= p + 1 {
        return Err(Error::InsufficientData(format!(
            "training window of {} rows cannot support lag {p}",
            split.train.len()
        )));
    }
    let train = panel.slice_rows(split.train.clone());
    let stats = standardization_stats(&train)?;
    let visible = panel.slice_rows(0..split.validation.end);
    let scaled = stats.apply(&visible)?.into_values();
    let train_scaled =
        train.with_values(scaled.slice(ndarray::s![..split.train.end, ..]).to_owned())?;
    let embed = lag_embed(&train_scaled, p)?;
    Ok(PreparedFold {
        lambda_max: lambda_max(&embed),
        embed,
        split,
        stats,
        scaled,
    })
}

/// Mean over validation targets of the squared 1-step error summed over
/// all series, per grid point. Non-converged fits yield NaN.
fn fold_losses(
    fold: &PreparedFold,
    p: usize,
    grid: &[f64],
    cfg: &LassoConfig,
    estimator: Estimator,
) -> Result<Vec<f64>> {
    let models = fit_path(&fold.embed, grid, cfg, estimator)?;
    let n_val = fold.split.validation.len() as f64;
    Ok(models
        .iter()
        .map(|m| {
            if !m.converged() {
                return f64::NAN;
            }
            let total: f64 = fold
                .split
                .validation
                .clone()
                .map(|t| {
                    let z = lag_vector(fold.scaled.view(), t, p);
                    let err = &fold.scaled.row(t) - &m.predict(z.view());
                    err.dot(&err)
                })
                .sum();
            total / n_val
        })
        .collect())
}

/// Chooses λ on the grid built from `cfg.grid`, topped by the largest
/// fold-level λ_max.
pub fn select_lambda(
    panel: &TimePanel,
    p: usize,
    cfg: &LassoConfig,
    plan: &WalkForwardPlan,
    estimator: Estimator,
) -> Result<LambdaSelection> {
    select(panel, p, cfg, plan, estimator, None)
}

/// [`select_lambda`] over a caller-supplied grid.
pub fn select_lambda_on_grid(
    panel: &TimePanel,
    p: usize,
    cfg: &LassoConfig,
    plan: &WalkForwardPlan,
    estimator: Estimator,
    grid: &[f64],
) -> Result<LambdaSelection> {
    if grid.is_empty() {
        return Err(Error::InvalidConfig("empty penalty grid".into()));
    }
    select(panel, p, cfg, plan, estimator, Some(grid))
}

fn select(
    panel: &TimePanel,
    p: usize,
    cfg: &LassoConfig,
    plan: &WalkForwardPlan,
    estimator: Estimator,
    grid: Option<&[f64]>,
) -> Result<LambdaSelection> {
    cfg.validate()?;
    if p == 0 {
        return Err(Error::InvalidConfig("lag order must be at least 1".into()));
    }
    let splits = make_splits(panel.len(), plan)?;
    let folds = splits
        .into_par_iter()
        .map(|s| prepare_fold(panel, p, s))
        .collect::<Result<Vec<_>>>()?;
    let mut grid: Vec<f64> = match (estimator, grid) {
        (Estimator::Ols, _) => vec![0.0],
        (_, Some(g)) => g.to_vec(),
        (_, None) => {
            let top = folds.iter().fold(0.0f64, |m, f| m.max(f.lambda_max));
            cfg.grid.lambdas(top)
        }
    };
    grid.sort_by(|a, b| b.total_cmp(a));
    grid.dedup();

    let per_fold = folds
        .par_iter()
        .map(|f| fold_losses(f, p, &grid, cfg, estimator))
        .collect::<Result<Vec<_>>>()?;
    let mut losses = Array2::<f64>::zeros((grid.len(), folds.len()));
    for (f, col) in per_fold.iter().enumerate() {
        for (i, v) in col.iter().enumerate() {
            losses[[i, f]] = *v;
        }
    }

    let mut mean_loss = Vec::with_capacity(grid.len());
    let mut excluded = Vec::new();
    for (i, lam) in grid.iter().enumerate() {
        let row = losses.row(i);
        if row.iter().any(|v| v.is_nan()) {
            warn!("penalty {lam} excluded: fit did not converge in every fold");
            excluded.push(*lam);
            mean_loss.push(f64::NAN);
        } else {
            mean_loss.push(row.sum() / row.len() as f64);
        }
    }
    // descending grid: a strict improvement is needed to move to a smaller λ
    let mut best: Option<usize> = None;
    for (i, v) in mean_loss.iter().enumerate() {
        if v.is_nan() {
            continue;
        }
        if best.is_none_or(|b| *v < mean_loss[b]) {
            best = Some(i);
        }
    }
    let best = best.ok_or(Error::NoConvergedCandidate)?;
    Ok(LambdaSelection {
        lambda: grid[best],
        grid,
        losses,
        mean_loss,
        excluded,
        folds: folds
            .into_iter()
            .map(|f| FoldReport {
                split: f.split,
                stats: f.stats,
                lambda_max: f.lambda_max,
            })
            .collect(),
    })
}
