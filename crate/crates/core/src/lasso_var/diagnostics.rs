use ndarray::{s, Array1};
use serde::{Deserialize, Serialize};

use super::fit::VarMoments;
use super::VarModel;
use crate::data_model::{lag_embed, LagEmbedding, TimePanel};
use crate::error::{Error, Result};
use crate::linalg::least_squares;

/// Worst violation of the optimality conditions of the penalized objective
/// at the model's coefficients.
///
/// With `g = −(2/N) Z (y − aZ)ᵀ`, an active coefficient must satisfy
/// `g_j = −λ·sign(a_j)` and an inactive one `|g_j| ≤ λ`. Models carrying
/// AR(1) parameters are checked on their whitened equations.
pub fn kkt_violation(model: &VarModel, embed: &LagEmbedding, lambda: f64) -> Result<f64> {
    model.check_embedding(embed)?;
    let moments = VarMoments::new(embed);
    let mut worst = 0.0f64;
    for k in 0..model.k() {
        let coef = model.coefficients.row(k);
        let grad = match &model.rho {
            Some(rho) => moments.equation_whitened(k, rho[k]).view().gradient(coef),
            None => moments.equation_plain(k).gradient(coef),
        };
        for (a, g) in coef.iter().zip(grad.iter()) {
            let v = if *a != 0.0 {
                (g + lambda * a.signum()).abs()
            } else {
                (g.abs() - lambda).max(0.0)
            };
            worst = worst.max(v);
        }
    }
    Ok(worst)
}

/// Bayesian information criterion per equation and in total.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BicScore {
    pub per_equation: Vec<f64>,
    pub total: f64,
    /// Some equation fits exactly (RSS = 0); its score is −∞.
    pub degenerate: bool,
}

/// `N·ln(RSS/N) + s·ln(N)`, or −∞ when `rss` is 0.
pub fn bic_value(rss: f64, n: usize, nonzeros: usize) -> f64 {
    let nf = n as f64;
    if rss <= 0.0 {
        return f64::NEG_INFINITY;
    }
    nf * (rss / nf).ln() + nonzeros as f64 * nf.ln()
}

/// Scores a fitted model on `embed` using unwhitened in-sample residuals
/// and the count of nonzero coefficients per equation.
pub fn bic_score(model: &VarModel, embed: &LagEmbedding) -> Result<BicScore> {
    let resid = model.residuals(embed)?;
    let n = embed.n();
    let nnz = model.nonzeros();
    let per_equation: Vec<f64> = resid
        .rows()
        .into_iter()
        .zip(&nnz)
        .map(|(r, s)| bic_value(r.dot(&r), n, *s))
        .collect();
    let degenerate = per_equation.iter().any(|v| v.is_infinite());
    let total = per_equation.iter().sum();
    Ok(BicScore {
        per_equation,
        total,
        degenerate,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagOrderSelection {
    /// Total BIC of the least-squares VAR for p = 1..=max_p.
    pub bic: Vec<f64>,
    pub best: usize,
}

/// Chooses the lag order by BIC of unpenalized least-squares VARs fitted on
/// a common sample (the first `max_p` observations are held back for every
/// candidate so all fits share the same targets).
pub fn select_lag_order(panel: &TimePanel, max_p: usize) -> Result<LagOrderSelection> {
    let embed = lag_embed(panel, max_p)?;
    let k = embed.k();
    let n = embed.n();
    let mut bic = Vec::with_capacity(max_p);
    for p in 1..=max_p {
        let rows = k * p;
        if rows >= n {
            return Err(Error::InsufficientData(format!(
                "lag {p} needs more than {rows} observations after trimming, have {n}"
            )));
        }
        let design = embed.z.slice(s![..rows, ..]).t().to_owned();
        let mut total = 0.0;
        for eq in 0..k {
            let y: Array1<f64> = embed.y.row(eq).to_owned();
            let fit = least_squares(design.view(), y.view()).map_err(|cols| {
                Error::Collinear(cols.iter().map(|c| embed.regressor_name(*c)).collect())
            })?;
            total += bic_value(fit.rss, n, rows);
        }
        bic.push(total);
    }
    let best = bic
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i + 1)
        .expect("max_p >= 1");
    Ok(LagOrderSelection { bic, best })
}
