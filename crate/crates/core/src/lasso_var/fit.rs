use ndarray::{s, Array1, Array2, ArrayView1, Axis};
use rayon::prelude::*;

use super::solver::{coordinate_descent, CdOutcome, Moments};
use super::{Estimator, LassoConfig, SolverInfo, VarModel};
use crate::data_model::{lag_embed, standardize, LagEmbedding, TimePanel};
use crate::error::{Error, Result};
use crate::linalg::Cholesky;

/// Largest admissible AR(1) error coefficient magnitude.
pub const RHO_CLIP: f64 = 0.99;

/// Moments of a lag embedding, scaled by 1/N.
///
/// Besides the plain normal-equation pieces this keeps first-order cross
/// moments and the boundary observations, which is all that is needed to
/// form the normal equations after an AR(1) quasi-difference with any rho.
#[derive(Debug, Clone)]
pub(crate) struct VarMoments {
    n: usize,
    gram: Array2<f64>,
    q: Array2<f64>,
    yy: Array1<f64>,
    /// Σ_{τ≥1} z_τ z_{τ−1}ᵀ
    zz_lag: Array2<f64>,
    /// Σ_{τ≥1} z_τ y_{τ−1}ᵀ (m×K)
    zy_lag: Array2<f64>,
    /// Σ_{τ≥1} z_{τ−1} y_τᵀ (m×K)
    zlag_y: Array2<f64>,
    /// Σ_{τ≥1} y_{k,τ} y_{k,τ−1}
    yy_lag: Array1<f64>,
    z_first: Array1<f64>,
    z_last: Array1<f64>,
    y_first: Array1<f64>,
    y_last: Array1<f64>,
}

/// Owned moments of one (possibly whitened) equation.
#[derive(Debug, Clone)]
pub(crate) struct EquationMoments {
    pub gram: Array2<f64>,
    pub q: Array1<f64>,
    pub yy: f64,
}

impl EquationMoments {
    pub fn view(&self) -> Moments<'_> {
        Moments {
            gram: self.gram.view(),
            q: self.q.view(),
            yy: self.yy,
        }
    }
}

impl VarMoments {
    pub fn new(embed: &LagEmbedding) -> Self {
        let n = embed.n();
        let nf = n as f64;
        let z = &embed.z;
        let y = &embed.y;
        let gram = z.dot(&z.t()) / nf;
        let q = z.dot(&y.t()) / nf;
        let yy = y.map_axis(Axis(1), |r| r.dot(&r)) / nf;
        let (zz_lag, zy_lag, zlag_y, yy_lag) = if n > 1 {
            let z_cur = z.slice(s![.., 1..]);
            let z_prev = z.slice(s![.., ..n - 1]);
            let y_cur = y.slice(s![.., 1..]);
            let y_prev = y.slice(s![.., ..n - 1]);
            let yy_lag = Array1::from_iter(
                y_cur
                    .rows()
                    .into_iter()
                    .zip(y_prev.rows())
                    .map(|(a, b)| a.dot(&b)),
            );
            (
                z_cur.dot(&z_prev.t()) / nf,
                z_cur.dot(&y_prev.t()) / nf,
                z_prev.dot(&y_cur.t()) / nf,
                yy_lag / nf,
            )
        } else {
            let m = z.nrows();
            let k = y.nrows();
            (
                Array2::zeros((m, m)),
                Array2::zeros((m, k)),
                Array2::zeros((m, k)),
                Array1::zeros(k),
            )
        };
        VarMoments {
            n,
            gram,
            q,
            yy,
            zz_lag,
            zy_lag,
            zlag_y,
            yy_lag,
            z_first: z.column(0).to_owned(),
            z_last: z.column(n - 1).to_owned(),
            y_first: y.column(0).to_owned(),
            y_last: y.column(n - 1).to_owned(),
        }
    }

    pub fn equation_plain(&self, k: usize) -> Moments<'_> {
        Moments {
            gram: self.gram.view(),
            q: self.q.column(k),
            yy: self.yy[k],
        }
    }

    /// Normal equations of equation `k` after the Prais-Winsten transform
    /// `w_0 = √(1−ρ²)x_0`, `w_τ = x_τ − ρx_{τ−1}` applied to target and
    /// regressors alike.
    pub fn equation_whitened(&self, k: usize, rho: f64) -> EquationMoments {
        let nf = self.n as f64;
        let r2 = rho * rho;
        let mut gram = &self.gram * (1.0 + r2);
        gram -= &((&self.zz_lag + &self.zz_lag.t()) * rho);
        let zf = self.z_first.view().insert_axis(Axis(1));
        let zl = self.z_last.view().insert_axis(Axis(1));
        gram -= &((zf.dot(&zf.t()) + zl.dot(&zl.t())) * (r2 / nf));

        let mut q = &self.q.column(k) * (1.0 + r2);
        q -= &((&self.zy_lag.column(k) + &self.zlag_y.column(k)) * rho);
        q -= &((&self.z_first * self.y_first[k] + &self.z_last * self.y_last[k]) * (r2 / nf));

        let yy = self.yy[k] * (1.0 + r2)
            - 2.0 * rho * self.yy_lag[k]
            - r2 * (self.y_first[k].powi(2) + self.y_last[k].powi(2)) / nf;
        EquationMoments { gram, q, yy }
    }
}

/// Prais-Winsten quasi-difference of a series.
pub fn whiten(series: ArrayView1<f64>, rho: f64) -> Array1<f64> {
    let n = series.len();
    let mut out = Array1::<f64>::zeros(n);
    if n == 0 {
        return out;
    }
    out[0] = (1.0 - rho * rho).sqrt() * series[0];
    for t in 1..n {
        out[t] = series[t] - rho * series[t - 1];
    }
    out
}

/// Lag-1 sample autocorrelation `Σ u_τ u_{τ−1} / Σ u_τ²` (0 for a null series).
pub fn lag1_autocorrelation(series: ArrayView1<f64>) -> f64 {
    let denom = series.dot(&series);
    if denom == 0.0 || series.len() < 2 {
        return 0.0;
    }
    let n = series.len();
    series.slice(s![1..]).dot(&series.slice(s![..n - 1])) / denom
}

/// AR(1) error structure estimated for the FGLS variant.
#[derive(Debug, Clone, PartialEq)]
pub struct FglsState {
    pub rho: Vec<f64>,
}

impl FglsState {
    /// Per-equation lag-1 autocorrelation of residual rows, clipped to
    /// `|rho| ≤ 0.99`.
    pub fn from_residuals(residuals: &Array2<f64>) -> Self {
        let rho = residuals
            .rows()
            .into_iter()
            .map(|r| lag1_autocorrelation(r).clamp(-RHO_CLIP, RHO_CLIP))
            .collect();
        FglsState { rho }
    }

    /// Applies equation `k`'s quasi-difference to a series.
    pub fn whiten(&self, k: usize, series: ArrayView1<f64>) -> Array1<f64> {
        whiten(series, self.rho[k])
    }

    /// Whitened residual rows (the estimated innovations).
    pub fn whiten_rows(&self, rows: &Array2<f64>) -> Array2<f64> {
        let mut out = rows.clone();
        for (k, mut row) in out.rows_mut().into_iter().enumerate() {
            let w = whiten(rows.row(k), self.rho[k]);
            row.assign(&w);
        }
        out
    }
}

/// Smallest penalty at which every equation is all zero:
/// `max |(2/N) · Y Zᵀ|`.
pub fn lambda_max(embed: &LagEmbedding) -> f64 {
    let n = embed.n() as f64;
    embed
        .y
        .dot(&embed.z.t())
        .iter()
        .fold(0.0f64, |m, v| m.max((2.0 * v / n).abs()))
}

fn check_inputs(embed: &LagEmbedding, cfg: &LassoConfig) -> Result<()> {
    cfg.validate()?;
    if embed.n() == 0 {
        return Err(Error::InsufficientData("empty embedding".into()));
    }
    if embed.z.iter().all(|v| *v == 0.0) {
        return Err(Error::InsufficientData(
            "regressor matrix is identically zero".into(),
        ));
    }
    Ok(())
}

fn covariance(rows: &Array2<f64>) -> Array2<f64> {
    let n = rows.ncols().max(1) as f64;
    let mut cov = rows.dot(&rows.t()) / n;
    // exact symmetry
    let k = cov.nrows();
    for i in 0..k {
        for j in 0..i {
            let v = 0.5 * (cov[[i, j]] + cov[[j, i]]);
            cov[[i, j]] = v;
            cov[[j, i]] = v;
        }
    }
    cov
}

struct Assembled {
    coefficients: Array2<f64>,
    sweeps: usize,
    converged: bool,
}

fn assemble(outcomes: Vec<CdOutcome>, m: usize) -> Assembled {
    let k = outcomes.len();
    let mut coefficients = Array2::<f64>::zeros((k, m));
    let mut sweeps = 0;
    let mut converged = true;
    for (i, o) in outcomes.into_iter().enumerate() {
        coefficients.row_mut(i).assign(&o.coef);
        sweeps = sweeps.max(o.sweeps);
        converged &= o.converged;
    }
    Assembled {
        coefficients,
        sweeps,
        converged,
    }
}

fn homoskedastic_model(
    embed: &LagEmbedding,
    a: Assembled,
    lambda: f64,
    estimator: Estimator,
) -> VarModel {
    let resid = &embed.y - &a.coefficients.dot(&embed.z);
    VarModel {
        p: embed.p,
        names: embed.names.clone(),
        sigma_u: covariance(&resid),
        coefficients: a.coefficients,
        rho: None,
        stats: None,
        solver: SolverInfo {
            estimator,
            lambda,
            sweeps: a.sweeps,
            converged: a.converged,
        },
    }
}

/// Second FGLS stage: estimate rho from the stage-one residuals, whiten
/// each equation and refit from the stage-one coefficients.
fn fgls_stage(
    embed: &LagEmbedding,
    moments: &VarMoments,
    stage_one: &VarModel,
    cfg: &LassoConfig,
    lambda: f64,
) -> VarModel {
    let resid = &embed.y - &stage_one.coefficients.dot(&embed.z);
    let state = FglsState::from_residuals(&resid);
    let outcomes: Vec<CdOutcome> = (0..embed.k())
        .into_par_iter()
        .map(|k| {
            let em = moments.equation_whitened(k, state.rho[k]);
            coordinate_descent(
                &em.view(),
                lambda,
                stage_one.coefficients.row(k).to_owned(),
                cfg.tol,
                cfg.max_sweeps,
                None,
            )
        })
        .collect();
    let a = assemble(outcomes, embed.z.nrows());
    let innovations = state.whiten_rows(&(&embed.y - &a.coefficients.dot(&embed.z)));
    VarModel {
        p: embed.p,
        names: embed.names.clone(),
        sigma_u: covariance(&innovations),
        coefficients: a.coefficients,
        rho: Some(state.rho),
        stats: None,
        solver: SolverInfo {
            estimator: Estimator::FglsLasso,
            lambda,
            sweeps: a.sweeps.max(stage_one.solver.sweeps),
            converged: a.converged && stage_one.solver.converged,
        },
    }
}

/// Unpenalized fit solved directly from the normal equations.
fn least_squares_model(embed: &LagEmbedding, moments: &VarMoments) -> Result<VarModel> {
    let chol = Cholesky::factor(moments.gram.view()).map_err(|cols| {
        Error::Collinear(cols.iter().map(|c| embed.regressor_name(*c)).collect())
    })?;
    let mut coefficients = Array2::<f64>::zeros((embed.k(), embed.z.nrows()));
    for (eq, mut row) in coefficients.rows_mut().into_iter().enumerate() {
        row.assign(&chol.solve(moments.q.column(eq)));
    }
    let a = Assembled {
        coefficients,
        sweeps: 0,
        converged: true,
    };
    Ok(homoskedastic_model(embed, a, 0.0, Estimator::Ols))
}

/// Homoskedastic LASSO-VAR at `cfg.lambda`, one equation at a time.
pub fn fit_lasso_var(embed: &LagEmbedding, cfg: &LassoConfig) -> Result<VarModel> {
    fit_var(embed, cfg, Estimator::Lasso)
}

/// Least-squares VAR (the penalty in `cfg` is ignored).
pub fn fit_ols_var(embed: &LagEmbedding, cfg: &LassoConfig) -> Result<VarModel> {
    fit_var(embed, cfg, Estimator::Ols)
}

/// Two-stage FGLS LASSO-VAR with per-equation AR(1) errors.
pub fn fit_fgls_lasso_var(embed: &LagEmbedding, cfg: &LassoConfig) -> Result<VarModel> {
    fit_var(embed, cfg, Estimator::FglsLasso)
}

pub fn fit_var(embed: &LagEmbedding, cfg: &LassoConfig, estimator: Estimator) -> Result<VarModel> {
    let lambda = match estimator {
        Estimator::Ols => 0.0,
        _ => cfg.lambda,
    };
    let mut path = fit_path(embed, &[lambda], cfg, estimator)?;
    Ok(path.pop().expect("one model per lambda"))
}

/// Fits every penalty in `lambdas` (any order; warm starts follow the
/// given order) and returns one model per entry.
pub fn fit_path(
    embed: &LagEmbedding,
    lambdas: &[f64],
    cfg: &LassoConfig,
    estimator: Estimator,
) -> Result<Vec<VarModel>> {
    check_inputs(embed, cfg)?;
    if let Some(bad) = lambdas.iter().find(|l| !(**l >= 0.0) || !l.is_finite()) {
        return Err(Error::InvalidConfig(format!("invalid penalty {bad}")));
    }
    let moments = VarMoments::new(embed);
    let m = embed.z.nrows();
    let k = embed.k();
    if estimator == Estimator::Ols {
        let model = least_squares_model(embed, &moments)?;
        return Ok(vec![model; lambdas.len()]);
    }
    // per equation: sequential warm-started path
    let per_equation: Vec<Vec<CdOutcome>> = (0..k)
        .into_par_iter()
        .map(|eq| {
            let mo = moments.equation_plain(eq);
            let mut start = Array1::<f64>::zeros(m);
            lambdas
                .iter()
                .map(|&lam| {
                    let out =
                        coordinate_descent(&mo, lam, start.clone(), cfg.tol, cfg.max_sweeps, None);
                    start = out.coef.clone();
                    out
                })
                .collect()
        })
        .collect();
    let mut per_lambda: Vec<Vec<CdOutcome>> =
        (0..lambdas.len()).map(|_| Vec::with_capacity(k)).collect();
    for eq_path in per_equation {
        for (i, o) in eq_path.into_iter().enumerate() {
            per_lambda[i].push(o);
        }
    }
    let models = per_lambda
        .into_iter()
        .zip(lambdas)
        .map(|(outs, &lam)| {
            let stage_one = homoskedastic_model(embed, assemble(outs, m), lam, Estimator::Lasso);
            if estimator == Estimator::FglsLasso {
                fgls_stage(embed, &moments, &stage_one, cfg, lam)
            } else {
                stage_one
            }
        })
        .collect();
    Ok(models)
}

/// Homoskedastic fit that also returns the objective value after every
/// sweep, per equation.
pub fn fit_lasso_var_traced(
    embed: &LagEmbedding,
    cfg: &LassoConfig,
) -> Result<(VarModel, Vec<Vec<f64>>)> {
    check_inputs(embed, cfg)?;
    let moments = VarMoments::new(embed);
    let m = embed.z.nrows();
    let results: Vec<(CdOutcome, Vec<f64>)> = (0..embed.k())
        .into_par_iter()
        .map(|eq| {
            let mut trace = Vec::new();
            let out = coordinate_descent(
                &moments.equation_plain(eq),
                cfg.lambda,
                Array1::zeros(m),
                cfg.tol,
                cfg.max_sweeps,
                Some(&mut trace),
            );
            (out, trace)
        })
        .collect();
    let (outs, traces): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let model = homoskedastic_model(embed, assemble(outs, m), cfg.lambda, Estimator::Lasso);
    Ok((model, traces))
}

/// Value of the penalized objective `(1/N)‖AZ − Y‖² + λ‖A‖₁` (summed over
/// equations) at `coefficients`.
pub fn objective(embed: &LagEmbedding, coefficients: &Array2<f64>, lambda: f64) -> f64 {
    let resid = &embed.y - &coefficients.dot(&embed.z);
    let n = embed.n() as f64;
    resid.iter().map(|v| v * v).sum::<f64>() / n
        + lambda * coefficients.iter().map(|v| v.abs()).sum::<f64>()
}

/// Standardizes `panel`, embeds it at lag `p`, fits, and attaches the
/// standardization so the model can forecast in raw units.
pub fn fit_panel(
    panel: &TimePanel,
    p: usize,
    cfg: &LassoConfig,
    estimator: Estimator,
) -> Result<VarModel> {
    let (std_panel, stats) = standardize(panel)?;
    let embed = lag_embed(&std_panel, p)?;
    let mut model = fit_var(&embed, cfg, estimator)?;
    model.stats = Some(stats);
    Ok(model)
}
