//! Per-equation L1-penalized estimation of VAR(p) models.
//!
//! Each row of `[A_1, …, A_p]` is fitted independently by cyclic
//! coordinate descent on `(1/N)‖y_k − a_k Z‖² + λ‖a_k‖₁`; summing the rows
//! gives the joint objective, so the decomposition loses nothing. The same
//! engine gives the unpenalized fit at `λ = 0` and, after an AR(1)
//! quasi-difference of every equation, the feasible-GLS variant.

mod config;
mod diagnostics;
mod fit;
mod model;
mod solver;

pub use config::{Estimator, GridSpec, LassoConfig};
pub use diagnostics::{
    bic_score, bic_value, kkt_violation, select_lag_order, BicScore, LagOrderSelection,
};
pub use fit::{
    fit_fgls_lasso_var, fit_lasso_var, fit_lasso_var_traced, fit_ols_var, fit_panel, fit_path,
    fit_var, lag1_autocorrelation, lambda_max, objective, whiten, FglsState, RHO_CLIP,
};
pub use model::{SolverInfo, VarModel};
pub use solver::{coordinate_descent, soft_threshold, CdOutcome, Moments};
