//! Sparse high-dimensional vector autoregressions.
//!
//! The crate estimates VAR(p) models equation by equation with an L1
//! penalty (plain least squares at zero penalty, and a feasible-GLS variant
//! that whitens AR(1) error autocorrelation), tunes the penalty by anchored
//! walk-forward validation, produces recursive multi-step forecasts,
//! scores them with RMSE / directional accuracy / equal-predictive-accuracy
//! tests, and runs post-double-selection Granger-causality tests.
//!
//! Data preparation helpers cover log returns, sentiment compound-score
//! aggregation and reconstruction of daily search-interest indexes from
//! monthly chunks.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` deliberately also rejects NaN

pub mod cross_validation;
pub mod data_model;
pub mod error;
pub mod evaluation;
pub mod forecasting;
pub mod granger;
pub mod ingestion;
pub mod io;
pub mod lasso_var;
pub mod linalg;
pub mod synthetic;

pub use data_model::{LagEmbedding, StandardizationStats, TimePanel};
pub use error::{Error, Result};
pub use lasso_var::{Estimator, LassoConfig, VarModel};
