use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Log-spaced penalty grid running from the data-driven `lambda_max` down
/// to `ratio * lambda_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n_points: usize,
    pub ratio: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            n_points: 100,
            ratio: 1e-4,
        }
    }
}

impl GridSpec {
    /// Descending grid; a single point grid is just `lambda_max`.
    pub fn lambdas(&self, lambda_max: f64) -> Vec<f64> {
        if self.n_points <= 1 {
            return vec![lambda_max];
        }
        let step = self.ratio.ln() / (self.n_points - 1) as f64;
        (0..self.n_points)
            .map(|i| {
                if i == 0 {
                    lambda_max
                } else {
                    lambda_max * (step * i as f64).exp()
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LassoConfig {
    pub lambda: f64,
    /// Sweeps stop once no coefficient moves by more than this.
    pub tol: f64,
    pub max_sweeps: usize,
    pub grid: GridSpec,
}

impl Default for LassoConfig {
    fn default() -> Self {
        Self {
            lambda: 0.0,
            tol: 1e-8,
            max_sweeps: 100_000,
            grid: GridSpec::default(),
        }
    }
}

impl LassoConfig {
    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            problems.push(format!(
                "lambda must be finite and >= 0, got {}",
                self.lambda
            ));
        }
        if !(self.tol > 0.0) {
            problems.push(format!("tol must be > 0, got {}", self.tol));
        }
        if self.max_sweeps == 0 {
            problems.push("max_sweeps must be >= 1".to_string());
        }
        if !(self.grid.ratio > 0.0 && self.grid.ratio < 1.0) {
            problems.push(format!(
                "grid ratio must be in (0, 1), got {}",
                self.grid.ratio
            ));
        }
        if self.grid.n_points == 0 {
            problems.push("grid needs at least one point".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(problems.join("; ")))
        }
    }
}

/// Which member of the LASSO-VAR family to fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    /// Unpenalized least squares (penalty forced to 0).
    Ols,
    /// Penalized least squares with homoskedastic errors.
    Lasso,
    /// Penalized feasible GLS with per-equation AR(1) errors.
    FglsLasso,
}

impl Estimator {
    pub fn as_str(&self) -> &'static str {
        match self {
            Estimator::Ols => "ols",
            Estimator::Lasso => "lasso",
            Estimator::FglsLasso => "fgls-lasso",
        }
    }
}

impl std::str::FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ols" => Ok(Estimator::Ols),
            "lasso" => Ok(Estimator::Lasso),
            "fgls-lasso" | "fgls" => Ok(Estimator::FglsLasso),
            other => Err(Error::InvalidConfig(format!(
                "unknown estimator '{other}' (expected ols, lasso or fgls-lasso)"
            ))),
        }
    }
}

impl std::fmt::Display for Estimator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}
