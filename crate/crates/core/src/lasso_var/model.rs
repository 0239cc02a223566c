use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use super::Estimator;
use crate::data_model::{LagEmbedding, StandardizationStats};
use crate::error::{Error, Result};

/// How the coefficients were obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverInfo {
    pub estimator: Estimator,
    pub lambda: f64,
    /// Largest sweep count over all equations (and both FGLS stages).
    pub sweeps: usize,
    pub converged: bool,
}

/// A fitted VAR(p) in standardized units.
///
/// `coefficients` is the K×(Kp) block `[A_1, …, A_p]`; row `k` is equation
/// `k`. `sigma_u` is the in-sample residual covariance (for the FGLS
/// variant, of the whitened innovations). `stats`, when present, maps raw
/// observations to the units the model was fitted in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelDocument", into = "ModelDocument")]
pub struct VarModel {
    pub p: usize,
    pub names: Vec<String>,
    pub coefficients: Array2<f64>,
    pub sigma_u: Array2<f64>,
    pub rho: Option<Vec<f64>>,
    pub stats: Option<StandardizationStats>,
    pub solver: SolverInfo,
}

impl VarModel {
    pub fn k(&self) -> usize {
        self.coefficients.nrows()
    }

    /// Coefficient matrix `A_lag` (1-based lag).
    pub fn lag_block(&self, lag: usize) -> ArrayView2<'_, f64> {
        let k = self.k();
        self.coefficients
            .slice(ndarray::s![.., (lag - 1) * k..lag * k])
    }

    pub fn converged(&self) -> bool {
        self.solver.converged
    }

    /// Number of nonzero coefficients per equation.
    pub fn nonzeros(&self) -> Vec<usize> {
        self.coefficients
            .rows()
            .into_iter()
            .map(|r| r.iter().filter(|v| **v != 0.0).count())
            .collect()
    }

    pub fn support(&self) -> Array2<bool> {
        self.coefficients.mapv(|v| v != 0.0)
    }

    pub fn l1_norm(&self) -> f64 {
        self.coefficients.iter().map(|v| v.abs()).sum()
    }

    /// One-step prediction `A · z` from a stacked lag vector.
    pub fn predict(&self, z: ArrayView1<f64>) -> Array1<f64> {
        self.coefficients.dot(&z)
    }

    /// In-sample residuals `Y − AZ` on an embedding.
    pub fn residuals(&self, embed: &LagEmbedding) -> Result<Array2<f64>> {
        self.check_embedding(embed)?;
        Ok(&embed.y - &self.coefficients.dot(&embed.z))
    }

    pub(crate) fn check_embedding(&self, embed: &LagEmbedding) -> Result<()> {
        if embed.k() != self.k()
            || embed.p != self.p
            || embed.z.nrows() != self.coefficients.ncols()
        {
            return Err(Error::DimensionMismatch(format!(
                "model is K={} p={}, embedding is K={} p={}",
                self.k(),
                self.p,
                embed.k(),
                embed.p
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// On-disk layout: matrices as row-major nested arrays.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct ModelDocument {
    p: usize,
    names: Vec<String>,
    coefficients: Vec<Vec<f64>>,
    sigma_u: Vec<Vec<f64>>,
    rho: Option<Vec<f64>>,
    stats: Option<StandardizationStats>,
    solver: SolverInfo,
}

fn rows_of(m: &Array2<f64>) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn matrix_from(rows: Vec<Vec<f64>>, ncols: usize, what: &str) -> Result<Array2<f64>> {
    let nrows = rows.len();
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::DimensionMismatch(format!("ragged {what} rows")));
    }
    Array2::from_shape_vec((nrows, ncols), rows.into_iter().flatten().collect())
        .map_err(|e| Error::DimensionMismatch(e.to_string()))
}

impl From<VarModel> for ModelDocument {
    fn from(m: VarModel) -> Self {
        ModelDocument {
            p: m.p,
            names: m.names,
            coefficients: rows_of(&m.coefficients),
            sigma_u: rows_of(&m.sigma_u),
            rho: m.rho,
            stats: m.stats,
            solver: m.solver,
        }
    }
}

impl TryFrom<ModelDocument> for VarModel {
    type Error = Error;

    fn try_from(d: ModelDocument) -> Result<Self> {
        let k = d.names.len();
        if d.p == 0 {
            return Err(Error::InvalidSpec("lag order 0 in model file".into()));
        }
        if d.coefficients.len() != k {
            return Err(Error::DimensionMismatch(format!(
                "{} coefficient rows for {k} series",
                d.coefficients.len()
            )));
        }
        let coefficients = matrix_from(d.coefficients, k * d.p, "coefficient")?;
        if d.sigma_u.len() != k {
            return Err(Error::DimensionMismatch("sigma_u must be K×K".into()));
        }
        let sigma_u = matrix_from(d.sigma_u, k, "sigma_u")?;
        if let Some(r) = &d.rho {
            if r.len() != k || r.iter().any(|v| !(v.abs() < 1.0)) {
                return Err(Error::InvalidSpec(
                    "rho must hold K values in (-1, 1)".into(),
                ));
            }
        }
        if let Some(s) = &d.stats {
            if s.means.len() != k || s.sds.len() != k {
                return Err(Error::DimensionMismatch(
                    "stats width differs from K".into(),
                ));
            }
        }
        Ok(VarModel {
            p: d.p,
            names: d.names,
            coefficients,
            sigma_u,
            rho: d.rho,
            stats: d.stats,
            solver: d.solver,
        })
    }
}
