//! Small dense least-squares kernel used by the unit-root regression and
//! the post-selection stage of the Granger test.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

/// Relative pivot below which a column counts as a linear combination of
/// the columns before it (one minus its R² on those columns).
const COLLINEAR_TOL: f64 = 1e-10;

/// Lower-triangular factor of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    lower: Array2<f64>,
}

impl Cholesky {
    /// Factors `gram`. On failure returns the indices of every column whose
    /// pivot collapsed relative to its diagonal entry.
    pub fn factor(gram: ArrayView2<f64>) -> Result<Self, Vec<usize>> {
        let m = gram.nrows();
        let mut lower = Array2::<f64>::zeros((m, m));
        let mut bad = Vec::new();
        for j in 0..m {
            let diag = gram[[j, j]];
            let mut pivot = diag;
            for k in 0..j {
                pivot -= lower[[j, k]] * lower[[j, k]];
            }
            if !(pivot > COLLINEAR_TOL * diag.abs()) || diag <= 0.0 {
                // Keep factoring so every offending column is reported.
                bad.push(j);
                continue;
            }
            let root = pivot.sqrt();
            lower[[j, j]] = root;
            for i in (j + 1)..m {
                let mut s = gram[[i, j]];
                for k in 0..j {
                    s -= lower[[i, k]] * lower[[j, k]];
                }
                lower[[i, j]] = s / root;
            }
        }
        if bad.is_empty() {
            Ok(Self { lower })
        } else {
            Err(bad)
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.nrows()
    }

    pub fn solve(&self, rhs: ArrayView1<f64>) -> Array1<f64> {
        let m = self.dim();
        let mut z = Array1::<f64>::zeros(m);
        for i in 0..m {
            let mut s = rhs[i];
            for k in 0..i {
                s -= self.lower[[i, k]] * z[k];
            }
            z[i] = s / self.lower[[i, i]];
        }
        let mut x = Array1::<f64>::zeros(m);
        for i in (0..m).rev() {
            let mut s = z[i];
            for k in (i + 1)..m {
                s -= self.lower[[k, i]] * x[k];
            }
            x[i] = s / self.lower[[i, i]];
        }
        x
    }

    /// Diagonal of the inverse of the factored matrix.
    pub fn inverse_diagonal(&self) -> Array1<f64> {
        let m = self.dim();
        let mut out = Array1::<f64>::zeros(m);
        let mut unit = Array1::<f64>::zeros(m);
        for j in 0..m {
            unit[j] = 1.0;
            out[j] = self.solve(unit.view())[j];
            unit[j] = 0.0;
        }
        out
    }
}

/// Ordinary least-squares fit of `y` on the columns of `design` (rows are
/// observations, no intercept added).
#[derive(Debug, Clone)]
pub struct LeastSquares {
    pub coefficients: Array1<f64>,
    pub residuals: Array1<f64>,
    pub rss: f64,
    factor: Cholesky,
}

impl LeastSquares {
    /// Classical coefficient standard errors, with `rss / (n - m)` as the
    /// error variance.
    pub fn standard_errors(&self) -> Array1<f64> {
        let n = self.residuals.len();
        let m = self.coefficients.len();
        let sigma2 = self.rss / (n.saturating_sub(m).max(1)) as f64;
        self.factor.inverse_diagonal().mapv(|v| (v * sigma2).sqrt())
    }
}

/// Solves the normal equations by Cholesky. Rank deficiency is reported as
/// the list of column indices that are linear combinations of earlier ones.
pub fn least_squares(
    design: ArrayView2<f64>,
    y: ArrayView1<f64>,
) -> Result<LeastSquares, Vec<usize>> {
    assert_eq!(design.nrows(), y.len(), "design/response length mismatch");
    let m = design.ncols();
    if m == 0 {
        let residuals = y.to_owned();
        let rss = residuals.dot(&residuals);
        return Ok(LeastSquares {
            coefficients: Array1::zeros(0),
            residuals,
            rss,
            factor: Cholesky {
                lower: Array2::zeros((0, 0)),
            },
        });
    }
    let gram = design.t().dot(&design);
    let rhs = design.t().dot(&y);
    let factor = Cholesky::factor(gram.view())?;
    let coefficients = factor.solve(rhs.view());
    let residuals = &y - &design.dot(&coefficients);
    let rss = residuals.dot(&residuals);
    Ok(LeastSquares {
        coefficients,
        residuals,
        rss,
        factor,
    })
}

/// Builds an observation-major design from selected rows of a
/// variable-major regressor matrix (as produced by lag embedding).
pub fn design_from_rows(regressors: ArrayView2<f64>, rows: &[usize]) -> Array2<f64> {
    regressors.select(Axis(0), rows).reversed_axes()
}
