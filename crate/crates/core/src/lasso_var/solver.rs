//! Cyclic coordinate descent for a single equation of the penalized VAR.
//!
//! One equation with target row `y` (length N) and regressors `Z` (m×N)
//! minimizes
//!
//! ```text
//! f(a) = (1/N)‖y − aZ‖² + λ‖a‖₁
//!      = yy − 2·aᵀq + aᵀGa + λ‖a‖₁
//! ```
//!
//! with `G = ZZᵀ/N`, `q = Zyᵀ/N` and `yy = yyᵀ/N`. Working from these
//! moments makes a coordinate update O(1) plus an O(m) refresh of `Ga`
//! when the coordinate actually moves.

use ndarray::{Array1, ArrayView1, ArrayView2};

/// `sign(z) · max(|z| − gamma, 0)`.
pub fn soft_threshold(z: f64, gamma: f64) -> f64 {
    debug_assert!(gamma >= 0.0);
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

/// Sufficient statistics of one least-squares equation.
#[derive(Debug, Clone, Copy)]
pub struct Moments<'a> {
    pub gram: ArrayView2<'a, f64>,
    pub q: ArrayView1<'a, f64>,
    pub yy: f64,
}

impl Moments<'_> {
    /// Penalized objective at `coef`.
    pub fn objective(&self, coef: ArrayView1<f64>, lambda: f64) -> f64 {
        let ga = self.gram.dot(&coef);
        self.objective_with(coef, ga.view(), lambda)
    }

    fn objective_with(&self, coef: ArrayView1<f64>, ga: ArrayView1<f64>, lambda: f64) -> f64 {
        let l1: f64 = coef.iter().map(|a| a.abs()).sum();
        self.yy - 2.0 * coef.dot(&self.q) + coef.dot(&ga) + lambda * l1
    }

    /// [`Self::objective`] evaluated with error-free products and sums.
    ///
    /// Late sweeps lower the objective by less than the rounding error of
    /// the plain quadratic form, so traces use this slower evaluation.
    pub fn accurate_objective(&self, coef: ArrayView1<f64>, lambda: f64) -> f64 {
        let mut acc = CompensatedSum::default();
        acc.add(self.yy);
        for (i, &ai) in coef.iter().enumerate() {
            if ai == 0.0 {
                continue;
            }
            acc.add_product(-2.0 * ai, self.q[i]);
            acc.add_product(lambda, ai.abs());
            for (j, &aj) in coef.iter().enumerate() {
                if aj != 0.0 {
                    let (p, e) = two_prod(ai, self.gram[[i, j]]);
                    acc.add_product(p, aj);
                    acc.add(e * aj);
                }
            }
        }
        acc.value()
    }

    /// Mean squared residual `(1/N)‖y − aZ‖²`, floored at 0.
    pub fn mean_rss(&self, coef: ArrayView1<f64>) -> f64 {
        let ga = self.gram.dot(&coef);
        (self.yy - 2.0 * coef.dot(&self.q) + coef.dot(&ga)).max(0.0)
    }

    /// Gradient of the smooth part, `−2(q − Ga)`.
    pub fn gradient(&self, coef: ArrayView1<f64>) -> Array1<f64> {
        let ga = self.gram.dot(&coef);
        (&ga - &self.q) * 2.0
    }

    /// Smallest penalty at which the zero vector is optimal: `2·max|q|`.
    pub fn lambda_max(&self) -> f64 {
        2.0 * self.q.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let z = s - a;
    (s, (a - (s - z)) + (b - z))
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

/// Running sum that carries its rounding error separately.
#[derive(Default)]
struct CompensatedSum {
    sum: f64,
    err: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let (s, e) = two_sum(self.sum, x);
        self.sum = s;
        self.err += e;
    }

    fn add_product(&mut self, a: f64, b: f64) {
        let (p, e) = two_prod(a, b);
        self.add(p);
        self.err += e;
    }

    fn value(&self) -> f64 {
        self.sum + self.err
    }
}

#[derive(Debug, Clone)]
pub struct CdOutcome {
    pub coef: Array1<f64>,
    pub sweeps: usize,
    pub converged: bool,
}

/// Runs cyclic sweeps in index order starting from `start` until no
/// coordinate moves by more than `tol` or `max_sweeps` is reached.
///
/// When `trace` is given, the objective after every sweep is appended.
pub fn coordinate_descent(
    m: &Moments<'_>,
    lambda: f64,
    start: Array1<f64>,
    tol: f64,
    max_sweeps: usize,
    mut trace: Option<&mut Vec<f64>>,
) -> CdOutcome {
    let dim = m.q.len();
    let mut coef = start;
    let mut ga = m.gram.dot(&coef);
    let half = 0.5 * lambda;
    let mut sweeps = 0;
    let mut converged = false;
    let mut last_obj = f64::INFINITY;
    while sweeps < max_sweeps {
        sweeps += 1;
        let mut max_delta = 0.0f64;
        for j in 0..dim {
            let gjj = m.gram[[j, j]];
            let old = coef[j];
            let new = if gjj > 0.0 {
                let rho = m.q[j] - ga[j] + gjj * old;
                soft_threshold(rho, half) / gjj
            } else {
                0.0
            };
            let delta = new - old;
            if delta != 0.0 {
                coef[j] = new;
                ga.scaled_add(delta, &m.gram.column(j));
                max_delta = max_delta.max(delta.abs());
            }
        }
        if cfg!(debug_assertions) {
            let obj = m.objective_with(coef.view(), ga.view(), lambda);
            debug_assert!(
                obj <= last_obj + 1e-9 * (1.0 + last_obj.abs()),
                "objective increased {last_obj} -> {obj}"
            );
            last_obj = obj;
        }
        if let Some(t) = trace.as_deref_mut() {
            t.push(m.accurate_objective(coef.view(), lambda));
        }
        if max_delta < tol {
            converged = true;
            break;
        }
    }
    CdOutcome {
        coef,
        sweeps,
        converged,
    }
}
