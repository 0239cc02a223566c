//! Ground-truth VAR simulator.
//!
//! Every statistical test in the crate is checked against panels drawn
//! here: the true coefficients, error process and seed travel with the
//! panel so estimates can be compared with what generated the data.

use chrono::NaiveDate;
use nalgebra::{DMatrix, Schur};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data_model::{lag_vector, TimePanel};
use crate::error::{Error, Result};

/// Observations simulated and discarded before the returned sample.
pub const DEFAULT_BURN_IN: usize = 200;
/// Spectral radius targeted when a random draw is explosive or too close
/// to the unit circle.
pub const TARGET_RADIUS: f64 = 0.95;
const MAX_STABILIZE_ATTEMPTS: usize = 50;

/// Random sparse coefficient recipe: each entry of each lag matrix is
/// nonzero with probability `density`, with value `±magnitude`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SparseRecipe {
    pub density: f64,
    pub magnitude: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CoefficientSource {
    /// Lag matrices `A_1..A_p`, each K×K.
    Explicit(Vec<Array2<f64>>),
    Recipe(SparseRecipe),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ErrorProcess {
    Iid,
    /// `u_t = rho·u_{t−1} + ε_t` in every equation.
    Ar1 {
        rho: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub k: usize,
    pub p: usize,
    pub t: usize,
    pub coefficients: CoefficientSource,
    pub error: ErrorProcess,
    pub innovation_sd: f64,
    pub seed: u64,
    pub burn_in: usize,
    /// Pre-sample values, p×K in chronological order (last row most
    /// recent). Zero when absent.
    pub initial: Option<Array2<f64>>,
    pub start_date: NaiveDate,
    pub names: Option<Vec<String>>,
}

impl SyntheticSpec {
    /// Sparse random VAR with iid unit-variance errors.
    pub fn sparse(k: usize, p: usize, t: usize, recipe: SparseRecipe, seed: u64) -> Self {
        Self {
            k,
            p,
            t,
            coefficients: CoefficientSource::Recipe(recipe),
            error: ErrorProcess::Iid,
            innovation_sd: 1.0,
            seed,
            burn_in: DEFAULT_BURN_IN,
            initial: None,
            start_date: NaiveDate::from_ymd_opt(2018, 1, 1).expect("valid date"),
            names: None,
        }
    }

    /// VAR with the given lag matrices and iid unit-variance errors.
    pub fn explicit(blocks: Vec<Array2<f64>>, t: usize, seed: u64) -> Self {
        let k = blocks.first().map(|b| b.nrows()).unwrap_or(0);
        let p = blocks.len();
        Self {
            k,
            p,
            t,
            coefficients: CoefficientSource::Explicit(blocks),
            error: ErrorProcess::Iid,
            innovation_sd: 1.0,
            seed,
            burn_in: DEFAULT_BURN_IN,
            initial: None,
            start_date: NaiveDate::from_ymd_opt(2018, 1, 1).expect("valid date"),
            names: None,
        }
    }

    pub fn with_error(mut self, error: ErrorProcess) -> Self {
        self.error = error;
        self
    }

    pub fn with_names(mut self, names: Vec<String>) -> Self {
        self.names = Some(names);
        self
    }

    fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.k == 0 || self.p == 0 || self.t == 0 {
            problems.push(format!(
                "K, p and T must be positive (got {}, {}, {})",
                self.k, self.p, self.t
            ));
        }
        if !(self.innovation_sd >= 0.0) || !self.innovation_sd.is_finite() {
            problems.push(format!("innovation sd {} must be >= 0", self.innovation_sd));
        }
        if let ErrorProcess::Ar1 { rho } = self.error {
            if !(rho.abs() < 1.0) {
                problems.push(format!("AR(1) error rho {rho} must be inside (-1, 1)"));
            }
        }
        if let CoefficientSource::Recipe(r) = &self.coefficients {
            if !(r.density > 0.0 && r.density <= 1.0) {
                problems.push(format!("density {} must be in (0, 1]", r.density));
            }
        }
        if let CoefficientSource::Explicit(blocks) = &self.coefficients {
            if blocks.len() != self.p || blocks.iter().any(|b| b.dim() != (self.k, self.k)) {
                problems.push(format!(
                    "expected {} lag matrices of size {}x{}",
                    self.p, self.k, self.k
                ));
            }
        }
        if let Some(init) = &self.initial {
            if init.dim() != (self.p, self.k) {
                problems.push(format!("initial state must be {}x{}", self.p, self.k));
            }
        }
        if let Some(names) = &self.names {
            if names.len() != self.k {
                problems.push(format!("{} names for {} series", names.len(), self.k));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidSpec(problems.join("; ")))
        }
    }
}

/// Largest eigenvalue modulus of the VAR companion matrix.
pub fn spectral_radius(blocks: &[Array2<f64>]) -> f64 {
    let p = blocks.len();
    if p == 0 {
        return 0.0;
    }
    let k = blocks[0].nrows();
    let dim = k * p;
    let mut companion = DMatrix::<f64>::zeros(dim, dim);
    for (lag, block) in blocks.iter().enumerate() {
        for i in 0..k {
            for j in 0..k {
                companion[(i, lag * k + j)] = block[[i, j]];
            }
        }
    }
    for i in k..dim {
        companion[(i, i - k)] = 1.0;
    }
    // unbounded QR iteration can cycle forever on shift-like matrices
    match Schur::try_new(companion.clone(), f64::EPSILON, SCHUR_MAX_ITERATIONS) {
        Some(schur) => schur
            .complex_eigenvalues()
            .iter()
            .fold(0.0f64, |m, z| m.max(z.norm())),
        None => gelfand_radius(companion),
    }
}

const SCHUR_MAX_ITERATIONS: usize = 10_000;

/// `‖M^n‖^(1/n)` at `n = 2^48` by repeated normalized squaring.
fn gelfand_radius(mut m: DMatrix<f64>) -> f64 {
    const SQUARINGS: i32 = 48;
    let mut log_scale = 0.0;
    for step in 0..=SQUARINGS {
        if step > 0 {
            m = &m * &m;
            log_scale *= 2.0;
        }
        let norm = m.norm();
        if norm == 0.0 {
            return 0.0;
        }
        m /= norm;
        log_scale += norm.ln();
    }
    (log_scale / 2f64.powi(SQUARINGS)).exp()
}

/// Stacks lag matrices into the K×(Kp) block `[A_1, …, A_p]`.
pub fn stack_blocks(blocks: &[Array2<f64>]) -> Array2<f64> {
    let views: Vec<_> = blocks.iter().map(|b| b.view()).collect();
    ndarray::concatenate(ndarray::Axis(1), &views).expect("equal block heights")
}

/// Draws sparse lag matrices. If the draw has spectral radius above 0.95,
/// lag `i` is multiplied by `c^i`, which scales every companion eigenvalue
/// by exactly `c`, and the result is re-checked.
pub fn make_sparse_var(k: usize, p: usize, recipe: &SparseRecipe) -> Result<Vec<Array2<f64>>> {
    if !(recipe.density > 0.0 && recipe.density <= 1.0) {
        return Err(Error::InvalidSpec(format!(
            "density {} must be in (0, 1]",
            recipe.density
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(recipe.seed);
    let mut blocks: Vec<Array2<f64>> = (0..p)
        .map(|_| {
            Array2::from_shape_fn((k, k), |_| {
                let keep = recipe.density >= 1.0 || rng.random::<f64>() < recipe.density;
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                if keep {
                    sign * recipe.magnitude
                } else {
                    0.0
                }
            })
        })
        .collect();
    let mut radius = spectral_radius(&blocks);
    let mut attempts = 0;
    while radius > TARGET_RADIUS {
        if attempts == MAX_STABILIZE_ATTEMPTS || !radius.is_finite() {
            return Err(Error::Unstable(format!(
                "spectral radius {radius} after {attempts} rescalings"
            )));
        }
        let c = TARGET_RADIUS / radius * (1.0 - 1e-9);
        for (lag, b) in blocks.iter_mut().enumerate() {
            b.mapv_inplace(|v| v * c.powi(lag as i32 + 1));
        }
        radius = spectral_radius(&blocks);
        attempts += 1;
    }
    Ok(blocks)
}

/// Serializable record of what generated a simulated panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub k: usize,
    pub p: usize,
    pub names: Vec<String>,
    /// Rows of `[A_1, …, A_p]`.
    pub coefficients: Vec<Vec<f64>>,
    pub error: ErrorProcess,
    pub innovation_sd: f64,
    pub seed: u64,
    pub spectral_radius: f64,
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub panel: TimePanel,
    /// K×(Kp) true coefficient block.
    pub coefficients: Array2<f64>,
    pub rho: Option<f64>,
    pub truth: GroundTruth,
}

pub fn simulate(spec: &SyntheticSpec) -> Result<Simulation> {
    spec.validate()?;
    let blocks = match &spec.coefficients {
        CoefficientSource::Explicit(b) => b.clone(),
        CoefficientSource::Recipe(r) => make_sparse_var(spec.k, spec.p, r)?,
    };
    let radius = spectral_radius(&blocks);
    if !(radius < 1.0) {
        return Err(Error::Unstable(format!(
            "companion spectral radius {radius} is not below 1"
        )));
    }
    let coefficients = stack_blocks(&blocks);
    let (k, p) = (spec.k, spec.p);
    let total = spec.burn_in + spec.t;
    let mut path = Array2::<f64>::zeros((p + total, k));
    if let Some(init) = &spec.initial {
        path.slice_mut(ndarray::s![..p, ..]).assign(init);
    }
    let rho = match spec.error {
        ErrorProcess::Iid => None,
        ErrorProcess::Ar1 { rho } => Some(rho),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut u = Array1::<f64>::zeros(k);
    for step in 0..total {
        let t = p + step;
        for ui in u.iter_mut() {
            let eps: f64 = rng.sample::<f64, _>(StandardNormal) * spec.innovation_sd;
            *ui = rho.map_or(eps, |r| r * *ui + eps);
        }
        let z = lag_vector(path.view(), t, p);
        let y = coefficients.dot(&z) + &u;
        path.row_mut(t).assign(&y);
    }
    let values = path.slice(ndarray::s![p + spec.burn_in.., ..]).to_owned();
    let names = spec
        .names
        .clone()
        .unwrap_or_else(|| (1..=k).map(|i| format!("y{i}")).collect());
    let dates = (0..spec.t as u64)
        .map(|d| spec.start_date + chrono::Days::new(d))
        .collect();
    let panel = TimePanel::new(dates, names.clone(), values)?;
    let truth = GroundTruth {
        k,
        p,
        names,
        coefficients: coefficients
            .rows()
            .into_iter()
            .map(|r| r.to_vec())
            .collect(),
        error: spec.error,
        innovation_sd: spec.innovation_sd,
        seed: spec.seed,
        spectral_radius: radius,
    };
    Ok(Simulation {
        panel,
        coefficients,
        rho,
        truth,
    })
}
