use chrono::NaiveDate;
use ndarray::{Array1, Array2, Axis};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use sparsevar::data_model::{adf_statistic, lag_embed, log_returns, standardize};
use sparsevar::evaluation::{epa_test, mda, rmse};
use sparsevar::ingestion::{
    compound_normalize, rescale_gtrends, DailyChunks, MonthlyIndex, SentimentConfig,
};
use sparsevar::lasso_var::{fit_path, fit_var, kkt_violation, Estimator, LassoConfig};
use sparsevar::synthetic::{simulate, SparseRecipe, SyntheticSpec};
use sparsevar::TimePanel;

fn dates(n: usize) -> Vec<NaiveDate> {
    let start = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
    (0..n)
        .map(|i| start + chrono::Days::new(i as u64))
        .collect()
}

fn panel_from(values: Array2<f64>) -> TimePanel {
    let names = (0..values.ncols()).map(|i| format!("s{i}")).collect();
    TimePanel::new(dates(values.nrows()), names, values).unwrap()
}

fn gaussian(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_simple_fn((rows, cols), || rng.sample::<f64, _>(StandardNormal))
}

fn nonconstant_panel() -> impl Strategy<Value = Array2<f64>> {
    (2usize..40, 1usize..5)
        .prop_flat_map(|(t, k)| {
            prop::collection::vec(-1e3f64..1e3, t * k).prop_map(move |v| (t, k, v))
        })
        .prop_map(|(t, k, v)| Array2::from_shape_vec((t, k), v).unwrap())
        .prop_filter("columns must vary", |a| {
            a.columns().into_iter().all(|c| {
                let m = c.mean().unwrap();
                c.iter().map(|x| (x - m).powi(2)).sum::<f64>() / c.len() as f64 > 1e-6
            })
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn standardized_columns_have_zero_mean_unit_sd(values in nonconstant_panel()) {
        let (z, _) = standardize(&panel_from(values)).unwrap();
        for col in z.values().columns() {
            let n = col.len() as f64;
            let mean = col.sum() / n;
            let sd = (col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
            prop_assert!(mean.abs() <= 1e-12, "mean {mean}");
            prop_assert!((sd - 1.0).abs() <= 1e-12, "sd {sd}");
        }
    }

    #[test]
    fn log_returns_invert_exp_cumsum(x in prop::collection::vec(-5.0f64..5.0, 1..50)) {
        let mut level = 0.0;
        let mut prices = vec![1.0];
        for v in &x {
            level += v;
            prices.push(level.exp());
        }
        let n = prices.len();
        let r = log_returns(&panel_from(Array2::from_shape_vec((n, 1), prices).unwrap())).unwrap();
        for (got, want) in r.values().column(0).iter().zip(&x) {
            prop_assert!((got - want).abs() <= 1e-10, "{got} vs {want}");
        }
    }

    #[test]
    fn embedding_reproduces_noiseless_dynamics(seed in 0u64..1000, k in 1usize..5, p in 1usize..4) {
        let recipe = SparseRecipe { density: 0.5, magnitude: 0.4, seed };
        let mut spec = SyntheticSpec::sparse(k, p, 30, recipe, seed);
        spec.innovation_sd = 0.0;
        spec.burn_in = 0;
        spec.initial = Some(gaussian(p, k, seed + 1));
        let sim = simulate(&spec).unwrap();
        let e = lag_embed(&sim.panel, p).unwrap();
        let fitted = sim.coefficients.dot(&e.z);
        for (a, b) in fitted.iter().zip(e.y.iter()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn rmse_is_scale_equivariant(e in prop::collection::vec(-1e3f64..1e3, 1..60), c in -1e2f64..1e2) {
        let scaled: Vec<f64> = e.iter().map(|v| c * v).collect();
        let lhs = rmse(&scaled).unwrap();
        let rhs = c.abs() * rmse(&e).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1.0));
    }

    #[test]
    fn mda_ignores_a_common_shift(
        pairs in prop::collection::vec((-100i32..100, -100i32..100), 2..60),
        shift in -1000i32..1000,
    ) {
        // integers keep the shifted differences exact
        let a: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
        let f: Vec<f64> = pairs.iter().map(|p| p.1 as f64).collect();
        let a2: Vec<f64> = a.iter().map(|v| v + shift as f64).collect();
        let f2: Vec<f64> = f.iter().map(|v| v + shift as f64).collect();
        prop_assert_eq!(mda(&a, &f).unwrap(), mda(&a2, &f2).unwrap());
    }

    #[test]
    fn epa_is_antisymmetric(seed in 0u64..10_000, h in 1usize..5, len in 10usize..120) {
        let e = gaussian(len, 2, seed);
        let (e1, e2) = (e.column(0).to_vec(), e.column(1).to_vec());
        let ab = epa_test(&e1, &e2, h).unwrap();
        let ba = epa_test(&e2, &e1, h).unwrap();
        prop_assert_eq!(ab.statistic, -ba.statistic);
        prop_assert_eq!(ab.p_value, ba.p_value);
        prop_assert!((0.0..=1.0).contains(&ab.p_value));
    }

    #[test]
    fn rescaling_is_homogeneous_in_the_weights(
        weights in prop::collection::vec(0.0f64..100.0, 1..6),
        c in 0.0f64..1.0,
        seed in 0u64..1000,
    ) {
        let (chunks, months) = trend_chunks(weights.len(), seed);
        let base = MonthlyIndex::new(months.clone(), weights.clone()).unwrap();
        let scaled = MonthlyIndex::new(months, weights.iter().map(|w| c * w).collect()).unwrap();
        let a = rescale_gtrends(&chunks, &base, "q").unwrap();
        let b = rescale_gtrends(&chunks, &scaled, "q").unwrap();
        for (x, y) in a.values().iter().zip(b.values().iter()) {
            prop_assert!((c * x - y).abs() <= 1e-12 * (c * x).abs().max(1e-300));
        }
    }

    #[test]
    fn monthly_means_follow_weights(weights in prop::collection::vec(1.0f64..100.0, 1..6), seed in 0u64..1000) {
        let (chunks, months) = trend_chunks(weights.len(), seed);
        let idx = MonthlyIndex::new(months.clone(), weights.clone()).unwrap();
        let daily = rescale_gtrends(&chunks, &idx, "q").unwrap();
        let mut offset = 0;
        for (m, w) in months.iter().zip(&weights) {
            let chunk = &chunks[m];
            let got: f64 = daily.values().column(0).iter().skip(offset).take(chunk.len()).sum::<f64>()
                / chunk.len() as f64;
            let want = w * chunk.iter().sum::<f64>() / chunk.len() as f64 / 100.0;
            prop_assert!((got - want).abs() <= 1e-12 * want.abs());
            offset += chunk.len();
        }
    }
}

/// Random 0..100 daily chunks for consecutive months starting 2019-11.
fn trend_chunks(n: usize, seed: u64) -> (DailyChunks, Vec<(i32, u32)>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chunks = DailyChunks::new();
    let mut months = Vec::new();
    let (mut y, mut m) = (2019, 11);
    for _ in 0..n {
        let first = NaiveDate::from_ymd_opt(y, m, 1).unwrap();
        let (ny, nm) = if m == 12 { (y + 1, 1) } else { (y, m + 1) };
        let days = (NaiveDate::from_ymd_opt(ny, nm, 1).unwrap() - first).num_days() as usize;
        chunks.insert(
            (y, m),
            (0..days).map(|_| rng.random_range(1.0..100.0)).collect(),
        );
        months.push((y, m));
        (y, m) = (ny, nm);
    }
    (chunks, months)
}

#[test]
fn compound_normalize_is_bounded_odd_and_monotone() {
    let cfg = SentimentConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100_000 {
        let scale = 10f64.powi(rng.random_range(-3..4));
        let x = rng.random_range(-1.0..1.0) * scale;
        let y = compound_normalize(x, &cfg);
        assert!(y > -1.0 && y < 1.0, "{x} -> {y}");
        assert_eq!(compound_normalize(-x, &cfg), -y);
        let bump = x + x.abs().max(1.0) * 1e-6;
        assert!(compound_normalize(bump, &cfg) > y, "not increasing at {x}");
    }
}

fn random_embedding(seed: u64, k: usize, p: usize, t: usize) -> sparsevar::LagEmbedding {
    let recipe = SparseRecipe {
        density: 0.3,
        magnitude: 0.3,
        seed,
    };
    let sim = simulate(&SyntheticSpec::sparse(k, p, t, recipe, seed + 7)).unwrap();
    let (z, _) = standardize(&sim.panel).unwrap();
    lag_embed(&z, p).unwrap()
}

#[test]
fn l1_norm_grows_along_a_descending_path() {
    for seed in 0..10 {
        let e = random_embedding(seed, 4, 2, 150);
        let cfg = LassoConfig::default();
        let grid = cfg.grid.lambdas(sparsevar::lasso_var::lambda_max(&e));
        let path = fit_path(&e, &grid, &cfg, Estimator::Lasso).unwrap();
        for pair in path.windows(2) {
            assert!(pair[0].l1_norm() <= pair[1].l1_norm() + 1e-9, "seed {seed}");
        }
    }
}

#[test]
fn converged_fits_satisfy_kkt_within_a_hundred_tolerances() {
    for seed in 0..10 {
        let e = random_embedding(seed, 4, 2, 150);
        let lmax = sparsevar::lasso_var::lambda_max(&e);
        for frac in [0.5, 0.1, 0.01] {
            let cfg = LassoConfig::default().with_lambda(frac * lmax);
            let m = fit_var(&e, &cfg, Estimator::Lasso).unwrap();
            assert!(m.converged());
            assert!(kkt_violation(&m, &e, cfg.lambda).unwrap() <= 100.0 * cfg.tol);
        }
    }
}

/// Accelerated proximal gradient on the whole coefficient matrix at once.
fn joint_prox_gradient(e: &sparsevar::LagEmbedding, lambda: f64) -> Array2<f64> {
    let n = e.n() as f64;
    let gram = e.z.dot(&e.z.t()) / n;
    let cross = e.y.dot(&e.z.t()) / n;
    // power iteration for the Lipschitz constant of the smooth part
    let mut v = Array1::<f64>::ones(gram.nrows());
    for _ in 0..500 {
        let w = gram.dot(&v);
        v = &w / w.dot(&w).sqrt();
    }
    let step = 1.0 / (2.0 * v.dot(&gram.dot(&v)));
    let mut a = Array2::<f64>::zeros(cross.dim());
    let mut prev = a.clone();
    let mut tk = 1.0f64;
    for _ in 0..50_000 {
        let tn = (1.0 + (1.0 + 4.0 * tk * tk).sqrt()) / 2.0;
        let yk = &a + &((&a - &prev) * ((tk - 1.0) / tn));
        let grad = (yk.dot(&gram) - &cross) * 2.0;
        let g = &yk - &(grad * step);
        prev = a;
        a = g.mapv(|x| x.signum() * (x.abs() - step * lambda).max(0.0));
        tk = tn;
    }
    a
}

#[test]
fn equation_wise_fit_matches_joint_oracle() {
    for seed in 0..5 {
        let e = random_embedding(seed, 2, 1, 51);
        assert_eq!(e.n(), 50);
        let lambda = 0.2 * sparsevar::lasso_var::lambda_max(&e);
        let m = fit_var(
            &e,
            &LassoConfig::default().with_lambda(lambda),
            Estimator::Lasso,
        )
        .unwrap();
        let oracle = joint_prox_gradient(&e, lambda);
        for (a, b) in m.coefficients.iter().zip(oracle.iter()) {
            assert!((a - b).abs() <= 1e-6, "seed {seed}: {a} vs {b}");
        }
    }
}

#[test]
fn simulated_panels_look_stationary() {
    let seeds = 40u64;
    let mut stationary = 0;
    for seed in 0..seeds {
        let recipe = SparseRecipe {
            density: 0.3,
            magnitude: 0.3,
            seed,
        };
        let sim = simulate(&SyntheticSpec::sparse(4, 2, 2000, recipe, seed + 100)).unwrap();
        let all = sim
            .panel
            .values()
            .axis_iter(Axis(1))
            .all(|c| adf_statistic(c, 1).unwrap() < -2.86);
        stationary += all as u64;
    }
    assert!(
        stationary as f64 >= 0.95 * seeds as f64,
        "{stationary}/{seeds}"
    );
}

#[test]
fn white_noise_network_has_few_false_edges() {
    use sparsevar::granger::{granger_network, NetworkConfig};
    let values = gaussian(500, 10, 2024);
    let net = granger_network(&panel_from(values), &NetworkConfig::new(1)).unwrap();
    assert!(net.failures.is_empty());
    assert!(net.edges.len() <= 4, "{} false edges", net.edges.len());
}
