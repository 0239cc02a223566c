use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use log::info;
use ndarray::s;
use sparsevar::cross_validation::{select_lambda, select_lambda_on_grid};
use sparsevar::evaluation::{evaluate, EvalOptions};
use sparsevar::forecasting::{
    iterate_forecast, recursive_exercise, ExerciseConfig, ForecastSet, OriginInfo,
};
use sparsevar::granger::{granger_network, NetworkConfig};
use sparsevar::ingestion::{
    daily_aggregate, read_daily_chunk, read_monthly_index, read_scored_items, rescale_gtrends,
    DailyChunks, DateWindow, SentimentConfig,
};
use sparsevar::io::{fmt_f64, read_panel_file, write_panel_file};
use sparsevar::lasso_var::{fit_panel, SolverInfo};
use sparsevar::synthetic::{simulate, ErrorProcess, SparseRecipe, SyntheticSpec};
use sparsevar::{Estimator, TimePanel, VarModel};

use crate::config::RunConfig;
use crate::CliError;

type CmdResult = Result<Vec<PathBuf>, CliError>;

fn out_file(cfg: &RunConfig, name: &str) -> Result<PathBuf, CliError> {
    let dir = cfg.out_dir();
    fs::create_dir_all(&dir)?;
    Ok(dir.join(name))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(File::create(path)?))
}

fn panel(cfg: &RunConfig) -> Result<TimePanel, CliError> {
    Ok(read_panel_file(cfg.panel.as_deref().expect("validated"))?)
}

pub fn ingest(cfg: &RunConfig) -> CmdResult {
    let ing = &cfg.ingest;
    let prices = read_panel_file(ing.prices.as_deref().expect("validated"))?;
    let returns = sparsevar::data_model::log_returns(&prices)?;
    let (start, end) = (
        returns.dates()[0],
        *returns.dates().last().expect("nonempty"),
    );
    let window = DateWindow::new(start, end)?;
    let mut parts = vec![returns];
    let scfg = SentimentConfig {
        alpha: ing.alpha.unwrap_or(SentimentConfig::default().alpha),
        fill: ing.fill.unwrap_or_default(),
    };
    for src in &ing.sentiment {
        let items = read_scored_items(File::open(&src.path)?)?;
        parts.push(daily_aggregate(&items, &scfg, window, &src.name)?);
    }
    for src in &ing.trends {
        let monthly = read_monthly_index(File::open(&src.monthly)?)?;
        let mut chunks = DailyChunks::new();
        for c in &src.chunks {
            let (key, values) = read_daily_chunk(File::open(c)?)?;
            chunks.insert(key, values);
        }
        let series = rescale_gtrends(&chunks, &monthly, &src.name)?;
        parts.push(covering(series, start, end, &src.name)?);
    }
    for path in &ing.extra {
        let extra = read_panel_file(path)?;
        parts.push(covering(extra, start, end, &path.display().to_string())?);
    }
    let unified = TimePanel::hstack(&parts)?;
    let path = out_file(cfg, "panel.csv")?;
    write_panel_file(&unified, &path)?;
    info!("wrote {} rows x {} series", unified.len(), unified.width());
    Ok(vec![path])
}

fn covering(
    p: TimePanel,
    start: chrono::NaiveDate,
    end: chrono::NaiveDate,
    what: &str,
) -> Result<TimePanel, CliError> {
    let cut = p.between(start, end);
    if cut.dates().first() != Some(&start) || cut.dates().last() != Some(&end) {
        return Err(CliError::invalid(vec![format!(
            "{what} does not cover {start}..{end}"
        )]));
    }
    Ok(cut)
}

pub fn cv(cfg: &RunConfig) -> CmdResult {
    let panel = panel(cfg)?;
    let lasso = cfg.lasso();
    let plan = cfg.cv.plan();
    let sel = match cfg.lambda {
        Some(l) => select_lambda_on_grid(&panel, cfg.lag(), &lasso, &plan, cfg.estimator(), &[l])?,
        None => select_lambda(&panel, cfg.lag(), &lasso, &plan, cfg.estimator())?,
    };
    let table = out_file(cfg, "cv.csv")?;
    let mut w = create(&table)?;
    sel.write_csv(&mut w)?;
    w.flush()?;
    let summary = out_file(cfg, "cv_summary.txt")?;
    fs::write(&summary, format!("{}\n", sel.summary_line()))?;
    println!("{}", sel.summary_line());
    Ok(vec![table, summary])
}

fn resolve_lambda(cfg: &RunConfig, panel: &TimePanel) -> Result<f64, CliError> {
    if cfg.estimator() == Estimator::Ols {
        return Ok(0.0);
    }
    match cfg.lambda {
        Some(l) => Ok(l),
        None => {
            let sel = select_lambda(
                panel,
                cfg.lag(),
                &cfg.lasso(),
                &cfg.cv.plan(),
                cfg.estimator(),
            )?;
            info!("{}", sel.summary_line());
            Ok(sel.lambda)
        }
    }
}

pub fn fit(cfg: &RunConfig) -> CmdResult {
    let panel = panel(cfg)?;
    let lambda = resolve_lambda(cfg, &panel)?;
    let model = fit_panel(
        &panel,
        cfg.lag(),
        &cfg.lasso().with_lambda(lambda),
        cfg.estimator(),
    )?;
    if !model.converged() {
        log::warn!("solver hit the sweep cap; model flagged as not converged");
    }
    let path = out_file(cfg, "model.json")?;
    fs::write(&path, model.to_json()?)?;
    Ok(vec![path])
}

pub fn forecast(cfg: &RunConfig) -> CmdResult {
    let panel = panel(cfg)?;
    let (start, end) = cfg
        .origin_range()
        .map_err(|e| CliError::invalid(vec![e]))?
        .expect("validated");
    let set = match &cfg.model {
        Some(path) => fixed_model_forecasts(&panel, path, start, end, cfg.horizons())?,
        None => recursive_exercise(
            &panel,
            &ExerciseConfig {
                p: cfg.lag(),
                lasso: cfg.lasso(),
                plan: cfg.cv.plan(),
                estimator: cfg.estimator(),
                start_origin: start,
                end_origin: end,
                horizons: cfg.horizons(),
                policy: cfg.refit.unwrap_or_default(),
            },
        )?,
    };
    let path = out_file(cfg, "forecasts.csv")?;
    let mut w = create(&path)?;
    set.write_csv(&mut w)?;
    w.flush()?;
    let mut outputs = vec![path];
    if !set.info.is_empty() {
        let info_path = out_file(cfg, "forecast_origins.csv")?;
        write_origin_info(&set.info, &info_path)?;
        outputs.push(info_path);
    }
    Ok(outputs)
}

fn write_origin_info(info: &[OriginInfo], path: &Path) -> Result<(), CliError> {
    let mut w = create(path)?;
    writeln!(w, "origin,train_len,lambda,converged")?;
    for i in info {
        writeln!(
            w,
            "{},{},{},{}",
            i.origin,
            i.train_len,
            fmt_f64(i.lambda),
            i.converged
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Forecasts from a stored model without refitting.
fn fixed_model_forecasts(
    panel: &TimePanel,
    model_path: &Path,
    start: chrono::NaiveDate,
    end: chrono::NaiveDate,
    horizons: usize,
) -> Result<ForecastSet, CliError> {
    let model = VarModel::from_json(&fs::read_to_string(model_path)?)?;
    if model.names != panel.names() {
        return Err(CliError::invalid(vec![format!(
            "model series {:?} differ from panel series {:?}",
            model.names,
            panel.names()
        )]));
    }
    let locate = |d: chrono::NaiveDate| {
        panel
            .date_index(d)
            .ok_or_else(|| CliError::invalid(vec![format!("origin {d} is not in the panel")]))
    };
    let (first, last) = (locate(start)?, locate(end)?);
    if first + 1 < model.p {
        return Err(CliError::invalid(vec![format!(
            "origin {start} has fewer than {} observations",
            model.p
        )]));
    }
    let k = panel.width();
    let n_o = last - first + 1;
    let mut values = ndarray::Array3::<f64>::zeros((n_o, horizons, k));
    let mut actuals = ndarray::Array3::<Option<f64>>::from_elem((n_o, horizons, k), None);
    for (i, o) in (first..=last).enumerate() {
        let hist = panel.values().slice(s![o + 1 - model.p..=o, ..]).to_owned();
        let f = iterate_forecast(&model, hist.view(), horizons)?;
        values.slice_mut(s![i, .., ..]).assign(&f);
        for h in 0..horizons {
            if o + h + 1 < panel.len() {
                for kk in 0..k {
                    actuals[[i, h, kk]] = Some(panel.values()[[o + h + 1, kk]]);
                }
            }
        }
    }
    Ok(ForecastSet {
        names: panel.names().to_vec(),
        origins: panel.dates()[first..=last].to_vec(),
        horizons,
        values,
        actuals,
        info: Vec::new(),
    })
}

pub fn evaluate_cmd(cfg: &RunConfig) -> CmdResult {
    let e = &cfg.evaluate;
    let mut models = Vec::with_capacity(e.forecasts.len());
    for src in &e.forecasts {
        let set = ForecastSet::read_csv(File::open(&src.path)?)?;
        models.push((src.name.clone(), set));
    }
    let actuals = match &e.actuals {
        Some(p) => Some(read_panel_file(p)?),
        None => None,
    };
    let report = evaluate(
        &models,
        actuals.as_ref(),
        &EvalOptions {
            mda_form: e.mda_form.unwrap_or_default(),
            benchmarks: e.benchmarks.clone(),
        },
    )?;
    let path = out_file(cfg, "evaluation.csv")?;
    let mut w = create(&path)?;
    report.write_csv(&mut w)?;
    w.flush()?;
    Ok(vec![path])
}

pub fn granger(cfg: &RunConfig) -> CmdResult {
    let panel = panel(cfg)?;
    let net = granger_network(
        &panel,
        &NetworkConfig {
            variables: cfg.granger.variables.clone(),
            p: cfg.lag(),
            threshold: cfg.threshold(),
            lasso: cfg.lasso(),
            robust: cfg.granger.robust,
        },
    )?;
    let matrix = out_file(cfg, "granger_matrix.csv")?;
    let edges = out_file(cfg, "granger_edges.csv")?;
    let dot = out_file(cfg, "granger.dot")?;
    let failures = out_file(cfg, "granger_failures.csv")?;
    let mut w = create(&matrix)?;
    net.write_matrix_csv(&mut w)?;
    w.flush()?;
    let mut w = create(&edges)?;
    net.write_edges_csv(&mut w)?;
    w.flush()?;
    let mut w = create(&dot)?;
    net.write_dot(&mut w)?;
    w.flush()?;
    let mut w = create(&failures)?;
    net.write_failures_csv(&mut w)?;
    w.flush()?;
    Ok(vec![matrix, edges, dot, failures])
}

pub fn simulate_cmd(cfg: &RunConfig) -> CmdResult {
    let s = &cfg.simulate;
    let seed = cfg.seed.unwrap_or(0);
    let p = cfg.lag.unwrap_or(1);
    let mut spec = SyntheticSpec::sparse(
        s.k,
        p,
        s.t,
        SparseRecipe {
            density: s.density,
            magnitude: s.magnitude,
            seed,
        },
        // independent stream for the innovations
        seed.wrapping_add(0x9E37_79B9_7F4A_7C15),
    );
    spec.innovation_sd = s.innovation_sd;
    spec.burn_in = s.burn_in;
    if let Some(d) = s.start_date {
        spec.start_date = d;
    }
    if let Some(rho) = s.error_rho {
        spec.error = ErrorProcess::Ar1 { rho };
    }
    let sim = simulate(&spec)?;
    let panel_path = out_file(cfg, "panel.csv")?;
    write_panel_file(&sim.panel, &panel_path)?;
    let truth_path = out_file(cfg, "truth.json")?;
    fs::write(&truth_path, serde_json::to_string_pretty(&sim.truth)?)?;
    // the generating process as a loadable model in raw units
    let truth_model = VarModel {
        p,
        names: sim.panel.names().to_vec(),
        coefficients: sim.coefficients.clone(),
        sigma_u: ndarray::Array2::eye(s.k) * (s.innovation_sd * s.innovation_sd),
        rho: sim.rho.map(|r| vec![r; s.k]),
        stats: None,
        solver: SolverInfo {
            estimator: Estimator::Ols,
            lambda: 0.0,
            sweeps: 0,
            converged: true,
        },
    };
    let model_path = out_file(cfg, "truth_model.json")?;
    fs::write(&model_path, truth_model.to_json()?)?;
    Ok(vec![panel_path, truth_path, model_path])
}
