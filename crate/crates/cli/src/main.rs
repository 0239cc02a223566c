//! `sparsevar` batch pipeline.
//!
//! Every command reads an optional TOML config, applies flag overrides on
//! top, validates the result and writes its artifacts to the output
//! directory. Failures print one JSON line on stderr.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` deliberately also rejects NaN

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;
use sparsevar::evaluation::MdaForm;
use sparsevar::forecasting::RefitPolicy;
use sparsevar::Estimator;

use crate::config::{Command, ForecastSource, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{}", .0.join("; "))]
    Config(Vec<String>),

    #[error(transparent)]
    Core(#[from] sparsevar::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn invalid(messages: Vec<String>) -> Self {
        CliError::Config(messages)
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Core(sparsevar::Error::Io(_)) | CliError::Io(_) => "io",
            CliError::Core(_) => "computation",
            CliError::Json(_) => "serialization",
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Serialize)]
struct ErrorLine<'a> {
    error: &'a str,
    message: String,
    messages: Vec<String>,
}

fn report(kind: &str, messages: Vec<String>) {
    let line = ErrorLine {
        error: kind,
        message: messages.join("; "),
        messages,
    };
    eprintln!(
        "{}",
        serde_json::to_string(&line).expect("plain strings serialize")
    );
}

#[derive(Debug, Parser)]
#[command(
    name = "sparsevar",
    version,
    about = "Sparse VAR forecasting and Granger networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// TOML config; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Input panel CSV.
    #[arg(long, global = true)]
    panel: Option<PathBuf>,

    #[arg(long, global = true)]
    lag: Option<usize>,

    #[arg(long, global = true, value_parser = parse_estimator)]
    estimator: Option<Estimator>,

    /// Fixed penalty.
    #[arg(long, global = true, conflicts_with = "grid")]
    lambda: Option<f64>,

    /// Candidate grid as `N,RATIO`.
    #[arg(long, global = true, value_parser = parse_grid)]
    grid: Option<(usize, f64)>,

    #[arg(long, global = true)]
    horizons: Option<usize>,

    /// Forecast origins as `START:END`.
    #[arg(long, global = true)]
    origins: Option<String>,

    /// Granger edge significance level.
    #[arg(long, global = true)]
    threshold: Option<f64>,

    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker cap; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Stored model for `forecast` without refitting.
    #[arg(long, global = true)]
    model: Option<PathBuf>,

    /// Refit policy for `forecast`.
    #[arg(long, global = true, value_parser = parse_refit)]
    refit: Option<RefitPolicy>,

    /// Forecast file for `evaluate` as `NAME=PATH`; repeatable.
    #[arg(long = "forecast", global = true, value_parser = parse_named_path)]
    forecasts: Vec<(String, PathBuf)>,

    /// Realized panel for `evaluate`.
    #[arg(long, global = true)]
    actuals: Option<PathBuf>,

    /// Benchmark model for the accuracy test; repeatable.
    #[arg(long = "benchmark", global = true)]
    benchmarks: Vec<String>,

    /// Direction convention for `evaluate`.
    #[arg(long, global = true, value_parser = parse_mda_form)]
    mda_form: Option<MdaForm>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Cmd {
    /// Build the unified daily panel from prices, sentiment and trends.
    Ingest,
    /// Select the penalty by anchored walk-forward validation.
    Cv,
    /// Fit a model and write it as JSON.
    Fit,
    /// Run the recursive forecasting exercise.
    Forecast,
    /// Score forecast files against realized values.
    Evaluate,
    /// All-pairs Granger network.
    Granger,
    /// Generate a synthetic sparse VAR panel with its ground truth.
    Simulate,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Ingest => Command::Ingest,
            Cmd::Cv => Command::Cv,
            Cmd::Fit => Command::Fit,
            Cmd::Forecast => Command::Forecast,
            Cmd::Evaluate => Command::Evaluate,
            Cmd::Granger => Command::Granger,
            Cmd::Simulate => Command::Simulate,
        }
    }
}

fn parse_estimator(s: &str) -> Result<Estimator, String> {
    match s {
        "ols" => Ok(Estimator::Ols),
        "lasso" => Ok(Estimator::Lasso),
        "fgls-lasso" => Ok(Estimator::FglsLasso),
        _ => Err(format!("unknown estimator '{s}' (ols, lasso, fgls-lasso)")),
    }
}

fn parse_refit(s: &str) -> Result<RefitPolicy, String> {
    match s {
        "fixed" => Ok(RefitPolicy::Fixed),
        "cv-first-origin" => Ok(RefitPolicy::CvFirstOrigin),
        "cv-every-origin" => Ok(RefitPolicy::CvEveryOrigin),
        _ => Err(format!(
            "unknown refit policy '{s}' (fixed, cv-first-origin, cv-every-origin)"
        )),
    }
}

fn parse_mda_form(s: &str) -> Result<MdaForm, String> {
    match s {
        "forecast-change" => Ok(MdaForm::ForecastChange),
        "forecast-vs-previous-actual" => Ok(MdaForm::ForecastVsPreviousActual),
        _ => Err(format!(
            "unknown mda form '{s}' (forecast-change, forecast-vs-previous-actual)"
        )),
    }
}

fn parse_grid(s: &str) -> Result<(usize, f64), String> {
    let (n, r) = s.split_once(',').ok_or("grid must be N,RATIO")?;
    let n = n
        .trim()
        .parse()
        .map_err(|_| format!("grid size '{n}' is not an integer"))?;
    let r = r
        .trim()
        .parse()
        .map_err(|_| format!("grid ratio '{r}' is not a number"))?;
    Ok((n, r))
}

fn parse_named_path(s: &str) -> Result<(String, PathBuf), String> {
    let (name, path) = s.split_once('=').ok_or("forecast must be NAME=PATH")?;
    if name.is_empty() {
        return Err("forecast name is empty".into());
    }
    Ok((name.to_string(), PathBuf::from(path)))
}

impl Cli {
    fn merge(&self, mut cfg: RunConfig) -> RunConfig {
        macro_rules! take {
            ($($f:ident),*) => {$(
                if let Some(v) = self.$f.clone() {
                    cfg.$f = Some(v);
                }
            )*};
        }
        take!(
            panel, lag, estimator, horizons, origins, threshold, out, seed, threads, model, refit
        );
        if let Some(l) = self.lambda {
            cfg.lambda = Some(l);
        }
        if let Some((n, r)) = self.grid {
            cfg.lambda = None;
            cfg.grid_points = Some(n);
            cfg.grid_ratio = Some(r);
        }
        if !self.forecasts.is_empty() {
            cfg.evaluate.forecasts = self
                .forecasts
                .iter()
                .map(|(name, path)| ForecastSource {
                    name: name.clone(),
                    path: path.clone(),
                })
                .collect();
        }
        if let Some(a) = &self.actuals {
            cfg.evaluate.actuals = Some(a.clone());
        }
        if !self.benchmarks.is_empty() {
            cfg.evaluate.benchmarks = self.benchmarks.clone();
        }
        if let Some(f) = self.mda_form {
            cfg.evaluate.mda_form = Some(f);
        }
        cfg
    }
}

fn run(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    let base = match &cli.config {
        Some(path) => RunConfig::load(path).map_err(|e| CliError::invalid(vec![e]))?,
        None => RunConfig::default(),
    };
    let cfg = cli.merge(base);
    cfg.validate(cli.command.into())
        .map_err(CliError::invalid)?;
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::invalid(vec![format!("thread pool: {e}")]))?;
    }
    match cli.command {
        Cmd::Ingest => commands::ingest(&cfg),
        Cmd::Cv => commands::cv(&cfg),
        Cmd::Fit => commands::fit(&cfg),
        Cmd::Forecast => commands::forecast(&cfg),
        Cmd::Evaluate => commands::evaluate_cmd(&cfg),
        Cmd::Granger => commands::granger(&cfg),
        Cmd::Simulate => commands::simulate_cmd(&cfg),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SPARSEVAR_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e)
            if matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            ) =>
        {
            e.exit()
        }
        Err(e) => {
            let text = e.to_string();
            let first = text
                .lines()
                .next()
                .unwrap_or("")
                .trim_start_matches("error: ")
                .to_string();
            report("usage", vec![first]);
            return ExitCode::from(2);
        }
    };
    match run(&cli) {
        Ok(paths) => {
            for p in paths {
                log::info!("wrote {}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            let messages = match &e {
                CliError::Config(m) => m.clone(),
                other => vec![other.to_string()],
            };
            report(e.kind(), messages);
            ExitCode::from(e.exit_code())
        }
    }
}
