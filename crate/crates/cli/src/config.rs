use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::Deserialize;
use sparsevar::cross_validation::WalkForwardPlan;
use sparsevar::evaluation::MdaForm;
use sparsevar::forecasting::RefitPolicy;
use sparsevar::ingestion::FillPolicy;
use sparsevar::lasso_var::GridSpec;
use sparsevar::Estimator;

pub const DEFAULT_LAG: usize = 14;
pub const DEFAULT_HORIZONS: usize = 4;

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub panel: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub lag: Option<usize>,
    pub estimator: Option<Estimator>,
    pub lambda: Option<f64>,
    pub grid_points: Option<usize>,
    pub grid_ratio: Option<f64>,
    pub tol: Option<f64>,
    pub max_sweeps: Option<usize>,
    pub horizons: Option<usize>,
    /// `START:END`
    pub origins: Option<String>,
    pub refit: Option<RefitPolicy>,
    pub threshold: Option<f64>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub model: Option<PathBuf>,
    pub cv: CvSection,
    pub ingest: IngestSection,
    pub simulate: SimulateSection,
    pub evaluate: EvaluateSection,
    pub granger: GrangerSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CvSection {
    pub n_splits: usize,
    pub test_size: usize,
    pub min_train: usize,
}

impl Default for CvSection {
    fn default() -> Self {
        Self {
            n_splits: 3,
            test_size: 30,
            min_train: 200,
        }
    }
}

impl CvSection {
    pub fn plan(&self) -> WalkForwardPlan {
        WalkForwardPlan::new(self.n_splits, self.test_size, self.min_train)
    }
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct IngestSection {
    /// Wide CSV of prices (`date,<series>...`).
    pub prices: Option<PathBuf>,
    pub sentiment: Vec<SentimentSource>,
    pub trends: Vec<TrendsSource>,
    pub alpha: Option<f64>,
    pub fill: Option<FillPolicy>,
    /// Extra wide CSVs (for example volumes) joined on date as-is.
    pub extra: Vec<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SentimentSource {
    pub name: String,
    pub path: PathBuf,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrendsSource {
    pub name: String,
    pub monthly: PathBuf,
    pub chunks: Vec<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateSection {
    pub k: usize,
    pub t: usize,
    pub density: f64,
    pub magnitude: f64,
    pub innovation_sd: f64,
    /// AR(1) error coefficient; iid errors when absent.
    pub error_rho: Option<f64>,
    pub burn_in: usize,
    pub start_date: Option<NaiveDate>,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self {
            k: 5,
            t: 500,
            density: 0.2,
            magnitude: 0.3,
            innovation_sd: 1.0,
            error_rho: None,
            burn_in: sparsevar::synthetic::DEFAULT_BURN_IN,
            start_date: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluateSection {
    pub forecasts: Vec<ForecastSource>,
    pub actuals: Option<PathBuf>,
    pub benchmarks: Vec<String>,
    pub mda_form: Option<MdaForm>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForecastSource {
    pub name: String,
    pub path: PathBuf,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct GrangerSection {
    pub variables: Vec<String>,
    pub robust: bool,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        let mut cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| format!("config {}: {}", path.display(), e.message()))?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    /// Relative paths in a config file are taken relative to that file.
    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [&mut self.panel, &mut self.out, &mut self.model]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
        if let Some(p) = &mut self.ingest.prices {
            fix(p);
        }
        self.ingest.extra.iter_mut().for_each(fix);
        for s in &mut self.ingest.sentiment {
            fix(&mut s.path);
        }
        for t in &mut self.ingest.trends {
            fix(&mut t.monthly);
            t.chunks.iter_mut().for_each(fix);
        }
        for f in &mut self.evaluate.forecasts {
            fix(&mut f.path);
        }
        if let Some(p) = &mut self.evaluate.actuals {
            fix(p);
        }
    }

    pub fn lag(&self) -> usize {
        self.lag.unwrap_or(DEFAULT_LAG)
    }

    pub fn estimator(&self) -> Estimator {
        self.estimator.unwrap_or(Estimator::FglsLasso)
    }

    pub fn horizons(&self) -> usize {
        self.horizons.unwrap_or(DEFAULT_HORIZONS)
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
            .unwrap_or(sparsevar::granger::DEFAULT_THRESHOLD)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("."))
    }

    pub fn grid(&self) -> GridSpec {
        let d = GridSpec::default();
        GridSpec {
            n_points: self.grid_points.unwrap_or(d.n_points),
            ratio: self.grid_ratio.unwrap_or(d.ratio),
        }
    }

    pub fn lasso(&self) -> sparsevar::LassoConfig {
        let d = sparsevar::LassoConfig::default();
        sparsevar::LassoConfig {
            lambda: self.lambda.unwrap_or(0.0),
            tol: self.tol.unwrap_or(d.tol),
            max_sweeps: self.max_sweeps.unwrap_or(d.max_sweeps),
            grid: self.grid(),
        }
    }

    pub fn origin_range(&self) -> Result<Option<(NaiveDate, NaiveDate)>, String> {
        let Some(spec) = &self.origins else {
            return Ok(None);
        };
        let (a, b) = spec
            .split_once(':')
            .ok_or_else(|| format!("origins '{spec}' must be START:END"))?;
        let parse = |s: &str| {
            NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d")
                .map_err(|_| format!("origin date '{s}' is not YYYY-MM-DD"))
        };
        let (a, b) = (parse(a)?, parse(b)?);
        if b < a {
            return Err(format!("origins end {b} precedes start {a}"));
        }
        Ok(Some((a, b)))
    }

    /// Checks everything the chosen command needs and reports every
    /// problem at once.
    pub fn validate(&self, command: Command) -> Result<(), Vec<String>> {
        let mut v = Vec::new();
        let need_file = |v: &mut Vec<String>, what: &str, p: &Option<PathBuf>| match p {
            None => v.push(format!("{what} path is required")),
            Some(p) if !p.is_file() => {
                v.push(format!("{what} file {} does not exist", p.display()))
            }
            _ => {}
        };
        if self.lag == Some(0) {
            v.push("lag must be at least 1".into());
        }
        if self.horizons == Some(0) {
            v.push("horizons must be at least 1".into());
        }
        if let Some(l) = self.lambda {
            if !(l >= 0.0) || !l.is_finite() {
                v.push(format!("lambda must be finite and >= 0, got {l}"));
            }
        }
        if self.grid_points == Some(0) {
            v.push("grid must have at least one point".into());
        }
        if let Some(r) = self.grid_ratio {
            if !(r > 0.0 && r <= 1.0) {
                v.push(format!("grid ratio must be in (0, 1], got {r}"));
            }
        }
        if let Some(t) = self.tol {
            if !(t > 0.0) {
                v.push(format!("tol must be positive, got {t}"));
            }
        }
        if let Some(t) = self.threshold {
            if !(0.0..=1.0).contains(&t) {
                v.push(format!("threshold must be in [0, 1], got {t}"));
            }
        }
        if self.threads == Some(0) {
            v.push("threads must be at least 1".into());
        }
        if let Err(e) = self.origin_range() {
            v.push(e);
        }
        let cv = &self.cv;
        if cv.n_splits == 0 || cv.test_size == 0 || cv.min_train == 0 {
            v.push("cv n_splits, test_size and min_train must be positive".into());
        }
        match command {
            Command::Ingest => {
                let i = &self.ingest;
                need_file(&mut v, "ingest prices", &i.prices);
                for s in &i.sentiment {
                    if !s.path.is_file() {
                        v.push(format!(
                            "sentiment file {} does not exist",
                            s.path.display()
                        ));
                    }
                }
                for t in &i.trends {
                    if !t.monthly.is_file() {
                        v.push(format!(
                            "trends monthly file {} does not exist",
                            t.monthly.display()
                        ));
                    }
                    if t.chunks.is_empty() {
                        v.push(format!("trends source '{}' lists no chunks", t.name));
                    }
                    for c in &t.chunks {
                        if !c.is_file() {
                            v.push(format!("trends chunk {} does not exist", c.display()));
                        }
                    }
                }
                for e in &i.extra {
                    if !e.is_file() {
                        v.push(format!("extra file {} does not exist", e.display()));
                    }
                }
                if let Some(a) = i.alpha {
                    if !(a > 0.0) {
                        v.push(format!("alpha must be positive, got {a}"));
                    }
                }
            }
            Command::Cv | Command::Fit | Command::Granger => {
                need_file(&mut v, "panel", &self.panel)
            }
            Command::Forecast => {
                need_file(&mut v, "panel", &self.panel);
                if self.origins.is_none() {
                    v.push("origins START:END are required".into());
                }
                if self.model.is_some() {
                    need_file(&mut v, "model", &self.model);
                }
                if self.refit == Some(RefitPolicy::Fixed) && self.lambda.is_none() {
                    v.push("fixed refit policy needs a lambda".into());
                }
            }
            Command::Evaluate => {
                let e = &self.evaluate;
                if e.forecasts.is_empty() {
                    v.push("at least one forecast file is required".into());
                }
                for f in &e.forecasts {
                    if !f.path.is_file() {
                        v.push(format!("forecast file {} does not exist", f.path.display()));
                    }
                }
                if e.actuals.is_some() {
                    need_file(&mut v, "actuals", &e.actuals);
                }
                for b in &e.benchmarks {
                    if !e.forecasts.iter().any(|f| &f.name == b) {
                        v.push(format!("benchmark '{b}' is not a listed forecast"));
                    }
                }
            }
            Command::Simulate => {
                let s = &self.simulate;
                if s.k == 0 || s.t == 0 {
                    v.push("simulate k and t must be positive".into());
                }
                if !(s.density > 0.0 && s.density <= 1.0) {
                    v.push(format!(
                        "simulate density must be in (0, 1], got {}",
                        s.density
                    ));
                }
                if !(s.innovation_sd >= 0.0) {
                    v.push(format!(
                        "simulate innovation_sd must be >= 0, got {}",
                        s.innovation_sd
                    ));
                }
                if let Some(r) = s.error_rho {
                    if !(r.abs() < 1.0) {
                        v.push(format!("simulate error_rho must be in (-1, 1), got {r}"));
                    }
                }
            }
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(v)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Ingest,
    Cv,
    Fit,
    Forecast,
    Evaluate,
    Granger,
    Simulate,
}
