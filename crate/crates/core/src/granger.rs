//! Post-double-selection Granger causality tests and all-pairs networks.
//!
//! The lags of the tested block are always kept. Controls are the union of
//! the lag regressors picked by a LASSO of the effect on everything else
//! and by a LASSO of each tested regressor on everything else. A score test
//! of the block then runs on the least-squares fit with those controls.

use std::io::Write;

use log::warn;
use ndarray::{Array1, Array2, ArrayView1, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::data_model::{lag_embed, standardize, LagEmbedding, TimePanel};
use crate::error::{Error, Result};
use crate::io::fmt_f64;
use crate::lasso_var::{bic_value, coordinate_descent, LassoConfig, Moments};
use crate::linalg::{design_from_rows, least_squares};

/// Default significance level for drawing an edge.
pub const DEFAULT_THRESHOLD: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrangerSpec {
    pub effect: String,
    pub causes: Vec<String>,
    pub p: usize,
    /// Tolerance, sweep cap and grid for the selection stages.
    pub lasso: LassoConfig,
    /// Heteroskedasticity-robust score statistic.
    pub robust: bool,
}

impl GrangerSpec {
    pub fn new(effect: impl Into<String>, causes: Vec<String>, p: usize) -> Self {
        Self {
            effect: effect.into(),
            causes,
            p,
            lasso: LassoConfig::default(),
            robust: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrangerResult {
    pub effect: String,
    pub causes: Vec<String>,
    pub lm_statistic: f64,
    pub p_value: f64,
    pub degrees_of_freedom: usize,
    /// Names (`series.lN`) of the control regressors kept.
    pub selected_controls: Vec<String>,
    /// BIC-chosen penalty of the effect regression.
    pub lambda_effect: f64,
    /// BIC-chosen penalty per tested regressor.
    pub lambda_causes: Vec<f64>,
    pub observations: usize,
}

/// Penalized regressions that share one regressor set.
struct Selector<'a> {
    gram: Array2<f64>,
    regressors: Array2<f64>,
    n: usize,
    cfg: &'a LassoConfig,
}

impl<'a> Selector<'a> {
    fn new(regressors: Array2<f64>, cfg: &'a LassoConfig) -> Self {
        let n = regressors.ncols();
        let gram = regressors.dot(&regressors.t()) / n as f64;
        Self {
            gram,
            regressors,
            n,
            cfg,
        }
    }

    /// Support of the BIC-best fit along a warm-started descending path,
    /// and its penalty. Ties go to the larger penalty.
    fn select(&self, target: ArrayView1<f64>) -> (Vec<usize>, f64) {
        let nf = self.n as f64;
        let m = self.regressors.nrows();
        if m == 0 {
            return (Vec::new(), 0.0);
        }
        let q = self.regressors.dot(&target) / nf;
        let moments = Moments {
            gram: self.gram.view(),
            q: q.view(),
            yy: target.dot(&target) / nf,
        };
        let grid = self.cfg.grid.lambdas(moments.lambda_max());
        let mut start = Array1::<f64>::zeros(m);
        let mut best: Option<(f64, Vec<usize>, f64)> = None;
        for lam in grid {
            let out = coordinate_descent(
                &moments,
                lam,
                start,
                self.cfg.tol,
                self.cfg.max_sweeps,
                None,
            );
            if !out.converged {
                warn!("selection fit at penalty {lam} did not converge");
            }
            let support: Vec<usize> = (0..m).filter(|j| out.coef[*j] != 0.0).collect();
            let bic = bic_value(
                moments.mean_rss(out.coef.view()) * nf,
                self.n,
                support.len(),
            );
            if best.as_ref().is_none_or(|(b, _, _)| bic < *b) {
                best = Some((bic, support, lam));
            }
            start = out.coef;
        }
        let (_, support, lam) = best.expect("nonempty grid");
        (support, lam)
    }
}

fn validate(panel: &TimePanel, spec: &GrangerSpec) -> Result<(usize, Vec<usize>)> {
    let mut problems = Vec::new();
    if spec.p == 0 {
        problems.push("lag order must be at least 1".to_string());
    }
    if spec.causes.is_empty() {
        problems.push("the tested block is empty".to_string());
    }
    let effect = panel.column_index(&spec.effect);
    if effect.is_none() {
        problems.push(format!("unknown effect series '{}'", spec.effect));
    }
    let mut causes = Vec::new();
    for c in &spec.causes {
        match panel.column_index(c) {
            None => problems.push(format!("unknown cause series '{c}'")),
            Some(i) if causes.contains(&i) => problems.push(format!("cause '{c}' listed twice")),
            Some(i) => causes.push(i),
        }
    }
    if spec.causes.contains(&spec.effect) {
        problems.push(format!(
            "effect '{}' cannot be among its own causes",
            spec.effect
        ));
    }
    if let Err(e) = spec.lasso.validate() {
        problems.push(e.to_string());
    }
    if problems.is_empty() {
        Ok((effect.expect("checked"), causes))
    } else {
        Err(Error::InvalidSpec(problems.join("; ")))
    }
}

/// Tests whether the lags of `spec.causes` jointly help predict
/// `spec.effect` given the lags of every panel series.
pub fn pds_granger(panel: &TimePanel, spec: &GrangerSpec) -> Result<GrangerResult> {
    validate(panel, spec)?;
    let (std_panel, _) = standardize(panel)?;
    let embed = lag_embed(&std_panel, spec.p)?;
    pds_on_embedding(&embed, spec)
}

fn pds_on_embedding(embed: &LagEmbedding, spec: &GrangerSpec) -> Result<GrangerResult> {
    let k = embed.k();
    let n = embed.n();
    let effect = embed
        .names
        .iter()
        .position(|s| *s == spec.effect)
        .expect("validated effect");
    let cause_cols: Vec<usize> = spec
        .causes
        .iter()
        .map(|c| {
            embed
                .names
                .iter()
                .position(|s| s == c)
                .expect("validated cause")
        })
        .collect();
    let tested: Vec<usize> = (0..spec.p)
        .flat_map(|lag| cause_cols.iter().map(move |c| lag * k + c))
        .collect();
    let others: Vec<usize> = (0..embed.z.nrows())
        .filter(|r| !tested.contains(r))
        .collect();

    let selector = Selector::new(embed.z.select(Axis(0), &others), &spec.lasso);
    let (effect_support, lambda_effect) = selector.select(embed.y.row(effect));
    let mut chosen: Vec<bool> = vec![false; others.len()];
    for j in &effect_support {
        chosen[*j] = true;
    }
    let mut lambda_causes = Vec::with_capacity(tested.len());
    for row in &tested {
        let (support, lam) = selector.select(embed.z.row(*row));
        lambda_causes.push(lam);
        for j in support {
            chosen[j] = true;
        }
    }
    let controls: Vec<usize> = others
        .iter()
        .zip(&chosen)
        .filter(|(_, c)| **c)
        .map(|(r, _)| *r)
        .collect();

    let regressors = tested.len() + controls.len();
    if regressors >= n {
        return Err(Error::TooManyRegressors {
            regressors,
            observations: n,
        });
    }
    let mut full_rows = tested.clone();
    full_rows.extend(&controls);
    let y = embed.y.row(effect);
    let collinear = |cols: Vec<usize>, rows: &[usize]| {
        Error::Collinear(
            cols.iter()
                .map(|c| embed.regressor_name(rows[*c]))
                .collect(),
        )
    };
    let restricted = least_squares(design_from_rows(embed.z.view(), &controls).view(), y)
        .map_err(|c| collinear(c, &controls))?;
    let full = least_squares(design_from_rows(embed.z.view(), &full_rows).view(), y)
        .map_err(|c| collinear(c, &full_rows))?;

    let df = tested.len();
    assert_eq!(
        df,
        cause_cols.len() * spec.p,
        "tested block size must be |I|·p"
    );
    assert!(
        full_rows[..df] == tested[..],
        "tested block must enter the final regression"
    );

    let nf = n as f64;
    let lm = if spec.robust {
        robust_lm(embed, &tested, &controls, &restricted.residuals)?
    } else if restricted.rss > 0.0 {
        nf * (1.0 - full.rss / restricted.rss)
    } else {
        0.0
    };
    let lm = lm.max(0.0);
    let chi = ChiSquared::new(df as f64).map_err(|e| Error::InvalidSpec(e.to_string()))?;
    let p_value = chi.sf(lm).clamp(0.0, 1.0);
    Ok(GrangerResult {
        effect: spec.effect.clone(),
        causes: spec.causes.clone(),
        lm_statistic: lm,
        p_value,
        degrees_of_freedom: df,
        selected_controls: controls.iter().map(|r| embed.regressor_name(*r)).collect(),
        lambda_effect,
        lambda_causes,
        observations: n,
    })
}

/// Score statistic robust to heteroskedasticity: partial the controls out
/// of each tested regressor, weight by the restricted residual and take
/// `N − RSS` of regressing a column of ones on the products.
fn robust_lm(
    embed: &LagEmbedding,
    tested: &[usize],
    controls: &[usize],
    resid: &Array1<f64>,
) -> Result<f64> {
    let n = embed.n();
    let control_design = design_from_rows(embed.z.view(), controls);
    let mut products = Array2::<f64>::zeros((n, tested.len()));
    for (j, row) in tested.iter().enumerate() {
        let fit = least_squares(control_design.view(), embed.z.row(*row)).map_err(|cols| {
            Error::Collinear(
                cols.iter()
                    .map(|c| embed.regressor_name(controls[*c]))
                    .collect(),
            )
        })?;
        let mut col = products.column_mut(j);
        col.assign(&(&fit.residuals * resid));
    }
    let ones = Array1::<f64>::ones(n);
    let fit = least_squares(products.view(), ones.view()).map_err(|cols| {
        Error::Collinear(
            cols.iter()
                .map(|c| embed.regressor_name(tested[*c]))
                .collect(),
        )
    })?;
    Ok(n as f64 - fit.rss)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausalEdge {
    pub from: String,
    pub to: String,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairFailure {
    pub from: String,
    pub to: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrangerNetwork {
    /// Tested variables, in panel order.
    pub names: Vec<String>,
    /// `p_values[[to, from]]`; NaN on the diagonal and for failed pairs.
    pub p_values: Array2<f64>,
    pub edges: Vec<CausalEdge>,
    pub failures: Vec<PairFailure>,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    /// Variables to test among; all panel series when empty. Every panel
    /// series is conditioned on regardless.
    pub variables: Vec<String>,
    pub p: usize,
    pub threshold: f64,
    pub lasso: LassoConfig,
    pub robust: bool,
}

impl NetworkConfig {
    pub fn new(p: usize) -> Self {
        Self {
            variables: Vec::new(),
            p,
            threshold: DEFAULT_THRESHOLD,
            lasso: LassoConfig::default(),
            robust: false,
        }
    }
}

/// Runs [`pds_granger`] with a single cause for every ordered pair of
/// tested variables. Pair-level errors are recorded and skipped.
pub fn granger_network(panel: &TimePanel, cfg: &NetworkConfig) -> Result<GrangerNetwork> {
    if !(0.0..=1.0).contains(&cfg.threshold) {
        return Err(Error::InvalidConfig(format!(
            "threshold {} must be in [0, 1]",
            cfg.threshold
        )));
    }
    let names: Vec<String> = if cfg.variables.is_empty() {
        panel.names().to_vec()
    } else {
        let unknown: Vec<&String> = cfg
            .variables
            .iter()
            .filter(|v| panel.column_index(v).is_none())
            .collect();
        if !unknown.is_empty() {
            return Err(Error::InvalidSpec(format!("unknown series {unknown:?}")));
        }
        panel
            .names()
            .iter()
            .filter(|n| cfg.variables.contains(n))
            .cloned()
            .collect()
    };
    let (std_panel, _) = standardize(panel)?;
    let embed = lag_embed(&std_panel, cfg.p)?;
    let pairs: Vec<(usize, usize)> = (0..names.len())
        .flat_map(|to| {
            (0..names.len())
                .filter(move |f| *f != to)
                .map(move |from| (to, from))
        })
        .collect();
    let results: Vec<Result<GrangerResult>> = pairs
        .par_iter()
        .map(|&(to, from)| {
            let spec = GrangerSpec {
                effect: names[to].clone(),
                causes: vec![names[from].clone()],
                p: cfg.p,
                lasso: cfg.lasso,
                robust: cfg.robust,
            };
            validate(panel, &spec)?;
            pds_on_embedding(&embed, &spec)
        })
        .collect();

    let m = names.len();
    let mut p_values = Array2::<f64>::from_elem((m, m), f64::NAN);
    let mut failures = Vec::new();
    for (&(to, from), r) in pairs.iter().zip(results) {
        match r {
            Ok(res) => p_values[[to, from]] = res.p_value,
            Err(e) => {
                warn!("pair {} -> {} failed: {e}", names[from], names[to]);
                failures.push(PairFailure {
                    from: names[from].clone(),
                    to: names[to].clone(),
                    error: e.to_string(),
                });
            }
        }
    }
    let edges = edges_below(&names, &p_values, cfg.threshold);
    Ok(GrangerNetwork {
        names,
        p_values,
        edges,
        failures,
        threshold: cfg.threshold,
    })
}

/// Edges with `p < threshold`, ordered by source then target.
pub fn edges_below(names: &[String], p_values: &Array2<f64>, threshold: f64) -> Vec<CausalEdge> {
    let m = names.len();
    let mut edges = Vec::new();
    for from in 0..m {
        for to in 0..m {
            let p = p_values[[to, from]];
            if from != to && p < threshold {
                edges.push(CausalEdge {
                    from: names[from].clone(),
                    to: names[to].clone(),
                    p_value: p,
                });
            }
        }
    }
    edges
}

impl GrangerNetwork {
    /// `from,to,p_value`.
    pub fn write_edges_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["from", "to", "p_value"])?;
        for e in &self.edges {
            w.write_record([&e.from, &e.to, &fmt_f64(e.p_value)])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Rows are effects, columns causes; the diagonal and failed pairs are
    /// empty.
    pub fn write_matrix_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["to".to_string()];
        header.extend(self.names.iter().cloned());
        w.write_record(&header)?;
        for (to, name) in self.names.iter().enumerate() {
            let mut rec = vec![name.clone()];
            rec.extend(self.p_values.row(to).iter().map(|p| {
                if p.is_nan() {
                    String::new()
                } else {
                    fmt_f64(*p)
                }
            }));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// `from,to,error` for pairs that could not be tested.
    pub fn write_failures_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["from", "to", "error"])?;
        for f in &self.failures {
            w.write_record([&f.from, &f.to, &f.error])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Graphviz description of the edge set.
    pub fn write_dot<W: Write>(&self, mut writer: W) -> Result<()> {
        writeln!(writer, "digraph granger {{")?;
        for n in &self.names {
            writeln!(writer, "  \"{}\";", n.replace('"', "\\\""))?;
        }
        for e in &self.edges {
            writeln!(
                writer,
                "  \"{}\" -> \"{}\" [label=\"{:.4}\"];",
                e.from.replace('"', "\\\""),
                e.to.replace('"', "\\\""),
                e.p_value
            )?;
        }
        writeln!(writer, "}}")?;
        Ok(())
    }
}
