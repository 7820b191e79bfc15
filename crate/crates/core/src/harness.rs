//! Seeded recovery experiments: sample, fit, compare with the true graph,
//! and aggregate success rates over a grid of sample sizes.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{
    default_c_grid, fit_glasso_warm, fit_nbd_lasso, select_lambda_cv, CvMethod, Lambda, LassoConfig, DEFAULT_FOLDS,
};
use crate::error::{Error, Result};
use crate::greedy::global::fit_global_greedy;
use crate::greedy::neighborhood::{combine_neighborhoods, fit_all_neighborhoods, fit_all_neighborhoods_moments};
use crate::greedy::{stopping_threshold, GreedyConfig, DEFAULT_NU};
use crate::models::{sample_covariance, sample_gaussian, trial_seed, Family, Model, ModelSpec};

/// Stopping constant `c` in `ε = c·d·ln p / n` for the global estimator,
/// chosen from the grid sweep recorded in `tuning/`.
pub const DEFAULT_C_EPS: f64 = 4.0;

/// Stopping constant for the neighborhood estimator, from the same sweep.
pub const DEFAULT_C_EPS_NBD: f64 = 3.0;

pub const DEFAULT_TRIALS: usize = 50;

/// Duality-gap tolerance for graphical lasso fits inside the harness.
const GLASSO_TOL: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    GlobalGreedy,
    NbdGreedy,
    Glasso,
    NbdLasso,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::GlobalGreedy,
        Method::NbdGreedy,
        Method::Glasso,
        Method::NbdLasso,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::GlobalGreedy => "global-greedy",
            Method::NbdGreedy => "nbd-greedy",
            Method::Glasso => "glasso",
            Method::NbdLasso => "nbd-lasso",
        }
    }

    pub fn is_greedy(&self) -> bool {
        matches!(self, Method::GlobalGreedy | Method::NbdGreedy)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown method {s:?}")))
    }
}

/// `n` for a control parameter `β`: `β·70·d·ln p` for chain, grid, diamond
/// and custom models, `β·200·ln(d·p)` for stars; rounded, at least 2.
pub fn beta_to_n(family: Family, p: usize, d: usize, beta: f64) -> Result<usize> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "beta must be finite and > 0, got {beta}"
        )));
    }
    let n = beta * beta_scale(family, p, d);
    Ok((n.round() as usize).max(2))
}

/// Inverse of [`beta_to_n`] before rounding.
pub fn n_to_beta(family: Family, p: usize, d: usize, n: usize) -> f64 {
    n as f64 / beta_scale(family, p, d)
}

fn beta_scale(family: Family, p: usize, d: usize) -> f64 {
    let d = d.max(1) as f64;
    let p = p as f64;
    match family {
        Family::Star => 200.0 * (d * p).ln(),
        _ => 70.0 * d * p.ln(),
    }
}

/// Sample sizes to visit: either `β` values or explicit `n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleGrid {
    Beta(Vec<f64>),
    N(Vec<usize>),
}

/// Penalty selection for the ℓ1 baselines.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PenaltySettings {
    /// Fixed `c` in `λ = c·√(ln p / n)`; when absent `c` is chosen by CV.
    #[serde(default)]
    pub c_lambda: Option<f64>,
    #[serde(default = "default_folds")]
    pub cv_folds: usize,
    #[serde(default = "default_c_grid")]
    pub c_grid: Vec<f64>,
}

fn default_folds() -> usize {
    DEFAULT_FOLDS
}

impl Default for PenaltySettings {
    fn default() -> Self {
        Self {
            c_lambda: None,
            cv_folds: DEFAULT_FOLDS,
            c_grid: default_c_grid(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub model: ModelSpec,
    pub methods: Vec<Method>,
    pub grid: SampleGrid,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_c_eps")]
    pub c_eps: f64,
    /// Stopping constant for `nbd-greedy`; defaults to [`DEFAULT_C_EPS_NBD`].
    #[serde(default)]
    pub c_eps_nbd: Option<f64>,
    #[serde(default = "default_nu")]
    pub nu: f64,
    #[serde(default)]
    pub penalty: PenaltySettings,
    /// Fit the greedy methods on exact population moments instead of samples.
    #[serde(default)]
    pub population: bool,
}

fn default_trials() -> usize {
    DEFAULT_TRIALS
}

fn default_c_eps() -> f64 {
    DEFAULT_C_EPS
}

fn default_nu() -> f64 {
    DEFAULT_NU
}

impl ExperimentSpec {
    pub fn new(model: ModelSpec, methods: Vec<Method>, grid: SampleGrid) -> Self {
        Self {
            model,
            methods,
            grid,
            trials: DEFAULT_TRIALS,
            base_seed: 0,
            c_eps: DEFAULT_C_EPS,
            c_eps_nbd: None,
            nu: DEFAULT_NU,
            penalty: PenaltySettings::default(),
            population: false,
        }
    }

    pub fn c_eps_for(&self, method: Method) -> f64 {
        match method {
            Method::NbdGreedy => self.c_eps_nbd.unwrap_or(DEFAULT_C_EPS_NBD),
            _ => self.c_eps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidParameter("trials must be >= 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidParameter("no methods given".into()));
        }
        match &self.grid {
            SampleGrid::Beta(b) if b.is_empty() => return Err(Error::InvalidParameter("empty beta grid".into())),
            SampleGrid::N(n) if n.is_empty() => return Err(Error::InvalidParameter("empty n grid".into())),
            SampleGrid::Beta(b) => {
                if let Some(x) = b.iter().find(|x| !(**x > 0.0) || !x.is_finite()) {
                    return Err(Error::InvalidParameter(format!("beta values must be > 0, got {x}")));
                }
            }
            SampleGrid::N(n) => {
                if n.iter().any(|&x| x < 2) {
                    return Err(Error::InvalidParameter("n values must be >= 2".into()));
                }
            }
        }
        for c in [self.c_eps, self.c_eps_for(Method::NbdGreedy)] {
            if !(c > 0.0) || !c.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "stopping constant must be > 0, got {c}"
                )));
            }
        }
        if !(self.nu > 0.0 && self.nu < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "nu must lie in (0, 1), got {}",
                self.nu
            )));
        }
        if self.population {
            if let Some(m) = self.methods.iter().find(|m| !m.is_greedy()) {
                return Err(Error::InvalidParameter(format!(
                    "population mode only applies to greedy methods, got {m}"
                )));
            }
        }
        if self.penalty.c_lambda.is_none() && (self.penalty.cv_folds < 2 || self.penalty.c_grid.is_empty()) {
            return Err(Error::InvalidParameter(
                "cross-validation needs >= 2 folds and a nonempty grid".into(),
            ));
        }
        Ok(())
    }

    /// `(n, β)` for every grid point, in grid order.
    fn cells(&self, model: &Model) -> Result<Vec<(usize, f64)>> {
        let (family, p, d) = (self.model.family, self.model.p, model.max_degree());
        match &self.grid {
            SampleGrid::Beta(b) => b
                .iter()
                .map(|&beta| Ok((beta_to_n(family, p, d, beta)?, beta)))
                .collect(),
            SampleGrid::N(ns) => Ok(ns.iter().map(|&n| (n, n_to_beta(family, p, d, n))).collect()),
        }
    }

    pub fn read_json<R: Read>(reader: R) -> Result<Self> {
        Ok(serde_json::from_reader(reader)?)
    }
}

fn greedy_config(spec: &ExperimentSpec, method: Method, d: usize, p: usize, n: usize) -> GreedyConfig {
    GreedyConfig::new(stopping_threshold(spec.c_eps_for(method), d, p, n)).with_nu(spec.nu)
}

/// Fits `method` on one seeded sample and reports exact recovery.
///
/// Global methods succeed when the estimated edge set equals the truth;
/// neighborhood methods when every node's neighborhood does.
pub fn run_trial(spec: &ExperimentSpec, model: &Model, method: Method, n: usize, trial: u64) -> Result<bool> {
    let p = model.sigma.dim();
    let d = model.max_degree();
    if spec.population {
        return match method {
            Method::GlobalGreedy => {
                let fit = fit_global_greedy(&model.sigma, &greedy_config(spec, method, d, p, n))?;
                Ok(fit.state.support() == &model.edges)
            }
            Method::NbdGreedy => {
                let states = fit_all_neighborhoods_moments(&model.sigma, &greedy_config(spec, method, d, p, n))?;
                Ok(combine_neighborhoods(&states)?.neighborhoods_match(&model.edges))
            }
            other => Err(Error::InvalidParameter(format!(
                "population mode only applies to greedy methods, got {other}"
            ))),
        };
    }

    let x = sample_gaussian(&model.sigma, n, trial_seed(spec.base_seed, trial))?;
    match method {
        Method::GlobalGreedy => {
            let fit = fit_global_greedy(&sample_covariance(&x), &greedy_config(spec, method, d, p, n))?;
            Ok(fit.state.support() == &model.edges)
        }
        Method::NbdGreedy => {
            let states = fit_all_neighborhoods(&x, &greedy_config(spec, method, d, p, n))?;
            Ok(combine_neighborhoods(&states)?.neighborhoods_match(&model.edges))
        }
        Method::Glasso => {
            let cfg = LassoConfig::default().with_tol(GLASSO_TOL);
            let c = match spec.penalty.c_lambda {
                Some(c) => c,
                None => select_lambda_cv(&x, spec.penalty.cv_folds, &spec.penalty.c_grid, CvMethod::Glasso, &cfg)?.c,
            };
            let lambda = Lambda::Scaled(c).value(p, n);
            let fit = fit_glasso_warm(&sample_covariance(&x), lambda, &cfg, None)?;
            Ok(fit.edges() == model.edges)
        }
        Method::NbdLasso => {
            let cfg = LassoConfig::default();
            let c = match spec.penalty.c_lambda {
                Some(c) => c,
                None => select_lambda_cv(&x, spec.penalty.cv_folds, &spec.penalty.c_grid, CvMethod::Nbd, &cfg)?.c,
            };
            let graph = fit_nbd_lasso(
                &x,
                &LassoConfig {
                    lambda: Lambda::Scaled(c),
                    ..cfg
                },
                false,
            )?;
            Ok(graph.neighborhoods_match(&model.edges))
        }
    }
}

/// One aggregated cell of a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub family: Family,
    pub p: usize,
    pub d: usize,
    pub n: usize,
    pub beta: f64,
    pub method: Method,
    pub successes: usize,
    pub trials: usize,
    pub success_prob: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

pub const CSV_HEADER: [&str; 9] = [
    "family",
    "p",
    "d",
    "n",
    "beta",
    "method",
    "successes",
    "trials",
    "success_prob",
];

/// Runs every (method, grid point, trial) on a pool of `threads` workers.
/// Output depends only on `spec`, never on the worker count.
pub fn run_sweep(spec: &ExperimentSpec, threads: usize) -> Result<SweepResult> {
    spec.validate()?;
    let model = spec.model.build()?;
    let cells = spec.cells(&model)?;
    let d = model.max_degree();

    let mut jobs = Vec::new();
    for &method in &spec.methods {
        for &(n, beta) in &cells {
            for t in 0..spec.trials {
                jobs.push((method, n, beta, t as u64));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    let outcomes: Vec<bool> = pool.install(|| {
        jobs.par_iter()
            .map(|&(method, n, _, t)| match run_trial(spec, &model, method, n, t) {
                Ok(ok) => ok,
                Err(e) => {
                    log::warn!("{method} n={n} trial={t}: {e}");
                    false
                }
            })
            .collect()
    });

    let mut rows = Vec::new();
    for (chunk, job) in outcomes.chunks(spec.trials).zip(jobs.chunks(spec.trials)) {
        let (method, n, beta, _) = job[0];
        let successes = chunk.iter().filter(|&&ok| ok).count();
        rows.push(SweepRow {
            family: spec.model.family,
            p: spec.model.p,
            d,
            n,
            beta,
            method,
            successes,
            trials: spec.trials,
            success_prob: successes as f64 / spec.trials as f64,
        });
    }
    rows.sort_by(|a, b| {
        a.method
            .as_str()
            .cmp(b.method.as_str())
            .then(a.beta.total_cmp(&b.beta))
            .then(a.n.cmp(&b.n))
    });
    Ok(SweepResult { rows })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Jsonl,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "jsonl" => Ok(OutputFormat::Jsonl),
            other => Err(Error::InvalidParameter(format!("unknown format {other:?}"))),
        }
    }
}

impl SweepResult {
    pub fn emit<W: Write>(&self, writer: W, format: OutputFormat) -> Result<()> {
        match format {
            OutputFormat::Csv => self.write_csv(writer),
            OutputFormat::Jsonl => self.write_jsonl(writer),
        }
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
        w.write_record(CSV_HEADER)?;
        for r in &self.rows {
            w.write_record([
                r.family.to_string(),
                r.p.to_string(),
                r.d.to_string(),
                r.n.to_string(),
                r.beta.to_string(),
                r.method.to_string(),
                r.successes.to_string(),
                r.trials.to_string(),
                r.success_prob.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_jsonl<W: Write>(&self, mut writer: W) -> Result<()> {
        for r in &self.rows {
            serde_json::to_writer(&mut writer, r)?;
            writer.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        if header != CSV_HEADER {
            return Err(Error::Parse(format!("unexpected header {header:?}")));
        }
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let field = |k: usize| {
                rec.get(k)
                    .ok_or_else(|| Error::Parse(format!("missing column {}", CSV_HEADER[k])))
            };
            let int = |k: usize| -> Result<usize> {
                field(k)?
                    .parse()
                    .map_err(|e| Error::Parse(format!("{}: {e}", CSV_HEADER[k])))
            };
            let real = |k: usize| -> Result<f64> {
                field(k)?
                    .parse()
                    .map_err(|e| Error::Parse(format!("{}: {e}", CSV_HEADER[k])))
            };
            rows.push(SweepRow {
                family: field(0)?.parse()?,
                p: int(1)?,
                d: int(2)?,
                n: int(3)?,
                beta: real(4)?,
                method: field(5)?.parse()?,
                successes: int(6)?,
                trials: int(7)?,
                success_prob: real(8)?,
            });
        }
        Ok(SweepResult { rows })
    }

    pub fn read_jsonl<R: Read>(reader: R) -> Result<Self> {
        let rows = serde_json::Deserializer::from_reader(reader)
            .into_iter::<SweepRow>()
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(SweepResult { rows })
    }
}
