use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use greedy_gmrf::baselines::{
    default_c_grid, fit_glasso_warm, fit_nbd_lasso, fit_nbd_lasso_moments, select_lambda_cv, CvMethod, Lambda,
    LassoConfig, DEFAULT_FOLDS,
};
use greedy_gmrf::conditions::{condition_report, family_metric, threshold_bisect, BisectFamily, Metric};
use greedy_gmrf::greedy::global::fit_global_greedy;
use greedy_gmrf::greedy::neighborhood::{
    combine_neighborhoods, fit_all_neighborhoods, fit_all_neighborhoods_moments, GraphEstimate,
};
use greedy_gmrf::greedy::{stopping_threshold, GreedyConfig, DEFAULT_NU};
use greedy_gmrf::harness::{
    run_sweep, ExperimentSpec, Method, OutputFormat, SampleGrid, DEFAULT_C_EPS, DEFAULT_C_EPS_NBD, DEFAULT_TRIALS,
};
use greedy_gmrf::models::{sample_covariance, sample_gaussian, Family, ModelSpec, SampleSet, DEFAULT_GRID_OMEGA};
use greedy_gmrf::{EdgeSet, Error, Result, SymmetricMatrix};

#[derive(Parser)]
#[command(
    name = "greedy-gmrf",
    version,
    about = "Greedy structure learning for Gaussian Markov random fields"
)]
struct Cli {
    /// Base random seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output file (default: stdout).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Tabular output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Jsonl,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => OutputFormat::Csv,
            Format::Jsonl => OutputFormat::Jsonl,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Draw samples from a synthetic model.
    Generate(GenerateArgs),
    /// Global greedy precision-matrix estimate.
    FitGlobal(FitGlobalArgs),
    /// Per-node greedy neighborhoods.
    FitNbd(FitNbdArgs),
    /// Graphical lasso.
    FitGlasso(FitLassoArgs),
    /// Nodewise lasso.
    FitNbdLasso(FitLassoArgs),
    /// Irrepresentability and restricted-eigenvalue conditions.
    Conditions(ConditionsArgs),
    /// Success-probability sweep over sample sizes.
    Sweep(SweepArgs),
}

#[derive(Args, Clone)]
struct ModelArgs {
    #[arg(long, value_parser = parse_family)]
    family: Family,
    #[arg(long)]
    p: usize,
    #[arg(long, default_value_t = 0.5)]
    tau: f64,
    #[arg(long, default_value_t = DEFAULT_GRID_OMEGA)]
    omega: f64,
    /// Per-hub degree for a multi-hub star.
    #[arg(long)]
    star_degree: Option<usize>,
}

impl ModelArgs {
    fn spec(&self) -> ModelSpec {
        let mut spec = ModelSpec::new(self.family, self.p)
            .with_tau(self.tau)
            .with_omega(self.omega);
        spec.star_degree = self.star_degree;
        spec
    }
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    n: usize,
    /// Also write the population covariance here.
    #[arg(long)]
    sigma_out: Option<PathBuf>,
    /// Also write the population precision matrix here.
    #[arg(long)]
    precision_out: Option<PathBuf>,
}

#[derive(Args)]
struct InputArgs {
    /// Covariance matrix CSV (treated as exact second moments).
    #[arg(long, conflicts_with = "data")]
    sigma: Option<PathBuf>,
    /// Samples CSV, one row per observation.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Sample size behind --sigma, for thresholds that scale with n.
    #[arg(long)]
    n: Option<usize>,
}

enum Input {
    Sigma(SymmetricMatrix, Option<usize>),
    Data(SampleSet),
}

impl InputArgs {
    fn load(&self) -> Result<Input> {
        match (&self.sigma, &self.data) {
            (Some(path), None) => Ok(Input::Sigma(SymmetricMatrix::read_csv(open(path)?)?, self.n)),
            (None, Some(path)) => Ok(Input::Data(SampleSet::read_csv(open(path)?)?)),
            _ => Err(Error::InvalidParameter("give exactly one of --sigma or --data".into())),
        }
    }
}

impl Input {
    fn p(&self) -> usize {
        match self {
            Input::Sigma(s, _) => s.dim(),
            Input::Data(x) => x.p(),
        }
    }

    fn n(&self) -> Option<usize> {
        match self {
            Input::Sigma(_, n) => *n,
            Input::Data(x) => Some(x.n()),
        }
    }

    fn covariance(&self) -> SymmetricMatrix {
        match self {
            Input::Sigma(s, _) => s.clone(),
            Input::Data(x) => sample_covariance(x),
        }
    }
}

#[derive(Args)]
struct ThresholdArgs {
    /// Explicit stopping threshold.
    #[arg(long, conflicts_with = "c")]
    eps: Option<f64>,
    /// Constant in eps = c·d·ln p / n.
    #[arg(long)]
    c: Option<f64>,
    /// Degree bound for --c.
    #[arg(long)]
    d: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_NU)]
    nu: f64,
    #[arg(long)]
    max_active: Option<usize>,
}

impl ThresholdArgs {
    fn config(&self, input: &Input, default_c: f64) -> Result<GreedyConfig> {
        let eps = match self.eps {
            Some(e) => e,
            None => {
                let c = self.c.unwrap_or(default_c);
                let d = self
                    .d
                    .ok_or_else(|| Error::InvalidParameter("--c needs --d (or give --eps)".into()))?;
                let n = input
                    .n()
                    .ok_or_else(|| Error::InvalidParameter("--c with --sigma needs --n".into()))?;
                stopping_threshold(c, d, input.p(), n)
            }
        };
        let mut cfg = GreedyConfig::new(eps).with_nu(self.nu);
        if let Some(m) = self.max_active {
            cfg = cfg.with_max_active(m);
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct FitGlobalArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    threshold: ThresholdArgs,
    /// JSON report path (default: --out or stdout).
    #[arg(long)]
    out_json: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum RuleArg {
    And,
    Or,
    Both,
}

#[derive(Args)]
struct FitNbdArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    threshold: ThresholdArgs,
    #[arg(long, value_enum, default_value_t = RuleArg::Both)]
    rule: RuleArg,
    #[arg(long)]
    out_json: Option<PathBuf>,
}

#[derive(Args)]
struct FitLassoArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Explicit penalty.
    #[arg(long, conflicts_with = "c")]
    lambda: Option<f64>,
    /// Constant in lambda = c·sqrt(ln p / n); chosen by cross-validation when absent.
    #[arg(long)]
    c: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_FOLDS)]
    cv_folds: usize,
    /// Comma-separated grid of c values for cross-validation.
    #[arg(long, value_delimiter = ',')]
    c_grid: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value_t = RuleArg::Both)]
    rule: RuleArg,
    #[arg(long)]
    out_json: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Glasso,
    Nbd,
    Both,
}

#[derive(Args)]
struct ConditionsArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_enum, default_value_t = MetricArg::Both)]
    metric: MetricArg,
    /// Bisect for the tau where the metric reaches 1 (star, chain, diamond).
    #[arg(long)]
    bisect: bool,
    /// Support size for restricted eigenvalues (default: max degree + 1).
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    out_json: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Experiment spec as JSON; inline flags are ignored when given.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, value_parser = parse_family)]
    family: Option<Family>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long, default_value_t = 0.5)]
    tau: f64,
    #[arg(long, default_value_t = DEFAULT_GRID_OMEGA)]
    omega: f64,
    #[arg(long)]
    star_degree: Option<usize>,
    /// Comma-separated methods: global-greedy, nbd-greedy, glasso, nbd-lasso.
    #[arg(long, value_delimiter = ',', value_parser = parse_method)]
    methods: Vec<Method>,
    /// Comma-separated control parameters.
    #[arg(long, value_delimiter = ',', conflicts_with = "ns")]
    betas: Vec<f64>,
    /// Comma-separated sample sizes.
    #[arg(long, value_delimiter = ',')]
    ns: Vec<usize>,
    #[arg(long, default_value_t = DEFAULT_TRIALS)]
    trials: usize,
    #[arg(long, default_value_t = DEFAULT_C_EPS)]
    c_eps: f64,
    #[arg(long, default_value_t = DEFAULT_C_EPS_NBD)]
    c_eps_nbd: f64,
    #[arg(long, default_value_t = DEFAULT_NU)]
    nu: f64,
    /// Fixed penalty constant for the l1 baselines (default: cross-validation).
    #[arg(long)]
    c_lambda: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_FOLDS)]
    cv_folds: usize,
    #[arg(long, value_delimiter = ',')]
    c_grid: Option<Vec<f64>>,
    /// Fit greedy methods on exact population moments.
    #[arg(long)]
    population: bool,
}

fn parse_family(s: &str) -> std::result::Result<Family, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path)?))
}

fn writer(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json<T: Serialize>(value: &T, path: Option<&Path>) -> Result<()> {
    let mut w = writer(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn pairs(edges: &EdgeSet) -> Vec<[usize; 2]> {
    edges.iter().map(|(i, j)| [i, j]).collect()
}

fn graph_json(graph: &GraphEstimate, rule: RuleArg) -> serde_json::Value {
    let mut out = json!({ "p": graph.p, "neighborhoods": graph.neighborhoods });
    if matches!(rule, RuleArg::And | RuleArg::Both) {
        out["edges_and"] = json!(pairs(&graph.edges_and));
    }
    if matches!(rule, RuleArg::Or | RuleArg::Both) {
        out["edges_or"] = json!(pairs(&graph.edges_or));
    }
    out
}

fn json_target<'a>(out_json: &'a Option<PathBuf>, out: &'a Option<PathBuf>) -> Option<&'a Path> {
    out_json.as_deref().or(out.as_deref())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build_global()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    }
    let seed = cli.seed.unwrap_or(0);
    let parallel = cli.threads.is_none_or(|t| t > 1);

    match cli.command {
        Command::Generate(args) => {
            let model = args.model.spec().build()?;
            let x = sample_gaussian(&model.sigma, args.n, seed)?;
            if let Some(p) = &args.sigma_out {
                model.sigma.write_csv(File::create(p)?)?;
            }
            if let Some(p) = &args.precision_out {
                model.precision.write_csv(File::create(p)?)?;
            }
            let mut w = writer(cli.out.as_deref())?;
            x.write_csv(&mut w)?;
            w.flush()?;
        }
        Command::FitGlobal(args) => {
            let input = args.input.load()?;
            let cfg = args.threshold.config(&input, DEFAULT_C_EPS)?.with_parallel(parallel);
            let fit = fit_global_greedy(&input.covariance(), &cfg)?;
            let report = json!({
                "eps": cfg.eps,
                "nu": cfg.nu,
                "support": pairs(fit.state.support()),
                "theta": fit.state.theta(),
                "loss": fit.state.loss(),
                "loss_trace": fit.loss_trace(),
                "steps": fit.steps,
            });
            write_json(&report, json_target(&args.out_json, &cli.out))?;
        }
        Command::FitNbd(args) => {
            let input = args.input.load()?;
            let cfg = args
                .threshold
                .config(&input, DEFAULT_C_EPS_NBD)?
                .with_parallel(parallel);
            let states = match &input {
                Input::Sigma(s, _) => fit_all_neighborhoods_moments(s, &cfg)?,
                Input::Data(x) => fit_all_neighborhoods(x, &cfg)?,
            };
            let graph = combine_neighborhoods(&states)?;
            let coefficients: Vec<_> = states
                .iter()
                .map(|s| json!({ "node": s.node, "active": s.active, "coef": s.coef, "loss": s.loss }))
                .collect();
            let mut report = graph_json(&graph, args.rule);
            report["eps"] = json!(cfg.eps);
            report["fits"] = json!(coefficients);
            write_json(&report, json_target(&args.out_json, &cli.out))?;
        }
        Command::FitGlasso(args) => {
            let input = args.input.load()?;
            let cfg = LassoConfig::default().with_tol(1e-8);
            let (lambda, c) = lasso_penalty(&args, &input, CvMethod::Glasso, &cfg)?;
            let fit = fit_glasso_warm(&input.covariance(), lambda, &cfg, None)?;
            let report = json!({
                "lambda": lambda,
                "c": c,
                "edges": pairs(&fit.edges()),
                "theta": fit.theta,
                "objective": fit.objective,
                "duality_gap": fit.duality_gap,
                "iterations": fit.iterations,
            });
            write_json(&report, json_target(&args.out_json, &cli.out))?;
        }
        Command::FitNbdLasso(args) => {
            let input = args.input.load()?;
            let cfg = LassoConfig::default();
            let (lambda, c) = lasso_penalty(&args, &input, CvMethod::Nbd, &cfg)?;
            let graph = match &input {
                Input::Sigma(s, _) => fit_nbd_lasso_moments(s, lambda, &cfg)?,
                Input::Data(x) => fit_nbd_lasso(
                    x,
                    &LassoConfig {
                        lambda: Lambda::Explicit(lambda),
                        ..cfg
                    },
                    parallel,
                )?,
            };
            let mut report = graph_json(&graph, args.rule);
            report["lambda"] = json!(lambda);
            report["c"] = json!(c);
            write_json(&report, json_target(&args.out_json, &cli.out))?;
        }
        Command::Conditions(args) => {
            let model = args.model.spec().build()?;
            let k = args.k.unwrap_or(model.max_degree() + 1).min(model.sigma.dim());
            let report = condition_report(&model.sigma, k)?;
            let mut out = json!({
                "family": args.model.family,
                "p": args.model.p,
                "tau": args.model.tau,
                "d": model.max_degree(),
                "report": report,
            });
            if args.bisect {
                let family = match args.model.family {
                    Family::Star => BisectFamily::Star,
                    Family::Chain => BisectFamily::Chain,
                    Family::Diamond => BisectFamily::Diamond,
                    other => {
                        return Err(Error::InvalidParameter(format!(
                            "--bisect supports star, chain, diamond; got {other}"
                        )))
                    }
                };
                let metrics: &[Metric] = match args.metric {
                    MetricArg::Glasso => &[Metric::Glasso],
                    MetricArg::Nbd => &[Metric::Nbd],
                    MetricArg::Both => &[Metric::Glasso, Metric::Nbd],
                };
                let mut found = serde_json::Map::new();
                for &m in metrics {
                    let r = threshold_bisect(family, args.model.p, m)?;
                    let key = if m == Metric::Glasso { "glasso" } else { "nbd" };
                    found.insert(
                        key.into(),
                        json!({ "tau": r.tau, "crossed": r.crossed, "monotone": r.monotone,
                                "value_at_tau": family_metric(family, args.model.p, r.tau, m)? }),
                    );
                }
                out["bisect"] = serde_json::Value::Object(found);
            }
            write_json(&out, json_target(&args.out_json, &cli.out))?;
        }
        Command::Sweep(args) => {
            let mut spec = match &args.spec {
                Some(path) => ExperimentSpec::read_json(open(path)?)?,
                None => inline_spec(&args)?,
            };
            if let Some(s) = cli.seed {
                spec.base_seed = s;
            }
            let threads = cli
                .threads
                .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            let result = run_sweep(&spec, threads)?;
            let mut w = writer(cli.out.as_deref())?;
            result.emit(&mut w, cli.format.into())?;
            w.flush()?;
        }
    }
    Ok(())
}

fn lasso_penalty(
    args: &FitLassoArgs,
    input: &Input,
    method: CvMethod,
    cfg: &LassoConfig,
) -> Result<(f64, Option<f64>)> {
    let p = input.p();
    if let Some(l) = args.lambda {
        return Ok((LassoConfig::explicit(l).resolve(p, 1)?, None));
    }
    let n = input
        .n()
        .ok_or_else(|| Error::InvalidParameter("scaled penalty with --sigma needs --n".into()))?;
    let c = match (args.c, input) {
        (Some(c), _) => c,
        (None, Input::Data(x)) => {
            let grid = args.c_grid.clone().unwrap_or_else(default_c_grid);
            select_lambda_cv(x, args.cv_folds, &grid, method, cfg)?.c
        }
        (None, Input::Sigma(..)) => {
            return Err(Error::InvalidParameter(
                "cross-validation needs --data; give --lambda or --c".into(),
            ))
        }
    };
    Ok((LassoConfig::scaled(c).resolve(p, n)?, Some(c)))
}

fn inline_spec(args: &SweepArgs) -> Result<ExperimentSpec> {
    let family = args
        .family
        .ok_or_else(|| Error::InvalidParameter("sweep needs --spec or --family".into()))?;
    let p = args
        .p
        .ok_or_else(|| Error::InvalidParameter("sweep needs --p".into()))?;
    let mut model = ModelSpec::new(family, p).with_tau(args.tau).with_omega(args.omega);
    model.star_degree = args.star_degree;
    let grid = if !args.ns.is_empty() {
        SampleGrid::N(args.ns.clone())
    } else {
        SampleGrid::Beta(args.betas.clone())
    };
    let methods = if args.methods.is_empty() {
        vec![Method::GlobalGreedy]
    } else {
        args.methods.clone()
    };
    let mut spec = ExperimentSpec::new(model, methods, grid);
    spec.trials = args.trials;
    spec.c_eps = args.c_eps;
    spec.c_eps_nbd = Some(args.c_eps_nbd);
    spec.nu = args.nu;
    spec.penalty.c_lambda = args.c_lambda;
    spec.penalty.cv_folds = args.cv_folds;
    if let Some(g) = &args.c_grid {
        spec.penalty.c_grid = g.clone();
    }
    spec.population = args.population;
    Ok(spec)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}
