//! `sparsepc` command-line driver.
//!
//! Every subcommand writes its outputs into `--out-dir` together with a
//! `<command>-manifest.json` recording the configuration, seeds and versions.
//! Exit codes: 0 success, 1 usage or input error, 2 numerical failure.

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};
use sparsepc::experiment::{
    derive_seed, emit, load_samples, prior_bounds, recover, save_samples, scale_bounds,
    EpsilonRule, ExperimentConfig, Method, ProblemInstance, ReportFormat, WeightSource,
};
use sparsepc::pc_basis::{assemble, build_basis, design_matrix};
use sparsepc::solvers::SolverOptions;
use sparsepc::theory::{
    beta_gamma, check_beta_bounds, normalize_columns, ric_bruteforce, BetaBoundReport,
};
use sparsepc::weights::{load_bounds_csv, save_bounds_csv};
use sparsepc::{NullSpaceConstants64, RicEstimate64};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Seed tags shared with the experiment driver.
const TAG_SAMPLES: u64 = 2;
const TAG_SPLIT: u64 = 5;

#[derive(Parser)]
#[command(name = "sparsepc", version, about = "Sparse polynomial chaos recovery")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a sample set from the configured problem.
    Gen(GenArgs),
    /// Recover coefficients from a sample set.
    Solve(SolveArgs),
    /// Select the BPDN tolerance by cross-validation.
    Cv(CvArgs),
    /// Compute a-priori coefficient bounds and a bound/reference scatter.
    Weights(WeightsArgs),
    /// Restricted isometry and null-space constants of a random Legendre matrix.
    Theory(TheoryArgs),
    /// Run the configured replication sweep.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct Common {
    /// TOML configuration; defaults apply when omitted.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Directory receiving outputs and the manifest.
    #[arg(short, long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    common: Common,
    /// Number of samples.
    #[arg(short)]
    n: usize,
    /// Sample seed; derived from the config seed when omitted.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct Inputs {
    #[command(flatten)]
    common: Common,
    /// Sample set written by `gen`.
    #[arg(long)]
    samples: PathBuf,
    #[arg(long, value_parser = parse_method, default_value = "l1")]
    method: Method,
    /// Coefficient bounds (index,bound CSV) in the units of the observations.
    /// The configured weight source is used when omitted.
    #[arg(long)]
    bounds: Option<PathBuf>,
    /// Seed of the reconstruction/validation split.
    #[arg(long)]
    split_seed: Option<u64>,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    inputs: Inputs,
    /// Fixed tolerance; overrides the configured rule.
    #[arg(long)]
    epsilon: Option<f64>,
}

#[derive(Args)]
struct CvArgs {
    #[command(flatten)]
    inputs: Inputs,
}

#[derive(Args)]
struct WeightsArgs {
    #[command(flatten)]
    common: Common,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum WeightKind {
    Uniform,
    Random,
}

#[derive(Args, Serialize)]
struct TheoryArgs {
    /// Directory receiving outputs and the manifest.
    #[arg(short, long)]
    #[serde(skip)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 5)]
    d: usize,
    #[arg(long, default_value_t = 3)]
    q: usize,
    /// Number of basis functions kept.
    #[arg(long, default_value_t = 40)]
    p: usize,
    /// Number of rows.
    #[arg(short, default_value_t = 20)]
    n: usize,
    /// Largest sparsity for the restricted isometry constants.
    #[arg(long, default_value_t = 4)]
    s_max: usize,
    /// Size of the random support.
    #[arg(long, default_value_t = 2)]
    support_size: usize,
    #[arg(long, value_enum, default_value_t = WeightKind::Uniform)]
    weights: WeightKind,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
    Both,
}

#[derive(Args)]
struct ExperimentArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, default_value_t = Format::Both)]
    format: Format,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Io { path: PathBuf, source: std::io::Error },
    Lib(sparsepc::Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Io { path, source } => write!(f, "{}: {source}", path.display()),
            CliError::Lib(e) => write!(f, "{e}"),
        }
    }
}

impl From<sparsepc::Error> for CliError {
    fn from(e: sparsepc::Error) -> Self {
        CliError::Lib(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Lib(e) if e.is_numerical() => 2,
            _ => 1,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    serde_json::from_value(Value::String(s.into())).map_err(|_| {
        "expected one of l1, weighted_l1, reweighted_l1, wls, ls_reference".to_string()
    })
}

fn load_config(path: Option<&Path>) -> CliResult<ExperimentConfig> {
    match path {
        None => Ok(ExperimentConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|source| CliError::Io {
                path: p.into(),
                source,
            })?;
            Ok(ExperimentConfig::from_toml(&text)?)
        }
    }
}

fn out_path(dir: &Path, name: &str) -> CliResult<PathBuf> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.into(),
        source,
    })?;
    Ok(dir.join(name))
}

fn write_json(path: &Path, v: &impl Serialize) -> CliResult<()> {
    let text = serde_json::to_string_pretty(v).map_err(|e| CliError::Lib(e.into()))?;
    fs::write(path, text + "\n").map_err(|source| CliError::Io {
        path: path.into(),
        source,
    })
}

struct Manifest {
    command: &'static str,
    config: Value,
    seeds: Value,
    outputs: Vec<String>,
}

impl Manifest {
    fn write(&self, dir: &Path) -> CliResult<()> {
        let v = json!({
            "command": self.command,
            "argv": std::env::args().collect::<Vec<_>>(),
            "config": self.config,
            "seeds": self.seeds,
            "outputs": self.outputs,
            "versions": {
                "sparsepc": sparsepc::VERSION,
                "sparsepc-cli": env!("CARGO_PKG_VERSION"),
            },
        });
        write_json(&out_path(dir, &format!("{}-manifest.json", self.command))?, &v)
    }
}

fn config_value(cfg: &ExperimentConfig) -> Value {
    json!({ "hash": cfg.hash(), "values": cfg })
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn gen(args: GenArgs) -> CliResult<()> {
    let cfg = load_config(args.common.config.as_deref())?;
    let problem = ProblemInstance::new(&cfg)?;
    let seed = args
        .seed
        .unwrap_or_else(|| derive_seed(cfg.seed, &[TAG_SAMPLES, args.n as u64, 0]));
    let m = problem.sample(args.n, seed)?;
    let meta = json!({ "config_hash": cfg.hash(), "n": args.n, "seed": seed });
    let path = out_path(&args.common.out_dir, "samples.csv")?;
    save_samples(&path, m.xi(), m.u(), Some(&meta))?;
    Manifest {
        command: "gen",
        config: config_value(&cfg),
        seeds: json!({ "config": cfg.seed, "samples": seed }),
        outputs: vec![file_name(&path)],
    }
    .write(&args.common.out_dir)
}

struct Prepared {
    cfg: ExperimentConfig,
    m: sparsepc::MeasurementSet64,
    bounds: Option<Vec<f64>>,
    split_seed: u64,
}

fn prepare(inp: &Inputs) -> CliResult<Prepared> {
    let mut cfg = load_config(inp.common.config.as_deref())?;
    let problem = ProblemInstance::new(&cfg)?;
    let file = load_samples(&inp.samples)?;
    if file.xi.ncols() != cfg.d {
        return Err(CliError::Usage(format!(
            "{} has {} input columns, config has d = {}",
            inp.samples.display(),
            file.xi.ncols(),
            cfg.d
        )));
    }
    let m = assemble(problem.basis(), &file.xi, &file.u)?;
    let bounds = match (&inp.bounds, inp.method.needs_bounds()) {
        (_, false) => None,
        (Some(path), true) => {
            let b = load_bounds_csv(path)?;
            // File bounds are already in the units of the observations.
            cfg.weight_source = WeightSource::TrueCoeffs;
            Some(b)
        }
        (None, true) => {
            let truth = problem.truth(Some(&inp.common.out_dir))?;
            prior_bounds(&problem, &truth)?
        }
    };
    if inp.method.needs_bounds() && bounds.is_none() {
        return Err(CliError::Usage(format!(
            "method {} needs --bounds or a weight_source",
            inp.method.name()
        )));
    }
    let split_seed = inp
        .split_seed
        .unwrap_or_else(|| derive_seed(cfg.seed, &[TAG_SPLIT]));
    Ok(Prepared {
        cfg,
        m,
        bounds,
        split_seed,
    })
}

fn solve(args: SolveArgs) -> CliResult<()> {
    let inp = &args.inputs;
    let mut p = prepare(inp)?;
    if let Some(value) = args.epsilon {
        p.cfg.epsilon = EpsilonRule::Fixed { value };
        p.cfg.validate()?;
    }
    let (cv, fit) = recover(&p.cfg, p.bounds.as_deref(), &p.m, p.split_seed, inp.method)?;
    let l1 = !matches!(inp.method, Method::Wls | Method::LsReference);
    let unorm = p.m.u().norm();
    let feasible =
        !l1 || SolverOptions::default().is_feasible(fit.residual, fit.epsilon_used, unorm);
    let dir = &inp.common.out_dir;
    let path = out_path(dir, "result.json")?;
    write_json(
        &path,
        &json!({ "method": inp.method, "feasible": feasible, "cv": cv, "result": fit }),
    )?;
    Manifest {
        command: "solve",
        config: config_value(&p.cfg),
        seeds: json!({ "config": p.cfg.seed, "split": p.split_seed }),
        outputs: vec![file_name(&path)],
    }
    .write(dir)?;
    if feasible {
        Ok(())
    } else {
        Err(sparsepc::Error::Numerical(format!(
            "residual {:e} exceeds the tolerance {:e}",
            fit.residual, fit.epsilon_used
        ))
        .into())
    }
}

fn cv(args: CvArgs) -> CliResult<()> {
    let inp = &args.inputs;
    if matches!(inp.method, Method::Wls | Method::LsReference) {
        return Err(CliError::Usage(format!(
            "method {} has no tolerance to cross-validate",
            inp.method.name()
        )));
    }
    let mut p = prepare(inp)?;
    if !matches!(p.cfg.epsilon, EpsilonRule::CrossValidation { .. }) {
        p.cfg.epsilon = EpsilonRule::default();
    }
    let (cv, _) = recover(&p.cfg, p.bounds.as_deref(), &p.m, p.split_seed, inp.method)?;
    let dir = &inp.common.out_dir;
    let path = out_path(dir, "cv.json")?;
    write_json(&path, &json!({ "method": inp.method, "cv": cv }))?;
    Manifest {
        command: "cv",
        config: config_value(&p.cfg),
        seeds: json!({ "config": p.cfg.seed, "split": p.split_seed }),
        outputs: vec![file_name(&path)],
    }
    .write(dir)
}

fn weights(args: WeightsArgs) -> CliResult<()> {
    let cfg = load_config(args.common.config.as_deref())?;
    let dir = &args.common.out_dir;
    let problem = ProblemInstance::new(&cfg)?;
    let truth = problem.truth(Some(dir))?;
    let bounds = prior_bounds(&problem, &truth)?
        .ok_or_else(|| CliError::Usage("weight_source is none".into()))?;
    let bounds_path = out_path(dir, "bounds.csv")?;
    save_bounds_csv(&bounds, &bounds_path)?;
    let scaled = scale_bounds(cfg.weight_source, &bounds, &truth.rows(0, 1).into_owned());
    let scatter_path = out_path(dir, "scatter.csv")?;
    let mut text = String::from("index,bound,reference\n");
    for (j, (b, c)) in scaled.iter().zip(truth.iter()).enumerate() {
        text += &format!("{},{b:.16e},{:.16e}\n", j + 1, c.abs());
    }
    fs::write(&scatter_path, text).map_err(|source| CliError::Io {
        path: scatter_path.clone(),
        source,
    })?;
    Manifest {
        command: "weights",
        config: config_value(&cfg),
        seeds: json!({ "config": cfg.seed }),
        outputs: vec![file_name(&bounds_path), file_name(&scatter_path)],
    }
    .write(dir)
}

#[derive(Serialize)]
struct TheoryReport {
    n: usize,
    p: usize,
    support: Vec<usize>,
    weights: Vec<f64>,
    ric: Vec<RicEstimate64>,
    null_space: NullSpaceConstants64,
    bounds: BetaBoundReport,
}

fn theory(args: TheoryArgs) -> CliResult<()> {
    if args.support_size == 0 || args.support_size > args.p {
        return Err(CliError::Usage(format!(
            "support size must lie in 1..={}",
            args.p
        )));
    }
    if args.s_max == 0 || args.s_max > args.p {
        return Err(CliError::Usage(format!("s-max must lie in 1..={}", args.p)));
    }
    let basis = build_basis(args.d, args.q, Some(args.p))?;
    let p = basis.len();
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let xi = DMatrix::from_fn(args.n, args.d, |_, _| rng.random_range(-1.0..=1.0));
    let a = normalize_columns(&design_matrix(&basis, &xi)?)?;
    let mut support = sample(&mut rng, p, args.support_size).into_vec();
    support.sort_unstable();
    let w: Vec<f64> = match args.weights {
        WeightKind::Uniform => vec![1.0; p],
        WeightKind::Random => (0..p).map(|_| rng.random_range(0.5..2.0)).collect(),
    };
    let ric = (1..=args.s_max)
        .map(|s| ric_bruteforce(&a, s))
        .collect::<sparsepc::Result<Vec<_>>>()?;
    let report = TheoryReport {
        n: args.n,
        p,
        null_space: beta_gamma(&a, &w, &support)?,
        bounds: check_beta_bounds(&a, &w, &support)?,
        support,
        weights: w,
        ric,
    };
    let path = out_path(&args.out_dir, "theory.json")?;
    write_json(&path, &report)?;
    Manifest {
        command: "theory",
        config: serde_json::to_value(&args).map_err(|e| CliError::Lib(e.into()))?,
        seeds: json!({ "matrix": args.seed }),
        outputs: vec![file_name(&path)],
    }
    .write(&args.out_dir)
}

fn experiment(args: ExperimentArgs) -> CliResult<()> {
    let cfg = load_config(args.common.config.as_deref())?;
    let dir = &args.common.out_dir;
    let cache = out_path(dir, "cache")?;
    let report = sparsepc::experiment::run_experiment(&cfg, Some(&cache))?;
    let mut outputs = Vec::new();
    let formats: &[(ReportFormat, &str)] = match args.format {
        Format::Csv => &[(ReportFormat::Csv, "report.csv")],
        Format::Json => &[(ReportFormat::Json, "report.json")],
        Format::Both => &[
            (ReportFormat::Csv, "report.csv"),
            (ReportFormat::Json, "report.json"),
        ],
    };
    for &(format, name) in formats {
        emit(&report, &out_path(dir, name)?, format)?;
        outputs.push(name.to_string());
    }
    Manifest {
        command: "experiment",
        config: config_value(&cfg),
        seeds: json!({ "config": cfg.seed }),
        outputs,
    }
    .write(dir)
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Gen(a) => gen(a),
        Command::Solve(a) => solve(a),
        Command::Cv(a) => cv(a),
        Command::Weights(a) => weights(a),
        Command::Theory(a) => theory(a),
        Command::Experiment(a) => experiment(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
