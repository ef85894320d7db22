//! `cde`: conditional density estimation from the command line.
//!
//! Subcommands cover the full experiment pipeline: `simulate` draws data
//! from a closed-form simulator, `fit` trains an estimator on a CSV,
//! `eval` scores a fitted model against held-out data or the exact
//! density, `benchmark` runs a full (simulator x estimator x size x seed)
//! grid, and `density` exports plot-ready conditional density curves.
//!
//! Exit codes: 0 on success, 1 on runtime failure, 2 on usage or config
//! errors. Given the same inputs and seeds, every output byte except
//! wall-time columns is reproducible.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use cde::data::Dataset;
use cde::estimators::{EstimatorSpec, FittedEstimator};
use cde::evaluation::{evaluate, EvalProtocol};
use cde::harness::{agg_path, aggregate, aggregate_csv, raw_csv, run_benchmark, BenchmarkConfig};
use cde::simulators::SimulatorSpec;
use cde::CdeError;

/// Environment variable that overrides `benchmark --parallel`.
const THREADS_ENV: &str = "CDE_BENCH_THREADS";

#[derive(Parser)]
#[command(name = "cde", version, about = "Conditional density estimation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a joint sample from a simulator and write it as CSV.
    Simulate(SimulateArgs),
    /// Fit an estimator on a CSV dataset and serialize the model.
    Fit(FitArgs),
    /// Score a fitted model against a CSV or a simulator's exact density.
    Eval(EvalArgs),
    /// Run a benchmark grid and write raw plus aggregate CSV tables.
    Benchmark(BenchmarkArgs),
    /// Export conditional density curves on a y-grid for plotting.
    Density(DensityArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Simulator name: econ, arma_jump, skew_normal, or gaussian_mixture.
    #[arg(long)]
    sim: String,
    /// JSON file with parameter overrides for the chosen simulator.
    #[arg(long)]
    params_file: Option<PathBuf>,
    /// Number of rows to draw.
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    /// Estimator name: mdn, kmn, ckde, ckde_cv, nkde, or lscde.
    #[arg(long)]
    estimator: String,
    /// Training data CSV with x_0..,y_0.. header.
    #[arg(long)]
    data: PathBuf,
    /// Estimator config overrides: inline JSON or a path to a JSON file.
    #[arg(long)]
    config: Option<String>,
    /// Output path for the fitted model JSON.
    #[arg(long)]
    model_out: PathBuf,
    /// Train on the chronological head of the data: a fraction f in (0, 1)
    /// keeps the first ceil(f*N) rows, e.g. 0.8 for an 80/20 split.
    #[arg(long)]
    chrono_split: Option<f64>,
}

#[derive(Args)]
struct EvalArgs {
    /// Fitted model JSON from `fit`, or a hand-written oracle model.
    #[arg(long)]
    model: PathBuf,
    /// Held-out CSV to score against.
    #[arg(long, conflicts_with = "sim", required_unless_present = "sim")]
    data: Option<PathBuf>,
    /// Simulator to score against; adds the conditional Hellinger metric.
    #[arg(long)]
    sim: Option<String>,
    /// JSON parameter overrides for --sim.
    #[arg(long, requires = "sim")]
    params_file: Option<PathBuf>,
    /// Validation draws for --sim mode.
    #[arg(long, default_value_t = 10_000)]
    n: usize,
    /// Seed for the --sim validation draw.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Evaluate on the chronological tail of --data: a fraction f in
    /// (0, 1) keeps the rows from floor(f*N) on, matching `fit`'s head.
    #[arg(long, requires = "data")]
    chrono_split: Option<f64>,
    /// Output path for the metrics JSON.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchmarkArgs {
    /// Benchmark config: inline JSON or a path to a JSON file.
    #[arg(long)]
    config: String,
    /// Raw CSV output path; the aggregate table gets an _agg suffix.
    /// Falls back to the config's "out" field.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker thread cap; overridden by CDE_BENCH_THREADS.
    #[arg(long)]
    parallel: Option<usize>,
}

#[derive(Args)]
struct DensityArgs {
    /// Fitted model JSON.
    #[arg(long)]
    model: PathBuf,
    /// Conditioning points: components comma-separated, points separated
    /// by semicolons, e.g. "0.5;1.0" or "0.1,0.2;0.3,0.4".
    #[arg(long, allow_hyphen_values = true)]
    x: String,
    /// y-grid as lo:hi:n with n >= 2, e.g. "-3:3:200".
    #[arg(long, allow_hyphen_values = true)]
    grid: String,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

/// CLI failure: either a library error, whose kind picks the exit code,
/// or a plain runtime failure.
#[derive(Debug)]
enum CliError {
    Cde(CdeError),
    Runtime(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Cde(e) => e.fmt(f),
            CliError::Runtime(msg) => f.write_str(msg),
        }
    }
}

impl From<CdeError> for CliError {
    fn from(e: CdeError) -> CliError {
        CliError::Cde(e)
    }
}

impl CliError {
    /// Bad flags, configs, and mismatched shapes are usage errors (2);
    /// everything else is a runtime failure (1).
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Cde(
                CdeError::InvalidConfig(_)
                | CdeError::InvalidParameter(_)
                | CdeError::ShapeMismatch { .. },
            ) => 2,
            _ => 1,
        }
    }
}

type CliResult = Result<(), CliError>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Fit(args) => cmd_fit(&args),
        Command::Eval(args) => cmd_eval(&args),
        Command::Benchmark(args) => cmd_benchmark(&args),
        Command::Density(args) => cmd_density(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn cmd_simulate(args: &SimulateArgs) -> CliResult {
    if args.n == 0 {
        return Err(CdeError::InvalidParameter("--n must be at least 1".into()).into());
    }
    let spec = simulator_spec(&args.sim, args.params_file.as_deref())?;
    let sim = spec.make()?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let data = sim.sample_joint(args.n, &mut rng)?;
    data.write_csv_path(&args.out)?;
    println!("{} rows -> {}", data.n(), args.out.display());
    Ok(())
}

fn cmd_fit(args: &FitArgs) -> CliResult {
    let mut data = Dataset::read_csv_path(&args.data)?;
    if let Some(fraction) = args.chrono_split {
        check_split_fraction(fraction)?;
        data = data.head_fraction(fraction)?;
    }
    let spec = estimator_spec(&args.estimator, args.config.as_deref())?;
    let fitted = spec.fit(&data)?;
    if let Some(history) = fitted.loss_history() {
        log_loss_history(history);
    }
    write_json(&args.model_out, &fitted)?;
    println!("model -> {}", args.model_out.display());
    Ok(())
}

fn cmd_eval(args: &EvalArgs) -> CliResult {
    let model = load_model(&args.model)?;
    let report = match (&args.data, &args.sim) {
        (Some(path), None) => {
            let mut data = Dataset::read_csv_path(path)?;
            if let Some(fraction) = args.chrono_split {
                check_split_fraction(fraction)?;
                data = data.tail_fraction(fraction)?;
            }
            evaluate(model.as_density(), &data, None)?
        }
        (None, Some(name)) => {
            if args.n == 0 {
                return Err(CdeError::InvalidParameter("--n must be at least 1".into()).into());
            }
            let spec = simulator_spec(name, args.params_file.as_deref())?;
            let sim = spec.make()?;
            let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
            let data = sim.sample_joint(args.n, &mut rng)?;
            let protocol = EvalProtocol::default();
            evaluate(model.as_density(), &data, Some((sim.as_ref(), &protocol)))?
        }
        // clap's conflicts_with/required_unless_present rule this out.
        _ => unreachable!("clap enforces exactly one of --data and --sim"),
    };
    write_json(&args.out, &report)?;
    println!("metrics -> {}", args.out.display());
    Ok(())
}

fn cmd_benchmark(args: &BenchmarkArgs) -> CliResult {
    let text = read_json_text(&args.config)?;
    let config = BenchmarkConfig::from_json(&text)?;
    let out: PathBuf = match (&args.out, &config.out) {
        (Some(path), _) => path.clone(),
        (None, Some(path)) => PathBuf::from(path),
        (None, None) => {
            return Err(CdeError::InvalidConfig(
                "no output path: pass --out or set \"out\" in the config".into(),
            )
            .into())
        }
    };
    let threads = thread_limit(args.parallel)?;
    let output = run_benchmark(&config, threads)?;
    let raw = raw_csv(&output.records);
    write_text(&out, &raw)?;
    let agg = PathBuf::from(agg_path(&out.to_string_lossy()));
    write_text(&agg, &aggregate_csv(&aggregate(&output.records)))?;
    let total = output.records.len();
    println!(
        "{} cells, {} failed; raw -> {}, aggregate -> {}",
        total,
        output.n_failed,
        out.display(),
        agg.display()
    );
    if output.n_failed == total {
        let first = output
            .records
            .first()
            .and_then(|r| r.error.clone())
            .unwrap_or_default();
        return Err(CliError::Runtime(format!(
            "all {total} benchmark cells failed; first error: {first}"
        )));
    }
    Ok(())
}

fn cmd_density(args: &DensityArgs) -> CliResult {
    let model = load_model(&args.model)?;
    let density = model.as_density();
    if density.y_dim() != 1 {
        return Err(CdeError::InvalidParameter(format!(
            "density export needs a scalar y; model has y_dim {}",
            density.y_dim()
        ))
        .into());
    }
    let points = parse_x_points(&args.x, density.x_dim())?;
    let (lo, hi, n) = parse_grid(&args.grid)?;
    let mut out = String::new();
    if density.x_dim() == 1 {
        out.push_str("x,y,pdf\n");
    } else {
        for d in 0..density.x_dim() {
            out.push_str(&format!("x_{d},"));
        }
        out.push_str("y,pdf\n");
    }
    let mut rows = 0usize;
    for x in &points {
        for i in 0..n {
            let y = lo + (hi - lo) * i as f64 / (n - 1) as f64;
            let p = density.pdf(x, &[y])?;
            for component in x {
                out.push_str(&format!("{component},"));
            }
            out.push_str(&format!("{y},{p}\n"));
            rows += 1;
        }
    }
    write_text(&args.out, &out)?;
    println!("{} rows -> {}", rows, args.out.display());
    Ok(())
}

/// Builds a simulator spec from a name, with optional JSON overrides for
/// its parameters.
fn simulator_spec(name: &str, params_file: Option<&Path>) -> Result<SimulatorSpec, CliError> {
    // Resolves the bare name first so an unknown one fails with the
    // message listing the valid names.
    let spec = SimulatorSpec::from_name(name)?;
    let Some(path) = params_file else {
        return Ok(spec);
    };
    let text = fs::read_to_string(path).map_err(|e| {
        CdeError::InvalidConfig(format!("reading params file {}: {e}", path.display()))
    })?;
    let params: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| CdeError::InvalidConfig(format!("params file {}: {e}", path.display())))?;
    let spec = from_tagged(name, params)
        .map_err(|e| CdeError::InvalidConfig(format!("params for {name:?}: {e}")))?;
    Ok(spec)
}

/// Builds an estimator spec from a name plus optional JSON config
/// overrides. A `"mode"` key on ckde picks the bandwidth selection:
/// "rule-of-thumb" (the default) or "loo-cv".
fn estimator_spec(name: &str, config: Option<&str>) -> Result<EstimatorSpec, CliError> {
    let mut name = name.to_string();
    EstimatorSpec::from_name(&name)?;
    let Some(raw) = config else {
        return Ok(EstimatorSpec::from_name(&name)?);
    };
    let text = read_json_text(raw)?;
    let mut params: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| CdeError::InvalidConfig(format!("estimator config: {e}")))?;
    if let Some(mode) = params.as_object_mut().and_then(|obj| obj.remove("mode")) {
        if name != "ckde" && name != "ckde_cv" {
            return Err(CdeError::InvalidConfig(format!(
                "config key \"mode\" only applies to ckde, not {name:?}"
            ))
            .into());
        }
        name = match mode.as_str() {
            Some("rule-of-thumb") => "ckde".to_string(),
            Some("loo-cv") => "ckde_cv".to_string(),
            _ => {
                return Err(CdeError::InvalidConfig(format!(
                    "unknown bandwidth mode {mode}; expected \"rule-of-thumb\" or \"loo-cv\""
                ))
                .into())
            }
        };
    }
    let spec = from_tagged(&name, params)
        .map_err(|e| CdeError::InvalidConfig(format!("config for {name:?}: {e}")))?;
    Ok(spec)
}

/// Deserializes a name-tagged spec from a bare JSON object of parameters.
fn from_tagged<T: serde::de::DeserializeOwned>(
    name: &str,
    params: serde_json::Value,
) -> Result<T, serde_json::Error> {
    use serde::de::Error;
    let mut obj = match params {
        serde_json::Value::Object(obj) => obj,
        other => {
            return Err(serde_json::Error::custom(format!(
                "expected a JSON object, got {other}"
            )))
        }
    };
    obj.insert("name".into(), serde_json::Value::String(name.to_string()));
    serde_json::from_value(serde_json::Value::Object(obj))
}

/// Accepts either inline JSON (starts with `{` or `[`) or a file path.
fn read_json_text(raw: &str) -> Result<String, CliError> {
    if raw.trim_start().starts_with(['{', '[']) {
        Ok(raw.to_string())
    } else {
        fs::read_to_string(raw)
            .map_err(|e| CdeError::InvalidConfig(format!("reading config {raw:?}: {e}")).into())
    }
}

fn load_model(path: &Path) -> Result<FittedEstimator, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CdeError::InvalidConfig(format!("reading model {}: {e}", path.display())))?;
    let model = serde_json::from_str(&text)
        .map_err(|e| CdeError::InvalidConfig(format!("model file {}: {e}", path.display())))?;
    Ok(model)
}

fn check_split_fraction(fraction: f64) -> CliResult {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(CdeError::InvalidParameter(format!(
            "--chrono-split must lie strictly between 0 and 1, got {fraction}"
        ))
        .into());
    }
    Ok(())
}

/// Prints every hundredth epoch of the training curve, plus the last one.
fn log_loss_history(history: &[f64]) {
    for (i, loss) in history.iter().enumerate() {
        let epoch = i + 1;
        if epoch % 100 == 0 || epoch == history.len() {
            eprintln!("epoch {epoch:>5}: loss {loss:.6}");
        }
    }
}

/// Worker thread cap: CDE_BENCH_THREADS wins over --parallel.
fn thread_limit(flag: Option<usize>) -> Result<Option<usize>, CliError> {
    match std::env::var(THREADS_ENV) {
        Ok(text) => {
            let n: usize = text.trim().parse().map_err(|_| {
                CdeError::InvalidConfig(format!("{THREADS_ENV}={text:?} is not a thread count"))
            })?;
            if n == 0 {
                return Err(
                    CdeError::InvalidConfig(format!("{THREADS_ENV} must be at least 1")).into(),
                );
            }
            Ok(Some(n))
        }
        Err(_) => Ok(flag),
    }
}

/// Parses conditioning points: semicolons between points, commas between
/// components. With a scalar x, commas may separate points as well.
fn parse_x_points(text: &str, x_dim: usize) -> Result<Vec<Vec<f64>>, CliError> {
    let parse = |field: &str| -> Result<f64, CliError> {
        field.trim().parse::<f64>().map_err(|_| {
            CdeError::InvalidParameter(format!("--x component {field:?} is not a number")).into()
        })
    };
    let mut points = Vec::new();
    for chunk in text.split(';').filter(|c| !c.trim().is_empty()) {
        let components: Vec<f64> = chunk
            .split(',')
            .filter(|c| !c.trim().is_empty())
            .map(parse)
            .collect::<Result<_, _>>()?;
        if x_dim == 1 {
            // "0.5,1.0" and "0.5;1.0" both mean two scalar points.
            points.extend(components.into_iter().map(|v| vec![v]));
        } else if components.len() == x_dim {
            points.push(components);
        } else {
            return Err(CdeError::InvalidParameter(format!(
                "--x point {chunk:?} has {} components; the model expects {x_dim}",
                components.len()
            ))
            .into());
        }
    }
    if points.is_empty() {
        return Err(CdeError::InvalidParameter("--x lists no points".into()).into());
    }
    Ok(points)
}

/// Parses a y-grid spec "lo:hi:n" with lo < hi and n >= 2.
fn parse_grid(text: &str) -> Result<(f64, f64, usize), CliError> {
    let bad = |detail: &str| -> CliError {
        CdeError::InvalidParameter(format!("--grid {text:?}: {detail}")).into()
    };
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(bad("expected lo:hi:n"));
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| bad("lo is not a number"))?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| bad("hi is not a number"))?;
    let n: usize = parts[2].trim().parse().map_err(|_| bad("n is not an integer"))?;
    if !lo.is_finite() || !hi.is_finite() || lo >= hi {
        return Err(bad("needs finite lo < hi"));
    }
    if n < 2 {
        return Err(bad("needs at least 2 grid points"));
    }
    Ok((lo, hi, n))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> CliResult {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Runtime(format!("serializing {}: {e}", path.display())))?;
    text.push('\n');
    write_text(path, &text)
}

fn write_text(path: &Path, text: &str) -> CliResult {
    fs::write(path, text)
        .map_err(|e| CliError::Runtime(format!("writing {}: {e}", path.display())))
}
