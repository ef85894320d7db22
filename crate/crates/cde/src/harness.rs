//! Benchmark harness.
//!
//! A benchmark run is a grid of independent cells, one per
//! (simulator, estimator, sample size, seed) combination. Each cell draws
//! its own training and validation sets, fits its estimator, and scores it
//! against the simulator's exact density. Cell seeds are hashes of the
//! cell's labeled coordinates rather than positions in the grid, so adding
//! a simulator or estimator to a config reproduces every old row exactly.
//!
//! Results land in two CSV tables: a raw table with one row per cell and
//! an aggregate table with the per-(simulator, estimator, size) mean and
//! spread across seeds. Apart from the wall-time column, both are
//! deterministic functions of the config.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CdeError, Result};
use crate::estimators::EstimatorSpec;
use crate::evaluation::{evaluate, EvalProtocol, MetricsReport};
use crate::parallel::{map_items, with_thread_limit};
use crate::seed::{derive_seed, stable_hash};
use crate::simulators::SimulatorSpec;
use crate::stats::{mean, population_std};

/// Version stamp expected in benchmark config files. Configs written for a
/// different layout fail validation instead of being reinterpreted.
pub const CONFIG_SCHEMA_VERSION: u32 = 1;

/// Smallest training set a cell may request; below this the kernel
/// baselines are meaningless and cross-validation folds collapse.
pub const MIN_SAMPLE_SIZE: usize = 50;

/// Header of the raw per-cell CSV table.
pub const RAW_CSV_HEADER: &str = "simulator,estimator,n_samples,seed,hellinger,\
avg_log_likelihood,rmse_mean,rmse_std,wall_time_s,config_hash,error";

/// Header of the aggregate CSV table.
pub const AGG_CSV_HEADER: &str = "simulator,estimator,n_samples,n_runs,n_errors,\
hellinger_mean,hellinger_std,avg_log_likelihood_mean,avg_log_likelihood_std,\
rmse_mean_mean,rmse_mean_std,rmse_std_mean,rmse_std_std";

fn default_simulators() -> Vec<SimulatorSpec> {
    vec![
        SimulatorSpec::from_name("econ").expect("builtin name"),
        SimulatorSpec::from_name("arma_jump").expect("builtin name"),
        SimulatorSpec::from_name("skew_normal").expect("builtin name"),
    ]
}

fn default_estimators() -> Vec<EstimatorSpec> {
    ["mdn", "kmn", "ckde", "ckde_cv", "nkde", "lscde"]
        .iter()
        .map(|name| EstimatorSpec::from_name(name).expect("builtin name"))
        .collect()
}

fn default_sample_sizes() -> Vec<usize> {
    vec![400, 800, 1600, 3200, 6000]
}

fn default_n_validation() -> usize {
    10_000
}

fn default_eta_grid() -> Vec<f64> {
    vec![0.0, 0.1, 0.2, 0.4]
}

/// Noise-sweep mode: replaces the estimator list with one variant per
/// (eta_x, eta_y) pair for every estimator that takes smoothing noise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSweep {
    pub eta_x: Vec<f64>,
    pub eta_y: Vec<f64>,
}

impl Default for NoiseSweep {
    fn default() -> Self {
        NoiseSweep {
            eta_x: default_eta_grid(),
            eta_y: default_eta_grid(),
        }
    }
}

/// Full benchmark specification. Deserializes from JSON with every field
/// optional, so a config file only has to mention what it overrides.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub schema_version: u32,
    pub master_seed: u64,
    pub simulators: Vec<SimulatorSpec>,
    pub estimators: Vec<EstimatorSpec>,
    pub sample_sizes: Vec<usize>,
    /// Held-out draws per cell for the sample-based metrics.
    pub n_validation: usize,
    /// Evaluation grid, quadrature resolution, and the seed list.
    pub protocol: EvalProtocol,
    pub noise_sweep: Option<NoiseSweep>,
    /// Raw CSV path; the aggregate table lands next to it with an
    /// `_agg` suffix. `None` leaves output routing to the caller.
    pub out: Option<String>,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            schema_version: CONFIG_SCHEMA_VERSION,
            master_seed: 0,
            simulators: default_simulators(),
            estimators: default_estimators(),
            sample_sizes: default_sample_sizes(),
            n_validation: default_n_validation(),
            protocol: EvalProtocol::default(),
            noise_sweep: None,
            out: None,
        }
    }
}

impl BenchmarkConfig {
    pub fn from_json(text: &str) -> Result<BenchmarkConfig> {
        let config: BenchmarkConfig = serde_json::from_str(text)
            .map_err(|e| CdeError::InvalidConfig(format!("benchmark config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(CdeError::InvalidConfig(format!(
                "schema_version {} not supported; this build reads version {}",
                self.schema_version, CONFIG_SCHEMA_VERSION
            )));
        }
        if self.simulators.is_empty() {
            return Err(CdeError::InvalidConfig("no simulators listed".into()));
        }
        if self.estimators.is_empty() {
            return Err(CdeError::InvalidConfig("no estimators listed".into()));
        }
        if self.sample_sizes.is_empty() {
            return Err(CdeError::InvalidConfig("no sample sizes listed".into()));
        }
        for &n in &self.sample_sizes {
            if n < MIN_SAMPLE_SIZE {
                return Err(CdeError::InvalidConfig(format!(
                    "sample size {n} is below the minimum of {MIN_SAMPLE_SIZE}"
                )));
            }
        }
        if self.n_validation == 0 {
            return Err(CdeError::InvalidConfig("n_validation must be positive".into()));
        }
        self.protocol.validate()?;
        if self.protocol.seeds.is_empty() {
            return Err(CdeError::InvalidConfig("protocol.seeds is empty".into()));
        }
        if let Some(sweep) = &self.noise_sweep {
            if sweep.eta_x.is_empty() || sweep.eta_y.is_empty() {
                return Err(CdeError::InvalidConfig("noise sweep axes must be nonempty".into()));
            }
            for &eta in sweep.eta_x.iter().chain(&sweep.eta_y) {
                if !eta.is_finite() || eta < 0.0 {
                    return Err(CdeError::InvalidConfig(format!(
                        "noise intensity {eta} must be finite and nonnegative"
                    )));
                }
            }
            for spec in &self.estimators {
                if spec.with_noise(0.0, 0.0).is_none() {
                    return Err(CdeError::InvalidConfig(format!(
                        "estimator {:?} takes no smoothing noise and cannot be swept",
                        spec.label()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Hash of the canonical JSON form, stamped on every output row so a
    /// CSV can be traced back to the exact config that produced it.
    pub fn fingerprint(&self) -> u64 {
        let text = serde_json::to_string(self).expect("config serializes");
        stable_hash(&[&text])
    }

    /// The estimator list actually run: as written, or expanded over the
    /// noise grid with one labeled variant per (eta_x, eta_y) pair.
    pub fn expanded_estimators(&self) -> Vec<(String, EstimatorSpec)> {
        match &self.noise_sweep {
            None => self
                .estimators
                .iter()
                .map(|spec| (spec.label().to_string(), spec.clone()))
                .collect(),
            Some(sweep) => {
                let mut out = Vec::new();
                for spec in &self.estimators {
                    for &ex in &sweep.eta_x {
                        for &ey in &sweep.eta_y {
                            let label = format!("{}[eta_x={ex};eta_y={ey}]", spec.label());
                            let swept = spec
                                .with_noise(ex, ey)
                                .expect("validate() rejects sweeps over noiseless estimators");
                            out.push((label, swept));
                        }
                    }
                }
                out
            }
        }
    }

    /// Every cell of the run, in output order: simulators outermost, then
    /// estimators, sample sizes, and seeds innermost.
    pub fn cells(&self) -> Vec<BenchCell> {
        let estimators = self.expanded_estimators();
        let mut cells = Vec::new();
        for sim in &self.simulators {
            for (est_label, est) in &estimators {
                for &n in &self.sample_sizes {
                    for &seed in &self.protocol.seeds {
                        cells.push(BenchCell::new(
                            self.master_seed,
                            sim.clone(),
                            est_label.clone(),
                            est.clone(),
                            n,
                            seed,
                        ));
                    }
                }
            }
        }
        cells
    }
}

/// One unit of benchmark work.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchCell {
    pub simulator: SimulatorSpec,
    pub estimator_label: String,
    pub estimator: EstimatorSpec,
    pub n_samples: usize,
    pub seed: u64,
    /// Root of the cell's private seed tree; see [`BenchCell::new`].
    pub cell_seed: u64,
}

impl BenchCell {
    /// The cell seed hashes the cell's labeled coordinates, not its grid
    /// position, so extending any config axis never reshuffles the seeds
    /// of cells that were already present.
    pub fn new(
        master_seed: u64,
        simulator: SimulatorSpec,
        estimator_label: String,
        estimator: EstimatorSpec,
        n_samples: usize,
        seed: u64,
    ) -> BenchCell {
        let cell_seed = stable_hash(&[
            &format!("master={master_seed}"),
            &format!("sim={}", simulator.label()),
            &format!("est={estimator_label}"),
            &format!("n={n_samples}"),
            &format!("seed={seed}"),
        ]);
        BenchCell {
            simulator,
            estimator_label,
            estimator,
            n_samples,
            seed,
            cell_seed,
        }
    }
}

/// One raw output row. A failed cell keeps its identity columns and the
/// error message; the metric columns stay empty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub simulator: String,
    pub estimator: String,
    pub n_samples: usize,
    pub seed: u64,
    pub hellinger: Option<f64>,
    pub avg_log_likelihood: Option<f64>,
    pub rmse_mean: Option<f64>,
    pub rmse_std: Option<f64>,
    pub wall_time_s: f64,
    pub config_hash: u64,
    pub error: Option<String>,
}

/// Runs a single cell, trapping any failure in the record's error column.
pub fn run_cell(cell: &BenchCell, config: &BenchmarkConfig, config_hash: u64) -> RunRecord {
    let start = Instant::now();
    let outcome = execute_cell(cell, config);
    let wall_time_s = start.elapsed().as_secs_f64();
    let mut record = RunRecord {
        simulator: cell.simulator.label().to_string(),
        estimator: cell.estimator_label.clone(),
        n_samples: cell.n_samples,
        seed: cell.seed,
        hellinger: None,
        avg_log_likelihood: None,
        rmse_mean: None,
        rmse_std: None,
        wall_time_s,
        config_hash,
        error: None,
    };
    match outcome {
        Ok(report) => {
            record.hellinger = report.hellinger_mean;
            record.avg_log_likelihood = Some(report.avg_log_likelihood);
            record.rmse_mean = Some(report.rmse_mean);
            record.rmse_std = Some(report.rmse_std);
        }
        Err(e) => record.error = Some(e.to_string()),
    }
    record
}

fn execute_cell(cell: &BenchCell, config: &BenchmarkConfig) -> Result<MetricsReport> {
    let sim = cell.simulator.make()?;
    let mut data_rng = ChaCha8Rng::seed_from_u64(derive_seed(cell.cell_seed, "data"));
    let train = sim.sample_joint(cell.n_samples, &mut data_rng)?;
    let fitted = cell
        .estimator
        .with_seed(derive_seed(cell.cell_seed, "fit"))
        .fit(&train)?;
    let mut val_rng = ChaCha8Rng::seed_from_u64(derive_seed(cell.cell_seed, "val"));
    let validation = sim.sample_joint(config.n_validation, &mut val_rng)?;
    evaluate(
        fitted.as_density(),
        &validation,
        Some((sim.as_ref(), &config.protocol)),
    )
}

/// Completed benchmark: raw records in cell order plus the failure count.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchmarkOutput {
    pub records: Vec<RunRecord>,
    pub n_failed: usize,
}

/// Runs every cell of the config, optionally capping the worker thread
/// count ([`None`] keeps the global default). The output order and all
/// metric columns are independent of the thread count.
pub fn run_benchmark(config: &BenchmarkConfig, threads: Option<usize>) -> Result<BenchmarkOutput> {
    config.validate()?;
    let cells = config.cells();
    let config_hash = config.fingerprint();
    let records = with_thread_limit(threads, || {
        map_items(&cells, |cell| run_cell(cell, config, config_hash))
    });
    let n_failed = records.iter().filter(|r| r.error.is_some()).count();
    Ok(BenchmarkOutput { records, n_failed })
}

fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else if v == f64::INFINITY {
        "inf".to_string()
    } else if v == f64::NEG_INFINITY {
        "-inf".to_string()
    } else {
        format!("{v}")
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn csv_field(text: &str) -> String {
    if text.contains(',') || text.contains('"') || text.contains('\n') {
        format!("\"{}\"", text.replace('"', "\"\""))
    } else {
        text.to_string()
    }
}

/// Renders the raw per-cell table. Floats print in shortest round-trip
/// form; missing metrics print as empty fields, infinities as `inf`/`-inf`.
pub fn raw_csv(records: &[RunRecord]) -> String {
    let mut out = String::from(RAW_CSV_HEADER);
    out.push('\n');
    for r in records {
        let row = [
            csv_field(&r.simulator),
            csv_field(&r.estimator),
            r.n_samples.to_string(),
            r.seed.to_string(),
            fmt_opt(r.hellinger),
            fmt_opt(r.avg_log_likelihood),
            fmt_opt(r.rmse_mean),
            fmt_opt(r.rmse_std),
            fmt_f64(r.wall_time_s),
            r.config_hash.to_string(),
            csv_field(r.error.as_deref().unwrap_or("")),
        ];
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Mean and population spread of each metric over one
/// (simulator, estimator, sample size) group of seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub simulator: String,
    pub estimator: String,
    pub n_samples: usize,
    pub n_runs: usize,
    pub n_errors: usize,
    pub hellinger_mean: Option<f64>,
    pub hellinger_std: Option<f64>,
    pub avg_log_likelihood_mean: Option<f64>,
    pub avg_log_likelihood_std: Option<f64>,
    pub rmse_mean_mean: Option<f64>,
    pub rmse_mean_std: Option<f64>,
    pub rmse_std_mean: Option<f64>,
    pub rmse_std_std: Option<f64>,
}

fn summarize(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        (None, None)
    } else {
        (Some(mean(values)), Some(population_std(values)))
    }
}

/// Groups records by (simulator, estimator, n_samples) in first-appearance
/// order and summarizes each metric over the rows where it is present.
/// Wall time is deliberately absent: the aggregate table is a pure
/// function of the raw metric columns.
pub fn aggregate(records: &[RunRecord]) -> Vec<AggregateRow> {
    let mut order: Vec<(String, String, usize)> = Vec::new();
    for r in records {
        let key = (r.simulator.clone(), r.estimator.clone(), r.n_samples);
        if !order.contains(&key) {
            order.push(key);
        }
    }
    order
        .into_iter()
        .map(|(sim, est, n)| {
            let members: Vec<&RunRecord> = records
                .iter()
                .filter(|r| r.simulator == sim && r.estimator == est && r.n_samples == n)
                .collect();
            let collect = |get: fn(&RunRecord) -> Option<f64>| -> Vec<f64> {
                members.iter().filter_map(|r| get(r)).collect()
            };
            let (hellinger_mean, hellinger_std) = summarize(&collect(|r| r.hellinger));
            let (avg_log_likelihood_mean, avg_log_likelihood_std) =
                summarize(&collect(|r| r.avg_log_likelihood));
            let (rmse_mean_mean, rmse_mean_std) = summarize(&collect(|r| r.rmse_mean));
            let (rmse_std_mean, rmse_std_std) = summarize(&collect(|r| r.rmse_std));
            AggregateRow {
                simulator: sim,
                estimator: est,
                n_samples: n,
                n_runs: members.len(),
                n_errors: members.iter().filter(|r| r.error.is_some()).count(),
                hellinger_mean,
                hellinger_std,
                avg_log_likelihood_mean,
                avg_log_likelihood_std,
                rmse_mean_mean,
                rmse_mean_std,
                rmse_std_mean,
                rmse_std_std,
            }
        })
        .collect()
}

/// Renders the aggregate table produced by [`aggregate`].
pub fn aggregate_csv(rows: &[AggregateRow]) -> String {
    let mut out = String::from(AGG_CSV_HEADER);
    out.push('\n');
    for r in rows {
        let row = [
            csv_field(&r.simulator),
            csv_field(&r.estimator),
            r.n_samples.to_string(),
            r.n_runs.to_string(),
            r.n_errors.to_string(),
            fmt_opt(r.hellinger_mean),
            fmt_opt(r.hellinger_std),
            fmt_opt(r.avg_log_likelihood_mean),
            fmt_opt(r.avg_log_likelihood_std),
            fmt_opt(r.rmse_mean_mean),
            fmt_opt(r.rmse_mean_std),
            fmt_opt(r.rmse_std_mean),
            fmt_opt(r.rmse_std_std),
        ];
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Path of the aggregate table next to the raw one: `runs.csv` maps to
/// `runs_agg.csv`.
pub fn agg_path(raw_path: &str) -> String {
    match raw_path.rsplit_once('.') {
        Some((stem, ext)) => format!("{stem}_agg.{ext}"),
        None => format!("{raw_path}_agg"),
    }
}
