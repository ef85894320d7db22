//! End-to-end tests of the `cde` binary: every subcommand, the exit-code
//! contract, and the determinism guarantees.

use std::fs;
use std::path::{Path, PathBuf};

use assert_cmd::Command;
use predicates::prelude::*;
use tempfile::TempDir;

fn cde() -> Command {
    let mut cmd = Command::cargo_bin("cde").unwrap();
    // Benchmarks must see only the flags each test passes.
    cmd.env_remove("CDE_BENCH_THREADS");
    cmd
}

fn path(dir: &TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

fn simulate(dir: &TempDir, sim: &str, n: usize, seed: u64, name: &str) -> PathBuf {
    let out = path(dir, name);
    cde()
        .args(["simulate", "--sim", sim, "--n", &n.to_string()])
        .args(["--seed", &seed.to_string(), "--out"])
        .arg(&out)
        .assert()
        .success();
    out
}

/// Tiny MDN config that keeps test fits well under a second.
const SMALL_MDN: &str = r#"{"epochs":120,"hidden":[8],"n_components":4,"batch_size":50}"#;

fn fit(dir: &TempDir, estimator: &str, config: Option<&str>, data: &Path, name: &str) -> PathBuf {
    let model = path(dir, name);
    let mut cmd = cde();
    cmd.args(["fit", "--estimator", estimator, "--data"]).arg(data);
    if let Some(config) = config {
        cmd.args(["--config", config]);
    }
    cmd.arg("--model-out").arg(&model).assert().success();
    model
}

#[test]
fn simulate_is_deterministic_and_reports_rows() {
    let dir = TempDir::new().unwrap();
    let a = simulate(&dir, "econ", 100, 7, "a.csv");
    let b = simulate(&dir, "econ", 100, 7, "b.csv");
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let c = simulate(&dir, "econ", 100, 8, "c.csv");
    assert_ne!(fs::read(&a).unwrap(), fs::read(&c).unwrap());

    let out = path(&dir, "d.csv");
    cde()
        .args(["simulate", "--sim", "arma_jump", "--n", "1000", "--seed", "0", "--out"])
        .arg(&out)
        .assert()
        .success()
        .stdout(predicate::str::contains("1000 rows"));
    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x_0,y_0"));
    assert_eq!(lines.count(), 1000);
}

#[test]
fn simulate_rejects_unknown_simulators_listing_the_names() {
    let dir = TempDir::new().unwrap();
    cde()
        .args(["simulate", "--sim", "foo", "--n", "10", "--out"])
        .arg(path(&dir, "x.csv"))
        .assert()
        .code(2)
        .stderr(predicate::str::contains("econ").and(predicate::str::contains("arma_jump")));
}

#[test]
fn simulate_applies_params_files_and_rejects_unknown_keys() {
    let dir = TempDir::new().unwrap();
    let params = path(&dir, "params.json");
    fs::write(&params, r#"{"p":0.9}"#).unwrap();
    let out = path(&dir, "jumpy.csv");
    cde()
        .args(["simulate", "--sim", "arma_jump", "--n", "50", "--params-file"])
        .arg(&params)
        .arg("--out")
        .arg(&out)
        .assert()
        .success();
    // More jumps than the default process would all but surely produce.
    let plain = simulate(&dir, "arma_jump", 50, 0, "plain.csv");
    assert_ne!(fs::read(&out).unwrap(), fs::read(&plain).unwrap());

    fs::write(&params, r#"{"jump_prob":0.9}"#).unwrap();
    cde()
        .args(["simulate", "--sim", "arma_jump", "--n", "50", "--params-file"])
        .arg(&params)
        .arg("--out")
        .arg(path(&dir, "y.csv"))
        .assert()
        .code(2)
        .stderr(predicate::str::contains("jump_prob"));
}

#[test]
fn fit_logs_losses_and_writes_identical_models_for_identical_seeds() {
    let dir = TempDir::new().unwrap();
    let data = simulate(&dir, "econ", 120, 0, "train.csv");
    let model = path(&dir, "mdn.json");
    cde()
        .args(["fit", "--estimator", "mdn", "--config", SMALL_MDN, "--data"])
        .arg(&data)
        .arg("--model-out")
        .arg(&model)
        .assert()
        .success()
        .stderr(predicate::str::contains("epoch   100"));
    let text = fs::read_to_string(&model).unwrap();
    let json: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(json["kind"], "mdn");

    let again = fit(&dir, "mdn", Some(SMALL_MDN), &data, "mdn2.json");
    assert_eq!(fs::read(&model).unwrap(), fs::read(&again).unwrap());
}

#[test]
fn fit_ckde_loo_cv_embeds_positive_optimized_bandwidths() {
    let dir = TempDir::new().unwrap();
    let data = simulate(&dir, "econ", 100, 0, "train.csv");
    let model = fit(&dir, "ckde", Some(r#"{"mode":"loo-cv"}"#), &data, "ckde.json");
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&model).unwrap()).unwrap();
    assert_eq!(json["kind"], "ckde");
    assert_eq!(json["selection"], "loo_cv");
    for key in ["h_x", "h_y"] {
        for h in json[key].as_array().unwrap() {
            assert!(h.as_f64().unwrap() > 0.0, "{key} = {h}");
        }
    }
}

#[test]
fn fit_names_the_line_of_a_malformed_csv() {
    let dir = TempDir::new().unwrap();
    let data = path(&dir, "bad.csv");
    fs::write(&data, "x_0,y_0\n1.0,2.0\n1.0,zebra\n").unwrap();
    cde()
        .args(["fit", "--estimator", "ckde", "--data"])
        .arg(&data)
        .arg("--model-out")
        .arg(path(&dir, "m.json"))
        .assert()
        .code(1)
        .stderr(predicate::str::contains("line 3").and(predicate::str::contains("zebra")));
}

#[test]
fn eval_emits_three_metrics_for_csv_and_four_for_simulators() {
    let dir = TempDir::new().unwrap();
    let train = simulate(&dir, "econ", 100, 0, "train.csv");
    let val = simulate(&dir, "econ", 80, 1, "val.csv");
    let model = fit(&dir, "ckde", None, &train, "ckde.json");

    let metrics = path(&dir, "csv_metrics.json");
    cde()
        .args(["eval", "--model"])
        .arg(&model)
        .arg("--data")
        .arg(&val)
        .arg("--out")
        .arg(&metrics)
        .assert()
        .success();
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&metrics).unwrap()).unwrap();
    let keys: Vec<&str> = json.as_object().unwrap().keys().map(|k| k.as_str()).collect();
    assert_eq!(keys, ["avg_log_likelihood", "rmse_mean", "rmse_std"]);

    let sim_metrics = path(&dir, "sim_metrics.json");
    cde()
        .args(["eval", "--model"])
        .arg(&model)
        .args(["--sim", "econ", "--n", "300", "--out"])
        .arg(&sim_metrics)
        .assert()
        .success();
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&sim_metrics).unwrap()).unwrap();
    let keys: Vec<&str> = json.as_object().unwrap().keys().map(|k| k.as_str()).collect();
    // Parsed objects come back with sorted keys.
    assert_eq!(
        keys,
        ["avg_log_likelihood", "hellinger_mean", "rmse_mean", "rmse_std"]
    );

    // Scoring a pure function of the model file twice is bit-for-bit stable.
    let again = path(&dir, "again.json");
    cde()
        .args(["eval", "--model"])
        .arg(&model)
        .arg("--data")
        .arg(&val)
        .arg("--out")
        .arg(&again)
        .assert()
        .success();
    assert_eq!(fs::read(&metrics).unwrap(), fs::read(&again).unwrap());
}

#[test]
fn eval_rejects_model_data_dimension_mismatches() {
    let dir = TempDir::new().unwrap();
    let train = simulate(&dir, "econ", 100, 0, "train.csv");
    let model = fit(&dir, "ckde", None, &train, "ckde.json");
    let wide = path(&dir, "wide.csv");
    fs::write(&wide, "x_0,x_1,y_0\n0.1,0.2,0.3\n0.4,0.5,0.6\n").unwrap();
    cde()
        .args(["eval", "--model"])
        .arg(&model)
        .arg("--data")
        .arg(&wide)
        .arg("--out")
        .arg(path(&dir, "m.json"))
        .assert()
        .code(2)
        .stderr(predicate::str::contains("shape mismatch"));
}

#[test]
fn oracle_models_self_evaluate_to_zero_hellinger() {
    let dir = TempDir::new().unwrap();
    let model = path(&dir, "oracle.json");
    fs::write(&model, r#"{"kind":"oracle","sim":{"name":"econ"}}"#).unwrap();
    let metrics = path(&dir, "metrics.json");
    cde()
        .args(["eval", "--model"])
        .arg(&model)
        .args(["--sim", "econ", "--n", "200", "--out"])
        .arg(&metrics)
        .assert()
        .success();
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&metrics).unwrap()).unwrap();
    assert!(json["hellinger_mean"].as_f64().unwrap() < 1e-6);
}

#[test]
fn density_exports_normalized_curves_matching_the_model() {
    let dir = TempDir::new().unwrap();
    let model = path(&dir, "oracle.json");
    fs::write(&model, r#"{"kind":"oracle","sim":{"name":"econ"}}"#).unwrap();
    let out = path(&dir, "curve.csv");
    cde()
        .args(["density", "--model"])
        .arg(&model)
        .args(["--x", "0.5;1.5", "--grid", "-12:14:601", "--out"])
        .arg(&out)
        .assert()
        .success()
        .stdout(predicate::str::contains("1202 rows"));

    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,y,pdf"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 1202);

    for &x in &[0.5, 1.5] {
        let curve: Vec<&Vec<f64>> = rows.iter().filter(|r| r[0] == x).collect();
        assert_eq!(curve.len(), 601);
        let trapezoid: f64 = curve
            .windows(2)
            .map(|w| (w[0][2] + w[1][2]) / 2.0 * (w[1][1] - w[0][1]))
            .sum();
        assert!((trapezoid - 1.0).abs() < 1e-3, "mass at x={x}: {trapezoid}");
        // The simulator is y | x ~ N(x^2, (1+x)^2); check a grid point
        // against the closed form.
        let (mu, sd) = (x * x, 1.0 + x);
        let row = curve.iter().find(|r| r[1] == 1.0).unwrap();
        let z: f64 = (row[1] - mu) / sd;
        let expected = (-0.5 * z * z).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt());
        assert!((row[2] - expected).abs() < 1e-12, "{} vs {expected}", row[2]);
    }
}

#[test]
fn density_rejects_degenerate_grids() {
    let dir = TempDir::new().unwrap();
    let model = path(&dir, "oracle.json");
    fs::write(&model, r#"{"kind":"oracle","sim":{"name":"econ"}}"#).unwrap();
    cde()
        .args(["density", "--model"])
        .arg(&model)
        .args(["--x", "0.5", "--grid", "0:1:1", "--out"])
        .arg(path(&dir, "c.csv"))
        .assert()
        .code(2)
        .stderr(predicate::str::contains("grid"));
}

const TINY_BENCH: &str = r#"{
    "simulators": [{"name": "econ"}],
    "estimators": [{"name": "ckde"}, {"name": "lscde"}],
    "sample_sizes": [60, 120],
    "n_validation": 200,
    "protocol": {"n_x_points": 3, "n_quad": 400, "seeds": [0, 1]}
}"#;

fn read_rows(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(str::to_string)
        .collect()
}

#[test]
fn benchmark_writes_one_row_per_cell_plus_aggregates() {
    let dir = TempDir::new().unwrap();
    let config = path(&dir, "bench.json");
    fs::write(&config, TINY_BENCH).unwrap();
    let out = path(&dir, "runs.csv");
    cde()
        .args(["benchmark", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .args(["--parallel", "1"])
        .assert()
        .success()
        .stdout(predicate::str::contains("8 cells, 0 failed"));

    let raw = read_rows(&out);
    assert_eq!(
        raw[0],
        "simulator,estimator,n_samples,seed,hellinger,avg_log_likelihood,\
         rmse_mean,rmse_std,wall_time_s,config_hash,error"
    );
    assert_eq!(raw.len(), 1 + 8);

    let agg = read_rows(&path(&dir, "runs_agg.csv"));
    assert_eq!(
        agg[0],
        "simulator,estimator,n_samples,n_runs,n_errors,hellinger_mean,hellinger_std,\
         avg_log_likelihood_mean,avg_log_likelihood_std,rmse_mean_mean,rmse_mean_std,\
         rmse_std_mean,rmse_std_std"
    );
    assert_eq!(agg.len(), 1 + 4);

    // Aggregate rows are recomputable from the raw rows they summarize.
    for line in &agg[1..] {
        let fields: Vec<&str> = line.split(',').collect();
        let (sim, est, n) = (fields[0], fields[1], fields[2]);
        let members: Vec<f64> = raw[1..]
            .iter()
            .map(|l| l.split(',').collect::<Vec<&str>>())
            .filter(|f| f[0] == sim && f[1] == est && f[2] == n)
            .map(|f| f[4].parse::<f64>().unwrap())
            .collect();
        assert_eq!(fields[3], members.len().to_string());
        let mean: f64 = members.iter().sum::<f64>() / members.len() as f64;
        let var: f64 =
            members.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / members.len() as f64;
        assert!((fields[5].parse::<f64>().unwrap() - mean).abs() < 1e-15);
        assert!((fields[6].parse::<f64>().unwrap() - var.sqrt()).abs() < 1e-15);
    }
}

/// The raw table minus its wall-time column, which is the one field
/// allowed to vary between otherwise identical runs.
fn strip_wall_time(rows: &[String]) -> Vec<String> {
    rows.iter()
        .map(|row| {
            let mut fields: Vec<&str> = row.split(',').collect();
            fields.remove(8);
            fields.join(",")
        })
        .collect()
}

#[test]
fn benchmark_rows_are_identical_across_thread_counts() {
    let dir = TempDir::new().unwrap();
    let seq = path(&dir, "seq.csv");
    let par = path(&dir, "par.csv");
    for (out, threads) in [(&seq, "1"), (&par, "4")] {
        cde()
            .args(["benchmark", "--config", TINY_BENCH, "--out"])
            .arg(out)
            .args(["--parallel", threads])
            .assert()
            .success();
    }
    assert_eq!(
        strip_wall_time(&read_rows(&seq)),
        strip_wall_time(&read_rows(&par))
    );
    assert_eq!(
        fs::read(path(&dir, "seq_agg.csv")).unwrap(),
        fs::read(path(&dir, "par_agg.csv")).unwrap()
    );
}

#[test]
fn benchmark_thread_env_var_overrides_the_flag() {
    let dir = TempDir::new().unwrap();
    let out = path(&dir, "env.csv");
    cde()
        .env("CDE_BENCH_THREADS", "2")
        .args(["benchmark", "--config", TINY_BENCH, "--out"])
        .arg(&out)
        .args(["--parallel", "1"])
        .assert()
        .success();
    let reference = path(&dir, "ref.csv");
    cde()
        .args(["benchmark", "--config", TINY_BENCH, "--out"])
        .arg(&reference)
        .args(["--parallel", "1"])
        .assert()
        .success();
    assert_eq!(
        strip_wall_time(&read_rows(&out)),
        strip_wall_time(&read_rows(&reference))
    );

    cde()
        .env("CDE_BENCH_THREADS", "zebra")
        .args(["benchmark", "--config", TINY_BENCH, "--out"])
        .arg(path(&dir, "x.csv"))
        .assert()
        .code(2)
        .stderr(predicate::str::contains("CDE_BENCH_THREADS"));
}

#[test]
fn benchmark_keeps_rows_for_failed_cells_and_exits_one_when_all_fail() {
    let dir = TempDir::new().unwrap();
    let config = r#"{
        "simulators": [{"name": "econ"}],
        "estimators": [{"name": "nkde", "epsilon": 1e-12}],
        "sample_sizes": [60],
        "n_validation": 100,
        "protocol": {"n_x_points": 3, "n_quad": 200, "seeds": [0, 1]}
    }"#;
    let out = path(&dir, "runs.csv");
    cde()
        .args(["benchmark", "--config", config, "--out"])
        .arg(&out)
        .args(["--parallel", "1"])
        .assert()
        .code(1)
        .stderr(predicate::str::contains("all 2 benchmark cells failed"));
    let rows = read_rows(&out);
    assert_eq!(rows.len(), 1 + 2);
    for row in &rows[1..] {
        assert!(row.contains("neighbors"), "{row}");
    }
}

#[test]
fn benchmark_rejects_configs_with_unknown_fields_or_bad_versions() {
    let dir = TempDir::new().unwrap();
    cde()
        .args(["benchmark", "--config", r#"{"sample_size": [100]}"#, "--out"])
        .arg(path(&dir, "x.csv"))
        .assert()
        .code(2);
    cde()
        .args(["benchmark", "--config", r#"{"schema_version": 99}"#, "--out"])
        .arg(path(&dir, "x.csv"))
        .assert()
        .code(2)
        .stderr(predicate::str::contains("schema_version"));
    // No output path anywhere: also a config error.
    cde()
        .args(["benchmark", "--config", "{}"])
        .assert()
        .code(2)
        .stderr(predicate::str::contains("--out"));
}

#[test]
fn chrono_split_separates_training_head_from_evaluation_tail() {
    let dir = TempDir::new().unwrap();
    // A wide-feature regression table: 14 features plus one target.
    let mut csv = (0..14).map(|d| format!("x_{d},")).collect::<String>();
    csv.push_str("y_0\n");
    let mut state = 7u64;
    let mut next = move || {
        // Tiny LCG; the values only need to be deterministic and varied.
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (state >> 33) as f64 / (1u64 << 31) as f64 - 0.5
    };
    for _ in 0..100 {
        let features: Vec<f64> = (0..14).map(|_| next()).collect();
        let target: f64 = features.iter().sum::<f64>() / 14.0 + 0.01 * next();
        for feature in &features {
            csv.push_str(&format!("{feature},"));
        }
        csv.push_str(&format!("{target}\n"));
    }
    let data = path(&dir, "panel.csv");
    fs::write(&data, &csv).unwrap();

    let model = path(&dir, "lscde.json");
    cde()
        .args(["fit", "--estimator", "lscde", "--chrono-split", "0.8", "--data"])
        .arg(&data)
        .args(["--config", r#"{"n_centers":40}"#])
        .arg("--model-out")
        .arg(&model)
        .assert()
        .success();
    let metrics = path(&dir, "metrics.json");
    cde()
        .args(["eval", "--chrono-split", "0.8", "--model"])
        .arg(&model)
        .arg("--data")
        .arg(&data)
        .arg("--out")
        .arg(&metrics)
        .assert()
        .success();
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&metrics).unwrap()).unwrap();
    assert!(json["avg_log_likelihood"].as_f64().unwrap().is_finite());

    cde()
        .args(["fit", "--estimator", "ckde", "--chrono-split", "1.5", "--data"])
        .arg(&data)
        .arg("--model-out")
        .arg(path(&dir, "m.json"))
        .assert()
        .code(2)
        .stderr(predicate::str::contains("chrono-split"));
}
