use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tar-aarch"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn crate_path(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join(rel)
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn log100_of_two_prices() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "p.csv", "price\n100\n101\n");
    let out = run(&["transform", &f, "--method", "log100"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    let v: f64 = lines[1].parse().unwrap();
    assert!((v - 0.995_033_085_316_808_3).abs() < 1e-14);
}

#[test]
fn constant_prices_give_zero_returns() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "p.csv", "7\n7\n7\n7\n");
    for method in ["log", "log100", "relative"] {
        let out = run(&["transform", &f, "--method", method, "--format", "json"]);
        assert_eq!(code(&out), 0);
        let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
        let values = doc["values"].as_array().unwrap();
        assert_eq!(values.len(), 3);
        assert!(values.iter().all(|v| v.as_f64() == Some(0.0)));
    }
    let out = run(&["transform", &f, "--method", "boxcox", "--format", "json"]);
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["values"].as_array().unwrap().len(), 4);
}

#[test]
fn text_row_is_a_data_error_naming_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "p.csv", "price\n100\n101\nabc\n102\n");
    let out = run(&["transform", &f, "--method", "log"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("line 4"), "{}", stderr(&out));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    assert_eq!(code(&run(&["transform", "x.csv", "--method", "log", "--bogus"])), 2);
    assert_eq!(code(&run(&["simulate", "--canned", "lynx", "--nope"])), 2);
    assert_eq!(code(&run(&["frobnicate"])), 2);
    assert_eq!(code(&run(&["transform", "x.csv", "--method", "cube"])), 2);
}

#[test]
fn simulate_is_deterministic_and_canned_lynx_needs_no_file() {
    let a = run(&["simulate", "--canned", "lynx", "--n", "300", "--seed", "5"]);
    let b = run(&["simulate", "--canned", "lynx", "--n", "300", "--seed", "5"]);
    assert_eq!(code(&a), 0, "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert!(text.starts_with("index,x,h,z\n"));
    assert_eq!(text.lines().count(), 301);
    let c = run(&["simulate", "--canned", "lynx", "--n", "300", "--seed", "6"]);
    assert_ne!(c.stdout, text.as_bytes());
}

#[test]
fn explosive_spec_fails_with_time_index() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(
        dir.path(),
        "boom.json",
        r#"{"p":0,"q":1,"delay":1,"thresholds":[],"tar":[[0.0]],"alpha0":1.0,"alphas":[2.5],"betas":[0.5]}"#,
    );
    let out = run(&["simulate", "--spec", &spec, "--n", "5000", "--burn-in", "0"]);
    assert_eq!(code(&out), 1);
    let err = stderr(&out);
    assert!(err.contains("warning:"), "{err}");
    assert!(err.contains("time index"), "{err}");
}

#[test]
fn simulate_json_materializes_the_configuration() {
    let out = run(&["simulate", "--canned", "lynx", "--n", "20", "--format", "json"]);
    assert_eq!(code(&out), 0);
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["config"]["seed"], 0);
    assert_eq!(doc["config"]["burn_in"], 500);
    assert_eq!(doc["config"]["spec"]["delay"], 2);
    assert_eq!(doc["x"].as_array().unwrap().len(), 20);
}

fn fixture() -> String {
    crate_path("tests/fixtures/reference_n2000_seed11.csv")
        .to_str()
        .unwrap()
        .to_string()
}

const TRUTH: [f64; 7] = [0.2, 0.5, -0.3, -0.4, 0.1, 0.4, 0.2];

#[test]
fn fit_with_true_partition_is_within_three_standard_errors() {
    let out = run(&["fit", &fixture(), "--p", "1", "--q", "1", "--delay", "1", "--thresholds", "0"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    let report = &doc["report"];
    assert_eq!(report["converged"], true);
    for (i, t) in TRUTH.iter().enumerate() {
        let est = report["params"][i].as_f64().unwrap();
        let se = report["std_errors"][i].as_f64().unwrap();
        assert!((est - t).abs() < 3.0 * se, "{}: {est} vs {t}", report["param_names"][i]);
    }
    assert_eq!(doc["config"]["max_outer"], 200);
    assert_eq!(doc["config"]["observations"], 2000);
    assert!(doc["search"].is_null());
}

#[test]
fn search_selects_the_true_delay() {
    let out = run(&["fit", &fixture(), "--search", "--delays", "1,2,3"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["search"]["partition"]["delay"], 1);
    let candidates = doc["search"]["candidates"].as_array().unwrap();
    assert!(candidates.len() > 30);
    assert!(candidates.iter().all(|c| c.get("qll").is_some()));
}

#[test]
fn too_short_series_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let rows: String = (0..40).map(|i| format!("{}\n", (i as f64 * 0.7).sin())).collect();
    let f = write(dir.path(), "short.csv", &rows);
    let out = run(&["fit", &f, "--thresholds", "0"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("parameters"));
}

#[test]
fn non_convergence_exits_three_with_best_report() {
    let dir = tempfile::tempdir().unwrap();
    let dest = dir.path().join("fit.json");
    let out = run(&[
        "fit",
        &fixture(),
        "--thresholds",
        "0",
        "--max-outer",
        "1",
        "--output",
        dest.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(dest).unwrap()).unwrap();
    assert_eq!(doc["report"]["converged"], false);
    assert_eq!(doc["report"]["params"].as_array().unwrap().len(), 7);
}

#[test]
fn full_symmetric_fit_runs() {
    let out = run(&["fit", &fixture(), "--thresholds", "0", "--estimator", "full-symmetric", "--format", "csv"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 7);
    assert!(!text.contains("beta"));
}

#[test]
fn trivial_plan_gives_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let rows = dir.path().join("rows.csv");
    let plan = crate_path("plans/trivial.json");
    let out = run(&["mc", plan.to_str().unwrap(), "--rows", rows.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let csv = std::fs::read_to_string(rows).unwrap();
    assert_eq!(csv.lines().count(), 2);
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["summaries"][0]["replicates"], 1);
    assert_eq!(doc["plan"]["burn_in"], 500);
    assert_eq!(doc["config"]["bootstrap"], 500);
}

#[test]
fn summary_and_rows_reload_coherently() {
    let dir = tempfile::tempdir().unwrap();
    let (rows, summary) = (dir.path().join("rows.csv"), dir.path().join("summary.json"));
    let plan = write(
        dir.path(),
        "plan.json",
        r#"{"true_spec":{"p":1,"q":1,"delay":1,"thresholds":[0.0],"tar":[[0.2,0.5],[-0.3,-0.4]],
            "alpha0":0.1,"alphas":[0.4],"betas":[0.2]},"sample_sizes":[300,600],"replicates":4,"base_seed":9}"#,
    );
    let out = run(&[
        "mc",
        &plan,
        "--rows",
        rows.to_str().unwrap(),
        "--summary",
        summary.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = std::fs::read_to_string(&summary).unwrap();
    let loaded =
        tar_aarch::montecarlo::load_result(&text, std::fs::File::open(&rows).unwrap()).unwrap();
    assert_eq!(loaded.rows.len(), 8);
}

#[test]
fn non_stationary_plan_warns_first_and_failed_plan_exits_four() {
    let dir = tempfile::tempdir().unwrap();
    let plan = write(
        dir.path(),
        "plan.json",
        r#"{"true_spec":{"p":0,"q":1,"delay":1,"thresholds":[],"tar":[[0.0]],
            "alpha0":1.0,"alphas":[2.5],"betas":[0.5]},"sample_sizes":[3000],"replicates":2,"base_seed":1}"#,
    );
    let out = run(&["mc", &plan]);
    assert_eq!(code(&out), 4);
    let err = stderr(&out);
    let warn = err.find("warning:").expect("warning printed");
    let error = err.find("error:").expect("error printed");
    assert!(warn < error);
}

#[test]
fn seed_flag_overrides_the_plan_seed() {
    let plan = crate_path("plans/trivial.json");
    let a = run(&["mc", plan.to_str().unwrap(), "--format", "csv"]);
    let b = run(&["mc", plan.to_str().unwrap(), "--format", "csv", "--seed", "99"]);
    assert_eq!(code(&b), 0);
    assert_ne!(a.stdout, b.stdout);
}

#[test]
fn price_prints_ten_significant_digits() {
    let out = run(&["price", "--spot", "100", "--strike", "100", "--rate", "0", "--sigma", "0.2", "--tau", "1"]);
    assert_eq!(code(&out), 0);
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "7.965567455\n");
    let out = run(&["price", "--spot", "100", "--strike", "0", "--sigma", "0.2", "--tau", "1"]);
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "100.0000000\n");
    let out = run(&["price", "--spot", "100", "--strike", "90", "--sigma", "1e-12", "--tau", "1"]);
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "10.00000000\n");
}

#[test]
fn price_domain_violation_is_a_usage_error() {
    let out = run(&["price", "--spot", "100", "--strike", "100", "--sigma", "-0.2", "--tau", "1"]);
    assert_eq!(code(&out), 2);
    let out = run(&["price", "--spot", "100", "--strike", "100", "--sigma", "0.2", "--tau", "0"]);
    assert_eq!(code(&out), 2);
}
