use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use segdetect_cli::io::{format_dataset, parse_dataset, read_dataset};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn segdetect(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_segdetect"))
        .args(args)
        .env_remove("SEGDETECT_SEED")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = segdetect(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn detect_matches_golden_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fit.json");
    let input = fixture("small.csv");
    ok(&["detect", "--input", path_str(&input), "--output", path_str(&out), "--seed", "7"]);
    assert_eq!(fs::read_to_string(&out).unwrap(), fs::read_to_string(fixture("small.detect.json")).unwrap());
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("fit.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "detect");
    assert_eq!(manifest["seed"], 7);
}

#[test]
fn refit_and_trace_match_golden_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let input = fixture("small.csv");
    let refit = dir.path().join("refit.json");
    ok(&["refit", "--input", path_str(&input), "--tau", "0.5", "--output", path_str(&refit), "--seed", "7"]);
    assert_eq!(fs::read_to_string(&refit).unwrap(), fs::read_to_string(fixture("small.refit.json")).unwrap());

    let trace = dir.path().join("trace.csv");
    ok(&[
        "trace", "--input", path_str(&input), "--mu", "0.25", "--sa-iters", "200", "--output",
        path_str(&trace), "--seed", "7",
    ]);
    assert_eq!(fs::read_to_string(&trace).unwrap(), fs::read_to_string(fixture("small.trace.csv")).unwrap());
}

#[test]
fn seed_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fit.json");
    let input = fixture("small.csv");
    let status = Command::new(env!("CARGO_BIN_EXE_segdetect"))
        .args(["detect", "--input", path_str(&input), "--output", path_str(&out)])
        .env("SEGDETECT_SEED", "7")
        .output()
        .unwrap();
    assert!(status.status.success());
    assert_eq!(fs::read_to_string(&out).unwrap(), fs::read_to_string(fixture("small.detect.json")).unwrap());
}

#[test]
fn malformed_cell_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(fixture("small.csv")).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let mut cells: Vec<&str> = lines[7].split(',').collect();
    cells[3] = "oops";
    lines[7] = cells.join(",");
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, lines.join("\n")).unwrap();
    let out = segdetect(&["detect", "--input", path_str(&bad), "--output", path_str(&dir.path().join("o.json"))]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("row 7"), "{err}");
    assert!(err.contains("column 4 (x2)"), "{err}");
    assert!(!dir.path().join("o.json").exists());
}

#[test]
fn missing_input_is_an_input_error() {
    let out = segdetect(&["detect", "--input", "/nonexistent/data.csv", "--output", "/tmp/never.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn configuration_errors_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let input = fixture("small.csv");
    let o = dir.path().join("o.json");
    let cases: Vec<Vec<&str>> = vec![
        vec!["detect", "--input", path_str(&input), "--output", path_str(&o), "--n-check", "50"],
        vec!["detect", "--input", path_str(&input), "--output", path_str(&o), "--mu-grid", "0.1,-1"],
        vec!["detect", "--input", path_str(&input), "--output", path_str(&o), "--sa-temp", "0"],
        vec!["detect", "--input", path_str(&input), "--output", path_str(&o), "--folds", "1"],
        vec!["detect", "--input", path_str(&input), "--output", path_str(&o), "--periods", "1,2,3"],
        vec!["detect", "--input", path_str(&input), "--bogus"],
        vec!["refit", "--input", path_str(&input), "--output", path_str(&o), "--tau", "0.7,0.3"],
        vec!["trace", "--input", path_str(&input), "--output", path_str(&o), "--mu", "-1"],
        vec!["trace", "--input", path_str(&input), "--output", path_str(&o), "--mu", "1", "--init", "30,30"],
        vec!["simulate", "--n", "100", "--p", "5", "--n-changes", "1", "--output", path_str(&o)],
        vec!["simulate", "--n", "100", "--p", "20", "--rho", "1.5", "--output", path_str(&o)],
    ];
    for args in cases {
        let out = segdetect(&args);
        assert_eq!(out.status.code(), Some(3), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn config_file_is_applied_and_checked() {
    let dir = tempfile::tempdir().unwrap();
    let input = fixture("small.csv");
    let cfg = dir.path().join("cfg.toml");
    fs::write(&cfg, "mu_grid = [1000000.0]\nsa_iters = 100\n").unwrap();
    let o = dir.path().join("o.json");
    ok(&["detect", "--input", path_str(&input), "--output", path_str(&o), "--config", path_str(&cfg)]);
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(&o).unwrap()).unwrap();
    assert_eq!(doc["n_detected"], 0);

    fs::write(&cfg, "unknown_key = 1\n").unwrap();
    let out = segdetect(&["detect", "--input", path_str(&input), "--output", path_str(&o), "--config", path_str(&cfg)]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn simulate_shapes_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        ok(&["simulate", "--n", "250", "--p", "50", "--n-changes", "1", "--seed", "3", "--output", path_str(p)]);
    }
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text, fs::read_to_string(&b).unwrap());
    assert_eq!(fs::read_to_string(dir.path().join("a.truth.json")).unwrap(), fs::read_to_string(dir.path().join("b.truth.json")).unwrap());
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 251);
    assert!(lines.iter().all(|l| l.split(',').count() == 52));

    let truth: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("a.truth.json")).unwrap()).unwrap();
    assert_eq!(truth["tau_true"], serde_json::json!([0.5]));
    assert_eq!(truth["boundaries"], serde_json::json!([125]));
    assert_eq!(truth["supports"][1], serde_json::json!([6, 7, 8, 9, 10]));

    let c = dir.path().join("c.csv");
    ok(&["simulate", "--n", "250", "--p", "50", "--seed", "4", "--output", path_str(&c)]);
    assert_ne!(fs::read_to_string(&c).unwrap(), text);
}

#[test]
fn no_change_truth_is_empty() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().join("d.csv");
    ok(&["simulate", "--n", "100", "--p", "5", "--output", path_str(&o)]);
    let truth: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("d.truth.json")).unwrap()).unwrap();
    assert_eq!(truth["tau_true"], serde_json::json!([]));
    assert_eq!(truth["supports"], serde_json::json!([[1, 2, 3, 4, 5]]));
}

#[test]
fn simulated_data_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().join("d.csv");
    ok(&["simulate", "--n", "60", "--p", "12", "--n-changes", "2", "--shuffle-rows", "--output", path_str(&o)]);
    let data = read_dataset(&o).unwrap();
    let text = format_dataset(&data);
    assert_eq!(text, fs::read_to_string(&o).unwrap());
    assert_eq!(parse_dataset(&text).unwrap(), data);
}

fn bench(dir: &Path, name: &str, extra: &[&str]) -> (String, String) {
    let out = dir.join(name);
    let mut args = vec![
        "benchmark", "--n", "120", "--p", "12", "--reps", "6", "--n-check", "3", "--sa-iters", "300",
        "--mu-grid", "0.1,0.5", "--seed", "1", "--output", path_str(&out),
    ];
    args.extend_from_slice(extra);
    ok(&args);
    let table = fs::read_to_string(&out).unwrap();
    let reps = fs::read_to_string(segdetect_cli::io::sibling(&out, "reps.csv")).unwrap();
    (table, reps)
}

fn column(table: &str, row: usize, name: &str) -> String {
    let mut lines = table.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let k = header.iter().position(|h| *h == name).unwrap();
    lines.nth(row).unwrap().split(',').nth(k).unwrap().to_string()
}

#[test]
fn benchmark_table_is_deterministic_and_consistent() {
    let dir = tempfile::tempdir().unwrap();
    let (table, reps) = bench(dir.path(), "t1.csv", &["--n-changes", "0,1"]);
    let (again, reps_again) = bench(dir.path(), "t2.csv", &["--n-changes", "0,1", "--workers", "1"]);
    assert_eq!(table, again);
    assert_eq!(reps, reps_again);

    assert!(table.starts_with("n,N,N_check,p,PrM,PrE,PrL,Bias(N),RMSE(N),Bias(L),RMSE(L),reps,failed\n"));
    assert_eq!(table.lines().count(), 3);
    assert_eq!(reps.lines().count(), 1 + 12);
    assert_eq!(column(&table, 0, "Bias(L)"), "NA");
    assert_eq!(column(&table, 0, "RMSE(L)"), "NA");
    for row in 0..2 {
        let sum: f64 = ["PrM", "PrE", "PrL"].iter().map(|c| column(&table, row, c).parse::<f64>().unwrap()).sum();
        assert!((sum - 1.0).abs() < 1e-6, "{table}");
        assert_eq!(column(&table, row, "failed"), "0");
    }

    // A cell's results depend only on its own settings.
    let (single, _) = bench(dir.path(), "t3.csv", &["--n-changes", "1"]);
    assert_eq!(single.lines().nth(1), table.lines().nth(2));
}

#[test]
fn trace_with_one_iteration_has_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().join("t.csv");
    let input = fixture("small.csv");
    ok(&["trace", "--input", path_str(&input), "--mu", "0.25", "--sa-iters", "1", "--init", "10,10,10", "--output", path_str(&o)]);
    let text = fs::read_to_string(&o).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "iteration,d1,d2,d3,objective,accepted");
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("1,"));
}

#[test]
fn help_and_version_succeed() {
    assert!(segdetect(&["--help"]).status.success());
    assert!(segdetect(&["--version"]).status.success());
    assert_eq!(segdetect(&[]).status.code(), Some(3));
}
