use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn nclab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nclab")).args(args).output().unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.json");
    fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

const RADEMACHER: &str = r#"{
  "mode": "rate",
  "process": { "kind": "iid", "marginal": [0.5, 0.5], "embedding": [[-1.0], [1.0]] },
  "observable": { "builder": "identity" },
  "index_family": { "kind": "linear", "ell": 1 },
  "grid": [64, 128, 256, 512, 1024],
  "replications": { "T": 10000, "T_cal": 10000 },
  "master_seed": 2024,
  "output": "unused"
}"#;

#[test]
fn rate_run_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), RADEMACHER);
    let out = dir.path().join("out");
    let o = nclab(&[
        "rate",
        "--config",
        &config,
        "--out",
        out.to_str().unwrap(),
        "--workers",
        "2",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("rate.csv")).unwrap();
    assert_eq!(csv.lines().count(), 6);
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("rate.json")).unwrap()).unwrap();
    assert!(json["results"]["report"]["slope"].is_number());
    // stdout lists the written files only
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert_eq!(stdout.lines().count(), 2);
}

#[test]
fn seed_flag_changes_results_and_reruns_are_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), RADEMACHER);
    let run = |seed: &str, name: &str, workers: &str| {
        let out = dir.path().join(name);
        let o = nclab(&[
            "rate",
            "--config",
            &config,
            "--seed",
            seed,
            "--workers",
            workers,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0));
        fs::read(out.join("rate.csv")).unwrap()
    };
    let a = run("5", "a", "1");
    let b = run("5", "b", "3");
    let c = run("6", "c", "1");
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn malformed_transition_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let body = RADEMACHER.replace(
        r#"{ "kind": "iid", "marginal": [0.5, 0.5], "embedding": [[-1.0], [1.0]] }"#,
        r#"{ "kind": "doeblin_chain", "transition": [[0.5, 0.5], [0.5, 0.4]] }"#,
    );
    let config = write_config(dir.path(), &body);
    let o = nclab(&[
        "rate",
        "--config",
        &config,
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("process.transition[1]"));
}

#[test]
fn syntax_errors_report_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "{\n  \"mode\": \"rate\",\n  \"grid\": [1, 2,\n}");
    let o = nclab(&["rate", "--config", &config]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 4"));
}

#[test]
fn check_inequalities_without_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ineq");
    let o = nclab(&["check-inequalities", "--seed", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("inequalities.json")).unwrap()).unwrap();
    assert_eq!(json["results"]["failures"].as_array().unwrap().len(), 0);
    assert_eq!(json["results"]["instances"], 700);
}

#[test]
fn dump_neighborhoods_writes_intervals() {
    let dir = tempfile::tempdir().unwrap();
    let body = RADEMACHER.replace(
        r#""output": "unused""#,
        r#""output": "unused", "options": { "block_length": 1, "neighborhood_horizon": 3 }"#,
    );
    let config = write_config(dir.path(), &body);
    let out = dir.path().join("nb");
    let o = nclab(&[
        "dump-neighborhoods",
        "--config",
        &config,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        fs::read_to_string(out.join("neighborhoods.csv")).unwrap(),
        "n,interval_start,interval_end\n1,1,2\n2,1,3\n3,2,3\n"
    );
}

#[test]
fn missing_config_is_a_usage_error() {
    let o = nclab(&["variance"]);
    assert_eq!(o.status.code(), Some(1));
    let o = nclab(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(1));
    let o = nclab(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
}
