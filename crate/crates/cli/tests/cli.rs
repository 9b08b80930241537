use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn infer(dir: &Path, config: &str, extra: &[&str]) -> Output {
    let cfg = dir.join("config.json");
    fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_infer"))
        .arg("run")
        .arg(&cfg)
        .args(extra)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn posterior_of_one_normal_datum() {
    let dir = tempfile::tempdir().unwrap();
    let out = infer(
        dir.path(),
        r#"{"command": "posterior", "family": "normal-location", "factor": "location",
            "data": [0], "output": "post", "emit_plot": true}"#,
        &[],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let j = read_json(&dir.path().join("post.json"));
    let r = &j["result"];
    assert!(r["log_eta"].as_f64().unwrap().abs() < 1e-9);
    let d = r["evaluations"][0]["density"].as_f64().unwrap();
    assert!((d - 0.398_942_280_401_432_7).abs() < 1e-9, "{d}");
    let csv = fs::read_to_string(dir.path().join("post.csv")).unwrap();
    assert!(csv.starts_with("theta,density,cdf\n"));
    assert!(!csv.contains('\r'));
    let svg = fs::read_to_string(dir.path().join("post.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
    let m = read_json(&dir.path().join("post.manifest.json"));
    let files: Vec<&str> = m["output_files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap())
        .collect();
    assert_eq!(
        files,
        ["post.json", "post.csv", "post.svg", "post.manifest.json"]
    );
    for f in files {
        assert!(dir.path().join(f).exists());
    }
    assert!(m["wall_time_seconds"].as_f64().unwrap() >= 0.0);
    assert_eq!(m["config_echo"]["family"], "normal-location");
}

#[test]
fn coverage_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"command": "coverage", "family": "normal-location", "truth": 0.5,
                  "trials": 100000, "delta": 0.9, "seed": 42, "output": "cov"}"#;
    let a = infer(dir.path(), cfg, &["--output", "a", "--jobs", "2"]);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    let b = infer(dir.path(), cfg, &["--output", "b"]);
    assert!(b.status.success());
    let ca = fs::read(dir.path().join("a.csv")).unwrap();
    let cb = fs::read(dir.path().join("b.csv")).unwrap();
    assert_eq!(ca, cb);
    let text = String::from_utf8(ca).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("trials,covered,coverage,target,std_error,seed")
    );
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[0], "100000");
    let cov: f64 = row[2].parse().unwrap();
    assert!((cov - 0.9).abs() < 0.003, "{cov}");
    // JSON identical apart from the output prefix echoed in the config
    let mut ja = read_json(&dir.path().join("a.json"));
    let mut jb = read_json(&dir.path().join("b.json"));
    ja["config"]["output"] = Value::Null;
    jb["config"]["output"] = Value::Null;
    ja["result"]["config_echo"] = Value::Null;
    jb["result"]["config_echo"] = Value::Null;
    assert_eq!(ja, jb);
}

#[test]
fn compare_priors_on_two_equal_points() {
    let dir = tempfile::tempdir().unwrap();
    let out = infer(
        dir.path(),
        r#"{"command": "compare-priors", "data": [1, 1], "output": "cmp", "emit_plot": true}"#,
        &[],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = fs::read_to_string(dir.path().join("cmp.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("lambda,consistency,reference"));
    assert_eq!(lines.count(), 2049);
    let j = read_json(&dir.path().join("cmp.json"));
    assert!(j["result"]["l1_distance"].as_f64().unwrap() > 0.01);
    assert!(j["result"]["product_rule_residual_a"].is_null());
    assert!(dir.path().join("cmp.svg").exists());
}

#[test]
fn fiducial_and_reduce_commands() {
    let dir = tempfile::tempdir().unwrap();
    let out = infer(
        dir.path(),
        r#"{"command": "fiducial", "family": "exponential-scale", "data": [1], "output": "fid"}"#,
        &[],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let j = read_json(&dir.path().join("fid.json"));
    assert!(j["result"]["residual"].as_f64().unwrap() < 1e-6);

    let out = infer(
        dir.path(),
        r#"{"command": "reduce", "family": "exponential-scale", "output": "red"}"#,
        &[],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let j = read_json(&dir.path().join("red.json"));
    assert!(j["result"]["h_form_residual"].as_f64().unwrap() < 1e-8);
}

#[test]
fn pit_of_the_consistency_predictive_is_uniform() {
    let dir = tempfile::tempdir().unwrap();
    let out = infer(
        dir.path(),
        r#"{"command": "pit", "family": "exponential-scale", "truth": 2,
            "trials": 10000, "seed": 3, "output": "pit"}"#,
        &[],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let j = read_json(&dir.path().join("pit.json"));
    assert_eq!(j["result"]["uniform_at_1pct"], true);
    let bad = infer(
        dir.path(),
        r#"{"command": "pit", "family": "exponential-scale", "truth": 2, "factor": "sigma^-2",
            "trials": 10000, "seed": 3, "output": "pit2"}"#,
        &[],
    );
    assert!(bad.status.success());
    let j = read_json(&dir.path().join("pit2.json"));
    assert_eq!(j["result"]["uniform_at_1pct"], false);
}

#[test]
fn config_errors_exit_2_and_list_every_field() {
    let dir = tempfile::tempdir().unwrap();
    let out = infer(
        dir.path(),
        r#"{"command": "coverage", "family": "gumbel", "delta": 1.2, "truth": 0}"#,
        &[],
    );
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("delta") && err.contains("1.2"), "{err}");
    assert!(
        err.contains("family") && err.contains("normal-location"),
        "{err}"
    );
    assert!(out.stdout.is_empty());
    assert!(!dir.path().join("coverage.json").exists());
}

#[test]
fn flags_override_config_fields() {
    let dir = tempfile::tempdir().unwrap();
    let out = infer(
        dir.path(),
        r#"{"command": "coverage", "family": "normal-location", "truth": 0, "delta": 1.2}"#,
        &[
            "--delta", "0.5", "--trials", "200", "--seed", "4", "--output", "o",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let j = read_json(&dir.path().join("o.json"));
    assert_eq!(j["config"]["delta"], 0.5);
    assert_eq!(j["result"]["trials"], 200);
    assert_eq!(j["result"]["seed"], 4);
}

#[test]
fn numerical_failures_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    // a flat factor on a scale parameter is not normalizable
    let out = infer(
        dir.path(),
        r#"{"command": "posterior", "family": "exponential-scale", "factor": "location",
            "data": [1], "output": "bad"}"#,
        &[],
    );
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("posterior:") && err.contains("not normalizable"),
        "{err}"
    );
    assert!(!dir.path().join("bad.json").exists());
    assert!(!dir.path().join("bad.manifest.json").exists());
}

#[test]
fn unwritable_output_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("blocker"), "").unwrap();
    let out = infer(
        dir.path(),
        r#"{"command": "posterior", "family": "normal-location", "data": [0],
            "output": "blocker/sub/post"}"#,
        &[],
    );
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn diagnostics_stay_on_stderr() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("config.json");
    fs::write(
        &cfg,
        r#"{"command": "posterior", "family": "normal-location", "data": [0], "output": "p"}"#,
    )
    .unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_infer"))
        .args(["run", cfg.to_str().unwrap()])
        .env("INFER_LOG", "debug")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(
        stdout.lines().collect::<Vec<_>>(),
        ["p.json", "p.csv", "p.manifest.json"]
    );
    assert!(String::from_utf8_lossy(&out.stderr).contains("posterior on normal-location"));
}

#[test]
fn validate_prints_the_parsed_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(
        &cfg,
        r#"{"command": "posterior", "family": "normal-location", "data": [0]}"#,
    )
    .unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_infer"))
        .args(["validate", cfg.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(out.status.success());
    let echo: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(echo["command"], "posterior");
    assert_eq!(echo["delta"], 0.9);
}

#[test]
fn joint_posterior_and_generated_data() {
    let dir = tempfile::tempdir().unwrap();
    let out = infer(
        dir.path(),
        r#"{"command": "posterior", "family": "normal", "seed": 1,
            "data": {"generate": {"n": 6, "theta": [1.0, 2.0]}}, "output": "joint"}"#,
        &[],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let j = read_json(&dir.path().join("joint.json"));
    assert_eq!(j["result"]["data"].as_array().unwrap().len(), 6);
    let csv = fs::read_to_string(dir.path().join("joint.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 256 * 256);
}
