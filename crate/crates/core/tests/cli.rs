use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use weylscale::cli::sha256_hex;

fn weylscale(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_weylscale")).args(args).output().expect("binary runs")
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn list_prints_every_experiment() {
    let out = weylscale(&["list"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 11);
    assert!(text.lines().any(|l| l == "trace-diagnostics"));
}

#[test]
fn translation_sweep_writes_csv_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = weylscale(&["run", "sweep-translation", "--output", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8(out.stdout).unwrap().contains("summary: pass"));

    let csv = std::fs::read_to_string(dir.path().join("sweep-translation.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 7);
    let m = manifest(dir.path());
    assert_eq!(m["schema_version"], 1);
    assert_eq!(m["experiment"], "sweep-translation");
    assert_eq!(m["summary"]["pass"], true);
    let config = m["config"].as_str().unwrap();
    assert_eq!(m["config_sha256"], sha256_hex(config.as_bytes()));
    assert_eq!(m["outputs"][0]["sha256"], sha256_hex(csv.as_bytes()));
}

#[test]
fn json_format_and_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# bessel table\nformat = json\nseed = 3\n").unwrap();
    let out_dir = dir.path().join("out");
    let out = weylscale(&["run", "bessel", "--config", cfg.to_str().unwrap(), "--output", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let data: Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("bessel.json")).unwrap()).unwrap();
    assert_eq!(data["rows"].as_array().unwrap().len(), 40);
    assert!(manifest(&out_dir)["config"].as_str().unwrap().contains("seed = 3"));
}

#[test]
fn invalid_config_reports_every_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = weylscale(&[
        "run",
        "sweep-translation",
        "--mass=-1",
        "--grid-points",
        "1000",
        "--output",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("`mass`") && err.contains("`grid_points`"), "{err}");
    assert!(!dir.path().join("manifest.json").exists());
}

#[test]
fn validate_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.cfg");
    std::fs::write(&good, "mass = 0.5\nlambda-grid = 1:1e-2:5\n").unwrap();
    assert!(weylscale(&["validate", good.to_str().unwrap()]).status.success());
    let bad = dir.path().join("bad.cfg");
    std::fs::write(&bad, "mass = zero\nunknown = 1\n").unwrap();
    assert_eq!(weylscale(&["validate", bad.to_str().unwrap()]).status.code(), Some(2));
    let missing = dir.path().join("missing.cfg");
    assert_eq!(weylscale(&["validate", missing.to_str().unwrap()]).status.code(), Some(4));
}

#[test]
fn unwritable_output_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("plain-file");
    std::fs::write(&file, "").unwrap();
    let target = file.join("sub");
    let out = weylscale(&["run", "bessel", "--output", target.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
}
