//! End-to-end checks of the batch driver: exit codes, config precedence,
//! artifact/manifest pairing, and byte-determinism under a fixed seed.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_couette2d"))
}

#[test]
fn unknown_experiment_is_usage_error() {
    let out = bin().arg("no-such-experiment").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn out_of_range_eps_is_rejected_by_name() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["verify-operator", "--eps", "0.2", "--out"])
        .arg(tmp.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("(0, 1/12)"), "stderr: {msg}");
}

#[test]
fn config_file_applies_and_flags_override() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = tmp.path().join("run.cfg");
    std::fs::write(&cfg_path, "# comment\nnu = 0.005\nn = 32\nk = 2.0\n").unwrap();
    // flag --k overrides the file value; file nu applies
    let out = bin()
        .args(["linear-run", "--t-end", "0.5", "--k", "1.0", "--config"])
        .arg(&cfg_path)
        .arg("--out")
        .arg(tmp.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let manifest =
        std::fs::read_to_string(tmp.path().join("linear-run/manifest.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&manifest).unwrap();
    assert_eq!(v["config"]["nu"], 0.005);
    assert_eq!(v["config"]["k"], 1.0);
}

#[test]
fn unknown_config_key_is_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = tmp.path().join("run.cfg");
    std::fs::write(&cfg_path, "viscosity = 0.005\n").unwrap();
    let out = bin()
        .args(["verify-operator", "--config"])
        .arg(&cfg_path)
        .arg("--out")
        .arg(tmp.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

fn run_linear(dir: &Path, seed: &str) -> Vec<u8> {
    let out = bin()
        .args(["linear-run", "--k", "1.0", "--t-end", "0.5", "--seed", seed, "--out"])
        .arg(dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    std::fs::read(dir.join("linear-run/trajectory.csv")).unwrap()
}

#[test]
fn fixed_seed_gives_byte_identical_csv() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let csv_a = run_linear(a.path(), "42");
    let csv_b = run_linear(b.path(), "42");
    assert_eq!(csv_a, csv_b);
    let csv_c = run_linear(b.path(), "43");
    assert_ne!(csv_a, csv_c);
}

#[test]
fn every_artifact_has_a_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["verify-operator", "--n", "32", "--out"])
        .arg(tmp.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let dir = tmp.path().join("verify-operator");
    assert!(dir.join("operator_sweep.csv").exists());
    let manifest = std::fs::read_to_string(dir.join("manifest.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&manifest).unwrap();
    let artifacts: Vec<String> = v["artifacts"]
        .as_array()
        .unwrap()
        .iter()
        .map(|a| a.as_str().unwrap().to_string())
        .collect();
    assert!(artifacts.contains(&"operator_sweep.csv".to_string()));
    assert_eq!(v["partial"], false);
}
