//! End-to-end runs of the `nlos-uv` binary.

use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn nlos_uv(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nlos-uv"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.toml");
    std::fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect()
}

#[test]
fn zero_photons_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let out = nlos_uv(
        &["simulate-channel", "--photons", "0", "--out", "o"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("photons"), "{err}");
    assert!(
        !dir.path().join("o").exists(),
        "no output before validation passes"
    );
}

#[test]
fn empty_lambda_list_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "[ber]\nlambda_s = []\n");
    let out = nlos_uv(&["ber-curve", "--config", &cfg, "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("lambda_s"));
}

#[test]
fn malformed_and_unknown_keys_are_config_errors() {
    let dir = TempDir::new().unwrap();
    for body in [
        "seed = \"x\"\n",
        "[geometry]\nbaseline = 5.0\n",
        "not toml at all [",
    ] {
        let cfg = write_config(dir.path(), body);
        let out = nlos_uv(&["ber-curve", "--config", &cfg, "--out", "o"], dir.path());
        assert_eq!(out.status.code(), Some(1), "{body}");
    }
    let out = nlos_uv(&["ber-curve", "--threads", "0", "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unwritable_output_is_a_runtime_error() {
    let dir = TempDir::new().unwrap();
    std::fs::write(dir.path().join("blocker"), "").unwrap();
    let out = nlos_uv(&["ber-curve", "--out", "blocker/sub"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn default_channel_run_writes_a_nonzero_response() {
    let dir = TempDir::new().unwrap();
    let out = nlos_uv(
        &["simulate-channel", "--seed", "3", "--out", "o"],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let o = dir.path().join("o");
    for name in [
        "channel_r0000.csv",
        "channel_mean.csv",
        "simulate-channel.json",
    ] {
        assert!(o.join(name).exists(), "{name} missing");
    }
    let rows = read_csv(&o.join("channel_mean.csv"));
    let total: f64 = rows.iter().map(|r| r[1].parse::<f64>().unwrap()).sum();
    assert!(total > 0.0);

    let env: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(o.join("simulate-channel.json")).unwrap())
            .unwrap();
    assert_eq!(env["seed"], 3);
    assert_eq!(env["config"]["geometry"]["baseline_distance"], 5000.0);
    assert_eq!(env["config_sha256"].as_str().unwrap().len(), 64);
    let header = std::fs::read_to_string(o.join("channel_mean.csv")).unwrap();
    assert!(header.starts_with("# simulate-channel seed=3 config_sha256="));
}

#[test]
fn ber_curve_covers_the_grid() {
    let dir = TempDir::new().unwrap();
    let out = nlos_uv(&["ber-curve", "--out", "o"], dir.path());
    assert!(out.status.success());
    let rows = read_csv(&dir.path().join("o/ber_curve.csv"));
    // three signal levels by twenty windows
    assert_eq!(rows.len(), 60);
    for r in rows {
        let ber: f64 = r[4].parse().unwrap();
        assert!((0.0..=0.5).contains(&ber));
    }
}

#[test]
fn single_realization_benchmark_reports_one_sample() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "[transport]\nphotons = 3000\n[benchmark]\ndistances = [5000.0]\nrealizations = 1\ntemplate_realizations = 2\n",
    );
    let out = nlos_uv(
        &["localize-bench", "--config", &cfg, "--out", "o"],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rows = read_csv(&dir.path().join("o/localization_benchmark.csv"));
    assert_eq!(rows.len(), 1);
    let env: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("o/localize-bench.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(env["config"]["benchmark"]["realizations"], 1);
}

#[test]
fn shipped_example_config_is_valid() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../config/desk.toml");
    let cfg = nlos_uv::config::ExperimentConfig::load(Path::new(path)).unwrap();
    cfg.validate().unwrap();
    assert_eq!(cfg.transport.photons, 20_000);
}
