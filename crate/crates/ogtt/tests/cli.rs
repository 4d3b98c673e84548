//! End-to-end tests of the `ogtt` binary.

use std::path::Path;
use std::process::{Command, Output};

use ogtt::model::FixedSettings;
use ogtt::synth;

fn ogtt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ogtt"))
        .args(args)
        .env_remove("OGTT_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn write_healthy_obs(dir: &Path) -> std::path::PathBuf {
    let patient = synth::generate(
        &synth::healthy_truth(),
        &FixedSettings::default(),
        &synth::DEFAULT_SCHEDULE,
        21,
    )
    .unwrap();
    let path = dir.join("obs.csv");
    ogtt::io::write_observations(&patient.obs, &path).unwrap();
    path
}

fn small_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("run.cfg");
    std::fs::write(&path, "iterations = 6000\nburn_in = 600\nseed = 5\n").unwrap();
    path
}

#[test]
fn simulate_fixed_point_prints_constant_curve() {
    // v0 = 0 and g0 = gb put the system at its fixed point.
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("v0.cfg");
    std::fs::write(&cfg, "v0 = 0\n").unwrap();
    let out = ogtt(&[
        "simulate", "--theta0", "1.0", "--theta1", "1.0", "--theta2", "0.5", "--g0", "100",
        "--t-end", "1.0", "--grid-step", "0.1",
        "--config", cfg.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    let mut lines = stdout.lines();
    assert_eq!(lines.next().unwrap(), "time_hr,glucose_mg_dl");
    for line in lines {
        let g: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!((g - 100.0).abs() < 1e-9, "line `{line}`");
    }
    assert_eq!(stdout.lines().count(), 12); // header + 11 grid points
}

#[test]
fn simulate_rejects_invalid_parameters() {
    let out = ogtt(&[
        "simulate", "--theta0", "1.0", "--theta1", "1.0", "--theta2", "0.05", "--g0", "100",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.starts_with("error:"), "{stderr}");
    assert!(stderr.contains("theta2"), "{stderr}");
}

#[test]
fn fit_produces_all_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let obs = write_healthy_obs(dir.path());
    let cfg = small_config(dir.path());
    let out_dir = dir.path().join("out");
    let out = ogtt(&[
        "fit",
        obs.to_str().unwrap(),
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    let stdout = String::from_utf8(out.stdout.clone()).unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout.contains("seed: 5"), "{stdout}");
    assert!(stdout.contains("flag normal"), "{stdout}");
    for name in ["posterior.csv", "band.csv", "summary.txt", "band.svg"] {
        assert!(out_dir.join(name).exists(), "{name} missing");
    }
    // The posterior file must be re-readable by the crate's own reader.
    let rows = ogtt::io::read_posterior_csv(&out_dir.join("posterior.csv")).unwrap();
    assert_eq!(rows.len(), 5400);
}

#[test]
fn fit_rejects_single_row_file() {
    let dir = tempfile::tempdir().unwrap();
    let obs = dir.path().join("obs.csv");
    std::fs::write(&obs, "time_hr,glucose_mg_dl\n0,92\n").unwrap();
    let out = ogtt(&["fit", obs.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("need at least 2"), "{stderr}");
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = ogtt(&["fit", "obs.csv", "--wibble"]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("--wibble"), "{stderr}");
}

#[test]
fn unknown_config_key_is_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let obs = write_healthy_obs(dir.path());
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "iterations = 6000\nsigmaa = 4\n").unwrap();
    let out = ogtt(&["fit", obs.to_str().unwrap(), "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("unknown key `sigmaa`"), "{stderr}");
    assert!(stderr.contains("line 2"), "{stderr}");
}

#[test]
fn env_var_overrides_output_dir() {
    let dir = tempfile::tempdir().unwrap();
    let obs = write_healthy_obs(dir.path());
    let cfg = small_config(dir.path());
    let env_out = dir.path().join("from-env");
    let out = Command::new(env!("CARGO_BIN_EXE_ogtt"))
        .args(["fit", obs.to_str().unwrap(), "--config", cfg.to_str().unwrap()])
        .env("OGTT_OUT_DIR", &env_out)
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(env_out.join("posterior.csv").exists());
}

#[test]
fn recover_rejects_too_few_replicates() {
    let out = ogtt(&["recover", "--replicates", "5"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr).unwrap().contains(">= 20"));
}

#[test]
fn sbc_rejects_too_few_replicates() {
    let out = ogtt(&["sbc", "--replicates", "10"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr).unwrap().contains(">= 100"));
}

#[test]
fn unknown_profile_is_reported() {
    let out = ogtt(&["recover", "--profile", "brittle"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr).unwrap().contains("brittle"));
}
