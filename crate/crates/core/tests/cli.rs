//! End-to-end runs of the `psm` binary.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn psm(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_psm"))
        .current_dir(dir)
        .env_remove("PSM_SEED")
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}",
            String::from_utf8_lossy(&out.stdout)
        )
    })
}

#[test]
fn solve_radial_writes_outcome_and_field() {
    let dir = tempfile::tempdir().unwrap();
    let out = psm(
        dir.path(),
        &["solve-radial", "--alpha", "5", "--p", "6", "--q", "50"],
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v = json(&out);
    let outcome = &v["manifest"]["outcome"];
    assert_eq!(outcome["classification"], "negative_level_minimizer");
    assert!(outcome["level"].as_f64().unwrap() < 0.0);
    assert_eq!(v["manifest"]["extra"]["config"]["q"], 50.0);
    let field = dir.path().join(v["field_file"].as_str().unwrap());
    assert!(field.exists());

    let pot = psm(
        dir.path(),
        &["potential", "--field", field.to_str().unwrap()],
    );
    assert_eq!(pot.status.code(), Some(0));
    assert!(json(&pot)["v0"].as_f64().unwrap().is_finite());
    assert!(dir.path().join("psm-out/potential.psm2").exists());
}

#[test]
fn verify_lemma_suite_is_all_satisfied() {
    let dir = tempfile::tempdir().unwrap();
    let out = psm(
        dir.path(),
        &["verify", "--suite", "lemma", "--alpha", "6", "--p", "6"],
    );
    assert_eq!(out.status.code(), Some(0));
    let row = &json(&out)["table"][0];
    assert_eq!(
        (row["satisfied"].as_u64(), row["total"].as_u64()),
        (Some(100), Some(100))
    );
    assert!(String::from_utf8_lossy(&out.stderr).contains("100/100"));
}

#[test]
fn constants_prints_one_csv_row() {
    let dir = tempfile::tempdir().unwrap();
    let out = psm(dir.path(), &["constants", "--alpha", "5", "--p", "6"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 2);
    let c1: f64 = rows[1].split(',').nth(5).unwrap().parse().unwrap();
    assert!((c1 - 0.2296).abs() < 1e-4);
}

#[test]
fn malformed_config_exits_two_with_line() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("bad.cfg"),
        "alpha = 5\ngrid.n = 64\ncolour = blue\n",
    )
    .unwrap();
    let out = psm(dir.path(), &["solve-radial", "--config", "bad.cfg"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3") && err.contains("colour"), "{err}");
    assert!(out.stdout.is_empty());
}

#[test]
fn env_seed_overrides_config_but_not_flags() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("s.cfg"),
        "seeds.rng = 3\nverify.count = 2\n",
    )
    .unwrap();
    let run = |extra: &[&str]| {
        let mut args = vec![
            "solve-radial",
            "--config",
            "s.cfg",
            "--q",
            "1e-4",
            "--radial-m",
            "64",
        ];
        args.extend_from_slice(extra);
        let out = Command::new(env!("CARGO_BIN_EXE_psm"))
            .current_dir(dir.path())
            .env("PSM_SEED", "17")
            .args(&args)
            .output()
            .unwrap();
        json(&out)["manifest"]["options"]["seed"].as_u64().unwrap()
    };
    assert_eq!(run(&[]), 17);
    assert_eq!(run(&["--seed", "5"]), 5);
}

#[test]
fn scan_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "scan",
        "--jobs",
        "2",
        "--radial-m",
        "128",
        "--set",
        "scan.p=6",
        "--set",
        "scan.alpha=5,7",
        "--set",
        "scan.q=1e-4",
        "--out",
        "sc",
    ];
    let first = json(&psm(dir.path(), &args));
    assert_eq!(first["solves_performed"], 2);
    let manifest = std::fs::read(dir.path().join("sc/manifest.json")).unwrap();
    let second = json(&psm(dir.path(), &args));
    assert_eq!(second["solves_performed"], 0);
    assert_eq!(
        std::fs::read(dir.path().join("sc/manifest.json")).unwrap(),
        manifest
    );
    assert!(dir.path().join("sc/plots/thresholds.dat").exists());
}

#[test]
fn every_subcommand_has_help() {
    let dir = tempfile::tempdir().unwrap();
    for sub in [
        "solve-radial",
        "solve-nonradial",
        "solve-mp",
        "potential",
        "verify",
        "constants",
        "scan",
    ] {
        let out = psm(dir.path(), &[sub, "--help"]);
        assert_eq!(out.status.code(), Some(0), "{sub}");
        assert!(String::from_utf8_lossy(&out.stdout).contains("Usage"));
    }
}
