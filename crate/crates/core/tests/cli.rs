//! End-to-end invocations of the `adom-bench` binary.

use std::path::Path;
use std::process::Command;

fn bench() -> Command {
    Command::new(env!("CARGO_BIN_EXE_adom-bench"))
}

fn write_cfg(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("run.cfg");
    std::fs::write(&path, body).unwrap();
    path
}

const BASE: &str = "\
[experiment]
name = cli-test
[oracle]
kind = quadratic
n = 6
d = 3
target_kappa = 20
[network]
topology = ring-star
switch_period = 5
[algorithm]
kind = adom
[run]
iterations = 200
diagnostics = enforce
";

#[test]
fn run_writes_parseable_trace() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), BASE);
    let out = bench()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .arg("--quiet")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let trace = std::fs::read_to_string(dir.path().join("cli-test-trace.csv")).unwrap();
    let rows = adom::bench::parse_trace_csv(&trace).unwrap();
    assert_eq!(rows.len(), 201);
    assert!(rows[200].dist_sq < rows[0].dist_sq);
}

#[test]
fn seed_and_steps_overrides_apply() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), BASE);
    let run = |seed: &str| -> String {
        let out = bench()
            .args(["run", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(dir.path())
            .args(["--steps", "50", "--seed", seed, "--quiet"])
            .output()
            .unwrap();
        assert!(out.status.success());
        std::fs::read_to_string(dir.path().join("cli-test-trace.csv")).unwrap()
    };
    let a = run("1");
    let b = run("2");
    let a2 = run("1");
    assert_eq!(adom::bench::parse_trace_csv(&a).unwrap().len(), 51);
    assert_eq!(a, a2, "same seed reproduces the trace byte-for-byte");
    assert_ne!(a, b, "different seed changes the instance");
}

#[test]
fn sweep_writes_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), &format!("{BASE}[grid]\nkappa = 5, 20\n"));
    let out = bench()
        .args(["sweep", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .arg("--quiet")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = std::fs::read_to_string(dir.path().join("cli-test-summary.csv")).unwrap();
    let mut lines = summary.lines();
    assert_eq!(
        lines.next().unwrap(),
        "kappa,chi,algorithm,iters_to_1e-6,comm_to_1e-6,fitted_slope,theory_slope"
    );
    assert_eq!(lines.count(), 2);
}

#[test]
fn spectrum_prints_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), BASE);
    let out = bench().args(["spectrum", "--config"]).arg(&cfg).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("lambda_max"));
    assert!(text.contains("chi"));
}

#[test]
fn unknown_config_key_is_a_hard_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), &format!("{BASE}surprise = 1\n"));
    let out = bench().args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("surprise"), "stderr: {err}");
}

#[test]
fn check_negative_control_fails() {
    let ok = bench()
        .args(["check", "--instances", "3", "--steps", "80", "--seed", "4", "--quiet"])
        .status()
        .unwrap();
    assert!(ok.success());
    let broken = bench()
        .args([
            "check", "--instances", "3", "--steps", "80", "--seed", "4", "--theta-scale", "60",
            "--quiet",
        ])
        .status()
        .unwrap();
    assert_eq!(broken.code(), Some(2));
}
