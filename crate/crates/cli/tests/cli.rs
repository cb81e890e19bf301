use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn stfosls(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stfosls"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_config(dir: &Path, text: &str) -> Output {
    let config = dir.join("run.cfg");
    fs::write(&config, text).unwrap();
    let out = dir.join("out");
    stfosls(&[
        "run",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ])
}

fn summary_value(dir: &Path, key: &str) -> String {
    let text = fs::read_to_string(dir.join("out/summary.txt")).unwrap();
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")).map(str::to_string))
        .unwrap_or_else(|| panic!("{key} missing from summary"))
}

#[test]
fn uniform_heat_run_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_config(
        dir.path(),
        "case = heat-smooth\nmode = uniform\nlevels = 3\ndegree = 1\n",
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = fs::read_to_string(dir.path().join("out/runlog.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(
        lines[0],
        "level,dofs,elements,estimator,error,marked,cg_iters"
    );
    assert_eq!(lines.len(), 4);
    assert!(lines[1..]
        .iter()
        .all(|l| !l.split(',').nth(4).unwrap().is_empty()));
    let mesh = fs::read_to_string(dir.path().join("out/mesh_final.txt")).unwrap();
    assert!(stfosls::mesh::Mesh::from_dump(&mesh)
        .unwrap()
        .is_conforming());
    assert_eq!(
        summary_value(dir.path(), "terminal_reason"),
        "levels_completed"
    );
}

#[test]
fn doerfler_theta_zero_is_invalid() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_config(
        dir.path(),
        "marking = doerfler\ntheta = 0\nmax_iterations = 3\n",
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("out/runlog.csv").exists());
}

#[test]
fn malformed_and_missing_configs_are_invalid() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        run_config(dir.path(), "unknown_key = 1\n").status.code(),
        Some(2)
    );
    assert_eq!(
        stfosls(&["run", "/nonexistent/config.cfg"]).status.code(),
        Some(2)
    );
}

#[test]
fn incompatible_adaptive_run_reduces_estimator() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_config(
        dir.path(),
        "case = incompatible\nmarking = doerfler\ntheta = 0.5\nmax_iterations = 8\n",
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let first: f64 = summary_value(dir.path(), "initial_estimator")
        .parse()
        .unwrap();
    let last: f64 = summary_value(dir.path(), "final_estimator")
        .parse()
        .unwrap();
    assert!(last < first);
    let csv = fs::read_to_string(dir.path().join("out/runlog.csv")).unwrap();
    // no manufactured solution: the error column stays empty
    assert!(csv.lines().skip(1).all(|l| l.split(',').nth(4) == Some("")));
}

#[test]
fn identical_configs_give_identical_logs() {
    let text = "case = convection-reaction\nform = gradient\nmarking = maximum\ntheta = 0.4\nmax_iterations = 5\ndegree = 2\n";
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert_eq!(run_config(a.path(), text).status.code(), Some(0));
    assert_eq!(run_config(b.path(), text).status.code(), Some(0));
    let read = |d: &Path| fs::read(d.join("out/runlog.csv")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
}

#[test]
fn poisson_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_config(dir.path(), "system = poisson\nmode = uniform\nlevels = 2\n");
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(summary_value(dir.path(), "system"), "poisson");
}

#[test]
fn verify_lists_named_checks() {
    let out = stfosls(&["verify", "--seed", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8(out.stdout).unwrap();
    let checks: Vec<&str> = stdout
        .lines()
        .filter(|l| l.starts_with("PASS ") || l.starts_with("FAIL "))
        .collect();
    assert!(checks.len() >= 6);
    assert!(checks.iter().all(|l| l.starts_with("PASS ")));
    assert!(
        stdout.contains("dense_assembly_equivalence") && stdout.contains("nvb_conformity_trials")
    );
}
