use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn problem(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../problems").join(name)
}

fn recomb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_recomb")).args(args).output().expect("binary runs")
}

fn machine(args: &[&str]) -> Value {
    let mut full = args.to_vec();
    full.extend(["--format", "machine"]);
    let out = recomb(&full);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn write_temp(dir: &tempfile::TempDir, name: &str, text: &str) -> String {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn qsd_on_three_sites() {
    let input = problem("three_site.json");
    let doc = machine(&["qsd", input.to_str().unwrap()]);
    let report = &doc["report"];
    assert_eq!(report["eta"]["exact"], "1/2");
    assert_eq!(report["limit_constant"]["exact"], "2");
    assert_eq!(report["quasi_limit"]["{[1],[2,3]}"], "1/2");
    assert_eq!(doc["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(doc["input_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn atoms_and_chain_exports() {
    let input = problem("three_site.json");
    let doc = machine(&["atoms", input.to_str().unwrap()]);
    assert_eq!(doc["report"]["atoms"], "{[1],[2],[3]}");

    let doc = machine(&["chain", input.to_str().unwrap(), "--horizon", "4"]);
    let states: Vec<&str> = doc["report"]["states"].as_array().unwrap().iter().map(|s| s.as_str().unwrap()).collect();
    assert_eq!(states, ["{[1,2,3]}", "{[1],[2,3]}", "{[1,2],[3]}", "{[1],[2],[3]}"]);
    assert_eq!(doc["report"]["survival"][3]["survival"]["exact"], "1/4");
}

#[test]
fn evolve_and_coeffs_pass_their_checks() {
    for name in ["three_site.json", "single_crossover_4.json"] {
        let input = problem(name);
        for cmd in ["evolve", "coeffs"] {
            let doc = machine(&[cmd, input.to_str().unwrap()]);
            let checks = doc["report"]["checks"].as_array().unwrap();
            assert!(checks.iter().all(|c| c["passed"] == true), "{cmd} {name}");
        }
    }
}

#[test]
fn identity_is_rejected_for_qsd() {
    let out = recomb(&["qsd", problem("identity.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr)
        .contains("identity transformation; quasi-stationary analysis not applicable"));
}

#[test]
fn validation_and_resource_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let unnormalized = write_temp(&dir, "u.json", r#"{"sites": 2, "rho": {"[1]": "1/2", "[2]": "1/4"}}"#);
    assert_eq!(recomb(&["chain", &unnormalized]).status.code(), Some(2));
    let malformed = write_temp(&dir, "m.json", r#"{"sites": 2, "rho": "#);
    let out = recomb(&["atoms", &malformed]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));
    assert_eq!(recomb(&["atoms", "/nonexistent/problem.json"]).status.code(), Some(2));

    let input = problem("three_site.json");
    let out = recomb(&["chain", input.to_str().unwrap(), "--max-states", "2"]);
    assert_eq!(out.status.code(), Some(3));
    let out = recomb(&["evolve", input.to_str().unwrap(), "--max-dense", "4"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn simulation_is_reproducible() {
    let input = problem("three_site.json");
    let args = ["simulate", input.to_str().unwrap(), "--trajectories", "5000", "--format", "machine"];
    let first = recomb(&args);
    let second = Command::new(env!("CARGO_BIN_EXE_recomb"))
        .args(args)
        .env("RAYON_NUM_THREADS", "3")
        .output()
        .unwrap();
    assert!(first.status.success());
    assert_eq!(first.stdout, second.stdout);
    let kernel = recomb(&["simulate", input.to_str().unwrap(), "--trajectories", "5000", "--mode", "kernel"]);
    assert!(kernel.status.success());
}

#[test]
fn report_goes_to_out_path() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("report.json");
    let input = problem("three_site.json");
    let out = recomb(&["atoms", input.to_str().unwrap(), "--format", "machine", "--out", out_path.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(out_path).unwrap()).unwrap();
    assert_eq!(doc["command"], "atoms");
}
