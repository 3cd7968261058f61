use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_theta-incl"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const HEAT: &str = r#"{
  "scenario": "heat",
  "theta": 1,
  "grid": { "kind": "uniform", "N": 32 },
  "mesh": { "M_elements": 64 }
}"#;

#[test]
fn solve_writes_one_row_per_time() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "heat.json", HEAT);
    let out = dir.path().join("out");
    let o = run(&["solve", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let states = fs::read_to_string(out.join("states.csv")).unwrap();
    assert_eq!(states.lines().count(), 1 + 33);
    for f in ["mids.csv", "selections.csv", "steps.csv", "config.json", "report.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn identical_configs_give_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{ "scenario": "jump_source", "theta": 1, "mesh": { "elements": 16 },
             "grid": { "kind": "random_regular", "N": 8, "K_target": 2, "seed": 5 } }"#,
    );
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for d in [&a, &b] {
        assert!(run(&["solve", "--config", &cfg, "--out", d.to_str().unwrap()]).status.success());
    }
    for f in ["states.csv", "mids.csv", "selections.csv", "steps.csv", "report.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn diagnose_reproduces_the_stored_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "heat.json", HEAT);
    let out = dir.path().join("out");
    assert!(run(&["solve", "--config", &cfg, "--out", out.to_str().unwrap()]).status.success());
    let o = run(&["diagnose", "--trajectory", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn strict_admissibility_names_the_slab() {
    let dir = tempfile::tempdir().unwrap();
    // tau = 1 exceeds tau0 = 1/(theta beta) = 0.5 with beta = 2
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{ "scenario": "jump_source", "theta": 1, "strict_admissibility": true,
             "operator": { "beta": 2 }, "mesh": { "elements": 8 },
             "grid": { "kind": "uniform", "N": 1 } }"#,
    );
    let o = run(&["solve", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("slab 1"), "{err}");
}

#[test]
fn malformed_json_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", "{ \"scenario\": \"heat\",\n  \"theta\": 1,\n  \"grid\": ");
    let o = run(&["solve", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn theta_zero_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{ "scenario": "heat", "theta": 0, "grid": { "kind": "uniform", "N": 4 } }"#,
    );
    let o = run(&["solve", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["validate", "--scenario", "heat", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn validate_heat_passes() {
    let o = run(&["validate", "--scenario", "heat", "--samples", "50"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    assert!(String::from_utf8_lossy(&o.stdout).contains("overall: pass"));
}

#[test]
fn lambda_at_the_boundary_fails_validation() {
    let dir = tempfile::tempdir().unwrap();
    // alpha / |iota|^p = 1 with the claimed bound |iota| <= 1
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{ "scenario": "plap_jump", "theta": 1, "grid": { "kind": "uniform", "N": 4 },
             "multifunction": { "params": { "lambda": 1.0 } } }"#,
    );
    let o = run(&["validate", "--scenario", "plap_jump", "--config", &cfg, "--samples", "50"]);
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stdout));
}

#[test]
fn unknown_scenario_is_a_config_error() {
    let o = run(&["validate", "--scenario", "nope"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn study_writes_summary() {
    let dir = tempfile::tempdir().unwrap();
    let plan = write(
        dir.path(),
        "plan.json",
        r#"{ "scenario": "heat", "thetas": [1], "mesh": { "elements": 32 },
             "grids": [ { "kind": "uniform", "N": [4, 8] } ] }"#,
    );
    let out = dir.path().join("s");
    let o = run(&["study", "--plan", &plan, "--out", out.to_str().unwrap(), "--jobs", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("orders omitted"));
    assert_eq!(fs::read_to_string(out.join("summary.csv")).unwrap().lines().count(), 3);
}
