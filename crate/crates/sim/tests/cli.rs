use std::process::Command;

use nbcd_sim::{builtin_scenarios, Scenario};

fn nbcd() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nbcd"))
}

#[test]
fn lists_scenarios() {
    let out = nbcd().args(["scenarios", "list", "--json"]).output().unwrap();
    assert!(out.status.success());
    let files: Vec<nbcd_sim::ScenarioFile> = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(files.len(), 19);
    assert_eq!(files[0].name, builtin_scenarios()[0].name);
}

#[test]
fn simulates_from_a_scenario_file() {
    let dir = tempfile::tempdir().unwrap();
    let scen = dir.path().join("s.json");
    let s = nbcd_sim::find_scenario("trial/1").unwrap();
    std::fs::write(&scen, serde_json::to_string(&Scenario::to_file(&s)).unwrap()).unwrap();
    let out = dir.path().join("r.json");
    let csv = dir.path().join("r.csv");
    let status = nbcd()
        .args(["simulate", "--preset", "trial", "--replicates", "2", "--seed", "4", "--workers", "1"])
        .args(["--samples", "300", "--burn-in", "50", "--quiet"])
        .arg("--scenario")
        .arg(&scen)
        .arg("--scenario")
        .arg("trial/5")
        .arg("--out")
        .arg(&out)
        .arg("--csv")
        .arg(&csv)
        .status()
        .unwrap();
    assert!(status.success());
    let report: nbcd_sim::StudyReport = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report.scenarios.len(), 2);
    assert_eq!(report.scenarios[0].scenario, s);
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 3);
}

#[test]
fn config_errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let run = |args: &[&str]| nbcd().args(args).arg("--out").arg(&out).output().unwrap();
    // 4x4 scenario against the 2x3 preset
    let o = run(&["simulate", "--preset", "trial", "--scenario", "study1/A", "--replicates", "1"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("study1/A"));
    let o = run(&["simulate", "--preset", "trial", "--scenario", "nope", "--replicates", "1"]);
    assert!(!o.status.success());
    let o = run(&["simulate", "--preset", "trial", "--scenario", "trial/1", "--replicates", "0"]);
    assert!(!o.status.success());
    let o = run(&["hyperparam", "--dims", "2x3", "--target-min", "0.3", "--target-max", "0.1"]);
    assert!(!o.status.success());
    assert!(!out.exists());
}
