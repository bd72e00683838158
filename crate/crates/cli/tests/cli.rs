use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn gibbsum(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gibbsum"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, contents: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, contents).unwrap();
    path.to_str().unwrap().to_owned()
}

const GRID: &str = r#"{"type":"ising","vertices":9,"edges":[[0,1],[1,2],[3,4],[4,5],[6,7],[7,8],[0,3],[3,6],[1,4],[4,7],[2,5],[5,8]]}"#;

fn config(task: &str, extra: &str) -> String {
    format!(r#"{{"model":{GRID},"task":"{task}","beta_max":2.0,"seed":11{extra}}}"#)
}

#[test]
fn classical_report_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", &config("estimate-classical", r#","trials":5"#));
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let csv = dir.path().join("a.csv");
    let out = gibbsum(&["run", "--config", &cfg, "--out", a.to_str().unwrap(), "--csv", csv.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("trials=5"));
    assert!(gibbsum(&["run", "--config", &cfg, "--out", b.to_str().unwrap()]).status.success());
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    let report: serde_json::Value = serde_json::from_slice(&fs::read(&a).unwrap()).unwrap();
    assert_eq!(report["seed"], 11);
    assert_eq!(report["trials"].as_array().unwrap().len(), 5);
    assert!(report["exact"]["q"].as_f64().unwrap() > 0.0);
    assert_eq!(fs::read_to_string(&csv).unwrap().lines().count(), 6);
}

#[test]
fn flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", &config("schedule-quantum", ""));
    let out = gibbsum(&["run", "--config", &cfg, "--trials", "2", "--seed", "5"]);
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["seed"], 5);
    assert_eq!(report["trials"].as_array().unwrap().len(), 2);
    assert!(report["resources"]["reflections_invoked"].as_u64().unwrap() > 0);

    let cfg = write(dir.path(), "e.json", &config("exact", ""));
    let out = gibbsum(&["run", "--config", &cfg, "--ae-backend", "statevector", "--phase-bits", "10"]);
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["config"]["ae"]["mode"], "statevector");
    assert_eq!(report["config"]["ae"]["phase_bits"], 10);
    assert_eq!(gibbsum(&["run", "--config", &cfg, "--phase-bits", "0"]).status.code(), Some(2));
}

#[test]
fn validation_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", &config("estimate-classical", r#","epsilon":2"#));
    let out = gibbsum(&["run", "--config", &bad]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("epsilon"));

    let unknown = write(dir.path(), "u.json", &config("exact", r#","bogus":1"#));
    assert_eq!(gibbsum(&["run", "--config", &unknown]).status.code(), Some(2));
    assert_eq!(gibbsum(&["run", "--config", "/nonexistent.json"]).status.code(), Some(2));
}

#[test]
fn pipeline_failures_exit_three() {
    // A single edge fails the ln n ≥ 1 gate inside every trial.
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"model":{"type":"ising","vertices":2,"edges":[[0,1]]},"task":"schedule-classical","beta_max":1}"#,
    );
    let out = gibbsum(&["run", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(3));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["trials"][0]["outcome"]["kind"], "failed");
}

#[test]
fn verify_schedule_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(dir.path(), "m.json", GRID);
    let good = write(
        dir.path(),
        "good.json",
        r#"{"betas":[0.0,0.5,1.0,2.0,6.238324625039508],"moves":[],"c2":15}"#,
    );
    let out = gibbsum(&["verify-schedule", "--model", &model, "--schedule", &good, "--c2", "15"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["length"], 4);

    let jumpy = write(dir.path(), "jumpy.json", r#"{"betas":[0.0,"inf"],"moves":[],"c2":15}"#);
    let out = gibbsum(&["verify-schedule", "--model", &model, "--schedule", &jumpy, "--c2", "15"]);
    assert_eq!(out.status.code(), Some(3));

    let unsorted = write(dir.path(), "bad.json", r#"{"betas":[1.0,0.5],"moves":[],"c2":15}"#);
    let out = gibbsum(&["verify-schedule", "--model", &model, "--schedule", &unsorted, "--c2", "15"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn colorings_of_triangle() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "k3.json",
        r#"{"model":{"type":"potts","vertices":3,"edges":[[0,1],[1,2],[0,2]],"k":3},"task":"count-colorings","epsilon":0.25,"trials":3}"#,
    );
    let out = gibbsum(&["run", "--config", &cfg]);
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    for t in report["trials"].as_array().unwrap() {
        let c = &t["outcome"]["colorings"];
        assert_eq!(c["exact"], 6);
        assert!((c["estimate"].as_f64().unwrap() - 6.0).abs() <= 1.5);
    }
}
