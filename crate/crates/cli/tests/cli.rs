//! End-to-end checks of the `oqrw` binary: subcommands, exit codes, files.

use std::path::Path;
use std::process::{Command, Output};

fn oqrw(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_oqrw"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn validate_builtin_ok() {
    let out = oqrw(&["validate", "builtin:m3"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("OK"));
}

#[test]
fn validate_bad_walk_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    // A single site with a single non-isometric loop.
    std::fs::write(
        &path,
        r#"{
            "name": "bad",
            "sites": [{"id": "a", "dim": 1}],
            "edges": [{"from": "a", "to": "a", "kraus": [[[[0.5, 0.0]]]]}]
        }"#,
    )
    .unwrap();
    let out = oqrw(&["validate", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1), "{}", stdout(&out));
    assert!(stdout(&out).contains("FAIL"));
}

#[test]
fn parse_error_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.json");
    std::fs::write(&path, "{ this is not json").unwrap();
    let out = oqrw(&["validate", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));

    let out = oqrw(&["example", "nope"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("available"), "{}", stderr(&out));
}

#[test]
fn analyze_m4_text_and_json() {
    let out = oqrw(&["analyze", "builtin:m4"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("irreducible:      true"));
    assert!(text.contains("period:           2"));

    let out = oqrw(&["analyze", "builtin:m4", "--json"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["irreducible"], serde_json::json!(true));
    assert_eq!(v["period"], serde_json::json!(2));
    assert_eq!(v["fixed_space_dim"], serde_json::json!(1));
}

#[test]
fn analyze_reducible_example() {
    let out = oqrw(&["analyze", "builtin:ex-9.2", "--json"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["irreducible"], serde_json::json!(false));
    assert_eq!(v["decomposition"]["transient_dim"], serde_json::json!(3));
}

#[test]
fn evolve_writes_expected_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = oqrw(&[
        "evolve",
        "builtin:m3",
        "--steps",
        "10",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(dir.path().join("site_probs.csv").exists());
    assert!(dir.path().join("blocks.csv").exists());
    let probs = std::fs::read_to_string(dir.path().join("site_probs.csv")).unwrap();
    assert!(probs.starts_with("step,site,probability\n"));
}

#[test]
fn evolve_accepts_initial_site_and_cesaro() {
    let dir = tempfile::tempdir().unwrap();
    let out = oqrw(&[
        "evolve",
        "builtin:m3",
        "--steps",
        "5",
        "--cesaro",
        "--initial",
        "site=2",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let probs = std::fs::read_to_string(dir.path().join("site_probs.csv")).unwrap();
    let first_rows: Vec<&str> = probs.lines().skip(1).take(3).collect();
    // At step 0 the Cesaro average equals the initial state at site 2.
    assert!(first_rows[1].starts_with("0,2,1."), "{first_rows:?}");
}

#[test]
fn sample_writes_trajectory_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = oqrw(&[
        "sample",
        "builtin:m3",
        "--steps",
        "20",
        "--trajectories",
        "5",
        "--seed",
        "11",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    for f in [
        "site_probs.csv",
        "blocks.csv",
        "trajectory.csv",
        "conditional_avg.csv",
    ] {
        assert!(dir.path().join(f).exists(), "missing {f}");
    }
}

#[test]
fn example_round_trips_through_analyze() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m4.json");
    let out = oqrw(&["example", "m4", "--write", path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(Path::new(&path).exists());
    let out = oqrw(&["analyze", path.to_str().unwrap(), "--json"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["period"], serde_json::json!(2));
}

#[test]
fn example_with_parameter_prints_json() {
    let out = oqrw(&["example", "m4-eps?eps=0.1"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["sites"].as_array().unwrap().len(), 4);
}
