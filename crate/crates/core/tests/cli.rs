//! End-to-end runs of the `spanflow` binary on the fixtures: exit codes,
//! report contents and determinism.

use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spanflow")).args(args).output().expect("binary runs")
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

#[test]
fn resistance_of_the_wheatstone_bridge() {
    let out = run(&["resistance", fixture("wheatstone.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["schema_version"], 1);
    assert_eq!(r["ok"], true);
    assert!((r["data"]["resistance"].as_f64().unwrap() - 1.4).abs() < 1e-12);
}

#[test]
fn witness_and_simulate_on_fixtures() {
    let out = run(&["witness", fixture("and_or.json").to_str().unwrap(), "101"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["command"], "witness");

    let out = run(&["simulate", fixture("or2.json").to_str().unwrap(), "01", "--bits", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(report(&out)["ok"], true);
}

#[test]
fn catalog_and_convert_report_success() {
    let out = run(&["catalog", fixture("threshold_4_3.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let out = run(&["catalog", r#"{"problem":"dyck","n":6,"depth":2}"#]);
    assert_eq!(out.status.code(), Some(0));
    let out = run(&["convert", fixture("tree_and2.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(report(&out)["ok"], true);
}

#[test]
fn runs_are_deterministic() {
    let args = ["--seed", "7", "verify", "netlab", "--cases", "5"];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn corrupted_fixture_is_a_named_violation() {
    let good = fixture("wheatstone_fixture.json");
    let out = run(&["verify", "netlab", "--cases", "3", "--fixture", good.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));

    let mut value: Value = serde_json::from_str(&std::fs::read_to_string(&good).unwrap()).unwrap();
    value["expected_resistance"] = Value::from(1.5);
    let bad = std::env::temp_dir().join(format!("spanflow-corrupt-{}.json", std::process::id()));
    std::fs::write(&bad, value.to_string()).unwrap();
    let out = run(&["verify", "netlab", "--cases", "3", "--fixture", bad.to_str().unwrap()]);
    std::fs::remove_file(&bad).ok();
    assert_eq!(out.status.code(), Some(1));
    let r = report(&out);
    assert_eq!(r["ok"], false);
    let failures = r["data"]["failures"].as_array().unwrap();
    assert!(failures.iter().any(|f| f.as_str().unwrap().contains("fixtures match their expected resistance")));
}

#[test]
fn usage_and_input_errors_exit_with_two() {
    assert_eq!(run(&["--tolerance", "0.5", "resistance", fixture("wheatstone.json").to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(run(&["resistance", "/nonexistent/network.json"]).status.code(), Some(2));
    assert_eq!(run(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn table_output_is_plain_text() {
    let out = run(&["--output", "table", "resistance", fixture("wheatstone.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(serde_json::from_str::<Value>(&text).is_err());
    assert!(text.contains("resistance"));
}
