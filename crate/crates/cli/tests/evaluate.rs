mod common;

use common::{core_fixture, dead_endpoint, speceval, PINNED};
use speceval_core::report::load_report;

fn oracle(app: &str) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(core_fixture(&format!("{app}/oracle.json"))).unwrap()).unwrap()
}

fn evaluate(app: &str, out: &std::path::Path, extra: &[&str]) -> common::Output {
    let annotations = core_fixture(&format!("{app}/task.annotation.json"));
    let snapshots = core_fixture(app);
    let out = out.display().to_string();
    let mut args = vec!["evaluate", &annotations, "--snapshots", &snapshots, "--out", &out, "--timestamp", PINNED];
    args.extend_from_slice(extra);
    speceval(&args)
}

#[test]
fn snapshot_evaluation_matches_oracle() {
    let tmp = tempfile::tempdir().unwrap();
    let routes = core_fixture("kanban/routes.txt");
    for (app, extra) in [("bookshelf", vec![]), ("kanban", vec!["--routes", routes.as_str()])] {
        let out = tmp.path().join(app);
        let run = evaluate(app, &out, &extra);
        assert_eq!(run.code, 0, "{}", run.stderr);
        let report = load_report(&out.join("evaluation.report.json")).unwrap();
        let want = oracle(app);
        assert!((report.aggregate.s - want["S"].as_f64().unwrap()).abs() < 1e-9);
        assert!((report.aggregate.mean_l - want["mean_L"].as_f64().unwrap()).abs() < 1e-9);
        assert!((report.aggregate.mean_b - want["mean_B"].as_f64().unwrap()).abs() < 1e-9);
        assert!(run.stdout.contains(&format!("task: {app}")));
        assert!(out.join("report.txt").exists());
    }
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let a = evaluate("bookshelf", &tmp.path().join("a"), &[]);
    let b = evaluate("bookshelf", &tmp.path().join("b"), &["--jobs", "3"]);
    assert_eq!((a.code, b.code), (0, 0));
    for file in ["evaluation.report.json", "report.txt", "overlays/home.png", "overlays/catalog.png"] {
        let x = std::fs::read(tmp.path().join("a").join(file)).unwrap();
        let y = std::fs::read(tmp.path().join("b").join(file)).unwrap();
        assert!(x == y, "{file} differs");
    }
}

#[test]
fn unresolved_page_exits_partial_with_report() {
    let tmp = tempfile::tempdir().unwrap();
    let run = evaluate("recipes", tmp.path(), &[]);
    assert_eq!(run.code, 2);
    assert!(run.stderr.contains("admin"));
    let report = load_report(&tmp.path().join("evaluation.report.json")).unwrap();
    assert!((report.aggregate.s - oracle("recipes")["S"].as_f64().unwrap()).abs() < 1e-9);
}

#[test]
fn missing_annotation_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().display().to_string();
    let snapshots = core_fixture("bookshelf");
    let run = speceval(&["evaluate", "/nonexistent/task.annotation.json", "--snapshots", &snapshots, "--out", &out]);
    assert_eq!(run.code, 64);
    assert!(run.stderr.contains("usage error"));
    assert_eq!(std::fs::read_dir(tmp.path()).unwrap().count(), 0);
}

#[test]
fn bad_flags_are_usage_errors() {
    assert_eq!(speceval(&["evaluate"]).code, 64);
    assert_eq!(speceval(&["bogus"]).code, 64);
    assert_eq!(speceval(&["--help"]).code, 0);
    let annotations = core_fixture("bookshelf/task.annotation.json");
    assert_eq!(speceval(&["evaluate", &annotations, "--snapshots", "x", "--url", "http://a/", "--out", "o"]).code, 64);
}

#[test]
fn unreachable_browser_is_an_environment_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().display().to_string();
    let annotations = core_fixture("bookshelf/task.annotation.json");
    let endpoint = dead_endpoint();
    let run = speceval(&["evaluate", &annotations, "--url", "http://127.0.0.1:9/", "--endpoint", &endpoint, "--out", &out]);
    assert_eq!(run.code, 69, "{}", run.stderr);
    assert!(run.stderr.contains("environment error"));
}

#[test]
fn merge_combines_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let mut reports = Vec::new();
    for app in ["bookshelf", "recipes"] {
        let out = tmp.path().join(app);
        evaluate(app, &out, &[]);
        reports.push(out.join("evaluation.report.json").display().to_string());
    }
    let merged_dir = tmp.path().join("merged").display().to_string();
    let run = speceval(&["merge", &reports[0], &reports[1], "--out", &merged_dir]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let merged: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("merged/merged.report.json")).unwrap()).unwrap();
    let want = (oracle("bookshelf")["S"].as_f64().unwrap() + oracle("recipes")["S"].as_f64().unwrap()) / 2.0;
    assert!((merged["overall"]["mean_s"].as_f64().unwrap() - want).abs() < 1e-9);
    assert_eq!(merged["overall"]["runs"], 2);
    assert!(run.stdout.contains("overall"));
}
