mod common;

use std::collections::BTreeMap;

use common::{core_fixture, speceval};
use speceval_core::trace::{compute_diff_score, parse_trace, ClassifierConfig, CommandClassifier, Dialect, RunLabels};

fn read_json(path: &std::path::Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn direct(file: &str, dialect: Dialect) -> speceval_core::trace::DiffScoreResult {
    let scaffold: BTreeMap<String, u64> =
        serde_json::from_str(&std::fs::read_to_string(core_fixture("traces/scaffold.json")).unwrap()).unwrap();
    let classifier = CommandClassifier::new(&ClassifierConfig::default()).unwrap();
    let text = std::fs::read_to_string(core_fixture(&format!("traces/{file}"))).unwrap();
    compute_diff_score(&parse_trace(&text, dialect, &scaffold, &RunLabels::default(), &classifier).unwrap()).unwrap()
}

#[test]
fn diffscore_rows_pass_through() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().display().to_string();
    let (a, b) = (core_fixture("traces/pair-a.batched.jsonl"), core_fixture("traces/pair-b.batched.jsonl"));
    let scaffold = core_fixture("traces/scaffold.json");
    let run = speceval(&["diffscore", &a, &b, "--dialect", "batched_mutations", "--scaffold", &scaffold, "--out", &out]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let json = read_json(&tmp.path().join("diffscore.json"));
    let runs = json["runs"].as_array().unwrap();
    assert_eq!(runs.len(), 2);
    for (row, file) in runs.iter().zip(["pair-a.batched.jsonl", "pair-b.batched.jsonl"]) {
        let want = serde_json::to_value(direct(file, Dialect::BatchedMutations)).unwrap();
        assert_eq!(row["result"], want, "{file}");
    }
    assert!(run.stdout.contains("surgical") && run.stdout.contains("pair-a") && run.stdout.contains("pair-b"));
}

#[test]
fn group_by_model_reports_means() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().display().to_string();
    let (a, b) = (core_fixture("traces/pair-a.batched.jsonl"), core_fixture("traces/pair-a.per_file.jsonl"));
    let run = speceval(&["diffscore", &a, "--dialect", "batched", "--group-by", "model", "--model", "m1", "--out", &out]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let json = read_json(&tmp.path().join("diffscore.json"));
    assert_eq!(json["groups"][0]["group"], "m1");
    assert_eq!(json["groups"][0]["runs"], 1);
    assert_eq!(json["groups"][0]["surgical"], json["runs"][0]["result"]["surgical"]);

    let run = speceval(&["diffscore", &b, "--dialect", "per_file", "--group-by", "condition"]);
    assert_eq!(run.code, 0);
    assert!(run.stdout.contains("group"));
    assert_eq!(speceval(&["diffscore", &a, "--dialect", "batched", "--group-by", "colour"]).code, 64);
    assert_eq!(speceval(&["diffscore", &a, "--dialect", "xml"]).code, 64);
}

#[test]
fn corrupted_trace_is_skipped_with_warning() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.jsonl");
    std::fs::write(&bad, "{\"type\":\"meta\",\"run_id\":\"bad\"}\n{not json\n").unwrap();
    let out = tmp.path().join("out").display().to_string();
    let (a, b) = (core_fixture("traces/pair-a.batched.jsonl"), core_fixture("traces/pair-b.batched.jsonl"));
    let bad = bad.display().to_string();
    let run = speceval(&["diffscore", &a, &bad, &b, "--dialect", "batched", "--out", &out]);
    assert_eq!(run.code, 0);
    assert!(run.stderr.contains("warning: skipping") && run.stderr.contains("bad.jsonl"));
    assert!(run.stdout.contains("1 trace(s) skipped"));
    let json = read_json(&tmp.path().join("out/diffscore.json"));
    assert_eq!(json["runs"].as_array().unwrap().len(), 2);
    assert_eq!(json["failures"].as_array().unwrap().len(), 1);
    assert!(json["failures"][0]["error"].as_str().unwrap().contains("line 2"));

    let only_bad = speceval(&["diffscore", &bad, "--dialect", "batched"]);
    assert_eq!(only_bad.code, 64);
}

#[test]
fn trajectory_rows_are_distributions_and_raster_has_one_row_per_run() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().display().to_string();
    let files: Vec<String> = ["pair-a.per_file.jsonl", "pair-b.per_file.jsonl"].iter().map(|f| core_fixture(&format!("traces/{f}"))).collect();
    let run = speceval(&["trajectory", &files[0], &files[1], "--dialect", "per_file", "--raster", "raster.svg", "--out", &out]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let json = read_json(&tmp.path().join("trajectory.json"));
    for (_, summary) in json["models"].as_object().unwrap() {
        for (row, n) in summary["transitions"].as_array().unwrap().iter().zip(summary["row_counts"].as_array().unwrap()) {
            let total: f64 = row.as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).sum();
            if n.as_u64().unwrap() > 0 {
                assert!((total - 1.0).abs() < 1e-9);
            }
        }
        for (row, w) in summary["bin_mix"].as_array().unwrap().iter().zip(summary["bin_weights"].as_array().unwrap()) {
            let total: f64 = row.as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).sum();
            let weight: f64 = w.as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).sum();
            assert!(weight == 0.0 || (total - 1.0).abs() < 1e-9);
        }
    }
    let svg = std::fs::read_to_string(tmp.path().join("raster.svg")).unwrap();
    assert_eq!(svg.matches("<g class=\"run\"").count(), 2);
}

#[test]
fn unscored_runs_are_noted() {
    let tmp = tempfile::tempdir().unwrap();
    let trace = tmp.path().join("t.jsonl");
    std::fs::write(
        &trace,
        "{\"type\":\"meta\",\"run_id\":\"quiet\",\"model\":\"opus\"}\n{\"type\":\"read\",\"ts\":0}\n{\"type\":\"read\",\"ts\":5}\n",
    )
    .unwrap();
    let trace = trace.display().to_string();
    let out = tmp.path().join("o").display().to_string();
    let run = speceval(&["trajectory", &trace, "--dialect", "batched", "--raster", "r.svg", "--out", &out]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    assert!(run.stdout.contains("without a score are drawn with residual 0: quiet"));
    let svg = std::fs::read_to_string(tmp.path().join("o/r.svg")).unwrap();
    assert!(svg.contains("(no score)"));
}
