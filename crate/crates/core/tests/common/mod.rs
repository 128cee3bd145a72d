#![allow(dead_code)]

pub mod http;

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::Deserialize;
use speceval_core::driver::ReplayBackend;
use speceval_core::evaluate::{evaluate_task, EvaluateOptions, Evaluation};
use speceval_core::resolver::load_routes;
use speceval_core::load_task_annotation;

pub const APPS: [&str; 3] = ["bookshelf", "kanban", "recipes"];
pub const PINNED: &str = "2026-01-01T00:00:00Z";

pub fn fixture_dir(app: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(app)
}

#[derive(Debug, Deserialize)]
pub struct OracleTarget {
    pub tier: String,
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(rename = "B")]
    pub b: f64,
}

#[derive(Debug, Deserialize)]
pub struct Oracle {
    pub task_name: String,
    #[serde(rename = "S")]
    pub s: f64,
    #[serde(rename = "mean_L")]
    pub mean_l: f64,
    #[serde(rename = "mean_B")]
    pub mean_b: f64,
    pub unresolved: Vec<String>,
    pub targets: BTreeMap<String, OracleTarget>,
}

pub fn oracle(app: &str) -> Oracle {
    let text = std::fs::read_to_string(fixture_dir(app).join("oracle.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

pub fn options(app: &str, backend: &ReplayBackend) -> EvaluateOptions {
    let dir = fixture_dir(app);
    let mut options = EvaluateOptions::new(backend.root_url());
    options.timestamp = Some(PINNED.into());
    let routes = dir.join("routes.txt");
    if routes.exists() {
        options.routes = load_routes(&routes).unwrap();
    }
    options
}

pub fn evaluate_fixture(app: &str) -> Evaluation {
    let dir = fixture_dir(app);
    let backend = ReplayBackend::load(&dir).unwrap();
    let task = load_task_annotation(&dir.join("task.annotation.json")).unwrap();
    evaluate_task(&backend, &task, &options(app, &backend)).unwrap()
}
