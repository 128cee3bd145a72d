//! Python bindings. Structured results come back as plain dicts and lists
//! with the same field names as the JSON files the CLI writes.

use std::path::Path;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;
use speceval_core::alignment::{fit_transform as core_fit, AnchorPair, AnchorSource};
use speceval_core::driver::ReplayBackend;
use speceval_core::evaluate::{evaluate_task, EvaluateOptions};
use speceval_core::localization::{localize as core_localize, TierConfig};
use speceval_core::resolver::load_routes;
use speceval_core::trace::{compute_diff_score_actions, correlate as core_correlate, write_width as core_write_width};
use speceval_core::{
    load_task_annotation, normalize_mutation as core_normalize, validate_task_annotation as core_validate, BoundingBox,
    DomCandidate, InteractiveTarget, MutationAction, MutationKind, Point,
};

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(value_error)?;
    py.import("json")?.call_method1("loads", (text,))
}

fn from_py<T: DeserializeOwned>(obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = obj.py().import("json")?.call_method1("dumps", (obj,))?.extract()?;
    serde_json::from_str(&text).map_err(value_error)
}

fn mutation_kind(kind: &str) -> PyResult<MutationKind> {
    match kind.to_ascii_lowercase().as_str() {
        "write" => Ok(MutationKind::Write),
        "edit" => Ok(MutationKind::Edit),
        "delete" => Ok(MutationKind::Delete),
        other => Err(value_error(format!("unknown mutation kind `{other}` (write, edit or delete)"))),
    }
}

/// Axis-aligned box in pixels.
#[pyclass(name = "BoundingBox", frozen, eq, skip_from_py_object)]
#[derive(Clone, PartialEq)]
pub struct PyBoundingBox(BoundingBox);

#[pymethods]
impl PyBoundingBox {
    #[new]
    fn new(x: f64, y: f64, width: f64, height: f64) -> PyResult<Self> {
        BoundingBox::new(x, y, width, height).map(PyBoundingBox).map_err(value_error)
    }

    #[getter]
    fn x(&self) -> f64 {
        self.0.x
    }

    #[getter]
    fn y(&self) -> f64 {
        self.0.y
    }

    #[getter]
    fn width(&self) -> f64 {
        self.0.width
    }

    #[getter]
    fn height(&self) -> f64 {
        self.0.height
    }

    fn area(&self) -> f64 {
        self.0.area()
    }

    fn center(&self) -> (f64, f64) {
        let c = self.0.center();
        (c.x, c.y)
    }

    fn iou(&self, other: PyRef<'_, Self>) -> f64 {
        self.0.iou(&other.0)
    }

    fn center_distance(&self, other: PyRef<'_, Self>) -> f64 {
        self.0.center_distance(&other.0)
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.0)
    }

    fn __repr__(&self) -> String {
        format!("BoundingBox(x={}, y={}, width={}, height={})", self.0.x, self.0.y, self.0.width, self.0.height)
    }
}

/// Per-axis scale and offset from `[((mx, my), (rx, ry), weight), ...]`.
#[pyfunction]
fn fit_transform<'py>(py: Python<'py>, pairs: Vec<((f64, f64), (f64, f64), f64)>) -> PyResult<Bound<'py, PyAny>> {
    let pairs: Vec<AnchorPair> = pairs
        .into_iter()
        .enumerate()
        .map(|(i, ((mx, my), (rx, ry), weight))| AnchorPair {
            label: format!("<a{i}>"),
            mockup_point: Point::new(mx, my),
            rendered_point: Point::new(rx, ry),
            weight,
            source: AnchorSource::Curated,
        })
        .collect();
    to_py(py, &core_fit(&pairs))
}

/// Tier and score for one target box (already in rendered coordinates)
/// against candidate dicts.
#[pyfunction]
#[pyo3(signature = (rendered_box, target, candidates, tiers=None))]
fn localize<'py>(
    py: Python<'py>,
    rendered_box: PyRef<'_, PyBoundingBox>,
    target: &Bound<'py, PyAny>,
    candidates: &Bound<'py, PyAny>,
    tiers: Option<&Bound<'py, PyAny>>,
) -> PyResult<Bound<'py, PyAny>> {
    let target: InteractiveTarget = from_py(target)?;
    let candidates: Vec<DomCandidate> = from_py(candidates)?;
    let tiers: TierConfig = match tiers {
        Some(t) => from_py(t)?,
        None => TierConfig::default(),
    };
    let refs: Vec<&DomCandidate> = candidates.iter().collect();
    to_py(py, &core_localize(&rendered_box.0, &target, &refs, &tiers))
}

/// Parses and validates an annotation document, returning it with nested
/// page ids filled in. Raises `ValueError` naming the violated invariant.
#[pyfunction]
fn validate_task_annotation<'py>(py: Python<'py>, doc: &str) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &core_validate(doc).map_err(value_error)?)
}

#[pyfunction]
fn normalize_mutation<'py>(
    py: Python<'py>,
    kind: &str,
    path: &str,
    before_bytes: i64,
    old_bytes: i64,
    new_bytes: i64,
) -> PyResult<Bound<'py, PyAny>> {
    let m = core_normalize(mutation_kind(kind)?, path, before_bytes, old_bytes, new_bytes).map_err(value_error)?;
    to_py(py, &m)
}

/// Diff scores from `[(kind, before, old, new), ...]`.
#[pyfunction]
fn compute_diff_score<'py>(py: Python<'py>, mutations: Vec<(String, i64, i64, i64)>) -> PyResult<Bound<'py, PyAny>> {
    let actions = mutations
        .iter()
        .map(|(k, b, o, n)| core_normalize(mutation_kind(k)?, "", *b, *o, *n).map_err(value_error))
        .collect::<PyResult<Vec<MutationAction>>>()?;
    to_py(py, &compute_diff_score_actions(&actions).map_err(value_error)?)
}

/// Runs the evaluation pipeline over recorded snapshots and returns the
/// report dict.
#[pyfunction]
#[pyo3(signature = (annotations, snapshots, routes=None, timestamp=None, jobs=1))]
fn evaluate_snapshots<'py>(
    py: Python<'py>,
    annotations: &str,
    snapshots: &str,
    routes: Option<&str>,
    timestamp: Option<String>,
    jobs: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let task = load_task_annotation(Path::new(annotations)).map_err(value_error)?;
    let backend = ReplayBackend::load(Path::new(snapshots)).map_err(value_error)?;
    let mut options = EvaluateOptions::new(backend.root_url());
    options.timestamp = timestamp;
    options.jobs = jobs.max(1);
    options.overlays = false;
    if let Some(r) = routes {
        options.routes = load_routes(Path::new(r)).map_err(value_error)?;
    }
    let evaluation = py
        .detach(|| evaluate_task(&backend, &task, &options))
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    to_py(py, &evaluation.report)
}

/// Pearson correlation.
#[pyfunction]
fn correlate(xs: Vec<f64>, ys: Vec<f64>) -> PyResult<f64> {
    core_correlate(&xs, &ys).map_err(value_error)
}

/// Raster tick width in pixels for a write touching `files` files.
#[pyfunction]
fn write_width(files: u32) -> f64 {
    core_write_width(files)
}

#[pymodule]
pub fn speceval(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyBoundingBox>()?;
    m.add_function(wrap_pyfunction!(fit_transform, m)?)?;
    m.add_function(wrap_pyfunction!(localize, m)?)?;
    m.add_function(wrap_pyfunction!(validate_task_annotation, m)?)?;
    m.add_function(wrap_pyfunction!(normalize_mutation, m)?)?;
    m.add_function(wrap_pyfunction!(compute_diff_score, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_snapshots, m)?)?;
    m.add_function(wrap_pyfunction!(correlate, m)?)?;
    m.add_function(wrap_pyfunction!(write_width, m)?)?;
    Ok(())
}
