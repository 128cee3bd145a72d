//! Agent trace analytics: log parsing, diff scores, trajectories, rasters
//! and correlations.

pub mod diffscore;
pub mod parse;
pub mod raster;
pub mod stats;
pub mod trajectory;

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::RunTrace;

pub use diffscore::{compute_diff_score, compute_diff_score_actions, DiffScoreResult, LocalityCounts};
pub use parse::{parse_trace, ClassifierConfig, CommandClassifier, Dialect, RunLabels};
pub use raster::{build_raster, raster_svg, write_width, Background, RasterConfig, RasterRow, Tick, TickColor};
pub use stats::{correlate, format_table, group_means, GroupBy, GroupMeans};
pub use trajectory::{compute_trajectory, TrajectorySummary};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TraceError {
    #[error("unknown dialect `{0}` (expected batched_mutations or per_file_tools)")]
    UnknownDialect(String),
    #[error("malformed event at line {line}: {message}")]
    MalformedEvent { line: usize, message: String },
    #[error("run has no file mutations")]
    EmptyMutationStream,
    #[error("run `{0}` has no events")]
    EmptyTrace(String),
    #[error("correlation needs non-zero variance on both sides and at least two points")]
    DegenerateVariance,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("invalid trace: {0}")]
    Invalid(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
}

/// Reads a normalized `run.trace.json`.
pub fn load_trace(path: &Path) -> Result<RunTrace, TraceError> {
    let text = std::fs::read_to_string(path).map_err(|e| TraceError::Io(format!("{}: {e}", path.display())))?;
    let t: RunTrace = serde_json::from_str(&text).map_err(|e| TraceError::Invalid(format!("{}: {e}", path.display())))?;
    t.validated().map_err(|e| TraceError::Invalid(e.to_string()))
}

/// Diff scores, trajectories and raster for a set of runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticsBundle {
    /// Keyed by run id; runs without mutations are absent.
    pub diff_scores: BTreeMap<String, DiffScoreResult>,
    pub trajectories: BTreeMap<String, TrajectorySummary>,
    pub raster: Vec<RasterRow>,
    pub notes: Vec<String>,
}

pub fn analyze(traces: &[RunTrace], raster: &RasterConfig) -> Result<AnalyticsBundle, TraceError> {
    let scored: Vec<(String, Result<DiffScoreResult, TraceError>)> =
        traces.par_iter().map(|t| (t.run_id.clone(), compute_diff_score(t))).collect();
    let mut diff_scores = BTreeMap::new();
    let mut notes = Vec::new();
    for (id, r) in scored {
        match r {
            Ok(d) => {
                diff_scores.insert(id, d);
            }
            Err(e) => notes.push(format!("{id}: {e}")),
        }
    }
    if traces.iter().any(|t| t.score.is_none()) {
        notes.push("runs without a score have residual 0 and a neutral flag".into());
    }
    Ok(AnalyticsBundle {
        diff_scores,
        trajectories: compute_trajectory(traces)?,
        raster: build_raster(traces, raster),
        notes,
    })
}
