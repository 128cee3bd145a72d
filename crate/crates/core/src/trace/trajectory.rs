//! Workload-weighted action mix over progress bins and action transitions.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::TraceError;
use crate::model::{EventCategory, RunTrace};

pub const BINS: usize = 10;
pub const CATEGORIES: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySummary {
    pub model_label: String,
    pub runs: usize,
    /// Rows are progress bins, columns follow `EventCategory::ALL`.
    pub bin_mix: [[f64; CATEGORIES]; BINS],
    /// Unnormalized workload weights behind `bin_mix`.
    pub bin_weights: [[f64; CATEGORIES]; BINS],
    pub transitions: [[f64; CATEGORIES]; CATEGORIES],
    pub row_counts: [u64; CATEGORIES],
    #[serde(default)]
    pub warnings: Vec<String>,
}

/// Normalized progress of every event of a run, in `[0, 1]`. A run whose
/// events share one timestamp puts all of them at 0.
pub fn event_progress(trace: &RunTrace) -> (Vec<f64>, bool) {
    let (Some(first), Some(last)) = (trace.events.first(), trace.events.last()) else {
        return (Vec::new(), false);
    };
    let (start, end) = (first.timestamp, last.timestamp);
    if end <= start {
        return (vec![0.0; trace.events.len()], true);
    }
    (
        trace.events.iter().map(|e| ((e.timestamp - start) / (end - start)).clamp(0.0, 1.0)).collect(),
        false,
    )
}

pub fn progress_bin(p: f64) -> usize {
    ((p * BINS as f64).floor() as usize).min(BINS - 1)
}

/// Write events weigh as many files as they touch; everything else weighs 1.
pub fn event_weight(e: &crate::model::TraceEvent) -> f64 {
    if e.category == EventCategory::Write {
        e.files_touched.max(1) as f64
    } else {
        1.0
    }
}

fn normalize_row<const N: usize>(row: &[f64; N]) -> [f64; N] {
    let total: f64 = row.iter().sum();
    if total > 0.0 {
        row.map(|v| v / total)
    } else {
        [0.0; N]
    }
}

/// One summary per model label, over all runs of that model.
pub fn compute_trajectory(traces: &[RunTrace]) -> Result<BTreeMap<String, TrajectorySummary>, TraceError> {
    let mut out: BTreeMap<String, TrajectorySummary> = BTreeMap::new();
    let mut transition_counts: BTreeMap<String, [[u64; CATEGORIES]; CATEGORIES]> = BTreeMap::new();
    let mut sorted: Vec<&RunTrace> = traces.iter().collect();
    sorted.sort_by(|a, b| a.run_id.cmp(&b.run_id));
    for trace in sorted {
        if trace.events.is_empty() {
            return Err(TraceError::EmptyTrace(trace.run_id.clone()));
        }
        let summary = out.entry(trace.model_label.clone()).or_insert_with(|| TrajectorySummary {
            model_label: trace.model_label.clone(),
            runs: 0,
            bin_mix: [[0.0; CATEGORIES]; BINS],
            bin_weights: [[0.0; CATEGORIES]; BINS],
            transitions: [[0.0; CATEGORIES]; CATEGORIES],
            row_counts: [0; CATEGORIES],
            warnings: Vec::new(),
        });
        summary.runs += 1;
        let (progress, degenerate) = event_progress(trace);
        if degenerate && trace.events.len() > 1 {
            summary
                .warnings
                .push(format!("DegenerateDuration: run `{}` has zero duration; all events placed in the first bin", trace.run_id));
        }
        for (e, p) in trace.events.iter().zip(&progress) {
            summary.bin_weights[progress_bin(*p)][e.category.index()] += event_weight(e);
        }
        let counts = transition_counts.entry(trace.model_label.clone()).or_default();
        for w in trace.events.windows(2) {
            counts[w[0].category.index()][w[1].category.index()] += 1;
        }
    }
    for (model, summary) in out.iter_mut() {
        for (mix, weights) in summary.bin_mix.iter_mut().zip(&summary.bin_weights) {
            *mix = normalize_row(weights);
        }
        let counts = &transition_counts[model];
        for (i, row) in counts.iter().enumerate() {
            summary.row_counts[i] = row.iter().sum();
            summary.transitions[i] = normalize_row(&row.map(|c| c as f64));
        }
    }
    Ok(out)
}


#[cfg(test)]
pub(crate) mod props {
    use super::tests::run;
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn arb_run() -> impl Strategy<Value = RunTrace> {
        proptest::collection::vec((0.0f64..100.0, 0usize..5, 1u32..8), 1..60).prop_map(|mut ev| {
            ev.sort_by(|a, b| a.0.total_cmp(&b.0));
            let ev: Vec<(f64, EventCategory, u32)> = ev.into_iter().map(|(t, c, f)| (t, EventCategory::ALL[c], f)).collect();
            run("r", "m", &ev)
        })
    }

    proptest! {
        #[test]
        fn rows_sum_to_one(trace in arb_run()) {
            let s = compute_trajectory(&[trace]).unwrap();
            let m = &s["m"];
            for (row, w) in m.bin_mix.iter().zip(&m.bin_weights) {
                let total: f64 = row.iter().sum();
                if w.iter().sum::<f64>() > 0.0 {
                    prop_assert!((total - 1.0).abs() < 1e-9);
                } else {
                    prop_assert_eq!(total, 0.0);
                }
            }
            for (row, n) in m.transitions.iter().zip(&m.row_counts) {
                if *n > 0 {
                    prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                }
            }
        }
    }
}
