//! Surgical and Strict Diff Scores over a run's file mutations.

use serde::{Deserialize, Serialize};

use super::TraceError;
use crate::model::{MutationAction, MutationKind, RunTrace};

pub const SMALL_EDIT: f64 = 0.1;
pub const LARGE_EDIT: f64 = 0.5;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalityCounts {
    pub small: usize,
    pub medium: usize,
    pub large: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MutationCounts {
    pub writes: usize,
    pub edits: usize,
    pub deletes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffScoreResult {
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B_comp")]
    pub b_comp: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub surgical: f64,
    pub strict: f64,
    pub median_edit_ratio: f64,
    pub rewrite_share: f64,
    pub locality_counts: LocalityCounts,
    /// Fraction of edits in the large bin.
    pub large_diff_rate: f64,
    pub counts: MutationCounts,
}

pub fn surgical_score(a: f64, b: f64, c: f64) -> f64 {
    100.0 * (0.40 * a + 0.30 * b + 0.30 * c)
}

pub fn strict_score(a: f64, b: f64, c: f64) -> f64 {
    100.0 * a * (0.5 * b + 0.5 * c)
}

pub fn locality_bin(r: f64, counts: &mut LocalityCounts) {
    if r < SMALL_EDIT {
        counts.small += 1;
    } else if r < LARGE_EDIT {
        counts.medium += 1;
    } else {
        counts.large += 1;
    }
}

pub fn compute_diff_score_actions(actions: &[MutationAction]) -> Result<DiffScoreResult, TraceError> {
    if actions.is_empty() {
        return Err(TraceError::EmptyMutationStream);
    }
    let mut counts = MutationCounts::default();
    let (mut edit_change, mut total_change) = (0.0, 0.0);
    let (mut weighted, mut weights) = (0.0, 0.0);
    let mut locality = LocalityCounts::default();
    let mut ratios = Vec::new();
    for m in actions {
        let change = m.change_bytes as f64;
        total_change += change;
        match m.kind {
            MutationKind::Write => counts.writes += 1,
            MutationKind::Delete => counts.deletes += 1,
            MutationKind::Edit => {
                counts.edits += 1;
                edit_change += change;
                let r = m.edit_ratio();
                let w = change.sqrt();
                weighted += w * (1.0 - r.min(1.0));
                weights += w;
                locality_bin(r, &mut locality);
                ratios.push(r.clamp(0.0, 1.0));
            }
        }
    }
    let a = counts.edits as f64 / actions.len() as f64;
    let b = if total_change > 0.0 { edit_change / total_change } else { 0.0 };
    let c = if weights > 0.0 { weighted / weights } else { 0.0 };
    Ok(DiffScoreResult {
        a,
        b_comp: b,
        c,
        surgical: surgical_score(a, b, c),
        strict: strict_score(a, b, c),
        median_edit_ratio: crate::report::median(&ratios),
        rewrite_share: 1.0 - a,
        locality_counts: locality,
        large_diff_rate: if counts.edits > 0 { locality.large as f64 / counts.edits as f64 } else { 0.0 },
        counts,
    })
}

pub fn compute_diff_score(trace: &RunTrace) -> Result<DiffScoreResult, TraceError> {
    compute_diff_score_actions(&trace.mutations)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::normalize_mutation;

    fn edit(before: i64, old: i64, new: i64) -> MutationAction {
        normalize_mutation(MutationKind::Edit, "f", before, old, new).unwrap()
    }

    fn write(before: i64, new: i64) -> MutationAction {
        normalize_mutation(MutationKind::Write, "f", before, 0, new).unwrap()
    }

    #[test]
    fn single_small_edit() {
        // r = 10/1000 = 0.01, C = 0.99
        let d = compute_diff_score_actions(&[edit(1000, 10, 10)]).unwrap();
        assert_eq!((d.a, d.b_comp), (1.0, 1.0));
        assert!((d.c - 0.99).abs() < 1e-12);
        assert!((d.surgical - 99.7).abs() < 1e-9);
        assert!((d.strict - 99.5).abs() < 1e-9);
        assert_eq!(d.locality_counts, LocalityCounts { small: 1, medium: 0, large: 0 });
    }

    #[test]
    fn write_plus_edit() {
        let d = compute_diff_score_actions(&[write(0, 1000), edit(1000, 20, 30)]).unwrap();
        let r = 30.0 / 1010.0;
        let b = 30.0 / 1030.0;
        assert_eq!(d.a, 0.5);
        assert!((d.b_comp - b).abs() < 1e-12);
        assert!((d.c - (1.0 - r)).abs() < 1e-12);
        assert!((d.surgical - 49.98).abs() < 0.005);
        assert!((d.strict - 24.99).abs() < 0.005);
        assert_eq!(d.rewrite_share, 0.5);
    }

    #[test]
    fn all_writes_score_zero() {
        let d = compute_diff_score_actions(&[write(0, 10), write(10, 50)]).unwrap();
        assert_eq!((d.surgical, d.strict, d.c), (0.0, 0.0, 0.0));
        assert_eq!(d.median_edit_ratio, 0.0);
    }

    #[test]
    fn delete_counts_against_edit_share() {
        let del = normalize_mutation(MutationKind::Delete, "g", 300, 0, 0).unwrap();
        let d = compute_diff_score_actions(&[edit(1000, 100, 100), del]).unwrap();
        assert_eq!(d.a, 0.5);
        assert!((d.b_comp - 100.0 / 400.0).abs() < 1e-12);
        assert_eq!(d.counts.deletes, 1);
    }

    #[test]
    fn empty_stream() {
        assert_eq!(compute_diff_score_actions(&[]), Err(TraceError::EmptyMutationStream));
    }

    #[test]
    fn sqrt_weighting_sits_between() {
        // 100 edits change=1, r=0.01 (after=100) and one edit change=10000, r=0.9
        let mut actions: Vec<MutationAction> = (0..100).map(|_| edit(100, 1, 1)).collect();
        let big = edit(11112, 10000, 10000);
        let r_big = 10000.0 / 11112.0;
        actions.push(big);
        let d = compute_diff_score_actions(&actions).unwrap();
        let unweighted = (100.0 * 0.99 + (1.0 - r_big)) / 101.0;
        let raw = (100.0 * 0.99 + 10000.0 * (1.0 - r_big)) / 10100.0;
        assert!(d.c < unweighted && d.c > raw, "{raw} < {} < {unweighted}", d.c);
    }

    #[test]
    fn locality_edges() {
        let mut c = LocalityCounts::default();
        for r in [0.0999, 0.1, 0.4999, 0.5, 3.0] {
            locality_bin(r, &mut c);
        }
        assert_eq!(c, LocalityCounts { small: 1, medium: 2, large: 2 });
    }
}
