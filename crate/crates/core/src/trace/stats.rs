//! Correlation, group means and plaintext tables.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::diffscore::DiffScoreResult;
use super::TraceError;
use crate::model::RunTrace;

/// Pearson product-moment correlation.
pub fn correlate(xs: &[f64], ys: &[f64]) -> Result<f64, TraceError> {
    if xs.len() != ys.len() {
        return Err(TraceError::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 2 {
        return Err(TraceError::DegenerateVariance);
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(TraceError::DegenerateVariance);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupBy {
    Model,
    Condition,
    ModelCondition,
    Task,
}

impl std::str::FromStr for GroupBy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "model" => Ok(GroupBy::Model),
            "condition" => Ok(GroupBy::Condition),
            "model,condition" | "model_condition" => Ok(GroupBy::ModelCondition),
            "task" => Ok(GroupBy::Task),
            other => Err(format!("unknown grouping `{other}`")),
        }
    }
}

impl GroupBy {
    pub fn key(&self, t: &RunTrace) -> String {
        match self {
            GroupBy::Model => t.model_label.clone(),
            GroupBy::Condition => t.condition_label.clone(),
            GroupBy::ModelCondition => format!("{}/{}", t.model_label, t.condition_label),
            GroupBy::Task => t.task_label.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupMeans {
    pub group: String,
    pub runs: usize,
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
    pub large_diff_rate: f64,
}

/// Means of each diff-score field per group, groups sorted by name.
pub fn group_means(results: &[(&RunTrace, &DiffScoreResult)], by: GroupBy) -> Vec<GroupMeans> {
    let mut groups: BTreeMap<String, Vec<&DiffScoreResult>> = BTreeMap::new();
    for (t, d) in results {
        groups.entry(by.key(t)).or_default().push(d);
    }
    groups
        .into_iter()
        .map(|(group, ds)| {
            let n = ds.len() as f64;
            let mean = |f: fn(&DiffScoreResult) -> f64| ds.iter().map(|d| f(d)).sum::<f64>() / n;
            GroupMeans {
                group,
                runs: ds.len(),
                a: mean(|d| d.a),
                b_comp: mean(|d| d.b_comp),
                c: mean(|d| d.c),
                surgical: mean(|d| d.surgical),
                strict: mean(|d| d.strict),
                median_edit_ratio: mean(|d| d.median_edit_ratio),
                rewrite_share: mean(|d| d.rewrite_share),
                large_diff_rate: mean(|d| d.large_diff_rate),
            }
        })
        .collect()
}

/// Aligned plaintext table: first column left-aligned, the rest right.
pub fn format_table(headers: &[&str], rows: &[Vec<String>]) -> String {
    let cols = headers.len();
    let mut widths: Vec<usize> = headers.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (i, cell) in row.iter().enumerate().take(cols) {
            widths[i] = widths[i].max(cell.chars().count());
        }
    }
    let line = |cells: Vec<&str>| -> String {
        let parts: Vec<String> = cells
            .iter()
            .enumerate()
            .map(|(i, c)| if i == 0 { format!("{:<w$}", c, w = widths[i]) } else { format!("{:>w$}", c, w = widths[i]) })
            .collect();
        parts.join("  ").trim_end().to_string()
    };
    let mut out = line(headers.to_vec());
    out.push('\n');
    out.push_str(&widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("  "));
    out.push('\n');
    for row in rows {
        out.push_str(&line(row.iter().map(String::as_str).collect()));
        out.push('\n');
    }
    out
}

pub const DIFF_HEADERS: [&str; 10] =
    ["run", "A", "B_comp", "C", "surgical", "strict", "med_r", "rewrite", "small/med/large", "large_rate"];

pub fn diff_row(label: &str, d: &DiffScoreResult) -> Vec<String> {
    vec![
        label.to_string(),
        format!("{:.3}", d.a),
        format!("{:.3}", d.b_comp),
        format!("{:.3}", d.c),
        format!("{:.2}", d.surgical),
        format!("{:.2}", d.strict),
        format!("{:.3}", d.median_edit_ratio),
        format!("{:.3}", d.rewrite_share),
        format!("{}/{}/{}", d.locality_counts.small, d.locality_counts.medium, d.locality_counts.large),
        format!("{:.3}", d.large_diff_rate),
    ]
}

pub const GROUP_HEADERS: [&str; 9] = ["group", "runs", "A", "B_comp", "C", "surgical", "strict", "med_r", "large_rate"];

pub fn group_row(g: &GroupMeans) -> Vec<String> {
    vec![
        g.group.clone(),
        g.runs.to_string(),
        format!("{:.3}", g.a),
        format!("{:.3}", g.b_comp),
        format!("{:.3}", g.c),
        format!("{:.2}", g.surgical),
        format!("{:.2}", g.strict),
        format!("{:.3}", g.median_edit_ratio),
        format!("{:.3}", g.large_diff_rate),
    ]
}
