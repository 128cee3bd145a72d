//! Structure-function aggregation, report files and overlay images.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use image::{ImageFormat, Rgba, RgbaImage};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::behavior::BehaviorResult;
use crate::localization::LocalizationResult;
use crate::model::{Aggregate, AnnotationResult, BoundingBox, EvaluationReport, Tier};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReportError {
    #[error("no annotations to aggregate")]
    EmptyAnnotationSet,
    #[error("localization and behavior results disagree on target `{0}`")]
    KeyMismatch(String),
    #[error("image error: {0}")]
    Image(String),
    #[error("i/o failure: {0}")]
    IoFailure(String),
}

/// Mean of values summed in sorted order, so the result does not depend on
/// input order.
fn stable_mean(mut values: Vec<f64>) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(f64::total_cmp);
    values.iter().sum::<f64>() / values.len() as f64
}

/// S, mean_L and mean_B over `(L, B)` pairs.
pub fn aggregate_pairs(pairs: &[(f64, f64)]) -> Result<Aggregate, ReportError> {
    if pairs.is_empty() {
        return Err(ReportError::EmptyAnnotationSet);
    }
    Ok(Aggregate {
        s: stable_mean(pairs.iter().map(|(l, b)| l * b).collect()),
        mean_l: stable_mean(pairs.iter().map(|p| p.0).collect()),
        mean_b: stable_mean(pairs.iter().map(|p| p.1).collect()),
        n: pairs.len(),
    })
}

/// Joins localization and behavior results by target id and aggregates.
pub fn aggregate(locs: &[LocalizationResult], behs: &[BehaviorResult]) -> Result<Aggregate, ReportError> {
    let by_id: BTreeMap<&str, f64> = behs.iter().map(|b| (b.target_id.as_str(), b.b)).collect();
    if by_id.len() != locs.len() {
        let extra = behs
            .iter()
            .find(|b| !locs.iter().any(|l| l.target_id == b.target_id))
            .map(|b| b.target_id.clone());
        return Err(ReportError::KeyMismatch(extra.unwrap_or_default()));
    }
    let pairs = locs
        .iter()
        .map(|l| {
            by_id
                .get(l.target_id.as_str())
                .map(|&b| (l.l, b))
                .ok_or_else(|| ReportError::KeyMismatch(l.target_id.clone()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    aggregate_pairs(&pairs)
}

pub fn aggregate_results(results: &[AnnotationResult]) -> Result<Aggregate, ReportError> {
    aggregate_pairs(&results.iter().map(|r| (r.l, r.b)).collect::<Vec<_>>())
}

pub fn tier_color(tier: Tier) -> Rgba<u8> {
    match tier {
        Tier::T1Iou30 => Rgba([0, 170, 0, 255]),
        Tier::T2Iou10 => Rgba([140, 200, 0, 255]),
        Tier::T3Center150 => Rgba([230, 200, 0, 255]),
        Tier::T4Center600 => Rgba([245, 140, 0, 255]),
        Tier::T5Text => Rgba([170, 0, 200, 255]),
        Tier::Miss => Rgba([220, 0, 0, 255]),
    }
}

pub const MATCHED_COLOR: Rgba<u8> = Rgba([30, 100, 255, 255]);

/// One annotated target as drawn on the overlay: its box in rendered page
/// coordinates and, when matched, the candidate's box.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlayItem {
    pub target_box: BoundingBox,
    pub tier: Tier,
    pub matched_box: Option<BoundingBox>,
}

fn draw_rect(img: &mut RgbaImage, b: &BoundingBox, color: Rgba<u8>, thickness: i64) {
    let (w, h) = (img.width() as i64, img.height() as i64);
    let x0 = b.x.round() as i64;
    let y0 = b.y.round() as i64;
    let x1 = (b.x + b.width).round() as i64 - 1;
    let y1 = (b.y + b.height).round() as i64 - 1;
    let mut put = |x: i64, y: i64| {
        if (0..w).contains(&x) && (0..h).contains(&y) {
            img.put_pixel(x as u32, y as u32, color);
        }
    };
    for k in 0..thickness {
        for x in x0..=x1 {
            put(x, y0 + k);
            put(x, y1 - k);
        }
        for y in y0..=y1 {
            put(x0 + k, y);
            put(x1 - k, y);
        }
    }
}

/// Draws tier-colored target boxes and matched candidate boxes over a PNG
/// screenshot. With no items the screenshot is returned untouched.
pub fn render_overlay(screenshot_png: &[u8], items: &[OverlayItem]) -> Result<Vec<u8>, ReportError> {
    if items.is_empty() {
        return Ok(screenshot_png.to_vec());
    }
    let mut img = image::load_from_memory_with_format(screenshot_png, ImageFormat::Png)
        .map_err(|e| ReportError::Image(e.to_string()))?
        .to_rgba8();
    for item in items {
        if let Some(m) = &item.matched_box {
            draw_rect(&mut img, m, MATCHED_COLOR, 2);
        }
    }
    for item in items {
        draw_rect(&mut img, &item.target_box, tier_color(item.tier), 3);
    }
    let mut out = std::io::Cursor::new(Vec::new());
    img.write_to(&mut out, ImageFormat::Png)
        .map_err(|e| ReportError::Image(e.to_string()))?;
    Ok(out.into_inner())
}

/// Plain-text rendering of a report.
pub fn render_text(report: &EvaluationReport) -> String {
    let mut s = String::new();
    let a = &report.aggregate;
    let _ = writeln!(s, "task: {}", report.task_name);
    if let Some(c) = &report.condition_label {
        let _ = writeln!(s, "condition: {c}");
    }
    let _ = writeln!(s, "app: {}", report.app_root);
    let _ = writeln!(s, "generated: {}", report.generated_at);
    let _ = writeln!(s, "S = {:.4}  mean_L = {:.4}  mean_B = {:.4}  N = {}", a.s, a.mean_l, a.mean_b, a.n);
    let _ = writeln!(s);
    let _ = writeln!(s, "{:<20} {:<40} {:>6} {:>7} {:>7} {:>7}", "page", "url", "conf", "mean_L", "mean_B", "S_page");
    for p in &report.per_page {
        let _ = writeln!(
            s,
            "{:<20} {:<40} {:>6.3} {:>7.4} {:>7.4} {:>7.4}",
            p.page_id,
            p.resolved_url.as_deref().unwrap_or("-"),
            p.resolution_confidence,
            p.mean_l,
            p.mean_b,
            p.s_page
        );
        if let Some(note) = &p.note {
            let _ = writeln!(s, "  note: {note}");
        }
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "{:<20} {:<16} {:<14} {:>5} {:>5}  {}", "target", "interaction", "tier", "L", "B", "matched / reason");
    for r in &report.per_annotation {
        let _ = writeln!(
            s,
            "{:<20} {:<16} {:<14} {:>5.2} {:>5.2}  {} / {}",
            r.target_id,
            r.interaction.as_str(),
            r.tier_name.name(),
            r.l,
            r.b,
            r.matched_locator.as_deref().unwrap_or("-"),
            r.diagnostics
        );
    }
    if !report.notes.is_empty() {
        let _ = writeln!(s);
        for n in &report.notes {
            let _ = writeln!(s, "note: {n}");
        }
    }
    s
}

fn io<E: std::fmt::Display>(path: &Path) -> impl FnOnce(E) -> ReportError + '_ {
    move |e| ReportError::IoFailure(format!("{}: {e}", path.display()))
}

/// Writes `evaluation.report.json`, `report.txt` and `overlays/<page_id>.png`
/// under `out_dir`, returning the written paths.
pub fn emit_report(
    report: &EvaluationReport,
    overlays: &[(String, Vec<u8>)],
    out_dir: &Path,
) -> Result<Vec<PathBuf>, ReportError> {
    std::fs::create_dir_all(out_dir).map_err(io(out_dir))?;
    let mut written = Vec::new();
    let json = out_dir.join("evaluation.report.json");
    std::fs::write(&json, report.to_json()).map_err(io(&json))?;
    written.push(json);
    let txt = out_dir.join("report.txt");
    std::fs::write(&txt, render_text(report)).map_err(io(&txt))?;
    written.push(txt);
    if !overlays.is_empty() {
        let dir = out_dir.join("overlays");
        std::fs::create_dir_all(&dir).map_err(io(&dir))?;
        for (page_id, png) in overlays {
            let path = dir.join(format!("{page_id}.png"));
            std::fs::write(&path, png).map_err(io(&path))?;
            written.push(path);
        }
    }
    Ok(written)
}

pub fn load_report(path: &Path) -> Result<EvaluationReport, ReportError> {
    let text = std::fs::read_to_string(path).map_err(io(path))?;
    serde_json::from_str(&text).map_err(|e| ReportError::IoFailure(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub task_name: String,
    pub condition_label: Option<String>,
    #[serde(rename = "S")]
    pub s: f64,
    pub mean_l: f64,
    pub mean_b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub runs: usize,
    pub mean_s: f64,
    pub median_s: f64,
    pub mean_l: f64,
    pub mean_b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergedReport {
    pub runs: Vec<RunSummary>,
    pub overall: GroupSummary,
    pub by_condition: BTreeMap<String, GroupSummary>,
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn summarize(runs: &[&RunSummary]) -> GroupSummary {
    let s: Vec<f64> = runs.iter().map(|r| r.s).collect();
    GroupSummary {
        runs: runs.len(),
        mean_s: stable_mean(s.clone()),
        median_s: median(&s),
        mean_l: stable_mean(runs.iter().map(|r| r.mean_l).collect()),
        mean_b: stable_mean(runs.iter().map(|r| r.mean_b).collect()),
    }
}

/// Combines several run reports into per-condition means and medians of S.
pub fn merge_reports(reports: &[EvaluationReport]) -> Result<MergedReport, ReportError> {
    if reports.is_empty() {
        return Err(ReportError::EmptyAnnotationSet);
    }
    let runs: Vec<RunSummary> = reports
        .iter()
        .map(|r| RunSummary {
            task_name: r.task_name.clone(),
            condition_label: r.condition_label.clone(),
            s: r.aggregate.s,
            mean_l: r.aggregate.mean_l,
            mean_b: r.aggregate.mean_b,
        })
        .collect();
    let mut groups: BTreeMap<String, Vec<&RunSummary>> = BTreeMap::new();
    for r in &runs {
        groups
            .entry(r.condition_label.clone().unwrap_or_else(|| "-".into()))
            .or_default()
            .push(r);
    }
    let overall = summarize(&runs.iter().collect::<Vec<_>>());
    let by_condition = groups.into_iter().map(|(k, v)| (k, summarize(&v))).collect();
    Ok(MergedReport { runs, overall, by_condition })
}
