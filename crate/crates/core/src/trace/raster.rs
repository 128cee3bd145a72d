//! Per-run action rasters with workload-weighted write ticks.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::trajectory::event_progress;
use crate::model::{EventCategory, RunTrace};

pub const MAX_WRITE_WIDTH: f64 = 64.0;
pub const MIN_WRITE_WIDTH: f64 = 1.2;
pub const WRITE_WIDTH_PER_FILE: f64 = 0.9;
pub const TICK_WIDTH: f64 = 1.0;
pub const SEARCH_TICK_WIDTH: f64 = 0.6;

/// Pixel width of a write tick touching `files` files.
pub fn write_width(files: u32) -> f64 {
    MAX_WRITE_WIDTH.min(MIN_WRITE_WIDTH.max(WRITE_WIDTH_PER_FILE * files as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TickColor {
    Gray,
    Blue,
    Green,
    Red,
    Orange,
    Purple,
}

impl TickColor {
    pub fn of(category: EventCategory, search: bool) -> Self {
        if search {
            return TickColor::Purple;
        }
        match category {
            EventCategory::Inspect => TickColor::Gray,
            EventCategory::Write => TickColor::Blue,
            EventCategory::Verify => TickColor::Green,
            EventCategory::Failure => TickColor::Red,
            EventCategory::Other => TickColor::Orange,
        }
    }

    pub fn hex(&self) -> &'static str {
        match self {
            TickColor::Gray => "#8c8c8c",
            TickColor::Blue => "#1f5fd6",
            TickColor::Green => "#1f9d3a",
            TickColor::Red => "#d62728",
            TickColor::Orange => "#f28e1c",
            TickColor::Purple => "#8e44ad",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Background {
    Green,
    Red,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tick {
    pub position: f64,
    pub color: TickColor,
    pub width_px: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RasterRow {
    pub run_id: String,
    pub model_label: String,
    pub family: String,
    pub family_group: usize,
    pub residual: f64,
    pub background: Background,
    /// The run had no score; its residual is 0 by convention.
    pub neutral: bool,
    pub ticks: Vec<Tick>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RasterConfig {
    pub family_order: Vec<String>,
}

impl Default for RasterConfig {
    fn default() -> Self {
        RasterConfig {
            family_order: ["gpt_5-4", "gpt_5-5", "opus", "sonnet"].iter().map(|s| s.to_string()).collect(),
        }
    }
}

/// Family name used for row grouping, folding common spellings of the
/// model label.
pub fn family_of(model_label: &str) -> String {
    let m = model_label.to_ascii_lowercase();
    let folded: String = m.chars().map(|c| if c == '.' || c == '-' || c == '_' { '-' } else { c }).collect();
    if folded.contains("opus") {
        "opus".into()
    } else if folded.contains("sonnet") {
        "sonnet".into()
    } else if folded.contains("gpt-5-4") {
        "gpt_5-4".into()
    } else if folded.contains("gpt-5-5") {
        "gpt_5-5".into()
    } else {
        m
    }
}

/// Rows grouped by family in configured order (unlisted families after, by
/// name), then by descending residual and run id.
pub fn build_raster(traces: &[RunTrace], config: &RasterConfig) -> Vec<RasterRow> {
    let mut cohorts: BTreeMap<(String, String, String), Vec<f64>> = BTreeMap::new();
    for t in traces {
        if let Some(s) = t.score {
            cohorts.entry(t.cohort_key()).or_default().push(s);
        }
    }
    let mut rows: Vec<RasterRow> = traces
        .iter()
        .map(|t| {
            let (residual, neutral) = match t.score {
                Some(s) => {
                    let c = &cohorts[&t.cohort_key()];
                    (s - c.iter().sum::<f64>() / c.len() as f64, false)
                }
                None => (0.0, true),
            };
            let family = family_of(&t.model_label);
            let family_group = config
                .family_order
                .iter()
                .position(|f| *f == family)
                .unwrap_or(config.family_order.len());
            let (progress, _) = event_progress(t);
            let ticks = t
                .events
                .iter()
                .zip(progress)
                .map(|(e, position)| Tick {
                    position,
                    color: TickColor::of(e.category, e.search_flag),
                    width_px: match (e.category, e.search_flag) {
                        (_, true) => SEARCH_TICK_WIDTH,
                        (EventCategory::Write, _) => write_width(e.files_touched),
                        _ => TICK_WIDTH,
                    },
                })
                .collect();
            RasterRow {
                run_id: t.run_id.clone(),
                model_label: t.model_label.clone(),
                family,
                family_group,
                residual,
                background: if residual >= 0.0 { Background::Green } else { Background::Red },
                neutral,
                ticks,
            }
        })
        .collect();
    rows.sort_by(|a, b| {
        a.family_group
            .cmp(&b.family_group)
            .then_with(|| a.family.cmp(&b.family))
            .then(b.residual.total_cmp(&a.residual))
            .then_with(|| a.run_id.cmp(&b.run_id))
    });
    rows
}

const LABEL_W: f64 = 220.0;
const PLOT_W: f64 = 1000.0;
const ROW_H: f64 = 14.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Scalable vector rendering, one row per run.
pub fn raster_svg(rows: &[RasterRow]) -> String {
    let height = ROW_H * rows.len() as f64 + 20.0;
    let width = LABEL_W + PLOT_W + 70.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="monospace" font-size="10">"#
    );
    for (i, row) in rows.iter().enumerate() {
        let y = ROW_H * i as f64;
        let bg = match row.background {
            Background::Green => "#e3f4e1",
            Background::Red => "#f8e0e0",
        };
        let _ = writeln!(s, r#"<g class="run" data-run="{}" data-residual="{:.6}">"#, escape(&row.run_id), row.residual);
        let _ = writeln!(s, r#"<rect x="{LABEL_W}" y="{y}" width="{PLOT_W}" height="{ROW_H}" fill="{bg}"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="4" y="{:.1}">{} {}</text>"#,
            y + ROW_H - 3.0,
            escape(&row.family),
            escape(&row.run_id)
        );
        for t in &row.ticks {
            let x = LABEL_W + t.position * PLOT_W - t.width_px / 2.0;
            let _ = writeln!(
                s,
                r#"<rect x="{x:.3}" y="{:.1}" width="{:.3}" height="{:.1}" fill="{}"/>"#,
                y + 1.0,
                t.width_px,
                ROW_H - 2.0,
                t.color.hex()
            );
        }
        let mark = if row.neutral { " (no score)" } else { "" };
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}">{:+.3}{mark}</text>"#, LABEL_W + PLOT_W + 4.0, y + ROW_H - 3.0, row.residual);
        s.push_str("</g>\n");
    }
    s.push_str("</svg>\n");
    s
}
