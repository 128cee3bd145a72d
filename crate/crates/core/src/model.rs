//! Shared domain types and the versioned JSON schemas built on them:
//! `task.annotation.json`, `page.snapshot.json`, `run.trace.json` and
//! `evaluation.report.json`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alignment::AffineTransform2D;

pub const FORMAT_VERSION: u32 = 1;

fn default_format_version() -> u32 {
    FORMAT_VERSION
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("invariant violated at {location}: {message}")]
    Invariant { location: String, message: String },
    #[error("negative byte count for {field}: {value}")]
    NegativeBytes { field: &'static str, value: i64 },
}

impl ModelError {
    fn invariant(location: impl Into<String>, message: impl Into<String>) -> Self {
        ModelError::Invariant {
            location: location.into(),
            message: message.into(),
        }
    }
}

pub type Result<T, E = ModelError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Size {
    pub width: f64,
    pub height: f64,
}

/// Axis-aligned box in mockup or rendered-page pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x: f64,
    pub y: f64,
    pub width: f64,
    pub height: f64,
}

impl BoundingBox {
    /// Builds a box, rejecting non-finite coordinates and non-positive extents.
    pub fn new(x: f64, y: f64, width: f64, height: f64) -> Result<Self> {
        let b = BoundingBox {
            x,
            y,
            width,
            height,
        };
        b.check("box")?;
        Ok(b)
    }

    pub fn check(&self, location: &str) -> Result<()> {
        if ![self.x, self.y, self.width, self.height]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(ModelError::invariant(location, "coordinates must be finite"));
        }
        if self.width <= 0.0 || self.height <= 0.0 {
            return Err(ModelError::invariant(
                location,
                format!(
                    "width and height must be positive, got {}x{}",
                    self.width, self.height
                ),
            ));
        }
        Ok(())
    }

    pub fn right(&self) -> f64 {
        self.x + self.width
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.height
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    pub fn center(&self) -> Point {
        Point::new(self.x + self.width / 2.0, self.y + self.height / 2.0)
    }

    pub fn intersection_area(&self, other: &BoundingBox) -> f64 {
        let w = self.right().min(other.right()) - self.x.max(other.x);
        let h = self.bottom().min(other.bottom()) - self.y.max(other.y);
        if w <= 0.0 || h <= 0.0 {
            0.0
        } else {
            w * h
        }
    }

    pub fn iou(&self, other: &BoundingBox) -> f64 {
        let inter = self.intersection_area(other);
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    }

    /// Euclidean distance between box centers.
    pub fn center_distance(&self, other: &BoundingBox) -> f64 {
        self.center().distance(&other.center())
    }

    pub fn within(&self, size: &Size) -> bool {
        self.x >= 0.0 && self.y >= 0.0 && self.right() <= size.width && self.bottom() <= size.height
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InteractionKind {
    Navigation,
    Input,
    Toggle,
    ExternalLink,
    Popout,
    Click,
}

impl InteractionKind {
    pub const ALL: [InteractionKind; 6] = [
        InteractionKind::Navigation,
        InteractionKind::Input,
        InteractionKind::Toggle,
        InteractionKind::ExternalLink,
        InteractionKind::Popout,
        InteractionKind::Click,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            InteractionKind::Navigation => "navigation",
            InteractionKind::Input => "input",
            InteractionKind::Toggle => "toggle",
            InteractionKind::ExternalLink => "external_link",
            InteractionKind::Popout => "popout",
            InteractionKind::Click => "click",
        }
    }
}

impl fmt::Display for InteractionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteractionType {
    pub kind: InteractionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subtype: Option<String>,
}

impl InteractionType {
    pub fn new(kind: InteractionKind) -> Self {
        InteractionType {
            kind,
            subtype: None,
        }
    }
}

/// Optional post-probe check for targets whose behavior should persist
/// beyond the page: after probing, `url` is re-fetched and must contain
/// `token` in its visible text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PersistenceCheck {
    pub url: String,
    pub token: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractiveTarget {
    pub id: String,
    #[serde(default)]
    pub page_id: String,
    #[serde(rename = "box")]
    pub bbox: BoundingBox,
    pub interaction: InteractionType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub persistence_check: Option<PersistenceCheck>,
}

/// A labeled anchor point. Files may give either `point` or `box`; a box is
/// reduced to its center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawAnchor")]
pub struct VisualAnchor {
    pub label: String,
    pub point: Point,
    pub page_id: String,
}

#[derive(Deserialize)]
struct RawAnchor {
    label: String,
    #[serde(default)]
    point: Option<Point>,
    #[serde(default, rename = "box")]
    bbox: Option<BoundingBox>,
    #[serde(default)]
    page_id: String,
}

impl TryFrom<RawAnchor> for VisualAnchor {
    type Error = String;

    fn try_from(raw: RawAnchor) -> std::result::Result<Self, String> {
        let point = match (raw.point, raw.bbox) {
            (Some(p), _) => p,
            (None, Some(b)) => b.center(),
            (None, None) => {
                return Err(format!("anchor {}: expected `point` or `box`", raw.label))
            }
        };
        Ok(VisualAnchor {
            label: raw.label,
            point,
            page_id: raw.page_id,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageAnnotation {
    pub page_id: String,
    pub mockup_image: String,
    pub mockup_size: Size,
    #[serde(default)]
    pub targets: Vec<InteractiveTarget>,
    #[serde(default)]
    pub anchors: Vec<VisualAnchor>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub declared_url: Option<String>,
    /// Visible headings on the mockup, used as a page-resolution signal.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub headings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskAnnotation {
    #[serde(default = "default_format_version")]
    pub format_version: u32,
    pub task_name: String,
    pub pages: Vec<PageAnnotation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition_label: Option<String>,
}

pub const MIN_ANCHORS: usize = 2;
pub const MAX_ANCHORS: usize = 5;

fn anchor_label_pattern() -> &'static Regex {
    static RE: std::sync::OnceLock<Regex> = std::sync::OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^<[^<>\s]+>$").unwrap())
}

impl TaskAnnotation {
    /// Checks every type invariant and fills in `page_id` on nested targets
    /// and anchors.
    pub fn validated(mut self) -> Result<Self> {
        if self.format_version > FORMAT_VERSION {
            return Err(ModelError::Schema(format!(
                "unsupported format_version {} (max {})",
                self.format_version, FORMAT_VERSION
            )));
        }
        if self.pages.is_empty() {
            return Err(ModelError::invariant("pages", "expected at least one page"));
        }
        let mut page_ids = BTreeSet::new();
        let mut target_ids = BTreeSet::new();
        for page in &mut self.pages {
            let loc = format!("page `{}`", page.page_id);
            if page.page_id.is_empty() {
                return Err(ModelError::invariant("pages", "empty page_id"));
            }
            if !page_ids.insert(page.page_id.clone()) {
                return Err(ModelError::invariant(loc, "duplicate page_id"));
            }
            let size = page.mockup_size;
            if !(size.width > 0.0 && size.height > 0.0 && size.width.is_finite() && size.height.is_finite()) {
                return Err(ModelError::invariant(loc, "mockup_size must be positive"));
            }
            let n = page.anchors.len();
            if !(MIN_ANCHORS..=MAX_ANCHORS).contains(&n) {
                return Err(ModelError::invariant(
                    loc,
                    format!("anchors: expected {MIN_ANCHORS}..{MAX_ANCHORS}, got {n}"),
                ));
            }
            let mut labels = BTreeSet::new();
            for anchor in &mut page.anchors {
                if !anchor_label_pattern().is_match(&anchor.label) {
                    return Err(ModelError::invariant(
                        format!("{loc} anchor `{}`", anchor.label),
                        "label must look like <name>",
                    ));
                }
                if !labels.insert(anchor.label.clone()) {
                    return Err(ModelError::invariant(
                        format!("{loc} anchor `{}`", anchor.label),
                        "duplicate anchor label",
                    ));
                }
                if !(anchor.point.x.is_finite() && anchor.point.y.is_finite()) {
                    return Err(ModelError::invariant(
                        format!("{loc} anchor `{}`", anchor.label),
                        "point must be finite",
                    ));
                }
                if anchor.page_id.is_empty() {
                    anchor.page_id = page.page_id.clone();
                } else if anchor.page_id != page.page_id {
                    return Err(ModelError::invariant(
                        format!("{loc} anchor `{}`", anchor.label),
                        format!("page_id `{}` does not match enclosing page", anchor.page_id),
                    ));
                }
            }
            for target in &mut page.targets {
                let tloc = format!("{loc} target `{}`", target.id);
                if target.id.is_empty() {
                    return Err(ModelError::invariant(loc, "empty target id"));
                }
                if !target_ids.insert(target.id.clone()) {
                    return Err(ModelError::invariant(tloc, "duplicate target id"));
                }
                if target.page_id.is_empty() {
                    target.page_id = page.page_id.clone();
                } else if target.page_id != page.page_id {
                    return Err(ModelError::invariant(
                        tloc,
                        format!("page_id `{}` does not match enclosing page", target.page_id),
                    ));
                }
                target.bbox.check(&tloc)?;
                if !target.bbox.within(&size) {
                    return Err(ModelError::invariant(
                        tloc,
                        format!(
                            "box ({}, {}, {}, {}) outside mockup {}x{}",
                            target.bbox.x,
                            target.bbox.y,
                            target.bbox.width,
                            target.bbox.height,
                            size.width,
                            size.height
                        ),
                    ));
                }
            }
        }
        Ok(self)
    }

    pub fn page(&self, page_id: &str) -> Option<&PageAnnotation> {
        self.pages.iter().find(|p| p.page_id == page_id)
    }

    pub fn target_count(&self) -> usize {
        self.pages.iter().map(|p| p.targets.len()).sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("annotation serializes")
    }
}

/// Parses and validates a `task.annotation.json` document.
pub fn validate_task_annotation(doc: &str) -> Result<TaskAnnotation> {
    let task: TaskAnnotation =
        serde_json::from_str(doc).map_err(|e| ModelError::Schema(e.to_string()))?;
    task.validated()
}

pub fn load_task_annotation(path: &Path) -> Result<TaskAnnotation> {
    let doc = std::fs::read_to_string(path)
        .map_err(|e| ModelError::Schema(format!("{}: {e}", path.display())))?;
    validate_task_annotation(&doc)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomCandidate {
    pub locator: String,
    pub tag_or_role: String,
    #[serde(rename = "box")]
    pub bbox: BoundingBox,
    #[serde(default)]
    pub text: String,
    #[serde(default)]
    pub attributes: BTreeMap<String, String>,
    pub visible: bool,
}

impl DomCandidate {
    pub fn attr(&self, name: &str) -> Option<&str> {
        self.attributes.get(name).map(String::as_str)
    }

    /// The element's tag, without any `[role=...]` suffix.
    pub fn tag(&self) -> &str {
        self.tag_or_role
            .split(['[', ' '])
            .next()
            .unwrap_or_default()
    }

    pub fn role(&self) -> Option<&str> {
        self.attr("role")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageSnapshot {
    #[serde(default = "default_format_version")]
    pub format_version: u32,
    pub url: String,
    pub viewport: Size,
    #[serde(default)]
    pub candidates: Vec<DomCandidate>,
    #[serde(default)]
    pub internal_links: Vec<String>,
    #[serde(default)]
    pub headings: Vec<String>,
    #[serde(default)]
    pub body_digest: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub screenshot: Option<String>,
    #[serde(default)]
    pub captured_at: String,
}

impl PageSnapshot {
    pub fn validated(self) -> Result<Self> {
        let vw = self.viewport.width;
        let vh = self.viewport.height;
        if !(vw > 0.0 && vh > 0.0) {
            return Err(ModelError::invariant(
                format!("snapshot {}", self.url),
                "viewport must be positive",
            ));
        }
        for c in &self.candidates {
            let loc = format!("snapshot {} candidate `{}`", self.url, c.locator);
            if !c.visible {
                return Err(ModelError::invariant(loc, "visible=false candidates are not allowed"));
            }
            c.bbox.check(&loc)?;
            // Below-fold content is allowed; far off-canvas boxes are not.
            if c.bbox.x < -vw || c.bbox.x > 2.0 * vw || c.bbox.y < -vh {
                return Err(ModelError::invariant(loc, "box lies outside the page canvas"));
            }
        }
        Ok(self)
    }

    /// Normalized visible text: body digest plus headings and candidate labels.
    pub fn all_text(&self) -> String {
        let mut s = self.body_digest.clone();
        for h in &self.headings {
            s.push(' ');
            s.push_str(h);
        }
        for c in &self.candidates {
            s.push(' ');
            s.push_str(&c.text);
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MutationKind {
    Write,
    Edit,
    Delete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MutationAction {
    pub kind: MutationKind,
    pub path: String,
    pub before_bytes: u64,
    pub old_bytes: u64,
    pub new_bytes: u64,
    pub after_bytes: u64,
    pub change_bytes: u64,
    pub timestamp: f64,
}

impl MutationAction {
    /// Edit ratio: touched bytes over resulting file size. Writes and
    /// deletions count as full rewrites.
    pub fn edit_ratio(&self) -> f64 {
        match self.kind {
            MutationKind::Edit => {
                if self.after_bytes > 0 {
                    self.change_bytes as f64 / self.after_bytes as f64
                } else if self.change_bytes == 0 {
                    0.0
                } else {
                    1.0
                }
            }
            MutationKind::Write | MutationKind::Delete => 1.0,
        }
    }

    pub fn satisfies_accounting(&self) -> bool {
        match self.kind {
            MutationKind::Write => {
                self.after_bytes == self.new_bytes
                    && self.change_bytes == self.before_bytes.max(self.after_bytes)
            }
            MutationKind::Edit => {
                self.after_bytes
                    == (self.before_bytes + self.new_bytes).saturating_sub(self.old_bytes)
                    && self.change_bytes == self.old_bytes.max(self.new_bytes)
            }
            MutationKind::Delete => self.after_bytes == 0 && self.change_bytes == self.before_bytes,
        }
    }
}

fn non_negative(field: &'static str, value: i64) -> Result<u64> {
    u64::try_from(value).map_err(|_| ModelError::NegativeBytes { field, value })
}

/// Fills `after_bytes` and `change_bytes` from the byte-accounting rule of
/// the mutation kind.
pub fn normalize_mutation(
    kind: MutationKind,
    path: &str,
    before_bytes: i64,
    old_bytes: i64,
    new_bytes: i64,
) -> Result<MutationAction> {
    let before = non_negative("before_bytes", before_bytes)?;
    let old = non_negative("old_bytes", old_bytes)?;
    let new = non_negative("new_bytes", new_bytes)?;
    let (old, new, after, change) = match kind {
        MutationKind::Write => (0, new, new, before.max(new)),
        MutationKind::Edit => {
            let after = (before + new).saturating_sub(old);
            (old, new, after, old.max(new))
        }
        MutationKind::Delete => (0, 0, 0, before),
    };
    Ok(MutationAction {
        kind,
        path: path.to_string(),
        before_bytes: before,
        old_bytes: old,
        new_bytes: new,
        after_bytes: after,
        change_bytes: change,
        timestamp: 0.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventCategory {
    Inspect,
    Write,
    Verify,
    Failure,
    Other,
}

impl EventCategory {
    pub const ALL: [EventCategory; 5] = [
        EventCategory::Inspect,
        EventCategory::Write,
        EventCategory::Verify,
        EventCategory::Failure,
        EventCategory::Other,
    ];

    pub fn index(&self) -> usize {
        *self as usize
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            EventCategory::Inspect => "inspect",
            EventCategory::Write => "write",
            EventCategory::Verify => "verify",
            EventCategory::Failure => "failure",
            EventCategory::Other => "other",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub timestamp: f64,
    pub category: EventCategory,
    #[serde(default)]
    pub search_flag: bool,
    #[serde(default = "one")]
    pub files_touched: u32,
    pub raw_kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command_text: Option<String>,
}

fn one() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    #[serde(default = "default_format_version")]
    pub format_version: u32,
    pub run_id: String,
    pub model_label: String,
    #[serde(default)]
    pub condition_label: String,
    #[serde(default)]
    pub task_label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pick_label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    #[serde(default)]
    pub events: Vec<TraceEvent>,
    #[serde(default)]
    pub mutations: Vec<MutationAction>,
    #[serde(default)]
    pub scaffold_manifest: BTreeMap<String, u64>,
}

impl RunTrace {
    pub fn validated(self) -> Result<Self> {
        let loc = format!("run `{}`", self.run_id);
        if self.events.windows(2).any(|w| w[1].timestamp < w[0].timestamp) {
            return Err(ModelError::invariant(loc, "events not sorted by timestamp"));
        }
        if self.mutations.windows(2).any(|w| w[1].timestamp < w[0].timestamp) {
            return Err(ModelError::invariant(loc, "mutations not sorted by timestamp"));
        }
        if let Some(m) = self.mutations.iter().find(|m| !m.satisfies_accounting()) {
            return Err(ModelError::invariant(
                loc,
                format!("mutation on `{}` violates byte accounting", m.path),
            ));
        }
        Ok(self)
    }

    /// Key of the comparison group a run's score residual is taken against.
    pub fn cohort_key(&self) -> (String, String, String) {
        (
            self.task_label.clone(),
            self.condition_label.clone(),
            self.pick_label.clone().unwrap_or_default(),
        )
    }
}

/// Localization tier with its fixed default score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Tier {
    #[serde(rename = "T1_IOU30")]
    T1Iou30,
    #[serde(rename = "T2_IOU10")]
    T2Iou10,
    #[serde(rename = "T3_CENTER150")]
    T3Center150,
    #[serde(rename = "T4_CENTER600")]
    T4Center600,
    #[serde(rename = "T5_TEXT")]
    T5Text,
    #[serde(rename = "MISS")]
    Miss,
}

impl Tier {
    pub const ALL: [Tier; 6] = [
        Tier::T1Iou30,
        Tier::T2Iou10,
        Tier::T3Center150,
        Tier::T4Center600,
        Tier::T5Text,
        Tier::Miss,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Tier::T1Iou30 => "T1_IOU30",
            Tier::T2Iou10 => "T2_IOU10",
            Tier::T3Center150 => "T3_CENTER150",
            Tier::T4Center600 => "T4_CENTER600",
            Tier::T5Text => "T5_TEXT",
            Tier::Miss => "MISS",
        }
    }

    /// Whether a match at this tier points at an element worth probing.
    pub fn is_probeable(&self) -> bool {
        matches!(
            self,
            Tier::T1Iou30 | Tier::T2Iou10 | Tier::T3Center150 | Tier::T4Center600
        )
    }
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationResult {
    pub page_id: String,
    pub target_id: String,
    pub interaction: InteractionKind,
    pub tier_name: Tier,
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(rename = "B")]
    pub b: f64,
    pub matched_locator: Option<String>,
    pub iou: f64,
    pub center_distance: Option<f64>,
    pub text_similarity: f64,
    pub diagnostics: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageResult {
    pub page_id: String,
    pub resolved_url: Option<String>,
    pub resolution_confidence: f64,
    pub transform: Option<AffineTransform2D>,
    pub anchors_matched: usize,
    pub n: usize,
    pub mean_l: f64,
    pub mean_b: f64,
    #[serde(rename = "S_page")]
    pub s_page: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    #[serde(rename = "S")]
    pub s: f64,
    pub mean_l: f64,
    pub mean_b: f64,
    #[serde(rename = "N")]
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub format_version: u32,
    pub task_name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition_label: Option<String>,
    pub app_root: String,
    pub generated_at: String,
    pub per_annotation: Vec<AnnotationResult>,
    pub per_page: Vec<PageResult>,
    pub aggregate: Aggregate,
    #[serde(default)]
    pub overlay_refs: Vec<String>,
    #[serde(default)]
    pub notes: Vec<String>,
}

impl EvaluationReport {
    /// `S` recomputed from the per-annotation entries.
    pub fn recompute_s(&self) -> f64 {
        let n = self.per_annotation.len();
        if n == 0 {
            return 0.0;
        }
        self.per_annotation.iter().map(|a| a.l * a.b).sum::<f64>() / n as f64
    }

    pub fn validated(self) -> Result<Self> {
        let in_unit = |v: f64| (0.0..=1.0).contains(&v);
        for a in &self.per_annotation {
            if !in_unit(a.l) || !in_unit(a.b) {
                return Err(ModelError::invariant(
                    format!("annotation `{}`", a.target_id),
                    "L and B must lie in [0, 1]",
                ));
            }
        }
        if self.aggregate.n != self.per_annotation.len() {
            return Err(ModelError::invariant("aggregate", "N does not match annotation count"));
        }
        if (self.recompute_s() - self.aggregate.s).abs() > 1e-12 || !in_unit(self.aggregate.s) {
            return Err(ModelError::invariant("aggregate", "S inconsistent with annotations"));
        }
        Ok(self)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}
