//! End-to-end evaluation of one task: crawl, resolve, align, localize,
//! probe, score.

use std::collections::BTreeMap;

use rayon::prelude::*;
use thiserror::Error;
use url::Url;

use crate::alignment::{fit_transform, match_anchors, transform_box, AffineTransform2D, CuratedAnchor};
use crate::behavior::{score_behavior, score_missing, BehaviorProfile, BehaviorResult};
use crate::driver::{Backend, DriverError};
use crate::localization::{assign_page, LocalizationResult, TierConfig};
use crate::model::{
    Aggregate, AnnotationResult, BoundingBox, EvaluationReport, PageAnnotation, PageResult, PageSnapshot,
    TaskAnnotation, Tier, FORMAT_VERSION,
};
use crate::report::{aggregate_results, render_overlay, OverlayItem, ReportError};
use crate::resolver::{crawl, normalize_url, resolve_pages, CrawlResult, ResolutionResult, ResolveError, ResolverConfig};

#[derive(Debug, Error)]
pub enum EvaluateError {
    /// The browser environment is unusable; nothing was scored.
    #[error(transparent)]
    Environment(DriverError),
    #[error("app root could not be loaded: {0}")]
    RootUnavailable(DriverError),
    #[error(transparent)]
    Report(#[from] ReportError),
}

#[derive(Debug, Clone)]
pub struct EvaluateOptions {
    /// Root URL to crawl from; replay callers pass the recorded root.
    pub root_url: String,
    pub max_pages: usize,
    pub declared: BTreeMap<String, String>,
    pub routes: Vec<String>,
    pub curated: Vec<CuratedAnchor>,
    pub resolver: ResolverConfig,
    pub tiers: TierConfig,
    pub behavior: BehaviorProfile,
    pub jobs: usize,
    /// Value written to `generated_at`; `None` uses the current time.
    pub timestamp: Option<String>,
    pub condition_label: Option<String>,
    pub overlays: bool,
}

impl EvaluateOptions {
    pub fn new(root_url: impl Into<String>) -> Self {
        EvaluateOptions {
            root_url: root_url.into(),
            max_pages: 50,
            declared: BTreeMap::new(),
            routes: Vec::new(),
            curated: Vec::new(),
            resolver: ResolverConfig::default(),
            tiers: TierConfig::default(),
            behavior: BehaviorProfile::default(),
            jobs: 1,
            timestamp: None,
            condition_label: None,
            overlays: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub report: EvaluationReport,
    /// `(page_id, png)` for each page with a screenshot.
    pub overlays: Vec<(String, Vec<u8>)>,
    pub unresolved: Vec<String>,
}

impl Evaluation {
    pub fn is_partial(&self) -> bool {
        !self.unresolved.is_empty()
    }
}

struct PageOutcome {
    results: Vec<AnnotationResult>,
    page: PageResult,
    overlay: Option<Vec<u8>>,
    notes: Vec<String>,
}

fn miss_results(page: &PageAnnotation, reason: &str) -> Vec<AnnotationResult> {
    page.targets
        .iter()
        .map(|t| AnnotationResult {
            page_id: page.page_id.clone(),
            target_id: t.id.clone(),
            interaction: t.interaction.kind,
            tier_name: Tier::Miss,
            l: 0.0,
            b: 0.0,
            matched_locator: None,
            iou: 0.0,
            center_distance: None,
            text_similarity: 0.0,
            diagnostics: reason.to_string(),
        })
        .collect()
}

fn page_result(
    page: &PageAnnotation,
    results: &[AnnotationResult],
    url: Option<String>,
    confidence: f64,
    transform: Option<AffineTransform2D>,
    anchors_matched: usize,
    note: Option<String>,
) -> PageResult {
    let agg = aggregate_results(results).unwrap_or(Aggregate { s: 0.0, mean_l: 0.0, mean_b: 0.0, n: 0 });
    PageResult {
        page_id: page.page_id.clone(),
        resolved_url: url,
        resolution_confidence: confidence,
        transform,
        anchors_matched,
        n: results.len(),
        mean_l: agg.mean_l,
        mean_b: agg.mean_b,
        s_page: agg.s,
        note,
    }
}

fn unresolved_page(page: &PageAnnotation, note: String) -> PageOutcome {
    let results = miss_results(page, &note);
    PageOutcome {
        page: page_result(page, &results, None, 0.0, None, 0, Some(note)),
        results,
        overlay: None,
        notes: Vec::new(),
    }
}

fn annotation_result(page_id: &str, loc: &LocalizationResult, beh: &BehaviorResult, kind: crate::model::InteractionKind) -> AnnotationResult {
    AnnotationResult {
        page_id: page_id.to_string(),
        target_id: loc.target_id.clone(),
        interaction: kind,
        tier_name: loc.tier,
        l: loc.l,
        b: beh.b,
        matched_locator: loc.matched.clone(),
        iou: loc.iou,
        center_distance: loc.center_distance,
        text_similarity: loc.text_similarity,
        diagnostics: beh.verdict_reason.clone(),
    }
}

/// Scores one resolved page against its snapshot.
pub fn evaluate_page(
    backend: &dyn Backend,
    page: &PageAnnotation,
    snapshot: &PageSnapshot,
    resolution: &ResolutionResult,
    options: &EvaluateOptions,
) -> Result<(Vec<AnnotationResult>, PageResult, Vec<OverlayItem>), DriverError> {
    let pairs = match_anchors(page, snapshot, &options.curated);
    let transform = fit_transform(&pairs);
    let boxes: Vec<(&crate::model::InteractiveTarget, BoundingBox)> =
        page.targets.iter().map(|t| (t, transform_box(&transform, &t.bbox))).collect();
    let locs = assign_page(&boxes, snapshot, &options.tiers);
    let mut results = Vec::with_capacity(locs.len());
    let mut items = Vec::with_capacity(locs.len());
    for ((target, target_box), loc) in boxes.iter().zip(&locs) {
        let candidate = loc
            .matched
            .as_ref()
            .and_then(|m| snapshot.candidates.iter().find(|c| &c.locator == m));
        let beh = match candidate {
            Some(c) if loc.tier.is_probeable() => match backend.probe(&snapshot.url, c, target) {
                Ok(outcome) => score_behavior(&target.id, target.interaction.kind, &outcome, &options.behavior),
                Err(e) if e.is_environmental() => return Err(e),
                Err(e) => score_missing(&target.id, Some(&format!("probe failed: {}", e.kind()))),
            },
            Some(_) => score_missing(&target.id, Some("text-only match, not probed")),
            None => score_missing(&target.id, None),
        };
        items.push(OverlayItem {
            target_box: *target_box,
            tier: loc.tier,
            matched_box: candidate.map(|c| c.bbox),
        });
        results.push(annotation_result(&page.page_id, loc, &beh, target.interaction.kind));
    }
    let page_res = page_result(
        page,
        &results,
        Some(resolution.url.clone()),
        resolution.confidence,
        Some(transform),
        pairs.len(),
        None,
    );
    Ok((results, page_res, items))
}

fn absolutize(url: &str, root: &str) -> String {
    if Url::parse(url).is_ok() {
        return url.to_string();
    }
    Url::parse(root)
        .and_then(|r| r.join(url))
        .map(|u| u.to_string())
        .unwrap_or_else(|_| url.to_string())
}

/// Crawls from the root and resolves every annotated page to a URL.
pub fn resolve_task(
    backend: &dyn Backend,
    task: &TaskAnnotation,
    options: &EvaluateOptions,
) -> Result<(CrawlResult, Vec<Result<ResolutionResult, ResolveError>>), EvaluateError> {
    let crawled = crawl(backend, &options.root_url, options.max_pages).map_err(|e| {
        if e.is_environmental() {
            EvaluateError::Environment(e)
        } else {
            EvaluateError::RootUnavailable(e)
        }
    })?;
    let mut declared = options.declared.clone();
    for page in &task.pages {
        if let Some(u) = declared.get(&page.page_id).or(page.declared_url.as_ref()).cloned() {
            declared.insert(page.page_id.clone(), absolutize(&u, &options.root_url));
        }
    }
    let resolutions = resolve_pages(task, &crawled.snapshots, &declared, &options.routes, &options.resolver);
    Ok((crawled, resolutions))
}

/// Runs the whole pipeline for one task against one backend.
pub fn evaluate_task(
    backend: &dyn Backend,
    task: &TaskAnnotation,
    options: &EvaluateOptions,
) -> Result<Evaluation, EvaluateError> {
    let (crawled, resolutions) = resolve_task(backend, task, options)?;
    let mut notes: Vec<String> = crawled
        .failures
        .iter()
        .map(|(u, e)| format!("crawl: {u}: {e}"))
        .collect();

    let by_url: BTreeMap<String, &PageSnapshot> = crawled
        .snapshots
        .iter()
        .filter_map(|s| normalize_url(&s.url).map(|k| (k, s)))
        .collect();

    let work = |(page, res): (&PageAnnotation, &Result<ResolutionResult, _>)| -> Result<PageOutcome, DriverError> {
        let resolution = match res {
            Ok(r) => r,
            Err(e) => return Ok(unresolved_page(page, format!("PageUnresolved: {e}"))),
        };
        let key = normalize_url(&resolution.url).unwrap_or_else(|| resolution.url.clone());
        let owned;
        let snapshot = match by_url.get(&key) {
            Some(s) => *s,
            None => match backend.capture(&resolution.url) {
                Ok(s) => {
                    owned = s;
                    &owned
                }
                Err(e) if e.is_environmental() => return Err(e),
                Err(e) => return Ok(unresolved_page(page, format!("PageUnresolved: {} ({})", resolution.url, e))),
            },
        };
        let (results, page_res, items) = evaluate_page(backend, page, snapshot, resolution, options)?;
        let mut notes = Vec::new();
        let overlay = if options.overlays {
            match backend.screenshot(&snapshot.url).map_err(|e| e.to_string()).and_then(|png| {
                render_overlay(&png, &items).map_err(|e| e.to_string())
            }) {
                Ok(png) => Some(png),
                Err(e) => {
                    notes.push(format!("overlay skipped for {}: {e}", page.page_id));
                    None
                }
            }
        } else {
            None
        };
        Ok(PageOutcome { results, page: page_res, overlay, notes })
    };

    let inputs: Vec<_> = task.pages.iter().zip(resolutions.iter()).collect();
    let outcomes: Vec<Result<PageOutcome, DriverError>> = if options.jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(options.jobs)
            .build()
            .expect("thread pool");
        pool.install(|| inputs.into_par_iter().map(work).collect())
    } else {
        inputs.into_iter().map(work).collect()
    };

    let mut per_annotation = Vec::new();
    let mut per_page = Vec::new();
    let mut overlays = Vec::new();
    let mut overlay_refs = Vec::new();
    let mut unresolved = Vec::new();
    for outcome in outcomes {
        let outcome = outcome.map_err(EvaluateError::Environment)?;
        if outcome.page.resolved_url.is_none() {
            unresolved.push(outcome.page.page_id.clone());
        }
        if let Some(png) = outcome.overlay {
            overlay_refs.push(format!("overlays/{}.png", outcome.page.page_id));
            overlays.push((outcome.page.page_id.clone(), png));
        }
        per_annotation.extend(outcome.results);
        per_page.push(outcome.page);
        notes.extend(outcome.notes);
    }
    let aggregate = aggregate_results(&per_annotation)?;
    let report = EvaluationReport {
        format_version: FORMAT_VERSION,
        task_name: task.task_name.clone(),
        condition_label: options.condition_label.clone().or_else(|| task.condition_label.clone()),
        app_root: options.root_url.clone(),
        generated_at: options
            .timestamp
            .clone()
            .unwrap_or_else(|| chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)),
        per_annotation,
        per_page,
        aggregate,
        overlay_refs,
        notes,
    };
    Ok(Evaluation { report, overlays, unresolved })
}
