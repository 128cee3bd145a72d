//! Tiered localization of transformed target boxes against DOM candidates.

use std::cmp::Ordering;
use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::model::{
    BoundingBox, DomCandidate, InteractionKind, InteractionType, InteractiveTarget, PageSnapshot,
    Tier,
};
use crate::text::{jaccard, tokens};

/// Attributes consulted, in order, for text similarity.
pub const TEXT_FIELDS: [&str; 5] = ["text", "aria-label", "title", "name", "placeholder"];

/// Thresholds and scores of the localization tiers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TierConfig {
    pub iou_strong: f64,
    pub iou_weak: f64,
    pub center_near: f64,
    pub center_far: f64,
    pub text_threshold: f64,
    pub score_iou_strong: f64,
    pub score_iou_weak: f64,
    pub score_center_near: f64,
    pub score_center_far: f64,
    pub score_text: f64,
    pub score_miss: f64,
}

impl Default for TierConfig {
    fn default() -> Self {
        TierConfig {
            iou_strong: 0.30,
            iou_weak: 0.10,
            center_near: 150.0,
            center_far: 600.0,
            text_threshold: 0.5,
            score_iou_strong: 1.00,
            score_iou_weak: 0.60,
            score_center_near: 0.30,
            score_center_far: 0.15,
            score_text: 0.10,
            score_miss: 0.00,
        }
    }
}

impl TierConfig {
    pub fn score(&self, tier: Tier) -> f64 {
        match tier {
            Tier::T1Iou30 => self.score_iou_strong,
            Tier::T2Iou10 => self.score_iou_weak,
            Tier::T3Center150 => self.score_center_near,
            Tier::T4Center600 => self.score_center_far,
            Tier::T5Text => self.score_text,
            Tier::Miss => self.score_miss,
        }
    }

    /// Loads `tiers.config.json`; missing keys keep their defaults.
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationResult {
    pub target_id: String,
    pub tier: Tier,
    #[serde(rename = "L")]
    pub l: f64,
    pub matched: Option<String>,
    pub iou: f64,
    pub center_distance: Option<f64>,
    pub text_similarity: f64,
}

/// Best token-Jaccard similarity between `query` and the candidate's text
/// or labeling attributes, with the field that produced it.
pub fn candidate_text_similarity(query: &str, cand: &DomCandidate) -> (f64, &'static str) {
    let q = tokens(query);
    let mut best = (0.0, "text");
    for field in TEXT_FIELDS {
        let value = if field == "text" {
            Some(cand.text.as_str())
        } else {
            cand.attr(field)
        };
        if let Some(v) = value {
            let sim = jaccard(&q, &tokens(v));
            if sim > best.0 {
                best = (sim, field);
            }
        }
    }
    best
}

const FORM_ROLES: [&str; 4] = ["textbox", "searchbox", "combobox", "spinbutton"];
const TOGGLE_ROLES: [&str; 8] = [
    "switch",
    "checkbox",
    "radio",
    "tab",
    "menuitemcheckbox",
    "menuitemradio",
    "option",
    "treeitem",
];
const STATE_ATTRS: [&str; 4] = ["aria-checked", "aria-pressed", "aria-expanded", "aria-selected"];
const NAV_ATTRS: [&str; 6] = ["href", "data-href", "data-route", "data-link", "routerlink", "formaction"];
const NON_TEXT_INPUTS: [&str; 8] = [
    "button", "submit", "reset", "checkbox", "radio", "image", "hidden", "range",
];

fn input_type(c: &DomCandidate) -> &str {
    c.attr("type").unwrap_or("text")
}

fn is_form_field(c: &DomCandidate) -> bool {
    match c.tag() {
        "textarea" | "select" => true,
        "input" => !NON_TEXT_INPUTS.contains(&input_type(c)),
        _ => {
            c.role().is_some_and(|r| FORM_ROLES.contains(&r))
                || c.attr("contenteditable").is_some_and(|v| v != "false")
        }
    }
}

fn is_toggle(c: &DomCandidate) -> bool {
    (c.tag() == "input" && matches!(input_type(c), "checkbox" | "radio"))
        || c.tag() == "summary"
        || c.role().is_some_and(|r| TOGGLE_ROLES.contains(&r))
        || STATE_ATTRS.iter().any(|a| c.attr(a).is_some())
}

fn is_navigational(c: &DomCandidate) -> bool {
    c.tag() == "a" || c.role() == Some("link") || NAV_ATTRS.iter().any(|a| c.attr(a).is_some())
}

/// Filters candidates to those compatible with the interaction type.
pub fn eligible_candidates<'a>(
    interaction: &InteractionType,
    snapshot: &'a PageSnapshot,
) -> Vec<&'a DomCandidate> {
    snapshot
        .candidates
        .iter()
        .filter(|c| is_eligible(interaction.kind, c))
        .collect()
}

pub fn is_eligible(kind: InteractionKind, c: &DomCandidate) -> bool {
    match kind {
        InteractionKind::Input => is_form_field(c),
        InteractionKind::Toggle => is_toggle(c),
        InteractionKind::Navigation | InteractionKind::ExternalLink => is_navigational(c),
        InteractionKind::Popout | InteractionKind::Click => true,
    }
}

struct Scored {
    index: usize,
    iou: f64,
    dist: f64,
}

fn by_iou(a: &Scored, b: &Scored) -> Ordering {
    b.iou
        .total_cmp(&a.iou)
        .then(a.dist.total_cmp(&b.dist))
        .then(a.index.cmp(&b.index))
}

fn by_distance(a: &Scored, b: &Scored) -> Ordering {
    a.dist
        .total_cmp(&b.dist)
        .then(b.iou.total_cmp(&a.iou))
        .then(a.index.cmp(&b.index))
}

/// Progressive matching: IoU tiers, then center distance, then text
/// similarity against the target description.
pub fn localize(
    target_box: &BoundingBox,
    target: &InteractiveTarget,
    candidates: &[&DomCandidate],
    config: &TierConfig,
) -> LocalizationResult {
    let result = |tier: Tier, matched: Option<&DomCandidate>, iou: f64, dist: Option<f64>, text: f64| {
        LocalizationResult {
            target_id: target.id.clone(),
            tier,
            l: config.score(tier),
            matched: matched.map(|c| c.locator.clone()),
            iou,
            center_distance: dist,
            text_similarity: text,
        }
    };
    let scored: Vec<Scored> = candidates
        .iter()
        .enumerate()
        .map(|(index, c)| Scored {
            index,
            iou: target_box.iou(&c.bbox),
            dist: target_box.center_distance(&c.bbox),
        })
        .collect();
    let Some(best_overlap) = scored.iter().min_by(|a, b| by_iou(a, b)) else {
        return result(Tier::Miss, None, 0.0, None, 0.0);
    };
    let overlap_tier = if best_overlap.iou >= config.iou_strong {
        Some(Tier::T1Iou30)
    } else if best_overlap.iou >= config.iou_weak {
        Some(Tier::T2Iou10)
    } else {
        None
    };
    if let Some(tier) = overlap_tier {
        return result(
            tier,
            Some(candidates[best_overlap.index]),
            best_overlap.iou,
            Some(best_overlap.dist),
            0.0,
        );
    }
    let nearest = scored.iter().min_by(|a, b| by_distance(a, b)).expect("nonempty");
    let center_tier = if nearest.dist <= config.center_near {
        Some(Tier::T3Center150)
    } else if nearest.dist <= config.center_far {
        Some(Tier::T4Center600)
    } else {
        None
    };
    if let Some(tier) = center_tier {
        return result(
            tier,
            Some(candidates[nearest.index]),
            nearest.iou,
            Some(nearest.dist),
            0.0,
        );
    }
    let mut best_text: Option<(f64, usize)> = None;
    if let Some(desc) = target.description.as_deref() {
        for (i, c) in candidates.iter().enumerate() {
            let (sim, _) = candidate_text_similarity(desc, c);
            if best_text.is_none_or(|(b, _)| sim > b) {
                best_text = Some((sim, i));
            }
        }
    }
    match best_text {
        Some((sim, i)) if sim >= config.text_threshold => result(
            Tier::T5Text,
            Some(candidates[i]),
            scored[i].iou,
            Some(scored[i].dist),
            sim,
        ),
        other => result(
            Tier::Miss,
            None,
            best_overlap.iou,
            Some(nearest.dist),
            other.map_or(0.0, |(s, _)| s),
        ),
    }
}

/// Localizes every target on a page with one-to-one candidate use. Targets
/// are served in descending order of their best IoU; a matched candidate
/// leaves the pool. Results come back in input order.
pub fn assign_page(
    targets: &[(&InteractiveTarget, BoundingBox)],
    snapshot: &PageSnapshot,
    config: &TierConfig,
) -> Vec<LocalizationResult> {
    let best_iou: Vec<f64> = targets
        .iter()
        .map(|(t, b)| {
            snapshot
                .candidates
                .iter()
                .filter(|c| is_eligible(t.interaction.kind, c))
                .map(|c| b.iou(&c.bbox))
                .fold(0.0, f64::max)
        })
        .collect();
    let mut order: Vec<usize> = (0..targets.len()).collect();
    order.sort_by(|&a, &b| best_iou[b].total_cmp(&best_iou[a]).then(a.cmp(&b)));

    let mut consumed: HashSet<String> = HashSet::new();
    let mut results: Vec<Option<LocalizationResult>> = vec![None; targets.len()];
    for i in order {
        let (target, bbox) = &targets[i];
        let pool: Vec<&DomCandidate> = snapshot
            .candidates
            .iter()
            .filter(|c| is_eligible(target.interaction.kind, c) && !consumed.contains(&c.locator))
            .collect();
        let r = localize(bbox, target, &pool, config);
        if let Some(loc) = &r.matched {
            consumed.insert(loc.clone());
        }
        results[i] = Some(r);
    }
    results.into_iter().map(|r| r.expect("every target localized")).collect()
}


#[cfg(test)]
mod props {
    use super::tests::cand;
    use super::*;
    use crate::model::InteractionKind;
    use proptest::prelude::*;

    const LEVELS: [f64; 6] = [1.0, 0.6, 0.3, 0.15, 0.1, 0.0];

    fn target(b: BoundingBox) -> InteractiveTarget {
        InteractiveTarget {
            id: "t".into(),
            page_id: "p".into(),
            bbox: b,
            interaction: InteractionType::new(InteractionKind::Click),
            description: Some("open menu".into()),
            persistence_check: None,
        }
    }

    proptest! {
        #[test]
        fn l_takes_only_tier_values(
            tb in (0.0..1000.0f64, 0.0..1000.0f64, 1.0..300.0f64, 1.0..300.0f64),
            cs in proptest::collection::vec((0.0..1500.0f64, 0.0..1500.0f64, 1.0..300.0f64, 1.0..300.0f64), 0..6),
        ) {
            let t = target(BoundingBox { x: tb.0, y: tb.1, width: tb.2, height: tb.3 });
            let cands: Vec<DomCandidate> = cs.iter().enumerate().map(|(i, c)| cand(&format!("#{i}"), "button", *c)).collect();
            let refs: Vec<&DomCandidate> = cands.iter().collect();
            let r = localize(&t.bbox, &t, &refs, &TierConfig::default());
            prop_assert!(LEVELS.contains(&r.l));
        }

        #[test]
        fn growing_overlap_never_lowers_l(
            offset in 0.0..400.0f64,
            shrink in 0.0..1.0f64,
        ) {
            // Candidate slides toward the target along x: IoU is nondecreasing.
            let t = target(BoundingBox { x: 0.0, y: 0.0, width: 100.0, height: 50.0 });
            let far = cand("#c", "button", (offset, 0.0, 100.0, 50.0));
            let near = cand("#c", "button", (offset * shrink, 0.0, 100.0, 50.0));
            prop_assume!(t.bbox.iou(&near.bbox) >= t.bbox.iou(&far.bbox));
            let cfg = TierConfig::default();
            let l_far = localize(&t.bbox, &t, &[&far], &cfg).l;
            let l_near = localize(&t.bbox, &t, &[&near], &cfg).l;
            prop_assert!(l_near >= l_far);
        }

        #[test]
        fn iou_tiers_are_scale_invariant(
            tb in (0.0..500.0f64, 0.0..500.0f64, 5.0..200.0f64, 5.0..200.0f64),
            cb in (0.0..500.0f64, 0.0..500.0f64, 5.0..200.0f64, 5.0..200.0f64),
            k in 0.25..4.0f64,
        ) {
            let tbox = BoundingBox { x: tb.0, y: tb.1, width: tb.2, height: tb.3 };
            let cbox = BoundingBox { x: cb.0, y: cb.1, width: cb.2, height: cb.3 };
            let scale = |b: BoundingBox| BoundingBox { x: b.x * k, y: b.y * k, width: b.width * k, height: b.height * k };
            let iou = tbox.iou(&cbox);
            let iou_k = scale(tbox).iou(&scale(cbox));
            prop_assert!((iou - iou_k).abs() < 1e-9);
            // Stay clear of the thresholds so rounding cannot flip a tier.
            prop_assume!((iou - 0.3).abs() > 1e-6 && (iou - 0.1).abs() > 1e-6);
            let cfg = TierConfig::default();
            let c = cand("#c", "button", (cbox.x, cbox.y, cbox.width, cbox.height));
            let ck = cand("#c", "button", (cbox.x * k, cbox.y * k, cbox.width * k, cbox.height * k));
            let r = localize(&tbox, &target(tbox), &[&c], &cfg);
            let rk = localize(&scale(tbox), &target(scale(tbox)), &[&ck], &cfg);
            if iou >= 0.1 {
                prop_assert_eq!(r.tier, rk.tier);
                prop_assert_eq!(r.l, rk.l);
            }
        }

        #[test]
        fn one_to_one_on_page(
            ts in proptest::collection::vec((0.0..800.0f64, 0.0..800.0f64, 10.0..200.0f64, 10.0..200.0f64), 1..6),
            cs in proptest::collection::vec((0.0..800.0f64, 0.0..800.0f64, 10.0..200.0f64, 10.0..200.0f64), 0..6),
        ) {
            let targets: Vec<InteractiveTarget> = ts.iter().enumerate().map(|(i, b)| {
                let mut t = target(BoundingBox { x: b.0, y: b.1, width: b.2, height: b.3 });
                t.id = format!("t{i}");
                t
            }).collect();
            let cands: Vec<DomCandidate> = cs.iter().enumerate().map(|(i, c)| cand(&format!("#{i}"), "button", *c)).collect();
            let snapshot = PageSnapshot {
                format_version: 1, url: "u".into(), viewport: crate::model::Size { width: 1000.0, height: 1000.0 },
                candidates: cands, internal_links: vec![], headings: vec![], body_digest: String::new(), screenshot: None, captured_at: String::new(),
            };
            let pairs: Vec<(&InteractiveTarget, BoundingBox)> = targets.iter().map(|t| (t, t.bbox)).collect();
            let results = assign_page(&pairs, &snapshot, &TierConfig::default());
            let matched: Vec<&String> = results.iter().filter_map(|r| r.matched.as_ref()).collect();
            let unique: HashSet<&String> = matched.iter().cloned().collect();
            prop_assert_eq!(matched.len(), unique.len());
        }
    }
}
