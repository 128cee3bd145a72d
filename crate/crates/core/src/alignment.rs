//! Mockup-to-page coordinate alignment.
//!
//! Each page gets one per-axis affine map `x' = s_x x + t_x`,
//! `y' = s_y y + t_y`, fitted by weighted least squares over anchor pairs
//! with a single round of residual trimming.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::localization::candidate_text_similarity;
use crate::model::{BoundingBox, PageAnnotation, PageSnapshot, Point};

pub const MIN_SCALE: f64 = 0.2;
pub const MAX_SCALE: f64 = 5.0;
/// Minimum label similarity for an anchor to pair with a candidate.
pub const ANCHOR_MATCH_THRESHOLD: f64 = 0.5;
/// Pairs whose residual exceeds this multiple of the median are trimmed.
pub const TRIM_FACTOR: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineTransform2D {
    pub s_x: f64,
    pub t_x: f64,
    pub s_y: f64,
    pub t_y: f64,
}

impl Default for AffineTransform2D {
    fn default() -> Self {
        Self::identity()
    }
}

impl AffineTransform2D {
    pub fn identity() -> Self {
        AffineTransform2D {
            s_x: 1.0,
            t_x: 0.0,
            s_y: 1.0,
            t_y: 0.0,
        }
    }

    pub fn apply(&self, p: Point) -> Point {
        Point::new(self.s_x * p.x + self.t_x, self.s_y * p.y + self.t_y)
    }
}

/// Maps a mockup-space box into rendered-page space.
pub fn transform_box(t: &AffineTransform2D, b: &BoundingBox) -> BoundingBox {
    BoundingBox {
        x: t.s_x * b.x + t.t_x,
        y: t.s_y * b.y + t.t_y,
        width: t.s_x * b.width,
        height: t.s_y * b.height,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnchorSource {
    MatchedLink,
    DistinctiveControl,
    TextualCue,
    Curated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorPair {
    pub label: String,
    pub mockup_point: Point,
    pub rendered_point: Point,
    pub weight: f64,
    pub source: AnchorSource,
}

/// An explicit anchor correspondence from `curated.anchors.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CuratedAnchor {
    pub page_id: String,
    #[serde(default)]
    pub label: Option<String>,
    pub point: Point,
    pub locator: String,
}

/// Pairs each visual anchor with the candidate whose label best matches it.
/// Curated entries for the page take precedence over text matching for the
/// anchor label they name. A candidate may serve several anchors.
pub fn match_anchors(
    page: &PageAnnotation,
    snapshot: &PageSnapshot,
    curated: &[CuratedAnchor],
) -> Vec<AnchorPair> {
    let mut pairs = Vec::new();
    let curated: Vec<&CuratedAnchor> = curated.iter().filter(|c| c.page_id == page.page_id).collect();
    for c in &curated {
        if let Some(cand) = snapshot.candidates.iter().find(|d| d.locator == c.locator) {
            pairs.push(AnchorPair {
                label: c.label.clone().unwrap_or_else(|| c.locator.clone()),
                mockup_point: c.point,
                rendered_point: cand.bbox.center(),
                weight: 1.0,
                source: AnchorSource::Curated,
            });
        }
    }
    for anchor in &page.anchors {
        if curated.iter().any(|c| c.label.as_deref() == Some(anchor.label.as_str())) {
            continue;
        }
        let mut best: Option<(f64, usize, &'static str)> = None;
        for (i, cand) in snapshot.candidates.iter().enumerate() {
            let (sim, field) = candidate_text_similarity(&anchor.label, cand);
            if sim >= ANCHOR_MATCH_THRESHOLD && best.is_none_or(|(b, _, _)| sim > b) {
                best = Some((sim, i, field));
            }
        }
        if let Some((sim, i, field)) = best {
            let cand = &snapshot.candidates[i];
            let source = if field != "text" {
                AnchorSource::TextualCue
            } else if cand.tag() == "a" {
                AnchorSource::MatchedLink
            } else {
                AnchorSource::DistinctiveControl
            };
            pairs.push(AnchorPair {
                label: anchor.label.clone(),
                mockup_point: anchor.point,
                rendered_point: cand.bbox.center(),
                weight: sim,
                source,
            });
        }
    }
    pairs
}

#[derive(Debug, Clone, Copy)]
struct Sample {
    m: f64,
    r: f64,
    w: f64,
}

fn cmp_samples(a: &Sample, b: &Sample) -> Ordering {
    a.m.total_cmp(&b.m)
        .then(a.r.total_cmp(&b.r))
        .then(a.w.total_cmp(&b.w))
}

fn distinct_coords(samples: &[Sample]) -> usize {
    let mut n = 0;
    let mut last: Option<f64> = None;
    for s in samples {
        if last != Some(s.m) {
            n += 1;
            last = Some(s.m);
        }
    }
    n
}

/// Weighted least squares for `r = s m + t`; `None` when the mockup
/// coordinates have no spread.
fn weighted_fit(samples: &[Sample]) -> Option<(f64, f64)> {
    if distinct_coords(samples) < 2 {
        return None;
    }
    let wsum: f64 = samples.iter().map(|s| s.w).sum();
    let m_bar = samples.iter().map(|s| s.w * s.m).sum::<f64>() / wsum;
    let r_bar = samples.iter().map(|s| s.w * s.r).sum::<f64>() / wsum;
    let sxx: f64 = samples.iter().map(|s| s.w * (s.m - m_bar).powi(2)).sum();
    let sxy: f64 = samples
        .iter()
        .map(|s| s.w * (s.m - m_bar) * (s.r - r_bar))
        .sum();
    if sxx <= 0.0 {
        return None;
    }
    let scale = sxy / sxx;
    Some((scale, r_bar - scale * m_bar))
}

fn weighted_median(mut values: Vec<(f64, f64)>) -> f64 {
    values.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = values.iter().map(|v| v.1).sum();
    let mut acc = 0.0;
    for (v, w) in &values {
        acc += w;
        if acc >= total / 2.0 {
            return *v;
        }
    }
    values.last().map(|v| v.0).unwrap_or(0.0)
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n == 0 {
        0.0
    } else if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

fn fallback(samples: &[Sample]) -> (f64, f64) {
    if samples.is_empty() {
        return (1.0, 0.0);
    }
    (
        1.0,
        weighted_median(samples.iter().map(|s| (s.r - s.m, s.w)).collect()),
    )
}

fn clamp_scale(samples: &[Sample], scale: f64, offset: f64) -> (f64, f64) {
    if (MIN_SCALE..=MAX_SCALE).contains(&scale) {
        return (scale, offset);
    }
    let s = scale.clamp(MIN_SCALE, MAX_SCALE);
    let wsum: f64 = samples.iter().map(|x| x.w).sum();
    let t = samples.iter().map(|x| x.w * (x.r - s * x.m)).sum::<f64>() / wsum;
    (s, t)
}

fn fit_axis(mut samples: Vec<Sample>) -> (f64, f64) {
    samples.retain(|s| s.w > 0.0 && s.m.is_finite() && s.r.is_finite());
    samples.sort_by(cmp_samples);
    let Some((s0, t0)) = weighted_fit(&samples) else {
        return fallback(&samples);
    };
    let residuals: Vec<f64> = samples.iter().map(|s| (s.r - (s0 * s.m + t0)).abs()).collect();
    let med = median(&mut residuals.clone());
    let scale_ref = samples.iter().map(|s| s.r.abs()).fold(1.0, f64::max);
    let floor = 1e-9 * scale_ref;
    let kept: Vec<Sample> = samples
        .iter()
        .zip(&residuals)
        .filter(|(_, &res)| res <= TRIM_FACTOR * med || res <= floor)
        .map(|(s, _)| *s)
        .collect();
    if kept.len() < samples.len() {
        if let Some((s1, t1)) = weighted_fit(&kept) {
            return clamp_scale(&kept, s1, t1);
        }
    }
    clamp_scale(&samples, s0, t0)
}

/// Fits the per-axis transform. Degenerate inputs fall back per axis to
/// unit scale with a weighted-median offset (identity with no pairs).
pub fn fit_transform(pairs: &[AnchorPair]) -> AffineTransform2D {
    let xs = pairs
        .iter()
        .map(|p| Sample {
            m: p.mockup_point.x,
            r: p.rendered_point.x,
            w: p.weight,
        })
        .collect();
    let ys = pairs
        .iter()
        .map(|p| Sample {
            m: p.mockup_point.y,
            r: p.rendered_point.y,
            w: p.weight,
        })
        .collect();
    let (s_x, t_x) = fit_axis(xs);
    let (s_y, t_y) = fit_axis(ys);
    AffineTransform2D { s_x, t_x, s_y, t_y }
}


#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    fn arb_transform() -> impl Strategy<Value = AffineTransform2D> {
        (0.2..5.0f64, -2000.0..2000.0f64, 0.2..5.0f64, -2000.0..2000.0f64)
            .prop_map(|(s_x, t_x, s_y, t_y)| AffineTransform2D { s_x, t_x, s_y, t_y })
    }

    proptest! {
        #[test]
        fn noiseless_recovery(t in arb_transform(), pts in proptest::collection::vec((0.0..1500.0f64, 0.0..3000.0f64, 0.1..1.0f64), 2..8)) {
            let pairs: Vec<AnchorPair> = pts.iter().map(|&(x, y, w)| {
                let m = Point::new(x, y);
                AnchorPair { label: String::new(), mockup_point: m, rendered_point: t.apply(m), weight: w, source: AnchorSource::TextualCue }
            }).collect();
            prop_assume!(distinct_coords(&{ let mut v: Vec<Sample> = pts.iter().map(|p| Sample { m: p.0, r: 0.0, w: 1.0 }).collect(); v.sort_by(cmp_samples); v }) >= 2);
            prop_assume!(distinct_coords(&{ let mut v: Vec<Sample> = pts.iter().map(|p| Sample { m: p.1, r: 0.0, w: 1.0 }).collect(); v.sort_by(cmp_samples); v }) >= 2);
            // Near-coincident coordinates make the fit ill-conditioned.
            let spread = |f: fn(&(f64, f64, f64)) -> f64| {
                let v: Vec<f64> = pts.iter().map(f).collect();
                v.iter().cloned().fold(f64::MIN, f64::max) - v.iter().cloned().fold(f64::MAX, f64::min)
            };
            prop_assume!(spread(|p| p.0) > 1.0 && spread(|p| p.1) > 1.0);
            let fit = fit_transform(&pairs);
            prop_assert!((fit.s_x - t.s_x).abs() < 1e-9 && (fit.s_y - t.s_y).abs() < 1e-9);
            prop_assert!((fit.t_x - t.t_x).abs() < 1e-9 && (fit.t_y - t.t_y).abs() < 1e-9);
        }

        #[test]
        fn order_invariant(pts in proptest::collection::vec((0.0..1000.0f64, 0.0..1000.0f64, 0.0..1000.0f64, 0.0..1000.0f64, 0.1..1.0f64), 0..8), seed in any::<u64>()) {
            let pairs: Vec<AnchorPair> = pts.iter().map(|&(a, b, c, d, w)| AnchorPair {
                label: String::new(), mockup_point: Point::new(a, b), rendered_point: Point::new(c, d), weight: w, source: AnchorSource::Curated,
            }).collect();
            let mut shuffled = pairs.clone();
            let n = shuffled.len();
            if n > 1 {
                let mut x = seed;
                for i in (1..n).rev() {
                    x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    shuffled.swap(i, (x >> 33) as usize % (i + 1));
                }
            }
            prop_assert_eq!(fit_transform(&pairs), fit_transform(&shuffled));
        }

        #[test]
        fn transformed_boxes_keep_positive_area(t in arb_transform(), x in -500.0..500.0f64, y in -500.0..500.0f64, w in 0.5..800.0f64, h in 0.5..800.0f64) {
            let b = transform_box(&t, &BoundingBox { x, y, width: w, height: h });
            prop_assert!(b.width > 0.0 && b.height > 0.0 && b.area() > 0.0);
        }
    }
}
