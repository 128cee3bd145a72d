//! Interaction-specific behavior verdicts computed from probe evidence.

use std::path::Path;

use serde::{Deserialize, Serialize};
use url::Url;

use crate::driver::ProbeOutcome;
use crate::model::InteractionKind;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NavigationProfile {
    pub url_change: f64,
    pub content_change: f64,
    /// Minimum fraction of visible text that must change for same-route credit.
    pub content_change_threshold: f64,
}

impl Default for NavigationProfile {
    fn default() -> Self {
        NavigationProfile {
            url_change: 1.0,
            content_change: 0.5,
            content_change_threshold: 0.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InputProfile {
    pub accepted_with_events: f64,
    pub accepted_without_events: f64,
}

impl Default for InputProfile {
    fn default() -> Self {
        InputProfile {
            accepted_with_events: 1.0,
            accepted_without_events: 0.5,
        }
    }
}

/// Per-interaction verdict table, loadable from `behavior.profile.json`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BehaviorProfile {
    pub navigation: NavigationProfile,
    pub input: InputProfile,
    pub toggle: f64,
    pub popout: f64,
    pub external_link: f64,
    pub click: f64,
}

impl Default for BehaviorProfile {
    fn default() -> Self {
        BehaviorProfile {
            navigation: NavigationProfile::default(),
            input: InputProfile::default(),
            toggle: 1.0,
            popout: 1.0,
            external_link: 1.0,
            click: 1.0,
        }
    }
}

impl BehaviorProfile {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehaviorResult {
    pub target_id: String,
    #[serde(rename = "B")]
    pub b: f64,
    pub verdict_reason: String,
    pub outcome: Option<ProbeOutcome>,
}

/// Registrable part of a host: the last two labels, or three under common
/// two-level public suffixes such as `co.uk`. IPs and single-label hosts are
/// returned whole.
pub fn registrable_domain(host: &str) -> String {
    let host = host.trim_end_matches('.').to_ascii_lowercase();
    if host.parse::<std::net::IpAddr>().is_ok() || host.starts_with('[') {
        return host;
    }
    let labels: Vec<&str> = host.split('.').collect();
    if labels.len() <= 2 {
        return host;
    }
    let n = labels.len();
    let second = labels[n - 2];
    let take = if labels[n - 1].len() == 2
        && matches!(second, "co" | "com" | "org" | "net" | "ac" | "gov" | "edu" | "ne" | "or")
    {
        3
    } else {
        2
    };
    labels[n.saturating_sub(take)..].join(".")
}

/// Whether `href` points to a different registrable origin than `page_url`.
pub fn is_external_url(href: &str, page_url: Option<&str>) -> bool {
    let base = page_url.and_then(|u| Url::parse(u).ok());
    let target = match &base {
        Some(b) => b.join(href),
        None => Url::parse(href),
    };
    let Ok(target) = target else {
        return false;
    };
    if !matches!(target.scheme(), "http" | "https") {
        return false;
    }
    let Some(target_host) = target.host_str() else {
        return false;
    };
    match base.as_ref().and_then(|b| b.host_str().map(String::from)) {
        Some(base_host) => registrable_domain(target_host) != registrable_domain(&base_host),
        None => true,
    }
}

/// True when `after` is a different document or client-side route than
/// `before`. Plain in-page fragments do not count; hash routes (`#/x`,
/// `#!x`) do.
pub fn is_route_change(before: Option<&str>, after: &str) -> bool {
    let Some(before) = before else {
        return true;
    };
    let (Ok(mut a), Ok(mut b)) = (Url::parse(before), Url::parse(after)) else {
        return before != after;
    };
    let fa = a.fragment().map(String::from);
    let fb = b.fragment().map(String::from);
    a.set_fragment(None);
    b.set_fragment(None);
    if a != b {
        return true;
    }
    let is_route = |f: &Option<String>| f.as_deref().is_some_and(|f| f.starts_with('/') || f.starts_with('!'));
    fa != fb && (is_route(&fa) || is_route(&fb))
}

/// Scores one probe outcome for the target's interaction kind.
pub fn score_behavior(
    target_id: &str,
    kind: InteractionKind,
    outcome: &ProbeOutcome,
    profile: &BehaviorProfile,
) -> BehaviorResult {
    let verdict = |b: f64, reason: String| BehaviorResult {
        target_id: target_id.to_string(),
        b,
        verdict_reason: reason,
        outcome: Some(outcome.clone()),
    };
    if let Some(err) = &outcome.error {
        return verdict(0.0, format!("probe error: {err}"));
    }
    if outcome.persistence_ok == Some(false) {
        return verdict(0.0, "persistence check failed".into());
    }
    let route_changed = outcome
        .changed_url
        .as_deref()
        .is_some_and(|u| is_route_change(outcome.page_url.as_deref(), u));
    match kind {
        InteractionKind::Navigation => {
            let nav = &profile.navigation;
            if route_changed {
                verdict(nav.url_change, format!("url changed to {}", outcome.changed_url.as_deref().unwrap_or_default()))
            } else if outcome.text_change_ratio >= nav.content_change_threshold {
                verdict(
                    nav.content_change,
                    format!("same-route content change {:.2}", outcome.text_change_ratio),
                )
            } else {
                verdict(0.0, "no page transition".into())
            }
        }
        InteractionKind::Input => {
            let has_events = ["input", "change"]
                .iter()
                .all(|e| outcome.events_observed.iter().any(|o| o == e));
            match (outcome.input_accepted, has_events) {
                (true, true) => verdict(profile.input.accepted_with_events, "value accepted with input/change events".into()),
                (true, false) => verdict(profile.input.accepted_without_events, "value accepted without input/change events".into()),
                (false, _) => verdict(0.0, "value not accepted".into()),
            }
        }
        InteractionKind::Toggle => match outcome.state_deltas.first() {
            Some(d) => verdict(profile.toggle, format!("state {} changed", d.attribute)),
            None => verdict(0.0, "no observable state change".into()),
        },
        InteractionKind::Popout => {
            if outcome.overlay_appeared {
                verdict(profile.popout, "overlay appeared".into())
            } else {
                verdict(0.0, "no overlay appeared".into())
            }
        }
        InteractionKind::ExternalLink => match outcome.exposed_url.as_deref() {
            Some(href) if is_external_url(href, outcome.page_url.as_deref()) => {
                verdict(profile.external_link, format!("external url {href}"))
            }
            Some(href) => verdict(0.0, format!("url {href} is not external")),
            None => verdict(0.0, "no url exposed".into()),
        },
        InteractionKind::Click => {
            if route_changed || !outcome.state_deltas.is_empty() || outcome.overlay_appeared {
                verdict(profile.click, "click produced an observable effect".into())
            } else {
                verdict(0.0, "click had no observable effect".into())
            }
        }
    }
}

/// Verdict for a target with nothing to probe.
pub fn score_missing(target_id: &str, reason: Option<&str>) -> BehaviorResult {
    BehaviorResult {
        target_id: target_id.to_string(),
        b: 0.0,
        verdict_reason: reason.unwrap_or("no matched element").to_string(),
        outcome: None,
    }
}
