//! Page-to-URL resolution: same-origin crawling plus signature scoring of
//! crawled pages against annotated mockup pages.

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use url::Url;

use crate::driver::{Backend, DriverError};
use crate::model::{PageAnnotation, PageSnapshot, TaskAnnotation};
use crate::text::{containment, jaccard, tokens};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ResolveError {
    #[error("page `{0}` could not be resolved to a URL")]
    PageUnresolved(String),
}

/// Canonical form used for deduplication: no plain fragments (hash routes
/// are kept), no trailing slash except at the root.
pub fn normalize_url(raw: &str) -> Option<String> {
    let mut u = Url::parse(raw).ok()?;
    let keep_fragment = u
        .fragment()
        .is_some_and(|f| f.starts_with('/') || f.starts_with('!'));
    if !keep_fragment {
        u.set_fragment(None);
    }
    let path = u.path().to_string();
    if path.len() > 1 && path.ends_with('/') {
        u.set_path(path.trim_end_matches('/'));
    }
    Some(u.to_string())
}

pub fn same_origin(a: &str, b: &str) -> bool {
    match (Url::parse(a), Url::parse(b)) {
        (Ok(a), Ok(b)) => a.origin() == b.origin(),
        _ => false,
    }
}

#[derive(Debug, Clone, Default)]
pub struct CrawlResult {
    pub snapshots: Vec<PageSnapshot>,
    /// URLs that failed to load after the root, with the reason.
    pub failures: Vec<(String, String)>,
}

/// Breadth-first crawl of same-origin links from `root_url`, visiting each
/// normalized URL once and stopping after `max_pages` snapshots. Only a
/// failure on the root is fatal.
pub fn crawl(backend: &dyn Backend, root_url: &str, max_pages: usize) -> Result<CrawlResult, DriverError> {
    let max_pages = max_pages.max(1);
    let mut result = CrawlResult::default();
    let mut seen: HashSet<String> = HashSet::new();
    let mut queue: VecDeque<String> = VecDeque::new();
    let root_key = normalize_url(root_url).unwrap_or_else(|| root_url.to_string());
    seen.insert(root_key);
    queue.push_back(root_url.to_string());
    let mut first = true;
    while let Some(url) = queue.pop_front() {
        if result.snapshots.len() >= max_pages {
            break;
        }
        let snapshot = match backend.capture(&url) {
            Ok(s) => s,
            Err(e) if first => return Err(e),
            Err(e) => {
                result.failures.push((url, e.to_string()));
                continue;
            }
        };
        first = false;
        if let Some(key) = normalize_url(&snapshot.url) {
            seen.insert(key);
        }
        for link in &snapshot.internal_links {
            let Some(abs) = Url::parse(&snapshot.url).ok().and_then(|b| b.join(link).ok()) else {
                continue;
            };
            let abs = abs.to_string();
            if !same_origin(&abs, root_url) {
                continue;
            }
            if let Some(key) = normalize_url(&abs) {
                if seen.insert(key.clone()) {
                    queue.push_back(key);
                }
            }
        }
        result.snapshots.push(snapshot);
    }
    Ok(result)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ResolverConfig {
    pub anchor_weight: f64,
    pub heading_weight: f64,
    pub count_weight: f64,
    pub path_weight: f64,
    pub route_bonus: f64,
    /// Scores below this never claim a URL.
    pub floor: f64,
}

impl Default for ResolverConfig {
    fn default() -> Self {
        ResolverConfig {
            anchor_weight: 0.4,
            heading_weight: 0.3,
            count_weight: 0.2,
            path_weight: 0.1,
            route_bonus: 0.2,
            floor: 0.15,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Signal {
    Declared,
    Crawl,
    RoutePattern,
    DomSignature,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub signal: Signal,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolutionResult {
    pub page_id: String,
    pub url: String,
    pub confidence: f64,
    pub evidence: Vec<Evidence>,
}

fn combine(evidence: &[Evidence]) -> f64 {
    evidence.iter().map(|e| e.score).sum::<f64>().clamp(0.0, 1.0)
}

fn url_route_tokens(url: &str) -> BTreeSet<String> {
    match Url::parse(url) {
        Ok(u) => {
            let mut t = tokens(u.path());
            if let Some(f) = u.fragment() {
                t.extend(tokens(f));
            }
            t
        }
        Err(_) => tokens(url),
    }
}

fn url_path(url: &str) -> String {
    match Url::parse(url) {
        Ok(u) => match u.fragment() {
            Some(f) if f.starts_with('/') => f.to_string(),
            _ => u.path().to_string(),
        },
        Err(_) => url.to_string(),
    }
}

fn is_param(segment: &str) -> bool {
    segment.starts_with(':')
        || segment == "*"
        || segment == "**"
        || (segment.starts_with('[') && segment.ends_with(']'))
        || (segment.starts_with('{') && segment.ends_with('}'))
}

/// Matches a route pattern such as `/jobs/:id` or `/blog/[slug]` against a
/// URL path.
pub fn route_matches(pattern: &str, path: &str) -> bool {
    let pat: Vec<&str> = pattern.split('/').filter(|s| !s.is_empty()).collect();
    let segs: Vec<&str> = path.split('/').filter(|s| !s.is_empty()).collect();
    if pat.last() == Some(&"**") {
        return segs.len() >= pat.len() - 1
            && pat[..pat.len() - 1]
                .iter()
                .zip(&segs)
                .all(|(p, s)| is_param(p) || p.eq_ignore_ascii_case(s));
    }
    pat.len() == segs.len()
        && pat
            .iter()
            .zip(&segs)
            .all(|(p, s)| is_param(p) || p.eq_ignore_ascii_case(s))
}

/// Reads `routes.txt`: one pattern per line, `#` comments allowed.
pub fn load_routes(path: &Path) -> std::io::Result<Vec<String>> {
    Ok(std::fs::read_to_string(path)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(String::from)
        .collect())
}

/// Evidence that `snapshot` renders the mockup `page`.
pub fn signature_evidence(
    page: &PageAnnotation,
    snapshot: &PageSnapshot,
    routes: &[String],
    config: &ResolverConfig,
) -> Vec<Evidence> {
    let anchor_tokens: BTreeSet<String> = page.anchors.iter().flat_map(|a| tokens(&a.label)).collect();
    let anchor = containment(&anchor_tokens, &tokens(&snapshot.all_text()));
    let heading = jaccard(&tokens(&page.headings.join(" ")), &tokens(&snapshot.headings.join(" ")));
    let (a, b) = (page.targets.len() as f64, snapshot.candidates.len() as f64);
    let count = if a.max(b) > 0.0 { a.min(b) / a.max(b) } else { 0.0 };
    let page_tokens = tokens(&page.page_id);
    let path = jaccard(&url_route_tokens(&snapshot.url), &page_tokens);
    let snapshot_path = url_path(&snapshot.url);
    let route = routes.iter().any(|r| {
        route_matches(r, &snapshot_path)
            && r.split('/')
                .filter(|s| !s.is_empty() && !is_param(s))
                .any(|s| tokens(s).iter().any(|t| page_tokens.contains(t)))
    });
    let mut evidence = vec![
        Evidence {
            signal: Signal::DomSignature,
            score: config.anchor_weight * anchor + config.heading_weight * heading + config.count_weight * count,
        },
        Evidence {
            signal: Signal::Crawl,
            score: config.path_weight * path,
        },
    ];
    if route {
        evidence.push(Evidence {
            signal: Signal::RoutePattern,
            score: config.route_bonus,
        });
    }
    evidence
}

pub fn signature_score(
    page: &PageAnnotation,
    snapshot: &PageSnapshot,
    routes: &[String],
    config: &ResolverConfig,
) -> f64 {
    combine(&signature_evidence(page, snapshot, routes, config))
}

/// Assigns each annotated page one URL. Declared mappings (argument first,
/// then the page's own `declared_url`) win outright; remaining pages are
/// matched greedily by descending signature score, one URL per page.
pub fn resolve_pages(
    task: &TaskAnnotation,
    snapshots: &[PageSnapshot],
    declared: &BTreeMap<String, String>,
    routes: &[String],
    config: &ResolverConfig,
) -> Vec<Result<ResolutionResult, ResolveError>> {
    let mut out: Vec<Option<Result<ResolutionResult, ResolveError>>> = vec![None; task.pages.len()];
    let mut claimed: HashSet<String> = HashSet::new();
    let key = |u: &str| normalize_url(u).unwrap_or_else(|| u.to_string());

    for (i, page) in task.pages.iter().enumerate() {
        let url = declared.get(&page.page_id).or(page.declared_url.as_ref());
        if let Some(url) = url {
            claimed.insert(key(url));
            let evidence = vec![Evidence {
                signal: Signal::Declared,
                score: 1.0,
            }];
            out[i] = Some(Ok(ResolutionResult {
                page_id: page.page_id.clone(),
                url: url.clone(),
                confidence: combine(&evidence),
                evidence,
            }));
        }
    }

    let mut scored: Vec<(f64, usize, usize, Vec<Evidence>)> = Vec::new();
    for (i, page) in task.pages.iter().enumerate() {
        if out[i].is_some() {
            continue;
        }
        for (j, snap) in snapshots.iter().enumerate() {
            let evidence = signature_evidence(page, snap, routes, config);
            let score = combine(&evidence);
            if score >= config.floor && score > 0.0 {
                scored.push((score, i, j, evidence));
            }
        }
    }
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    for (score, i, j, evidence) in scored {
        let url_key = key(&snapshots[j].url);
        if out[i].is_some() || claimed.contains(&url_key) {
            continue;
        }
        claimed.insert(url_key);
        out[i] = Some(Ok(ResolutionResult {
            page_id: task.pages[i].page_id.clone(),
            url: snapshots[j].url.clone(),
            confidence: score,
            evidence,
        }));
    }
    out.into_iter()
        .zip(&task.pages)
        .map(|(r, p)| r.unwrap_or_else(|| Err(ResolveError::PageUnresolved(p.page_id.clone()))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::driver::{ProbeOutcome, ReplayBackend};
    use crate::model::{DomCandidate, InteractiveTarget, Point, Size, VisualAnchor};
    use std::sync::Mutex;

    pub(crate) fn snap(url: &str, headings: &[&str], body: &str, links: &[&str], n_cands: usize) -> PageSnapshot {
        PageSnapshot {
            format_version: 1,
            url: url.into(),
            viewport: Size { width: 1280.0, height: 800.0 },
            candidates: (0..n_cands)
                .map(|i| DomCandidate {
                    locator: format!("#c{i}"),
                    tag_or_role: "button".into(),
                    bbox: crate::model::BoundingBox { x: 0.0, y: 40.0 * i as f64, width: 10.0, height: 10.0 },
                    text: String::new(),
                    attributes: Default::default(),
                    visible: true,
                })
                .collect(),
            internal_links: links.iter().map(|s| s.to_string()).collect(),
            headings: headings.iter().map(|s| s.to_string()).collect(),
            body_digest: body.into(),
            screenshot: None,
            captured_at: String::new(),
        }
    }

    fn page(id: &str, labels: &[&str], headings: &[&str], n_targets: usize) -> PageAnnotation {
        PageAnnotation {
            page_id: id.into(),
            mockup_image: format!("{id}.png"),
            mockup_size: Size { width: 1000.0, height: 1000.0 },
            targets: (0..n_targets)
                .map(|i| InteractiveTarget {
                    id: format!("{id}-t{i}"),
                    page_id: id.into(),
                    bbox: crate::model::BoundingBox { x: 0.0, y: 0.0, width: 5.0, height: 5.0 },
                    interaction: crate::model::InteractionType::new(crate::model::InteractionKind::Click),
                    description: None,
                    persistence_check: None,
                })
                .collect(),
            anchors: labels
                .iter()
                .map(|l| VisualAnchor { label: l.to_string(), point: Point::new(0.0, 0.0), page_id: id.into() })
                .collect(),
            declared_url: None,
            headings: headings.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn task(pages: Vec<PageAnnotation>) -> TaskAnnotation {
        TaskAnnotation { format_version: 1, task_name: "t".into(), pages, condition_label: None }
    }

    struct MapBackend {
        pages: Vec<PageSnapshot>,
        calls: Mutex<Vec<String>>,
    }

    impl Backend for MapBackend {
        fn capture(&self, url: &str) -> Result<PageSnapshot, DriverError> {
            self.calls.lock().unwrap().push(url.to_string());
            self.pages
                .iter()
                .find(|p| normalize_url(&p.url) == normalize_url(url))
                .cloned()
                .ok_or_else(|| DriverError::NotRecorded(url.into()))
        }
        fn probe(&self, _: &str, _: &DomCandidate, _: &InteractiveTarget) -> Result<ProbeOutcome, DriverError> {
            Ok(ProbeOutcome::default())
        }
        fn screenshot(&self, url: &str) -> Result<Vec<u8>, DriverError> {
            Err(DriverError::NotRecorded(url.into()))
        }
        fn describe(&self) -> String {
            "map".into()
        }
    }

    fn app() -> MapBackend {
        MapBackend {
            pages: vec![
                snap("http://app.test/", &["Home"], "", &["/about", "/jobs#top", "https://elsewhere.test/x"], 1),
                snap("http://app.test/about", &["About"], "", &["/", "/about/"], 1),
                snap("http://app.test/jobs", &["Jobs"], "", &["/about"], 1),
            ],
            calls: Mutex::new(vec![]),
        }
    }

    #[test]
    fn crawl_visits_small_app_exhaustively() {
        let b = app();
        let r = crawl(&b, "http://app.test/", 10).unwrap();
        assert_eq!(r.snapshots.len(), 3);
        assert!(r.failures.is_empty());
    }

    #[test]
    fn crawl_dedups_cycles() {
        let b = app();
        crawl(&b, "http://app.test/", 10).unwrap();
        let calls = b.calls.lock().unwrap();
        let unique: HashSet<_> = calls.iter().map(|c| normalize_url(c)).collect();
        assert_eq!(unique.len(), calls.len());
    }

    #[test]
    fn crawl_cap_of_one() {
        let r = crawl(&app(), "http://app.test/", 1).unwrap();
        assert_eq!(r.snapshots.len(), 1);
        assert_eq!(r.snapshots[0].url, "http://app.test/");
    }

    #[test]
    fn crawl_root_failure_is_fatal() {
        assert!(crawl(&app(), "http://app.test/missing", 5).is_err());
    }

    #[test]
    fn normalization() {
        assert_eq!(normalize_url("http://A.test/about/#x").unwrap(), "http://a.test/about");
        assert_eq!(normalize_url("http://a.test/#/jobs").unwrap(), "http://a.test/#/jobs");
        assert_eq!(normalize_url("http://a.test:80/").unwrap(), "http://a.test/");
    }

    #[test]
    fn declared_mapping_wins() {
        let t = task(vec![page("home", &["<search>", "<x>"], &[], 1)]);
        let declared = BTreeMap::from([("home".to_string(), "http://app.test/landing".to_string())]);
        let r = resolve_pages(&t, &[snap("http://app.test/", &["Home"], "search", &[], 1)], &declared, &[], &ResolverConfig::default());
        let r = r[0].as_ref().unwrap();
        assert_eq!(r.url, "http://app.test/landing");
        assert_eq!(r.confidence, 1.0);
    }

    #[test]
    fn verbatim_anchor_and_heading_pick_the_right_snapshot() {
        // Hand-scored signatures for page `board` (anchors <search>, <post-job>;
        // heading "Job Board"; 4 targets):
        //   /        : anchor 3/3 tokens present (search, post, job) -> 0.4*1
        //              heading {job, board} vs {job, board}        -> 0.3*1
        //              count min(4,4)/max(4,4)                       -> 0.2*1
        //              path {} vs {board}                            -> 0
        //              total 0.9
        //   /about   : anchor 0/3, heading {about, us} vs {job,board} -> 0,
        //              count 2/4 -> 0.1, path 0 -> total 0.1 (< floor)
        let board = page("board", &["<search>", "<post-job>"], &["Job Board"], 4);
        let s1 = snap("http://app.test/", &["Job Board"], "search jobs post a job", &[], 4);
        let s2 = snap("http://app.test/about", &["About us"], "who we are", &[], 2);
        let cfg = ResolverConfig::default();
        assert!((signature_score(&board, &s1, &[], &cfg) - 0.9).abs() < 1e-12);
        assert!((signature_score(&board, &s2, &[], &cfg) - 0.1).abs() < 1e-12);
        let r = resolve_pages(&task(vec![board]), &[s2, s1], &BTreeMap::new(), &[], &cfg);
        assert_eq!(r[0].as_ref().unwrap().url, "http://app.test/");
    }

    #[test]
    fn nothing_to_resolve_against() {
        let t = task(vec![page("a", &["<x>", "<y>"], &[], 1), page("b", &["<z>", "<w>"], &[], 1)]);
        let r = resolve_pages(&t, &[], &BTreeMap::new(), &[], &ResolverConfig::default());
        assert_eq!(r, vec![Err(ResolveError::PageUnresolved("a".into())), Err(ResolveError::PageUnresolved("b".into()))]);
    }

    #[test]
    fn contested_url_goes_to_higher_score() {
        let a = page("alpha", &["<search>", "<x>"], &["Search"], 1);
        let b = page("beta", &["<search>", "<y>"], &[], 1);
        let s1 = snap("http://app.test/", &["Search"], "search x", &[], 1);
        let s2 = snap("http://app.test/other", &[], "search", &[], 1);
        let r = resolve_pages(&task(vec![b, a]), &[s1, s2], &BTreeMap::new(), &[], &ResolverConfig::default());
        assert_eq!(r[1].as_ref().unwrap().url, "http://app.test/");
        assert_eq!(r[0].as_ref().unwrap().url, "http://app.test/other");
    }

    #[test]
    fn route_pattern_bonus() {
        let p = page("jobs", &["<a>", "<b>"], &[], 0);
        let s = snap("http://app.test/jobs/42", &[], "", &[], 0);
        let cfg = ResolverConfig::default();
        let without = signature_score(&p, &s, &[], &cfg);
        let with = signature_score(&p, &s, &["/jobs/:id".to_string()], &cfg);
        assert!((with - without - 0.2).abs() < 1e-12);
        assert!(route_matches("/blog/[slug]", "/blog/hello"));
        assert!(route_matches("/docs/**", "/docs/a/b"));
        assert!(!route_matches("/jobs/:id", "/jobs"));
    }

    #[test]
    fn replay_backend_crawl() {
        let dir = tempfile::tempdir().unwrap();
        for (stem, s) in [("home", snap("http://app.test/", &[], "", &["/about"], 1)), ("about", snap("http://app.test/about", &[], "", &["/"], 1))] {
            std::fs::write(dir.path().join(format!("{stem}.snapshot.json")), serde_json::to_string(&s).unwrap()).unwrap();
        }
        let backend = ReplayBackend::load(dir.path()).unwrap();
        assert_eq!(backend.root_url(), "http://app.test/");
        let r = crawl(&backend, &backend.root_url(), 10).unwrap();
        assert_eq!(r.snapshots.len(), 2);
    }
}

#[cfg(test)]
mod props {
    use super::tests::snap;
    use super::*;
    use crate::model::{Point, Size, VisualAnchor};
    use proptest::prelude::*;

    fn arb_task() -> impl Strategy<Value = (TaskAnnotation, Vec<PageSnapshot>)> {
        let words = ["search", "jobs", "board", "cart", "checkout", "profile", "login", "home"];
        let page = (proptest::sample::subsequence(words.to_vec(), 2..4), proptest::sample::subsequence(words.to_vec(), 0..3), 0usize..5);
        (proptest::collection::vec(page.clone(), 1..4), proptest::collection::vec(page, 0..5)).prop_map(move |(pages, snaps)| {
            let pages = pages
                .into_iter()
                .enumerate()
                .map(|(i, (labels, heads, _))| PageAnnotation {
                    page_id: format!("page{i}"),
                    mockup_image: String::new(),
                    mockup_size: Size { width: 100.0, height: 100.0 },
                    targets: vec![],
                    anchors: labels.iter().map(|l| VisualAnchor { label: format!("<{l}>"), point: Point::new(0.0, 0.0), page_id: format!("page{i}") }).collect(),
                    declared_url: None,
                    headings: heads.iter().map(|s| s.to_string()).collect(),
                })
                .collect();
            let snaps = snaps
                .into_iter()
                .enumerate()
                .map(|(j, (body, heads, n))| snap(&format!("http://app.test/s{j}"), &heads, &body.join(" "), &[], n))
                .collect();
            (TaskAnnotation { format_version: 1, task_name: "t".into(), pages, condition_label: None }, snaps)
        })
    }

    proptest! {
        #[test]
        fn assignments_are_injective((task, snaps) in arb_task()) {
            let r = resolve_pages(&task, &snaps, &BTreeMap::new(), &[], &ResolverConfig::default());
            let urls: Vec<&String> = r.iter().filter_map(|x| x.as_ref().ok()).map(|x| &x.url).collect();
            let unique: HashSet<&String> = urls.iter().cloned().collect();
            prop_assert_eq!(urls.len(), unique.len());
        }

        #[test]
        fn irrelevant_snapshot_changes_nothing((task, snaps) in arb_task(), pos in 0usize..6) {
            let cfg = ResolverConfig::default();
            let before = resolve_pages(&task, &snaps, &BTreeMap::new(), &[], &cfg);
            let mut more = snaps.clone();
            let noise = snap("http://app.test/zzqx", &["Quux"], "lorem ipsum dolor", &[], 0);
            more.insert(pos.min(more.len()), noise);
            let after = resolve_pages(&task, &more, &BTreeMap::new(), &[], &cfg);
            let urls = |r: &Vec<Result<ResolutionResult, ResolveError>>| r.iter().map(|x| x.as_ref().ok().map(|x| x.url.clone())).collect::<Vec<_>>();
            prop_assert_eq!(urls(&before), urls(&after));
        }

        #[test]
        fn declared_always_verbatim((task, snaps) in arb_task(), raw in "[a-z]{1,8}") {
            let declared: BTreeMap<String, String> = task.pages.iter().take(1).map(|p| (p.page_id.clone(), format!("http://x.test/{raw}/"))).collect();
            let r = resolve_pages(&task, &snaps, &declared, &[], &ResolverConfig::default());
            let first = r[0].as_ref().unwrap();
            prop_assert_eq!(&first.url, &format!("http://x.test/{raw}/"));
            prop_assert_eq!(first.confidence, 1.0);
        }
    }
}
