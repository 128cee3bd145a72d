//! Minimal W3C WebDriver client: session lifecycle, navigation, script
//! execution, element lookup/click and screenshots.

use std::sync::Mutex;
use std::time::Duration;

use base64::Engine;
use serde_json::{json, Value};

use super::{Backend, DriverError, ProbeOutcome, SessionConfig, StateDelta};
use crate::model::{DomCandidate, InteractionKind, InteractiveTarget, PageSnapshot, Size};
use crate::text::{jaccard, tokens};

const PRELUDE: &str = include_str!("js/prelude.js");
const CAPTURE_JS: &str = include_str!("js/capture.js");
const STATE_JS: &str = include_str!("js/state.js");
const INPUT_JS: &str = include_str!("js/input.js");
const CLICK_JS: &str = include_str!("js/js_click.js");

const ELEMENT_KEY: &str = "element-6066-11e4-a52e-4f735466cecc";
/// Value typed into input targets.
pub const PROBE_TEXT: &str = "hello";

fn script(body: &str) -> String {
    format!("{PRELUDE}\n{body}")
}

pub struct Session {
    http: reqwest::blocking::Client,
    base: String,
    id: String,
    config: SessionConfig,
}

fn transport_error(endpoint: &str, e: reqwest::Error) -> DriverError {
    if e.is_timeout() {
        DriverError::NavigationTimeout(format!("{endpoint}: {e}"))
    } else {
        DriverError::EndpointUnreachable(format!("{endpoint}: {e}"))
    }
}

/// Maps a W3C error payload onto a driver error.
fn protocol_error(value: &Value, context: &str) -> DriverError {
    let code = value["error"].as_str().unwrap_or("unknown error");
    let message = value["message"].as_str().unwrap_or_default();
    let detail = format!("{context}: {code}: {message}");
    match code {
        "session not created" => DriverError::ProtocolVersionMismatch(detail),
        "timeout" => DriverError::NavigationTimeout(detail),
        "script timeout" => DriverError::ProbeTimeout(detail),
        "no such element" | "stale element reference" => DriverError::StaleCandidate(detail),
        "invalid session id" => DriverError::PageCrashed(detail),
        _ if message.contains("crash") => DriverError::PageCrashed(detail),
        _ => DriverError::Protocol(detail),
    }
}

/// Creates a browser session at the configured endpoint and sizes its window.
pub fn open_session(config: &SessionConfig) -> Result<Session, DriverError> {
    config.check()?;
    let timeout = Duration::from_millis(config.navigation_timeout_ms.max(config.probe_timeout_ms) + 5_000);
    let http = reqwest::blocking::Client::builder()
        .timeout(timeout)
        .build()
        .map_err(|e| DriverError::EndpointUnreachable(e.to_string()))?;
    let base = config.endpoint_url.trim_end_matches('/').to_string();
    let (w, h) = (config.viewport.width as i64, config.viewport.height as i64);
    let caps = json!({
        "capabilities": {
            "alwaysMatch": {
                "goog:chromeOptions": { "args": ["--headless=new", format!("--window-size={w},{h}")] },
                "moz:firefoxOptions": { "args": ["-headless"] }
            }
        }
    });
    let resp = http
        .post(format!("{base}/session"))
        .json(&caps)
        .send()
        .map_err(|e| DriverError::EndpointUnreachable(format!("{base}: {e}")))?;
    let status = resp.status();
    let body: Value = resp
        .json()
        .map_err(|e| DriverError::ProtocolVersionMismatch(format!("non-JSON reply: {e}")))?;
    if !status.is_success() {
        let err = protocol_error(&body["value"], "new session");
        return Err(match err {
            DriverError::Protocol(m) => DriverError::ProtocolVersionMismatch(m),
            other => other,
        });
    }
    let id = body["value"]["sessionId"]
        .as_str()
        .ok_or_else(|| DriverError::ProtocolVersionMismatch(format!("no sessionId in reply: {body}")))?
        .to_string();
    let session = Session {
        http,
        base,
        id,
        config: config.clone(),
    };
    session.command(
        "POST",
        "timeouts",
        Some(json!({
            "pageLoad": config.navigation_timeout_ms,
            "script": config.probe_timeout_ms,
            "implicit": 0
        })),
    )?;
    session.set_window(config.viewport.width, config.viewport.height)?;
    Ok(session)
}

impl Session {
    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn viewport(&self) -> Size {
        self.config.viewport
    }

    fn command(&self, method: &str, path: &str, body: Option<Value>) -> Result<Value, DriverError> {
        let url = format!("{}/session/{}/{}", self.base, self.id, path);
        let req = match method {
            "GET" => self.http.get(&url),
            "DELETE" => self.http.delete(&url),
            _ => self.http.post(&url).json(&body.unwrap_or_else(|| json!({}))),
        };
        let resp = req.send().map_err(|e| transport_error(&url, e))?;
        let status = resp.status();
        let value: Value = resp
            .json()
            .map_err(|e| DriverError::Protocol(format!("{path}: bad reply: {e}")))?;
        if !status.is_success() {
            return Err(protocol_error(&value["value"], path));
        }
        Ok(value["value"].clone())
    }

    fn set_window(&self, width: f64, height: f64) -> Result<(), DriverError> {
        self.command(
            "POST",
            "window/rect",
            Some(json!({ "width": width as i64, "height": height as i64 })),
        )
        .map(|_| ())
    }

    fn settle(&self) {
        std::thread::sleep(Duration::from_millis(self.config.settle_delay_ms));
    }

    pub fn navigate(&self, url: &str) -> Result<(), DriverError> {
        self.command("POST", "url", Some(json!({ "url": url })))?;
        self.settle();
        Ok(())
    }

    pub fn current_url(&self) -> Result<String, DriverError> {
        Ok(self
            .command("GET", "url", None)?
            .as_str()
            .unwrap_or_default()
            .to_string())
    }

    pub fn execute(&self, body: &str, args: Vec<Value>) -> Result<Value, DriverError> {
        self.command(
            "POST",
            "execute/sync",
            Some(json!({ "script": script(body), "args": args })),
        )
    }

    fn find(&self, css: &str) -> Result<String, DriverError> {
        let v = self.command(
            "POST",
            "element",
            Some(json!({ "using": "css selector", "value": css })),
        )?;
        v[ELEMENT_KEY]
            .as_str()
            .map(String::from)
            .ok_or_else(|| DriverError::StaleCandidate(css.to_string()))
    }

    fn click(&self, css: &str) -> Result<(), DriverError> {
        let id = self.find(css)?;
        match self.command("POST", &format!("element/{id}/click"), None) {
            Ok(_) => Ok(()),
            // Covered or off-screen elements still get a synthetic click.
            Err(DriverError::Protocol(_)) => {
                let ok = self.execute(CLICK_JS, vec![json!(css)])?;
                if ok.as_bool() == Some(true) {
                    Ok(())
                } else {
                    Err(DriverError::StaleCandidate(css.to_string()))
                }
            }
            Err(e) => Err(e),
        }
    }

    fn png(&self) -> Result<Vec<u8>, DriverError> {
        let encoded = self.command("GET", "screenshot", None)?;
        base64::engine::general_purpose::STANDARD
            .decode(encoded.as_str().unwrap_or_default())
            .map_err(|e| DriverError::Protocol(format!("screenshot: {e}")))
    }

    pub fn close(&self) {
        let _ = self
            .http
            .delete(format!("{}/session/{}", self.base, self.id))
            .send();
    }
}

impl Drop for Session {
    fn drop(&mut self) {
        self.close();
    }
}

/// Navigates to `url` and records its visible interactive candidates.
pub fn capture_snapshot(session: &Session, url: &str) -> Result<PageSnapshot, DriverError> {
    session.navigate(url)?;
    let raw = session.execute(CAPTURE_JS, vec![])?;
    let mut snapshot: PageSnapshot = serde_json::from_value(json!({
        "url": raw["url"],
        "viewport": raw["viewport"],
        "candidates": raw["candidates"],
        "internal_links": raw["internal_links"],
        "headings": raw["headings"],
        "body_digest": raw["body_digest"],
    }))
    .map_err(|e| DriverError::Protocol(format!("capture payload: {e}")))?;
    snapshot.captured_at = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true);
    // The script already drops hidden and zero-area nodes; keep the contract
    // even if a page mutates between measurement and serialization.
    snapshot
        .candidates
        .retain(|c| c.visible && c.bbox.width > 0.0 && c.bbox.height > 0.0);
    Ok(snapshot.validated()?)
}

/// Full-page PNG at the session's viewport width.
pub fn screenshot(session: &Session, url: &str) -> Result<Vec<u8>, DriverError> {
    session.navigate(url)?;
    let height = session
        .execute(
            "return Math.ceil(Math.max(document.documentElement.scrollHeight, document.body ? document.body.scrollHeight : 0));",
            vec![],
        )?
        .as_f64()
        .unwrap_or(session.config.viewport.height);
    let vp = session.config.viewport;
    session.set_window(vp.width, height.max(vp.height))?;
    session.settle();
    let png = session.png();
    session.set_window(vp.width, vp.height)?;
    png
}

struct ElementState {
    url: String,
    found: bool,
    attrs: serde_json::Map<String, Value>,
    value: Option<String>,
    href: Option<String>,
    overlays: Vec<String>,
    events: Vec<String>,
    text: String,
}

fn read_state(session: &Session, locator: &str, arm: bool) -> Result<ElementState, DriverError> {
    let v = session.execute(STATE_JS, vec![json!(locator), json!(arm)])?;
    let strings = |key: &str| -> Vec<String> {
        v[key]
            .as_array()
            .map(|a| a.iter().filter_map(|x| x.as_str().map(String::from)).collect())
            .unwrap_or_default()
    };
    Ok(ElementState {
        url: v["url"].as_str().unwrap_or_default().to_string(),
        found: v["found"].as_bool().unwrap_or(false),
        attrs: v["attrs"].as_object().cloned().unwrap_or_default(),
        value: v["value"].as_str().map(String::from),
        href: v["href"].as_str().map(String::from),
        overlays: strings("overlays"),
        events: strings("events"),
        text: v["text"].as_str().unwrap_or_default().to_string(),
    })
}

fn state_deltas(before: &ElementState, after: &ElementState) -> Vec<StateDelta> {
    let mut keys: Vec<&String> = before.attrs.keys().chain(after.attrs.keys()).collect();
    keys.sort();
    keys.dedup();
    keys.into_iter()
        .filter(|k| k.as_str() != "value")
        .filter_map(|k| {
            let b = before.attrs.get(k).and_then(|v| v.as_str()).map(String::from);
            let a = after.attrs.get(k).and_then(|v| v.as_str()).map(String::from);
            (a != b).then(|| StateDelta {
                attribute: k.clone(),
                before: b,
                after: a,
            })
        })
        .collect()
}

/// Performs the interaction-appropriate action on `candidate` and records
/// what changed. The page is re-loaded afterwards whenever the probe left
/// any trace, so the session ends on the URL it started from.
pub fn probe(
    session: &Session,
    url: &str,
    candidate: &DomCandidate,
    target: &InteractiveTarget,
) -> Result<ProbeOutcome, DriverError> {
    if session.current_url()? != url {
        session.navigate(url)?;
    }
    let locator = candidate.locator.as_str();
    let before = read_state(session, locator, true)?;
    if !before.found {
        return Err(DriverError::StaleCandidate(locator.to_string()));
    }
    let mut outcome = ProbeOutcome {
        page_url: Some(before.url.clone()),
        exposed_url: before.href.clone(),
        ..ProbeOutcome::default()
    };
    let kind = target.interaction.kind;
    match kind {
        InteractionKind::ExternalLink => {}
        InteractionKind::Input => {
            let r = session.execute(INPUT_JS, vec![json!(locator), json!(PROBE_TEXT)])?;
            if r["found"].as_bool() != Some(true) {
                return Err(DriverError::StaleCandidate(locator.to_string()));
            }
        }
        _ => session.click(locator)?,
    }
    let mut dirty = kind != InteractionKind::ExternalLink;
    if dirty {
        session.settle();
        let now = session.current_url()?;
        if now != before.url {
            outcome.changed_url = Some(now);
        }
        // A hard navigation replaces the document, so nothing else is comparable.
        if let Ok(after) = read_state(session, locator, false) {
            if after.url == before.url || outcome.changed_url.is_some() && after.found {
                outcome.state_deltas = state_deltas(&before, &after);
                outcome.overlay_appeared = after.overlays.iter().any(|o| !before.overlays.contains(o));
                outcome.events_observed = after.events.clone();
                outcome.input_accepted = kind == InteractionKind::Input
                    && match candidate.tag() {
                        "select" => after.value.is_some() && after.value != before.value,
                        _ => after.value.as_deref().is_some_and(|v| v.contains(PROBE_TEXT)),
                    };
            }
            if outcome.changed_url.is_none() {
                outcome.text_change_ratio = 1.0 - jaccard(&tokens(&before.text), &tokens(&after.text));
            }
        }
    }
    if let Some(check) = &target.persistence_check {
        session.navigate(&check.url)?;
        let text = session.execute("return document.body ? document.body.innerText : '';", vec![])?;
        outcome.persistence_ok = Some(text.as_str().unwrap_or_default().contains(&check.token));
        dirty = true;
    }
    if dirty {
        session.navigate(url)?;
    }
    Ok(outcome)
}

/// A live browser behind the [`Backend`] interface. Calls are serialized on
/// the single session.
pub struct LiveBackend {
    session: Mutex<Session>,
}

impl LiveBackend {
    pub fn connect(config: &SessionConfig) -> Result<Self, DriverError> {
        Ok(LiveBackend {
            session: Mutex::new(open_session(config)?),
        })
    }
}

impl Backend for LiveBackend {
    fn capture(&self, url: &str) -> Result<PageSnapshot, DriverError> {
        capture_snapshot(&self.session.lock().expect("session lock"), url)
    }

    fn probe(
        &self,
        url: &str,
        candidate: &DomCandidate,
        target: &InteractiveTarget,
    ) -> Result<ProbeOutcome, DriverError> {
        probe(&self.session.lock().expect("session lock"), url, candidate, target)
    }

    fn screenshot(&self, url: &str) -> Result<Vec<u8>, DriverError> {
        screenshot(&self.session.lock().expect("session lock"), url)
    }

    fn describe(&self) -> String {
        let s = self.session.lock().expect("session lock");
        format!("webdriver:{}", s.base)
    }
}
