mod common;

use std::sync::{Arc, Mutex};

use common::http::{serve, Request, Response};
use serde_json::{json, Value};
use speceval_core::driver::{capture_snapshot, open_session, probe, DriverError, SessionConfig};
use speceval_core::{BoundingBox, DomCandidate, InteractionKind, InteractionType, InteractiveTarget};

type Log = Arc<Mutex<Vec<(String, String, Value)>>>;

fn config(endpoint: &str) -> SessionConfig {
    SessionConfig {
        endpoint_url: endpoint.to_string(),
        settle_delay_ms: 1,
        ..SessionConfig::default()
    }
}

fn ok(value: Value) -> Response {
    Response::json(200, json!({ "value": value }))
}

fn err(status: u16, code: &str) -> Response {
    Response::json(status, json!({ "value": { "error": code, "message": "mock", "stacktrace": "" } }))
}

/// A scripted driver: one session `s1`, a single page, and a button whose
/// native click is intercepted.
fn mock_driver(log: Log) -> String {
    let clicked = Arc::new(Mutex::new(false));
    serve(move |req: &Request| {
        let body: Value = serde_json::from_slice(&req.body).unwrap_or(Value::Null);
        log.lock().unwrap().push((req.method.clone(), req.path.clone(), body.clone()));
        let path = req.path.as_str();
        match (req.method.as_str(), path) {
            ("POST", "/session") => ok(json!({ "sessionId": "s1", "capabilities": {} })),
            ("DELETE", "/session/s1") => ok(Value::Null),
            ("POST", "/session/s1/timeouts") | ("POST", "/session/s1/window/rect") => ok(json!({})),
            ("POST", "/session/s1/url") => ok(Value::Null),
            ("GET", "/session/s1/url") => ok(json!("http://app.test/")),
            ("POST", "/session/s1/element") => ok(json!({ "element-6066-11e4-a52e-4f735466cecc": "e1" })),
            ("POST", "/session/s1/element/e1/click") => err(400, "element click intercepted"),
            ("POST", "/session/s1/execute/sync") => {
                let script = body["script"].as_str().unwrap_or_default();
                if script.contains("internal_links") {
                    ok(json!({
                        "url": "http://app.test/",
                        "viewport": { "width": 1280, "height": 800 },
                        "candidates": [{
                            "locator": "#go", "tag_or_role": "button",
                            "box": { "x": 10, "y": 20, "width": 100, "height": 30 },
                            "text": "Go", "attributes": { "id": "go" }, "visible": true
                        }],
                        "internal_links": ["http://app.test/next"],
                        "headings": ["Home"],
                        "body_digest": "Home Go"
                    }))
                } else if script.contains("__svTarget") {
                    let on = *clicked.lock().unwrap();
                    ok(json!({
                        "url": "http://app.test/", "found": true,
                        "attrs": { "aria-pressed": if on { "true" } else { "false" } },
                        "value": "", "href": null, "overlays": [], "events": [], "text": "Home Go"
                    }))
                } else if script.contains("el.click()") {
                    *clicked.lock().unwrap() = true;
                    ok(json!(true))
                } else {
                    ok(Value::Null)
                }
            }
            _ => err(404, "unknown command"),
        }
    })
}

#[test]
fn session_and_capture_use_w3c_wire_format() {
    let log: Log = Default::default();
    let endpoint = mock_driver(log.clone());
    let session = open_session(&config(&endpoint)).unwrap();
    assert_eq!(session.id(), "s1");
    let snap = capture_snapshot(&session, "http://app.test/").unwrap();
    assert_eq!(snap.candidates.len(), 1);
    assert_eq!(snap.candidates[0].bbox, BoundingBox { x: 10.0, y: 20.0, width: 100.0, height: 30.0 });
    assert_eq!(snap.internal_links, vec!["http://app.test/next"]);
    drop(session);

    let log = log.lock().unwrap();
    let find = |m: &str, p: &str| log.iter().find(|(lm, lp, _)| lm == m && lp == p).map(|e| e.2.clone());
    let caps = find("POST", "/session").unwrap();
    assert!(caps["capabilities"]["alwaysMatch"].is_object());
    let timeouts = find("POST", "/session/s1/timeouts").unwrap();
    assert_eq!(timeouts["pageLoad"], json!(30000));
    assert_eq!(timeouts["script"], json!(10000));
    let rect = find("POST", "/session/s1/window/rect").unwrap();
    assert_eq!((rect["width"].clone(), rect["height"].clone()), (json!(1280), json!(800)));
    assert_eq!(find("POST", "/session/s1/url").unwrap(), json!({ "url": "http://app.test/" }));
    let exec = find("POST", "/session/s1/execute/sync").unwrap();
    assert!(exec["script"].is_string() && exec["args"].is_array());
    assert!(find("DELETE", "/session/s1").is_some(), "session is closed on drop");
}

#[test]
fn intercepted_click_falls_back_to_script_click() {
    let log: Log = Default::default();
    let endpoint = mock_driver(log.clone());
    let session = open_session(&config(&endpoint)).unwrap();
    let candidate = DomCandidate {
        locator: "#go".into(),
        tag_or_role: "button".into(),
        bbox: BoundingBox { x: 10.0, y: 20.0, width: 100.0, height: 30.0 },
        text: "Go".into(),
        attributes: Default::default(),
        visible: true,
    };
    let target = InteractiveTarget {
        id: "t".into(),
        page_id: "home".into(),
        bbox: candidate.bbox,
        interaction: InteractionType::new(InteractionKind::Toggle),
        description: None,
        persistence_check: None,
    };
    let outcome = probe(&session, "http://app.test/", &candidate, &target).unwrap();
    assert_eq!(outcome.state_deltas.len(), 1);
    assert_eq!(outcome.state_deltas[0].attribute, "aria-pressed");
    assert_eq!(outcome.state_deltas[0].after.as_deref(), Some("true"));
    let log = log.lock().unwrap();
    assert!(log.iter().any(|(_, p, _)| p == "/session/s1/element/e1/click"));
    assert!(log
        .iter()
        .any(|(_, p, b)| p == "/session/s1/execute/sync" && b["script"].as_str().unwrap_or_default().contains("el.click()")));
}

#[test]
fn session_not_created_is_an_environment_error() {
    let endpoint = serve(|_req: &Request| err(500, "session not created"));
    let e = open_session(&config(&endpoint)).err().unwrap();
    assert!(matches!(e, DriverError::ProtocolVersionMismatch(_)), "{e:?}");
    assert!(e.is_environmental());
}

#[test]
fn unreachable_endpoint_is_an_environment_error() {
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let e = open_session(&config(&format!("http://127.0.0.1:{port}"))).err().unwrap();
    assert!(matches!(e, DriverError::EndpointUnreachable(_)), "{e:?}");
    assert!(e.is_environmental());
}

#[test]
fn navigation_timeout_maps_from_protocol_code() {
    let endpoint = serve(|req: &Request| match (req.method.as_str(), req.path.as_str()) {
        ("POST", "/session") => ok(json!({ "sessionId": "s1" })),
        ("POST", "/session/s1/url") => err(500, "timeout"),
        _ => ok(json!({})),
    });
    let session = open_session(&config(&endpoint)).unwrap();
    let e = capture_snapshot(&session, "http://slow.test/").err().unwrap();
    assert!(matches!(e, DriverError::NavigationTimeout(_)), "{e:?}");
}
