//! Page rendering backends: a live browser over the W3C WebDriver protocol
//! and a deterministic replay of recorded snapshots.

mod replay;
mod webdriver;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{DomCandidate, InteractiveTarget, ModelError, PageSnapshot, Size};

pub use replay::{replay_snapshot, ProbeFixture, ReplayBackend};
pub use webdriver::{capture_snapshot, open_session, probe, screenshot, LiveBackend, Session};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DriverError {
    #[error("browser endpoint unreachable: {0}")]
    EndpointUnreachable(String),
    #[error("session creation rejected: {0}")]
    ProtocolVersionMismatch(String),
    #[error("navigation timed out: {0}")]
    NavigationTimeout(String),
    #[error("page crashed: {0}")]
    PageCrashed(String),
    #[error("stale candidate: {0}")]
    StaleCandidate(String),
    #[error("probe timed out: {0}")]
    ProbeTimeout(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("no recorded page for {0}")]
    NotRecorded(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error(transparent)]
    Invariant(#[from] ModelError),
}

impl DriverError {
    /// Short name used in verdict reasons.
    pub fn kind(&self) -> &'static str {
        match self {
            DriverError::EndpointUnreachable(_) => "EndpointUnreachable",
            DriverError::ProtocolVersionMismatch(_) => "ProtocolVersionMismatch",
            DriverError::NavigationTimeout(_) => "NavigationTimeout",
            DriverError::PageCrashed(_) => "PageCrashed",
            DriverError::StaleCandidate(_) => "StaleCandidate",
            DriverError::ProbeTimeout(_) => "ProbeTimeout",
            DriverError::Protocol(_) => "ProtocolError",
            DriverError::NotRecorded(_) => "NotRecorded",
            DriverError::Schema(_) => "SchemaError",
            DriverError::Invariant(_) => "InvariantError",
        }
    }

    /// Whether the error means the browser environment itself is unusable.
    pub fn is_environmental(&self) -> bool {
        matches!(
            self,
            DriverError::EndpointUnreachable(_) | DriverError::ProtocolVersionMismatch(_)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub endpoint_url: String,
    pub viewport: Size,
    pub navigation_timeout_ms: u64,
    pub probe_timeout_ms: u64,
    pub settle_delay_ms: u64,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            endpoint_url: "http://127.0.0.1:4444".into(),
            viewport: Size {
                width: 1280.0,
                height: 800.0,
            },
            navigation_timeout_ms: 30_000,
            probe_timeout_ms: 10_000,
            settle_delay_ms: 500,
        }
    }
}

impl SessionConfig {
    pub fn check(&self) -> Result<(), DriverError> {
        if self.navigation_timeout_ms == 0 || self.probe_timeout_ms == 0 {
            return Err(DriverError::Schema("timeouts must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateDelta {
    pub attribute: String,
    pub before: Option<String>,
    pub after: Option<String>,
}

/// Raw evidence recorded by one behavior probe.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProbeOutcome {
    /// URL the probe started from.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub page_url: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub changed_url: Option<String>,
    pub state_deltas: Vec<StateDelta>,
    pub overlay_appeared: bool,
    pub input_accepted: bool,
    pub events_observed: Vec<String>,
    /// URL exposed by the element (href and friends).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exposed_url: Option<String>,
    /// Fraction of visible-text tokens that changed without a route change.
    pub text_change_ratio: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub persistence_ok: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// What the evaluator needs from a rendering backend.
pub trait Backend: Send + Sync {
    fn capture(&self, url: &str) -> Result<PageSnapshot, DriverError>;

    fn probe(
        &self,
        url: &str,
        candidate: &DomCandidate,
        target: &InteractiveTarget,
    ) -> Result<ProbeOutcome, DriverError>;

    fn screenshot(&self, url: &str) -> Result<Vec<u8>, DriverError>;

    /// Human-readable backend name for report notes.
    fn describe(&self) -> String;
}
