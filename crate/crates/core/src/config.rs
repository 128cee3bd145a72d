//! `speceval.toml` project configuration. Every section is optional and
//! missing keys keep their defaults; command-line flags override it.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::behavior::BehaviorProfile;
use crate::localization::TierConfig;
use crate::resolver::ResolverConfig;
use crate::trace::{ClassifierConfig, RasterConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvaluateSection {
    pub max_pages: usize,
    pub jobs: usize,
    pub overlays: bool,
}

impl Default for EvaluateSection {
    fn default() -> Self {
        EvaluateSection { max_pages: 50, jobs: 1, overlays: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BrowserSection {
    pub endpoint: Option<String>,
    /// Viewport width; the mockup width of the first page when unset.
    pub viewport_width: Option<f64>,
    pub viewport_height: f64,
    pub navigation_timeout_ms: u64,
    pub probe_timeout_ms: u64,
    pub settle_delay_ms: u64,
}

impl Default for BrowserSection {
    fn default() -> Self {
        BrowserSection {
            endpoint: None,
            viewport_width: None,
            viewport_height: 800.0,
            navigation_timeout_ms: 30_000,
            probe_timeout_ms: 10_000,
            settle_delay_ms: 500,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VisualSection {
    pub provider: Option<String>,
    pub cache_dir: Option<String>,
    pub floor: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TraceSection {
    #[serde(flatten)]
    pub classifier: ClassifierConfig,
    #[serde(flatten)]
    pub raster: RasterConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub evaluate: EvaluateSection,
    pub browser: BrowserSection,
    pub tiers: TierConfig,
    pub resolver: ResolverConfig,
    pub behavior: BehaviorProfile,
    pub visual: VisualSection,
    pub trace: TraceSection,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
    }
}
