use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Backend, DriverError, ProbeOutcome};
use crate::model::{DomCandidate, InteractionKind, InteractiveTarget, PageSnapshot};
use crate::resolver::normalize_url;

/// One recorded probe in `<stem>.probes.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeFixture {
    pub locator: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interaction: Option<InteractionKind>,
    pub outcome: ProbeOutcome,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct ProbeFile {
    #[serde(default)]
    probes: Vec<ProbeFixture>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct ReplayManifest {
    #[serde(default)]
    root_url: Option<String>,
}

/// Loads and validates one `page.snapshot.json`.
pub fn replay_snapshot(path: &Path) -> Result<PageSnapshot, DriverError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            DriverError::Schema(format!("file not found: {}", path.display()))
        } else {
            DriverError::Schema(format!("{}: {e}", path.display()))
        }
    })?;
    let snap: PageSnapshot = serde_json::from_str(&text)
        .map_err(|e| DriverError::Schema(format!("{}: {e}", path.display())))?;
    Ok(snap.validated()?)
}

struct RecordedPage {
    snapshot: PageSnapshot,
    probes: Vec<ProbeFixture>,
}

/// Serves recorded snapshots and probe outcomes from a directory of
/// `<stem>.snapshot.json` / `<stem>.probes.json` pairs.
pub struct ReplayBackend {
    dir: PathBuf,
    pages: BTreeMap<String, RecordedPage>,
    root_url: Option<String>,
}

impl ReplayBackend {
    pub fn load(dir: &Path) -> Result<Self, DriverError> {
        let entries = std::fs::read_dir(dir)
            .map_err(|e| DriverError::Schema(format!("{}: {e}", dir.display())))?;
        let mut files: Vec<PathBuf> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.to_string_lossy().ends_with(".snapshot.json"))
            .collect();
        files.sort();
        let mut pages = BTreeMap::new();
        for file in files {
            let snapshot = replay_snapshot(&file)?;
            let name = file.file_name().unwrap().to_string_lossy().to_string();
            let stem = name.trim_end_matches(".snapshot.json");
            let probe_path = dir.join(format!("{stem}.probes.json"));
            let probes = if probe_path.exists() {
                let text = std::fs::read_to_string(&probe_path)
                    .map_err(|e| DriverError::Schema(format!("{}: {e}", probe_path.display())))?;
                serde_json::from_str::<ProbeFile>(&text)
                    .map_err(|e| DriverError::Schema(format!("{}: {e}", probe_path.display())))?
                    .probes
            } else {
                Vec::new()
            };
            let key = normalize_url(&snapshot.url).unwrap_or_else(|| snapshot.url.clone());
            if pages.contains_key(&key) {
                return Err(DriverError::Schema(format!(
                    "{}: duplicate recording for {key}",
                    file.display()
                )));
            }
            pages.insert(key, RecordedPage { snapshot, probes });
        }
        if pages.is_empty() {
            return Err(DriverError::Schema(format!(
                "{}: no *.snapshot.json files",
                dir.display()
            )));
        }
        let manifest_path = dir.join("replay.manifest.json");
        let root_url = if manifest_path.exists() {
            let text = std::fs::read_to_string(&manifest_path)
                .map_err(|e| DriverError::Schema(e.to_string()))?;
            serde_json::from_str::<ReplayManifest>(&text)
                .map_err(|e| DriverError::Schema(format!("{}: {e}", manifest_path.display())))?
                .root_url
        } else {
            None
        };
        Ok(ReplayBackend {
            dir: dir.to_path_buf(),
            pages,
            root_url,
        })
    }

    /// Root URL from `replay.manifest.json`, else the recorded URL with the
    /// shortest path.
    pub fn root_url(&self) -> String {
        if let Some(root) = &self.root_url {
            return root.clone();
        }
        self.pages
            .values()
            .map(|p| p.snapshot.url.clone())
            .min_by_key(|u| (u.len(), u.clone()))
            .expect("at least one page")
    }

    pub fn snapshots(&self) -> impl Iterator<Item = &PageSnapshot> {
        self.pages.values().map(|p| &p.snapshot)
    }

    fn page(&self, url: &str) -> Result<&RecordedPage, DriverError> {
        let key = normalize_url(url).unwrap_or_else(|| url.to_string());
        self.pages
            .get(&key)
            .ok_or_else(|| DriverError::NotRecorded(url.to_string()))
    }
}

impl Backend for ReplayBackend {
    fn capture(&self, url: &str) -> Result<PageSnapshot, DriverError> {
        Ok(self.page(url)?.snapshot.clone())
    }

    fn probe(
        &self,
        url: &str,
        candidate: &DomCandidate,
        target: &InteractiveTarget,
    ) -> Result<ProbeOutcome, DriverError> {
        let page = self.page(url)?;
        if !page.snapshot.candidates.iter().any(|c| c.locator == candidate.locator) {
            return Err(DriverError::StaleCandidate(candidate.locator.clone()));
        }
        let kind = target.interaction.kind;
        let fixture = page
            .probes
            .iter()
            .find(|p| p.locator == candidate.locator && p.interaction == Some(kind))
            .or_else(|| {
                page.probes
                    .iter()
                    .find(|p| p.locator == candidate.locator && p.interaction.is_none())
            });
        let mut outcome = fixture.map(|f| f.outcome.clone()).unwrap_or_default();
        if outcome.page_url.is_none() {
            outcome.page_url = Some(page.snapshot.url.clone());
        }
        Ok(outcome)
    }

    fn screenshot(&self, url: &str) -> Result<Vec<u8>, DriverError> {
        let page = self.page(url)?;
        let rel = page
            .snapshot
            .screenshot
            .as_ref()
            .ok_or_else(|| DriverError::NotRecorded(format!("screenshot for {url}")))?;
        std::fs::read(self.dir.join(rel))
            .map_err(|e| DriverError::Schema(format!("{rel}: {e}")))
    }

    fn describe(&self) -> String {
        format!("replay:{}", self.dir.display())
    }
}
