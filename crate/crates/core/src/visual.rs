//! Page-level visual similarity through an external embedding provider and
//! a content-addressed vector cache.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const ENDPOINT_ENV: &str = "SPECEVAL_EMBED_ENDPOINT";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VisualError {
    #[error("embedding provider unavailable: {0}")]
    ProviderUnavailable(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("embedding has zero length")]
    ZeroVector,
    #[error("no page pairs to compare")]
    EmptyPairSet,
    #[error("cache error: {0}")]
    Cache(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
    pub dimension: usize,
}

impl EmbeddingVector {
    /// Normalizes `values` to unit length.
    pub fn new(values: Vec<f64>) -> Result<Self, VisualError> {
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if values.is_empty() || norm == 0.0 || !norm.is_finite() {
            return Err(VisualError::ZeroVector);
        }
        let values: Vec<f64> = values.iter().map(|v| v / norm).collect();
        Ok(EmbeddingVector { dimension: values.len(), values })
    }
}

/// Cosine similarity of two unit vectors.
pub fn page_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, VisualError> {
    if a.dimension != b.dimension {
        return Err(VisualError::DimensionMismatch { expected: a.dimension, got: b.dimension });
    }
    let dot: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    Ok(dot.clamp(-1.0, 1.0))
}

/// Mean of per-page similarities; `None` marks an unresolved page, which
/// contributes `floor`.
pub fn task_similarity(scores: &[Option<f64>], floor: f64) -> Result<f64, VisualError> {
    if scores.is_empty() {
        return Err(VisualError::EmptyPairSet);
    }
    let mut v: Vec<f64> = scores.iter().map(|s| s.unwrap_or(floor)).collect();
    v.sort_by(f64::total_cmp);
    Ok(v.iter().sum::<f64>() / v.len() as f64)
}

pub trait EmbeddingProvider: Send + Sync {
    fn embed_raw(&self, image: &[u8]) -> Result<Vec<f64>, VisualError>;
}

#[derive(Deserialize)]
#[serde(untagged)]
enum VectorPayload {
    Bare(Vec<f64>),
    Values { values: Vec<f64> },
    Embedding { embedding: Vec<f64> },
    Vector { vector: Vec<f64> },
}

impl VectorPayload {
    fn into_vec(self) -> Vec<f64> {
        match self {
            VectorPayload::Bare(v)
            | VectorPayload::Values { values: v }
            | VectorPayload::Embedding { embedding: v }
            | VectorPayload::Vector { vector: v } => v,
        }
    }
}

fn parse_payload(text: &str) -> Result<Vec<f64>, VisualError> {
    serde_json::from_str::<VectorPayload>(text)
        .map(VectorPayload::into_vec)
        .map_err(|e| VisualError::ProviderUnavailable(format!("bad vector payload: {e}")))
}

/// POSTs image bytes to an HTTP endpoint that answers with a JSON vector.
pub struct HttpProvider {
    endpoint: String,
    client: reqwest::blocking::Client,
}

impl HttpProvider {
    pub fn new(endpoint: impl Into<String>) -> Self {
        HttpProvider {
            endpoint: endpoint.into(),
            client: reqwest::blocking::Client::builder()
                .timeout(std::time::Duration::from_secs(60))
                .build()
                .expect("http client"),
        }
    }
}

impl EmbeddingProvider for HttpProvider {
    fn embed_raw(&self, image: &[u8]) -> Result<Vec<f64>, VisualError> {
        let resp = self
            .client
            .post(&self.endpoint)
            .header("content-type", "image/png")
            .body(image.to_vec())
            .send()
            .map_err(|e| VisualError::ProviderUnavailable(format!("{}: {e}", self.endpoint)))?;
        if !resp.status().is_success() {
            return Err(VisualError::ProviderUnavailable(format!("{}: HTTP {}", self.endpoint, resp.status())));
        }
        let text = resp
            .text()
            .map_err(|e| VisualError::ProviderUnavailable(e.to_string()))?;
        parse_payload(&text)
    }
}

/// Runs an external command with the image on stdin and a JSON vector on
/// stdout.
pub struct CommandProvider {
    program: String,
    args: Vec<String>,
}

impl CommandProvider {
    pub fn new(program: impl Into<String>, args: Vec<String>) -> Self {
        CommandProvider { program: program.into(), args }
    }
}

impl EmbeddingProvider for CommandProvider {
    fn embed_raw(&self, image: &[u8]) -> Result<Vec<f64>, VisualError> {
        let unavailable = |e: std::io::Error| VisualError::ProviderUnavailable(format!("{}: {e}", self.program));
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(unavailable)?;
        child.stdin.take().expect("stdin").write_all(image).map_err(unavailable)?;
        let out = child.wait_with_output().map_err(unavailable)?;
        if !out.status.success() {
            return Err(VisualError::ProviderUnavailable(format!("{} exited with {}", self.program, out.status)));
        }
        parse_payload(&String::from_utf8_lossy(&out.stdout))
    }
}

/// Picks a provider from an explicit setting or `SPECEVAL_EMBED_ENDPOINT`. A
/// value starting with `http://` or `https://` is an endpoint; anything else
/// is a command line.
pub fn provider_from_setting(setting: Option<&str>) -> Option<Box<dyn EmbeddingProvider>> {
    let setting = setting
        .map(str::to_string)
        .or_else(|| std::env::var(ENDPOINT_ENV).ok())
        .filter(|s| !s.trim().is_empty())?;
    if setting.starts_with("http://") || setting.starts_with("https://") {
        Some(Box::new(HttpProvider::new(setting)))
    } else {
        let mut parts = setting.split_whitespace().map(String::from);
        let program = parts.next()?;
        Some(Box::new(CommandProvider::new(program, parts.collect())))
    }
}

pub fn image_digest(image: &[u8]) -> String {
    hex::encode(Sha256::digest(image))
}

/// Provider plus `embeddings/<sha256>.vec.json` cache. Cached vectors are
/// used without calling the provider.
pub struct Embedder {
    provider: Option<Box<dyn EmbeddingProvider>>,
    cache_dir: Option<PathBuf>,
    dimension: Mutex<Option<usize>>,
}

impl Embedder {
    pub fn new(provider: Option<Box<dyn EmbeddingProvider>>, cache_dir: Option<PathBuf>) -> Self {
        Embedder { provider, cache_dir, dimension: Mutex::new(None) }
    }

    fn cache_path(&self, digest: &str) -> Option<PathBuf> {
        self.cache_dir.as_ref().map(|d| d.join(format!("{digest}.vec.json")))
    }

    fn check_dimension(&self, got: usize) -> Result<(), VisualError> {
        let mut dim = self.dimension.lock().expect("dimension lock");
        match *dim {
            Some(expected) if expected != got => Err(VisualError::DimensionMismatch { expected, got }),
            _ => {
                *dim = Some(got);
                Ok(())
            }
        }
    }

    pub fn embed(&self, image: &[u8]) -> Result<EmbeddingVector, VisualError> {
        let digest = image_digest(image);
        let path = self.cache_path(&digest);
        if let Some(p) = path.as_ref().filter(|p| p.exists()) {
            let text = std::fs::read_to_string(p).map_err(|e| VisualError::Cache(format!("{}: {e}", p.display())))?;
            let v = EmbeddingVector::new(parse_payload(&text).map_err(|e| VisualError::Cache(e.to_string()))?)?;
            self.check_dimension(v.dimension)?;
            return Ok(v);
        }
        let provider = self
            .provider
            .as_ref()
            .ok_or_else(|| VisualError::ProviderUnavailable(format!("no provider configured and no cached vector {digest}")))?;
        let raw = provider.embed_raw(image)?;
        let v = EmbeddingVector::new(raw.clone())?;
        self.check_dimension(v.dimension)?;
        if let Some(p) = path {
            write_cache(&p, &raw)?;
        }
        Ok(v)
    }
}

/// Stores the provider's raw vector so cached and fresh lookups normalize
/// identically.
fn write_cache(path: &Path, raw: &[f64]) -> Result<(), VisualError> {
    let err = |e: std::io::Error| VisualError::Cache(format!("{}: {e}", path.display()));
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(err)?;
    }
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    std::fs::write(&tmp, serde_json::json!({ "values": raw }).to_string()).map_err(err)?;
    std::fs::rename(&tmp, path).map_err(err)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageSimilarity {
    pub page_id: String,
    pub similarity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisualSummary {
    pub pages: Vec<PageSimilarity>,
    pub mean: f64,
    pub floor: f64,
}

/// Compares each mockup with its page screenshot; `None` screenshots are
/// unresolved pages.
pub fn compare_pages(
    embedder: &Embedder,
    pairs: &[(String, Vec<u8>, Option<Vec<u8>>)],
    floor: f64,
) -> Result<VisualSummary, VisualError> {
    let mut pages = Vec::with_capacity(pairs.len());
    for (page_id, mockup, shot) in pairs {
        let similarity = match shot {
            Some(shot) => Some(page_similarity(&embedder.embed(mockup)?, &embedder.embed(shot)?)?),
            None => None,
        };
        pages.push(PageSimilarity { page_id: page_id.clone(), similarity });
    }
    let mean = task_similarity(&pages.iter().map(|p| p.similarity).collect::<Vec<_>>(), floor)?;
    Ok(VisualSummary { pages, mean, floor })
}
