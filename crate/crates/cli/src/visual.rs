use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Args;
use speceval_core::driver::{Backend, LiveBackend, ReplayBackend, SessionConfig};
use speceval_core::evaluate::{resolve_task, EvaluateOptions};
use speceval_core::trace::format_table;
use speceval_core::visual::{compare_pages, provider_from_setting, Embedder, VisualError};
use speceval_core::{load_task_annotation, Size, TaskAnnotation};

use crate::evaluate::BROWSER_ENV;
use crate::{environment, to_json, usage, write_file, CliResult, Common, EXIT_OK};

#[derive(Debug, Args)]
pub struct VisualArgs {
    /// Path to `task.annotation.json`; mockup paths are relative to it.
    pub annotations: PathBuf,
    /// Directory of `<page_id>.png` screenshots.
    #[arg(long, group = "source")]
    pub screenshots: Option<PathBuf>,
    /// Recorded snapshot directory; pages are resolved as in `evaluate`.
    #[arg(long, group = "source")]
    pub snapshots: Option<PathBuf>,
    /// Root URL of a running app (requires a browser endpoint).
    #[arg(long, group = "source")]
    pub url: Option<String>,
    #[arg(long)]
    pub endpoint: Option<String>,
    /// Embedding endpoint URL or command; falls back to SPECEVAL_EMBED_ENDPOINT.
    #[arg(long)]
    pub provider: Option<String>,
    /// Embedding cache directory; defaults to `<out>/embeddings`.
    #[arg(long)]
    pub cache: Option<PathBuf>,
    /// Similarity assigned to pages without a screenshot.
    #[arg(long)]
    pub floor: Option<f64>,
    #[command(flatten)]
    pub common: Common,
}

fn read(path: &Path) -> CliResult<Vec<u8>> {
    std::fs::read(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn backend_shots(backend: &dyn Backend, task: &TaskAnnotation, root: String) -> CliResult<Vec<Option<Vec<u8>>>> {
    let options = EvaluateOptions::new(root);
    let (_, resolutions) = resolve_task(backend, task, &options).map_err(environment)?;
    Ok(resolutions
        .iter()
        .map(|r| r.as_ref().ok().and_then(|res| backend.screenshot(&res.url).ok()))
        .collect())
}

pub fn run(args: &VisualArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<i32> {
    let config = args.common.load_config()?;
    let out_dir = args.common.out_dir()?;
    let task = load_task_annotation(&args.annotations).map_err(usage)?;
    let base = args.annotations.parent().unwrap_or(Path::new("."));

    let shots: Vec<Option<Vec<u8>>> = if let Some(dir) = &args.screenshots {
        task.pages.iter().map(|p| std::fs::read(dir.join(format!("{}.png", p.page_id))).ok()).collect()
    } else if let Some(dir) = &args.snapshots {
        let replay = ReplayBackend::load(dir).map_err(usage)?;
        let root = replay.root_url();
        backend_shots(&replay, &task, root)?
    } else if let Some(url) = &args.url {
        let endpoint = args
            .endpoint
            .clone()
            .or_else(|| config.browser.endpoint.clone())
            .or_else(|| std::env::var(BROWSER_ENV).ok())
            .ok_or_else(|| environment(format!("no browser endpoint: pass --endpoint or set {BROWSER_ENV}")))?;
        let session = SessionConfig {
            endpoint_url: endpoint,
            viewport: Size {
                width: config.browser.viewport_width.unwrap_or(task.pages[0].mockup_size.width),
                height: config.browser.viewport_height,
            },
            ..SessionConfig::default()
        };
        let live = LiveBackend::connect(&session).map_err(environment)?;
        backend_shots(&live, &task, url.clone())?
    } else {
        return Err(usage("pass one of --screenshots, --snapshots or --url"));
    };

    let mut pairs = Vec::with_capacity(task.pages.len());
    for (page, shot) in task.pages.iter().zip(shots) {
        if shot.is_none() {
            let _ = writeln!(err, "warning: no screenshot for page {}", page.page_id);
        }
        pairs.push((page.page_id.clone(), read(&base.join(&page.mockup_image))?, shot));
    }

    let provider = provider_from_setting(args.provider.as_deref().or(config.visual.provider.as_deref()));
    let cache = args
        .cache
        .clone()
        .or_else(|| config.visual.cache_dir.as_ref().map(PathBuf::from))
        .or_else(|| out_dir.map(|d| d.join("embeddings")));
    let embedder = Embedder::new(provider, cache);
    let floor = args.floor.unwrap_or(config.visual.floor);
    let summary = compare_pages(&embedder, &pairs, floor).map_err(|e| match e {
        VisualError::ProviderUnavailable(_) | VisualError::Cache(_) => environment(e),
        other => usage(other),
    })?;

    let rows: Vec<Vec<String>> = summary
        .pages
        .iter()
        .map(|p| vec![p.page_id.clone(), p.similarity.map_or("-".into(), |s| format!("{s:.4}"))])
        .collect();
    let _ = write!(out, "{}", format_table(&["page", "similarity"], &rows));
    let _ = writeln!(out, "mean similarity = {:.4} (floor {:.2} for missing pages)", summary.mean, summary.floor);
    if let Some(dir) = out_dir {
        write_file(&dir.join("visual.json"), &to_json(&summary))?;
    }
    Ok(EXIT_OK)
}
