use std::io::Write;
use std::path::PathBuf;

use clap::Args;
use speceval_core::alignment::CuratedAnchor;
use speceval_core::driver::{Backend, LiveBackend, ReplayBackend, SessionConfig};
use speceval_core::evaluate::{evaluate_task, EvaluateError, EvaluateOptions};
use speceval_core::report::{emit_report, render_text};
use speceval_core::resolver::load_routes;
use speceval_core::{load_task_annotation, Size, TaskAnnotation};

use crate::{environment, read_text, usage, CliResult, Common, EXIT_OK, EXIT_PARTIAL};

pub const BROWSER_ENV: &str = "SPECEVAL_BROWSER_ENDPOINT";

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Path to `task.annotation.json`.
    pub annotations: PathBuf,
    /// Root URL of the running app (requires a browser endpoint).
    #[arg(long, conflicts_with = "snapshots", required_unless_present = "snapshots")]
    pub url: Option<String>,
    /// Directory of recorded snapshots to replay instead of a browser.
    #[arg(long)]
    pub snapshots: Option<PathBuf>,
    /// WebDriver endpoint; falls back to the config and SPECEVAL_BROWSER_ENDPOINT.
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub max_pages: Option<usize>,
    /// Value for `generated_at`, for reproducible reports.
    #[arg(long)]
    pub timestamp: Option<String>,
    /// Route patterns file, one pattern per line.
    #[arg(long)]
    pub routes: Option<PathBuf>,
    /// Curated anchor locators (JSON list).
    #[arg(long)]
    pub anchors: Option<PathBuf>,
    #[arg(long)]
    pub condition: Option<String>,
    #[arg(long)]
    pub no_overlays: bool,
    #[command(flatten)]
    pub common: Common,
}

fn session_config(args: &EvaluateArgs, config: &speceval_core::config::Config, task: &TaskAnnotation) -> CliResult<SessionConfig> {
    let endpoint = args
        .endpoint
        .clone()
        .or_else(|| config.browser.endpoint.clone())
        .or_else(|| std::env::var(BROWSER_ENV).ok())
        .ok_or_else(|| environment(format!("no browser endpoint: pass --endpoint or set {BROWSER_ENV}")))?;
    let width = config.browser.viewport_width.unwrap_or(task.pages[0].mockup_size.width);
    let session = SessionConfig {
        endpoint_url: endpoint,
        viewport: Size { width, height: config.browser.viewport_height },
        navigation_timeout_ms: config.browser.navigation_timeout_ms,
        probe_timeout_ms: config.browser.probe_timeout_ms,
        settle_delay_ms: config.browser.settle_delay_ms,
    };
    session.check().map_err(usage)?;
    Ok(session)
}

pub fn run(args: &EvaluateArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<i32> {
    let config = args.common.load_config()?;
    let out_dir = args.common.out.clone().ok_or_else(|| usage("evaluate requires --out"))?;
    let task = load_task_annotation(&args.annotations).map_err(usage)?;

    let (backend, root): (Box<dyn Backend>, String) = match (&args.snapshots, &args.url) {
        (Some(dir), _) => {
            let replay = ReplayBackend::load(dir).map_err(usage)?;
            let root = replay.root_url();
            (Box::new(replay), root)
        }
        (None, Some(url)) => {
            let live = LiveBackend::connect(&session_config(args, &config, &task)?).map_err(environment)?;
            (Box::new(live), url.clone())
        }
        (None, None) => return Err(usage("pass --url or --snapshots")),
    };

    let mut options = EvaluateOptions::new(root);
    options.max_pages = args.max_pages.unwrap_or(config.evaluate.max_pages);
    options.jobs = args.jobs.unwrap_or(config.evaluate.jobs).max(1);
    options.overlays = config.evaluate.overlays && !args.no_overlays;
    options.tiers = config.tiers.clone();
    options.resolver = config.resolver.clone();
    options.behavior = config.behavior.clone();
    options.timestamp = args.timestamp.clone();
    options.condition_label = args.condition.clone();
    if let Some(p) = &args.routes {
        options.routes = load_routes(p).map_err(|e| usage(format!("{}: {e}", p.display())))?;
    }
    if let Some(p) = &args.anchors {
        let curated: Vec<CuratedAnchor> = serde_json::from_str(&read_text(p)?).map_err(|e| usage(format!("{}: {e}", p.display())))?;
        options.curated = curated;
    }

    let evaluation = evaluate_task(backend.as_ref(), &task, &options).map_err(|e| match e {
        EvaluateError::Environment(_) => environment(e),
        EvaluateError::RootUnavailable(_) => environment(e),
        EvaluateError::Report(_) => usage(e),
    })?;
    let written = emit_report(&evaluation.report, &evaluation.overlays, &out_dir).map_err(environment)?;
    let _ = write!(out, "{}", render_text(&evaluation.report));
    for p in written {
        let _ = writeln!(err, "wrote {}", p.display());
    }
    if evaluation.is_partial() {
        let _ = writeln!(err, "warning: unresolved pages: {}", evaluation.unresolved.join(", "));
        return Ok(EXIT_PARTIAL);
    }
    Ok(EXIT_OK)
}
