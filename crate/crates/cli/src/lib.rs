//! The `speceval` command line.
//!
//! Exit codes: 0 success, 2 partial evaluation, 64 usage or input error,
//! 69 unusable environment (browser, embedding provider, port, filesystem).

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use speceval_core::config::Config;

pub mod annotate;
mod evaluate;
mod merge;
mod traces;
mod visual;

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARTIAL: i32 = 2;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_ENVIRONMENT: i32 = 69;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Environment(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Environment(_) => EXIT_ENVIRONMENT,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Environment(m) => m,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub(crate) fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

pub(crate) fn environment(e: impl std::fmt::Display) -> CliError {
    CliError::Environment(e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "speceval", version, about = "Evaluate generated web apps against annotated design mockups")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score a task annotation against a live app or recorded snapshots.
    Evaluate(evaluate::EvaluateArgs),
    /// Surgical and Strict Diff Scores for agent traces.
    Diffscore(traces::DiffscoreArgs),
    /// Action mix over progress bins, transitions and rasters.
    Trajectory(traces::TrajectoryArgs),
    /// Page-level visual similarity between mockups and screenshots.
    Visual(visual::VisualArgs),
    /// Serve the annotation REST API for a task directory.
    Annotate(annotate::AnnotateArgs),
    /// Combine evaluation reports across runs.
    Merge(merge::MergeArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Output directory; nothing is written outside it.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Project configuration file (TOML); flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

impl Common {
    pub fn load_config(&self) -> CliResult<Config> {
        match &self.config {
            Some(p) => Config::load(p).map_err(usage),
            None => Ok(Config::default()),
        }
    }

    pub fn out_dir(&self) -> CliResult<Option<&Path>> {
        if let Some(dir) = &self.out {
            std::fs::create_dir_all(dir).map_err(|e| environment(format!("{}: {e}", dir.display())))?;
        }
        Ok(self.out.as_deref())
    }
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| environment(format!("{}: {e}", parent.display())))?;
    }
    std::fs::write(path, bytes).map_err(|e| environment(format!("{}: {e}", path.display())))
}

pub(crate) fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

pub(crate) fn to_json<T: serde::Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("serializable output");
    bytes.push(b'\n');
    bytes
}

/// Parses `args` (program name first) and runs the command, writing normal
/// output to `out` and diagnostics to `err`. Returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = if code == EXIT_OK { write!(out, "{}", e.render()) } else { write!(err, "{}", e.render()) };
            return code;
        }
    };
    let result = match cli.command {
        Command::Evaluate(a) => evaluate::run(&a, out, err),
        Command::Diffscore(a) => traces::run_diffscore(&a, out, err),
        Command::Trajectory(a) => traces::run_trajectory(&a, out, err),
        Command::Visual(a) => visual::run(&a, out, err),
        Command::Annotate(a) => annotate::run(&a, out, err),
        Command::Merge(a) => merge::run(&a, out, err),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let kind = if e.code() == EXIT_USAGE { "usage" } else { "environment" };
            let _ = writeln!(err, "speceval: {kind} error: {}", e.message());
            e.code()
        }
    }
}
