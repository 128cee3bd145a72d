use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::Serialize;
use speceval_core::trace::stats::{diff_row, group_row, DIFF_HEADERS, GROUP_HEADERS};
use speceval_core::trace::{
    build_raster, compute_diff_score, compute_trajectory, correlate, format_table, group_means, parse_trace, raster_svg,
    CommandClassifier, DiffScoreResult, Dialect, GroupBy, RunLabels, TrajectorySummary,
};
use speceval_core::{EventCategory, RunTrace};

use crate::{read_text, to_json, usage, write_file, CliResult, Common, EXIT_OK};

#[derive(Debug, Args)]
pub struct TraceInput {
    /// Trace files (JSON lines).
    #[arg(required = true)]
    pub traces: Vec<PathBuf>,
    /// `batched_mutations` or `per_file_tools`.
    #[arg(long, value_parser = parse_dialect)]
    pub dialect: Dialect,
    /// JSON object of scaffold file sizes in bytes.
    #[arg(long)]
    pub scaffold: Option<PathBuf>,
    /// Overrides the model label of every run.
    #[arg(long)]
    pub model: Option<String>,
    /// Overrides the condition label of every run.
    #[arg(long)]
    pub condition: Option<String>,
    /// Overrides the task label of every run.
    #[arg(long)]
    pub task: Option<String>,
    #[command(flatten)]
    pub common: Common,
}

fn parse_dialect(s: &str) -> Result<Dialect, String> {
    s.parse().map_err(|e: speceval_core::trace::TraceError| e.to_string())
}

fn parse_group(s: &str) -> Result<GroupBy, String> {
    s.parse()
}

#[derive(Debug, Args)]
pub struct DiffscoreArgs {
    #[command(flatten)]
    pub input: TraceInput,
    /// `model`, `condition`, `model_condition` or `task`.
    #[arg(long, value_parser = parse_group)]
    pub group_by: Option<GroupBy>,
}

#[derive(Debug, Args)]
pub struct TrajectoryArgs {
    #[command(flatten)]
    pub input: TraceInput,
    /// Raster SVG path, relative to --out when given.
    #[arg(long)]
    pub raster: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct TraceFailure {
    path: String,
    error: String,
}

struct Loaded {
    runs: Vec<(String, RunTrace)>,
    failures: Vec<TraceFailure>,
}

fn load(input: &TraceInput, err: &mut dyn Write) -> CliResult<Loaded> {
    let config = input.common.load_config()?;
    let classifier = CommandClassifier::new(&config.trace.classifier).map_err(usage)?;
    let scaffold: BTreeMap<String, u64> = match &input.scaffold {
        Some(p) => serde_json::from_str(&read_text(p)?).map_err(|e| usage(format!("{}: {e}", p.display())))?,
        None => BTreeMap::new(),
    };
    let labels = RunLabels {
        model_label: input.model.clone(),
        condition_label: input.condition.clone(),
        task_label: input.task.clone(),
        ..RunLabels::default()
    };
    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for path in &input.traces {
        let parsed = std::fs::read_to_string(path)
            .map_err(|e| e.to_string())
            .and_then(|text| parse_trace(&text, input.dialect, &scaffold, &labels, &classifier).map_err(|e| e.to_string()));
        match parsed {
            Ok(trace) => runs.push((path.display().to_string(), trace)),
            Err(e) => {
                let _ = writeln!(err, "warning: skipping {}: {e}", path.display());
                failures.push(TraceFailure { path: path.display().to_string(), error: e });
            }
        }
    }
    if runs.is_empty() {
        return Err(usage("no trace could be parsed"));
    }
    Ok(Loaded { runs, failures })
}

/// Row labels: run ids, or paths where run ids collide.
fn labels(runs: &[(String, RunTrace)]) -> Vec<String> {
    let mut seen = BTreeMap::new();
    for (_, t) in runs {
        *seen.entry(t.run_id.as_str()).or_insert(0) += 1;
    }
    runs.iter()
        .map(|(path, t)| if seen[t.run_id.as_str()] > 1 { path.clone() } else { t.run_id.clone() })
        .collect()
}

#[derive(Debug, Serialize)]
struct RunScore<'a> {
    label: String,
    path: &'a str,
    run_id: &'a str,
    model_label: &'a str,
    condition_label: &'a str,
    task_label: &'a str,
    score: Option<f64>,
    result: &'a DiffScoreResult,
}

#[derive(Debug, Serialize)]
struct DiffscoreOutput<'a> {
    runs: Vec<RunScore<'a>>,
    groups: Vec<speceval_core::trace::GroupMeans>,
    group_by: Option<GroupBy>,
    /// Pearson correlation of each score with the run's task score.
    correlation: BTreeMap<&'static str, Option<f64>>,
    failures: Vec<TraceFailure>,
}

pub fn run_diffscore(args: &DiffscoreArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<i32> {
    let out_dir = args.input.common.out_dir()?;
    let Loaded { runs, mut failures } = load(&args.input, err)?;
    let names = labels(&runs);
    let mut scored: Vec<(usize, DiffScoreResult)> = Vec::new();
    for (i, (path, trace)) in runs.iter().enumerate() {
        match compute_diff_score(trace) {
            Ok(d) => scored.push((i, d)),
            Err(e) => {
                let _ = writeln!(err, "warning: skipping {path}: {e}");
                failures.push(TraceFailure { path: path.clone(), error: e.to_string() });
            }
        }
    }
    if scored.is_empty() {
        return Err(usage("no trace has file mutations to score"));
    }

    let rows: Vec<Vec<String>> = scored.iter().map(|(i, d)| diff_row(&names[*i], d)).collect();
    let _ = write!(out, "{}", format_table(&DIFF_HEADERS, &rows));

    let pairs: Vec<(&RunTrace, &DiffScoreResult)> = scored.iter().map(|(i, d)| (&runs[*i].1, d)).collect();
    let groups = args.group_by.map(|by| group_means(&pairs, by)).unwrap_or_default();
    if !groups.is_empty() {
        let rows: Vec<Vec<String>> = groups.iter().map(group_row).collect();
        let _ = writeln!(out);
        let _ = write!(out, "{}", format_table(&GROUP_HEADERS, &rows));
    }

    let with_score: Vec<(f64, &DiffScoreResult)> = pairs.iter().filter_map(|(t, d)| t.score.map(|s| (s, *d))).collect();
    let task_scores: Vec<f64> = with_score.iter().map(|(s, _)| *s).collect();
    let mut correlation = BTreeMap::new();
    for (name, f) in [("surgical", (|d: &DiffScoreResult| d.surgical) as fn(&DiffScoreResult) -> f64), ("strict", |d| d.strict)] {
        let xs: Vec<f64> = with_score.iter().map(|(_, d)| f(d)).collect();
        let r = correlate(&xs, &task_scores).ok();
        if let Some(r) = r {
            let _ = writeln!(out, "pearson r({name}, score) = {r:.3} over {} runs", xs.len());
        }
        correlation.insert(name, r);
    }
    if !failures.is_empty() {
        let _ = writeln!(out, "{} trace(s) skipped; see warnings", failures.len());
    }

    if let Some(dir) = out_dir {
        let output = DiffscoreOutput {
            runs: scored
                .iter()
                .map(|(i, d)| {
                    let (path, t) = &runs[*i];
                    RunScore {
                        label: names[*i].clone(),
                        path,
                        run_id: &t.run_id,
                        model_label: &t.model_label,
                        condition_label: &t.condition_label,
                        task_label: &t.task_label,
                        score: t.score,
                        result: d,
                    }
                })
                .collect(),
            groups,
            group_by: args.group_by,
            correlation,
            failures,
        };
        write_file(&dir.join("diffscore.json"), &to_json(&output))?;
    }
    Ok(EXIT_OK)
}

#[derive(Debug, Serialize)]
struct TrajectoryOutput {
    categories: Vec<&'static str>,
    models: BTreeMap<String, TrajectorySummary>,
    unscored_runs: Vec<String>,
    failures: Vec<TraceFailure>,
}

fn matrix_table(first: &str, row_names: &[String], rows: &[[f64; 5]]) -> String {
    let mut headers = vec![first];
    headers.extend(EventCategory::ALL.iter().map(|c| c.as_str()));
    let body: Vec<Vec<String>> = row_names
        .iter()
        .zip(rows)
        .map(|(name, row)| std::iter::once(name.clone()).chain(row.iter().map(|v| format!("{v:.3}"))).collect())
        .collect();
    format_table(&headers, &body)
}

fn resolve_output(out_dir: Option<&Path>, path: &Path) -> PathBuf {
    match out_dir {
        Some(dir) if path.is_relative() => dir.join(path),
        _ => path.to_path_buf(),
    }
}

pub fn run_trajectory(args: &TrajectoryArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<i32> {
    let config = args.input.common.load_config()?;
    let out_dir = args.input.common.out_dir()?;
    let Loaded { runs, failures } = load(&args.input, err)?;
    let traces: Vec<RunTrace> = runs.iter().map(|(_, t)| t.clone()).collect();
    let models = compute_trajectory(&traces).map_err(usage)?;

    let bins: Vec<String> = (0..speceval_core::trace::trajectory::BINS)
        .map(|b| format!("{:.1}-{:.1}", b as f64 / 10.0, (b + 1) as f64 / 10.0))
        .collect();
    let from: Vec<String> = EventCategory::ALL.iter().map(|c| c.as_str().to_string()).collect();
    for (model, s) in &models {
        let _ = writeln!(out, "model {model} ({} runs)", s.runs);
        let _ = write!(out, "{}", matrix_table("progress", &bins, &s.bin_mix));
        let _ = writeln!(out);
        let _ = write!(out, "{}", matrix_table("from \\ to", &from, &s.transitions));
        for w in &s.warnings {
            let _ = writeln!(out, "warning: {w}");
        }
        let _ = writeln!(out);
    }

    let unscored: BTreeSet<String> = traces.iter().filter(|t| t.score.is_none()).map(|t| t.run_id.clone()).collect();
    if !unscored.is_empty() {
        let _ = writeln!(out, "{} run(s) without a score are drawn with residual 0: {}", unscored.len(), unscored.iter().cloned().collect::<Vec<_>>().join(", "));
    }
    if let Some(raster) = &args.raster {
        let rows = build_raster(&traces, &config.trace.raster);
        let path = resolve_output(out_dir, raster);
        write_file(&path, raster_svg(&rows).as_bytes())?;
        let _ = writeln!(err, "wrote {}", path.display());
    }
    if !failures.is_empty() {
        let _ = writeln!(out, "{} trace(s) skipped; see warnings", failures.len());
    }
    if let Some(dir) = out_dir {
        let output = TrajectoryOutput {
            categories: EventCategory::ALL.iter().map(|c| c.as_str()).collect(),
            models,
            unscored_runs: unscored.into_iter().collect(),
            failures,
        };
        write_file(&dir.join("trajectory.json"), &to_json(&output))?;
    }
    Ok(EXIT_OK)
}
