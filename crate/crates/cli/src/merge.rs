use std::io::Write;
use std::path::PathBuf;

use clap::Args;
use speceval_core::report::{load_report, merge_reports};
use speceval_core::trace::format_table;

use crate::{to_json, usage, write_file, CliResult, Common, EXIT_OK};

#[derive(Debug, Args)]
pub struct MergeArgs {
    /// `evaluation.report.json` files.
    #[arg(required = true)]
    pub reports: Vec<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

pub fn run(args: &MergeArgs, out: &mut dyn Write, _err: &mut dyn Write) -> CliResult<i32> {
    let out_dir = args.common.out_dir()?;
    let reports = args.reports.iter().map(|p| load_report(p).map_err(usage)).collect::<CliResult<Vec<_>>>()?;
    let merged = merge_reports(&reports).map_err(usage)?;

    let row = |name: &str, g: &speceval_core::report::GroupSummary| {
        vec![
            name.to_string(),
            g.runs.to_string(),
            format!("{:.4}", g.mean_s),
            format!("{:.4}", g.median_s),
            format!("{:.4}", g.mean_l),
            format!("{:.4}", g.mean_b),
        ]
    };
    let mut rows: Vec<Vec<String>> = merged.by_condition.iter().map(|(c, g)| row(c, g)).collect();
    rows.push(row("overall", &merged.overall));
    let _ = write!(out, "{}", format_table(&["condition", "runs", "mean_S", "median_S", "mean_L", "mean_B"], &rows));
    if let Some(dir) = out_dir {
        write_file(&dir.join("merged.report.json"), &to_json(&merged))?;
    }
    Ok(EXIT_OK)
}
