//! `gmk stats`: corpus statistics over intention annotations.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::Args;
use gmk_core::annotations::{corpus_report, parse_annotations, GestureFunction, FUNCTION_COUNT};
use serde_json::json;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::util::{emit_report, write_atomic};

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Annotation JSON-lines file.
    #[arg(long)]
    pub annotations: PathBuf,
    /// Also write the co-occurrence matrix as CSV for heatmap plotting.
    #[arg(long)]
    pub cooccur_csv: Option<PathBuf>,
}

pub fn run_stats(args: &StatsArgs, cfg: &RunConfig, out: Option<&Path>) -> Result<(), CliError> {
    let records = parse_annotations(&args.annotations)?;
    let stats = corpus_report(&records)?;

    let labels: Vec<&str> = GestureFunction::ALL.iter().map(|f| f.label()).collect();
    let report = json!({
        "config": cfg,
        "record_count": stats.record_count,
        "split_counts": stats.split_counts,
        "labels": labels,
        "distribution": {
            "occurrence_share": stats.distribution.occurrence_share,
            "presence_rate": stats.distribution.presence_rate,
        },
        "cooccurrence": {
            "support": stats.cooccurrence.support,
            "matrix": stats.cooccurrence.probs,
        },
        "correlations": stats.correlations,
    });

    if let Some(csv_path) = &args.cooccur_csv {
        let mut csv = String::from("function");
        for label in &labels {
            write!(csv, ",{label}").expect("string write");
        }
        csv.push('\n');
        for i in 0..FUNCTION_COUNT {
            write!(csv, "{}", labels[i]).expect("string write");
            for j in 0..FUNCTION_COUNT {
                write!(csv, ",{:.6}", stats.cooccurrence.probs[i][j]).expect("string write");
            }
            csv.push('\n');
        }
        write_atomic(csv_path, csv.as_bytes())?;
    }

    emit_report(&report, out)
}
