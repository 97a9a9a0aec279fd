//! `gmk analyze` and `gmk windows`: word-aligned motion description.

use std::path::{Path, PathBuf};

use clap::Args;
use gmk_core::motion::{default_smooth_window, Manifest};
use gmk_core::pattern::CharacterizeOptions;
use gmk_core::windowing::{
    describe_window_with, load_word_timings, per_channel_range_std, segment_windows, Window,
};
use serde_json::json;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::util::{emit_report, load_canonical_sequence};

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Pose CSV (one frame per row).
    #[arg(long)]
    pub poses: PathBuf,
    /// Manifest JSON with fps and channel layout.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Word timings JSON-lines file.
    #[arg(long)]
    pub words: PathBuf,
    /// Joint whose position channels define the body root.
    #[arg(long, default_value = "root")]
    pub root_joint: String,
}

#[derive(Debug, Args)]
pub struct WindowsArgs {
    /// Word timings JSON-lines file.
    #[arg(long)]
    pub words: PathBuf,
}

fn characterize_options(cfg: &RunConfig, fps: f64) -> CharacterizeOptions {
    let smooth_window = if cfg.analysis.smooth_window == 0 {
        default_smooth_window(fps)
    } else {
        cfg.analysis.smooth_window
    };
    CharacterizeOptions {
        smooth_window,
        oscillation_min_reversals: cfg.analysis.oscillation_min_reversals,
        tier_cutpoints: cfg.analysis.tier_cutpoints,
    }
}

pub fn run_windows(
    args: &WindowsArgs,
    cfg: &RunConfig,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let words = load_word_timings(&args.words)?;
    let windows = segment_windows(&words, cfg.windowing.min_len, cfg.windowing.max_len)?;
    let report = json!({
        "config": cfg,
        "n_windows": windows.len(),
        "windows": windows,
    });
    emit_report(&report, out)
}

pub fn run_analyze(
    args: &AnalyzeArgs,
    cfg: &RunConfig,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let manifest = Manifest::load(&args.manifest)?;
    let seq = load_canonical_sequence(&args.poses, &manifest, &args.root_joint)?;
    let words = load_word_timings(&args.words)?;
    let windows = segment_windows(&words, cfg.windowing.min_len, cfg.windowing.max_len)?;

    // Reference spread for tier grading: per-channel std of window ranges,
    // floored at the static threshold so degenerate corpora stay gradable.
    let mut sigma_ref = per_channel_range_std(&seq, &windows);
    for s in &mut sigma_ref {
        if !(*s > cfg.thresholds.eps_static) {
            *s = cfg.thresholds.eps_static;
        }
    }

    let opts = characterize_options(cfg, seq.fps());
    let mut window_reports = Vec::with_capacity(windows.len());
    for win in &windows {
        let regions = describe_window_with(win, &seq, &cfg.thresholds, &sigma_ref, &opts)?;
        window_reports.push(window_report(win, &seq, regions)?);
    }

    let report = json!({
        "config": cfg,
        "fps": seq.fps(),
        "frames": seq.frames(),
        "n_windows": windows.len(),
        "windows": window_reports,
    });
    emit_report(&report, out)
}

fn window_report(
    win: &Window,
    seq: &gmk_core::motion::PoseSequence,
    regions: Vec<gmk_core::windowing::RegionDescription>,
) -> Result<serde_json::Value, CliError> {
    let (first, last) = win.frame_span(seq.fps(), seq.frames())?;
    Ok(json!({
        "start": win.start,
        "end": win.end,
        "residue": win.residue,
        "frame_span": [first, last],
        "words": win.words,
        "regions": regions,
    }))
}
