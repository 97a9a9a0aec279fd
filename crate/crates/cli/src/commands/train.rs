//! `gmk train-codebook` and `gmk tokenize`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use gmk_core::motion::Manifest;
use gmk_core::tokenizer::{
    codebook_utility, fit_codec_frames, quantize, train_codebooks, vq_loss, Codebooks,
    LinearCodec, RankPolicy,
};
use ndarray::Array2;
use serde_json::json;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::util::{emit_report, read_matrix_csv, tmp_path, write_atomic};

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Latent CSV (rows of width n*d); alternative to --poses.
    #[arg(long, conflicts_with_all = ["poses", "manifest"])]
    pub latents: Option<PathBuf>,
    /// Pose CSV; requires --manifest and fits a linear codec first.
    #[arg(long, requires = "manifest")]
    pub poses: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Where to write the fitted codec (defaults to <out>.codec.json).
    #[arg(long)]
    pub codec_out: Option<PathBuf>,
    /// Where to write the per-iteration error log (defaults to <out>.log.csv).
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TokenizeArgs {
    /// Trained codebook file.
    #[arg(long)]
    pub codebook: PathBuf,
    /// Latent CSV; alternative to --poses.
    #[arg(long, conflicts_with_all = ["poses", "manifest", "codec"])]
    pub latents: Option<PathBuf>,
    /// Pose CSV; requires --manifest and --codec.
    #[arg(long, requires_all = ["manifest", "codec"])]
    pub poses: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub codec: Option<PathBuf>,
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_default();
    name.push(suffix);
    path.with_file_name(name)
}

pub fn run_train(
    args: &TrainArgs,
    cfg: &RunConfig,
    seed: u64,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let out = out.ok_or_else(|| {
        CliError::Config("train-codebook requires --out for the codebook file".into())
    })?;

    let (latents, codec): (Array2<f64>, Option<LinearCodec>) = match (&args.latents, &args.poses) {
        (Some(latents_path), None) => (read_matrix_csv(latents_path)?, None),
        (None, Some(poses_path)) => {
            let manifest_path = args.manifest.as_ref().expect("clap enforces --manifest");
            let manifest = Manifest::load(manifest_path)?;
            let frames = {
                let seq = gmk_core::motion::load_pose_sequence(
                    poses_path,
                    manifest.fps,
                    manifest.channels.clone(),
                )?;
                seq.data().clone()
            };
            let d_latent = cfg.tokenizer.n * cfg.tokenizer.d;
            let codec = fit_codec_frames(&frames, d_latent, RankPolicy::Error)?;
            let latents = codec.encode(&frames)?;
            (latents, Some(codec))
        }
        _ => {
            return Err(CliError::Config(
                "train-codebook needs exactly one of --latents or --poses".into(),
            ))
        }
    };

    let train_cfg = cfg.tokenizer.train_config(seed);
    let outcome = train_codebooks(&latents, &train_cfg)?;

    // codebook file, written atomically
    let tmp = tmp_path(out);
    outcome.codebooks.save(&tmp)?;
    fs::rename(&tmp, out)
        .map_err(|e| CliError::Input(format!("cannot finalize {}: {e}", out.display())))?;

    let codec_path = match &codec {
        Some(c) => {
            let path = args
                .codec_out
                .clone()
                .unwrap_or_else(|| sibling(out, ".codec.json"));
            let tmp = tmp_path(&path);
            c.save(&tmp)?;
            fs::rename(&tmp, &path)
                .map_err(|e| CliError::Input(format!("cannot finalize {}: {e}", path.display())))?;
            Some(path)
        }
        None => None,
    };

    let log_path = args.log.clone().unwrap_or_else(|| sibling(out, ".log.csv"));
    let mut log = String::from("iter,mean_sq_error\n");
    for (i, err) in outcome.error_history.iter().enumerate() {
        writeln!(log, "{i},{err:.17e}").expect("string write");
    }
    write_atomic(&log_path, log.as_bytes())?;

    let report = json!({
        "config": cfg,
        "seed": seed,
        "rows": latents.nrows(),
        "latent_dim": latents.ncols(),
        "k": outcome.codebooks.k(),
        "k_requested": outcome.codebooks.k_requested(),
        "k_reduced": outcome.k_reduced,
        "iterations": outcome.error_history.len(),
        "final_error": outcome.error_history.last(),
        "codebook_path": out.display().to_string(),
        "codec_path": codec_path.map(|p| p.display().to_string()),
        "log_path": log_path.display().to_string(),
    });
    emit_report(&report, None)
}

pub fn run_tokenize(
    args: &TokenizeArgs,
    cfg: &RunConfig,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let codebooks = Codebooks::load(&args.codebook)?;
    let latents: Array2<f64> = match (&args.latents, &args.poses) {
        (Some(latents_path), None) => read_matrix_csv(latents_path)?,
        (None, Some(poses_path)) => {
            let manifest_path = args.manifest.as_ref().expect("clap enforces --manifest");
            let codec_path = args.codec.as_ref().expect("clap enforces --codec");
            let manifest = Manifest::load(manifest_path)?;
            let seq = gmk_core::motion::load_pose_sequence(
                poses_path,
                manifest.fps,
                manifest.channels.clone(),
            )?;
            let codec = LinearCodec::load(codec_path)?;
            codec.encode(seq.data())?
        }
        _ => {
            return Err(CliError::Config(
                "tokenize needs exactly one of --latents or --poses".into(),
            ))
        }
    };

    let tokens = quantize(&latents, &codebooks)?;
    if let Some(path) = out {
        let tmp = tmp_path(path);
        tokens.save_csv(&tmp)?;
        fs::rename(&tmp, path)
            .map_err(|e| CliError::Input(format!("cannot finalize {}: {e}", path.display())))?;
    }

    let report = json!({
        "config": cfg,
        "rows": tokens.codes.nrows(),
        "codebooks": codebooks.n(),
        "vq_loss": vq_loss(&latents, &tokens.f_hat)?,
        "codebook_utility": codebook_utility(&[&tokens], &codebooks)?,
        "tokens_path": out.map(|p| p.display().to_string()),
    });
    emit_report(&report, None)
}
