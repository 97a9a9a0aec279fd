//! `gmk evaluate`: metric suite over real and generated pose sets.

use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use gmk_core::metrics::{
    beat_constancy, extract_motion_beats, fgd, gaussian_stats, l1_diversity, recall_at_k,
    BeatSet, EmbeddingSet, RecallMode,
};
use gmk_core::motion::{
    default_smooth_window, load_pose_sequence, BodyRegion, Manifest, PoseSequence,
};
use gmk_core::tokenizer::{codebook_utility, quantize, reconstruct, Codebooks, LinearCodec};
use ndarray::Array2;
use serde_json::{json, Map, Value};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::util::{emit_report, read_matrix_csv};

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Real pose CSVs.
    #[arg(long, num_args = 1.., required = true)]
    pub real: Vec<PathBuf>,
    /// Generated pose CSVs (same manifest).
    #[arg(long, num_args = 1.., required = true)]
    pub generated: Vec<PathBuf>,
    /// Manifest shared by all pose files.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Codebook file; with --codec enables rFGD, utility, and L1 error.
    #[arg(long, requires = "codec")]
    pub codebook: Option<PathBuf>,
    /// Codec JSON fitted alongside the codebook.
    #[arg(long, requires = "codebook")]
    pub codec: Option<PathBuf>,
    /// JSON array of audio beat times in seconds; enables BC.
    #[arg(long)]
    pub audio_beats: Option<PathBuf>,
    /// Query embeddings CSV; with --targets enables Recall@K.
    #[arg(long, requires = "targets")]
    pub queries: Option<PathBuf>,
    /// Target embeddings CSV.
    #[arg(long, requires = "queries")]
    pub targets: Option<PathBuf>,
    /// Keep global translation when computing L1 diversity.
    #[arg(long)]
    pub keep_translation: bool,
}

fn load_set(paths: &[PathBuf], manifest: &Manifest) -> Result<Vec<PoseSequence>, CliError> {
    paths
        .iter()
        .map(|p| Ok(load_pose_sequence(p, manifest.fps, manifest.channels.clone())?))
        .collect()
}

fn stack(seqs: &[PoseSequence]) -> Result<Array2<f64>, CliError> {
    let refs: Vec<&PoseSequence> = seqs.iter().collect();
    gmk_core::motion::stack_frames(&refs)
        .ok_or_else(|| CliError::Input("pose sets must share channel layouts".into()))
}

fn upper_body_channels(seq: &PoseSequence) -> Vec<usize> {
    let mut idx: Vec<usize> = seq
        .channels()
        .iter()
        .enumerate()
        .filter(|(_, c)| c.region != BodyRegion::LegsFeet)
        .map(|(i, _)| i)
        .collect();
    if idx.is_empty() {
        idx = (0..seq.channel_count()).collect();
    }
    idx
}

pub fn run_evaluate(
    args: &EvaluateArgs,
    cfg: &RunConfig,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let manifest = Manifest::load(&args.manifest)?;
    let real = load_set(&args.real, &manifest)?;
    let generated = load_set(&args.generated, &manifest)?;

    let real_frames = stack(&real)?;
    let gen_frames = stack(&generated)?;
    let real_stats = gaussian_stats(&real_frames)?;
    let gen_stats = gaussian_stats(&gen_frames)?;
    let fgd_value = fgd(&real_stats, &gen_stats)?;

    // Tokenizer reconstruction metrics over the real set.
    let (rfgd, utility, l1_error) = match (&args.codebook, &args.codec) {
        (Some(cb_path), Some(codec_path)) => {
            let codebooks = Codebooks::load(cb_path)?;
            let codec = LinearCodec::load(codec_path)?;
            let mut recon_frames = Vec::with_capacity(real.len());
            let mut token_seqs = Vec::with_capacity(real.len());
            let mut abs_sum = 0.0f64;
            let mut count = 0usize;
            for seq in &real {
                let (recon, report) = reconstruct(seq, &codec, &codebooks)?;
                abs_sum += report.l_rec * seq.data().len() as f64;
                count += seq.data().len();
                recon_frames.push(recon);
                let latents = codec.encode(seq.data())?;
                token_seqs.push(quantize(&latents, &codebooks)?);
            }
            let recon_stacked = stack(&recon_frames)?;
            let rfgd = fgd(&real_stats, &gaussian_stats(&recon_stacked)?)?;
            let token_refs: Vec<_> = token_seqs.iter().collect();
            let utility = codebook_utility(&token_refs, &codebooks)?;
            (
                Some(rfgd),
                Some(utility),
                Some(abs_sum / count as f64),
            )
        }
        _ => (None, None, None),
    };

    let diversity = if generated.len() >= 2 {
        let refs: Vec<&PoseSequence> = generated.iter().collect();
        Some(l1_diversity(&refs, !args.keep_translation)?)
    } else {
        None
    };

    let bc = match &args.audio_beats {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
            let mut times: Vec<f64> = serde_json::from_str(&text).map_err(|e| {
                CliError::Input(format!("{}: expected a JSON array of seconds: {e}", path.display()))
            })?;
            times.sort_by(|a, b| a.partial_cmp(b).expect("finite beat times"));
            times.dedup();
            let audio = BeatSet::new(times)?;
            let mut total = 0.0;
            for seq in &generated {
                let window = if cfg.analysis.smooth_window == 0 {
                    default_smooth_window(seq.fps())
                } else {
                    cfg.analysis.smooth_window
                };
                let beats = extract_motion_beats(seq, &upper_body_channels(seq), window)?;
                total += beat_constancy(&beats, &audio, cfg.metrics.bc_sigma)?;
            }
            Some(total / generated.len() as f64)
        }
        None => None,
    };

    let recall = match (&args.queries, &args.targets) {
        (Some(q_path), Some(t_path)) => {
            let emb = EmbeddingSet::new(read_matrix_csv(q_path)?, read_matrix_csv(t_path)?)?;
            let mut per_batch = Map::new();
            let mut global = Map::new();
            for &k in &cfg.metrics.k_list {
                per_batch.insert(
                    format!("r{k}"),
                    json!(recall_at_k(
                        &emb,
                        k,
                        RecallMode::PerBatch {
                            batch_size: cfg.metrics.batch_size
                        }
                    )?),
                );
                global.insert(format!("r{k}"), json!(recall_at_k(&emb, k, RecallMode::Global)?));
            }
            Some(json!({ "per_batch": per_batch, "global": global }))
        }
        _ => None,
    };

    let report = json!({
        "config": cfg,
        "real_sequences": real.len(),
        "generated_sequences": generated.len(),
        "fgd": fgd_value,
        "rfgd": rfgd,
        "codebook_utility": utility,
        "l1_error": l1_error,
        "l1_diversity": diversity,
        "bc": bc,
        "recall": recall.unwrap_or(Value::Null),
    });
    emit_report(&report, out)
}
