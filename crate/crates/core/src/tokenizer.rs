//! Multi-codebook vector quantization of motion latents.
//!
//! A latent row of width `D = n * d` is partitioned into `n` contiguous
//! chunks, each quantized against its own codebook of `K` entries; the
//! quantized row is the concatenation of the selected codes. Codebooks are
//! learned with full-batch EMA k-means (dead codes re-seeded from the data),
//! which keeps training gradient-free and deterministic for a fixed seed.
//!
//! The encoder/decoder pair is a principal-component linear codec fitted to
//! the pose frames. It stands in for a trained neural encoder so that
//! reconstruction metrics stay measurable at desk scale; the quantization
//! math on the latent side is unaffected by that substitution.

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use ndarray::{s, Array1, Array2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{sq_dist, sym_eigen};
use crate::motion::{MotionError, PoseSequence};

/// Loss weight for the quantization term.
pub const LAMBDA_VQ_DEFAULT: f64 = 0.25;
/// Loss weight for the semantic term.
pub const LAMBDA_SEM_DEFAULT: f64 = 1.0;

#[derive(Debug, Error)]
pub enum TokenizerError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("input is empty")]
    EmptyInput,
    #[error("need at least {needed} frames to fit a {needed}-dim codec, found {found}")]
    InsufficientFrames { found: usize, needed: usize },
    #[error("covariance rank {rank} below requested latent dimension {requested}")]
    RankDeficient { rank: usize, requested: usize },
    #[error("basis columns are not orthonormal")]
    NotOrthonormal,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("code index {code} out of range for codebook {codebook}")]
    IndexOutOfRange { codebook: usize, code: usize },
    #[error("loss components must be nonnegative")]
    NegativeComponent,
    #[error("codebook file corrupt: {0}")]
    FileFormat(String),
    #[error(transparent)]
    Motion(#[from] MotionError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

// ---------------------------------------------------------------------------
// Linear codec
// ---------------------------------------------------------------------------

/// Principal-component codec between pose channels and the latent space.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearCodec {
    mean: Array1<f64>,
    /// `C x D` with orthonormal columns.
    basis: Array2<f64>,
}

#[derive(Serialize, Deserialize)]
struct CodecFile {
    mean: Vec<f64>,
    basis: Vec<Vec<f64>>,
}

impl LinearCodec {
    /// Build a codec, checking that the basis columns are orthonormal.
    pub fn new(mean: Array1<f64>, basis: Array2<f64>) -> Result<Self, TokenizerError> {
        if mean.len() != basis.nrows() {
            return Err(TokenizerError::DimensionMismatch {
                expected: basis.nrows(),
                found: mean.len(),
            });
        }
        let gram = basis.t().dot(&basis);
        for i in 0..gram.nrows() {
            for j in 0..gram.ncols() {
                let target = if i == j { 1.0 } else { 0.0 };
                if (gram[[i, j]] - target).abs() > 1e-8 {
                    return Err(TokenizerError::NotOrthonormal);
                }
            }
        }
        Ok(Self { mean, basis })
    }

    pub fn input_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn latent_dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn mean(&self) -> &Array1<f64> {
        &self.mean
    }

    pub fn basis(&self) -> &Array2<f64> {
        &self.basis
    }

    /// Project frames (`T x C`) into the latent space (`T x D`).
    pub fn encode(&self, frames: &Array2<f64>) -> Result<Array2<f64>, TokenizerError> {
        if frames.ncols() != self.input_dim() {
            return Err(TokenizerError::DimensionMismatch {
                expected: self.input_dim(),
                found: frames.ncols(),
            });
        }
        let centered = frames - &self.mean.view().insert_axis(ndarray::Axis(0));
        Ok(centered.dot(&self.basis))
    }

    /// Map latents (`T x D`) back to frames (`T x C`).
    pub fn decode(&self, latents: &Array2<f64>) -> Result<Array2<f64>, TokenizerError> {
        if latents.ncols() != self.latent_dim() {
            return Err(TokenizerError::DimensionMismatch {
                expected: self.latent_dim(),
                found: latents.ncols(),
            });
        }
        Ok(latents.dot(&self.basis.t()) + self.mean.view().insert_axis(ndarray::Axis(0)))
    }

    pub fn save(&self, path: &Path) -> Result<(), TokenizerError> {
        let file = CodecFile {
            mean: self.mean.to_vec(),
            basis: self
                .basis
                .outer_iter()
                .map(|row| row.to_vec())
                .collect(),
        };
        let text = serde_json::to_string(&file)
            .map_err(|e| TokenizerError::FileFormat(e.to_string()))?;
        fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, TokenizerError> {
        let text = fs::read_to_string(path)?;
        let file: CodecFile =
            serde_json::from_str(&text).map_err(|e| TokenizerError::FileFormat(e.to_string()))?;
        let c = file.mean.len();
        let d = file.basis.first().map(|r| r.len()).unwrap_or(0);
        if file.basis.len() != c {
            return Err(TokenizerError::FileFormat(
                "basis row count does not match mean length".into(),
            ));
        }
        let mut basis = Array2::zeros((c, d));
        for (i, row) in file.basis.iter().enumerate() {
            if row.len() != d {
                return Err(TokenizerError::FileFormat("ragged basis rows".into()));
            }
            for (j, &v) in row.iter().enumerate() {
                basis[[i, j]] = v;
            }
        }
        Self::new(Array1::from_vec(file.mean), basis)
    }
}

/// What to do when the frame covariance cannot support the requested
/// latent dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankPolicy {
    Error,
    Reduce,
}

/// Fit a principal-component codec over a collection of pose sequences.
pub fn fit_codec(seqs: &[&PoseSequence], d_latent: usize) -> Result<LinearCodec, TokenizerError> {
    let frames = crate::motion::stack_frames(seqs).ok_or(TokenizerError::EmptyInput)?;
    fit_codec_frames(&frames, d_latent, RankPolicy::Error)
}

/// Fit a principal-component codec over raw frames.
///
/// The basis holds the top `d_latent` eigenvectors of the frame covariance in
/// descending eigenvalue order, each column sign-fixed so its
/// largest-magnitude element is positive. `policy` decides whether a
/// rank-deficient covariance reduces the dimension or errors.
pub fn fit_codec_frames(
    frames: &Array2<f64>,
    d_latent: usize,
    policy: RankPolicy,
) -> Result<LinearCodec, TokenizerError> {
    let n = frames.nrows();
    let c = frames.ncols();
    if n == 0 || c == 0 {
        return Err(TokenizerError::EmptyInput);
    }
    if d_latent == 0 {
        return Err(TokenizerError::InvalidConfig(
            "latent dimension must be positive".into(),
        ));
    }
    if n < d_latent {
        return Err(TokenizerError::InsufficientFrames {
            found: n,
            needed: d_latent,
        });
    }
    if d_latent > c {
        return Err(TokenizerError::DimensionMismatch {
            expected: c,
            found: d_latent,
        });
    }

    let mean = crate::motion::channel_means(frames);
    let centered = frames - &mean.view().insert_axis(ndarray::Axis(0));
    let denom = if n > 1 { (n - 1) as f64 } else { 1.0 };
    let cov = centered.t().dot(&centered) / denom;
    let (eigvals, eigvecs) = sym_eigen(&cov);

    let tol = eigvals[0].max(0.0) * 1e-10 + 1e-300;
    let rank = eigvals.iter().filter(|&&v| v > tol).count();
    let d_eff = if rank < d_latent {
        match policy {
            RankPolicy::Error => {
                return Err(TokenizerError::RankDeficient {
                    rank,
                    requested: d_latent,
                })
            }
            RankPolicy::Reduce => rank.max(1),
        }
    } else {
        d_latent
    };

    let mut basis = eigvecs.slice(s![.., ..d_eff]).to_owned();
    for mut col in basis.columns_mut() {
        let mut pivot = 0;
        for (i, v) in col.iter().enumerate() {
            if v.abs() > col[pivot].abs() {
                pivot = i;
            }
        }
        if col[pivot] < 0.0 {
            col.mapv_inplace(|v| -v);
        }
    }
    LinearCodec::new(mean, basis)
}

// ---------------------------------------------------------------------------
// Codebooks
// ---------------------------------------------------------------------------

/// `n` independent codebooks of `K` entries, each `d`-dimensional, with EMA
/// usage state for training.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebooks {
    n: usize,
    d: usize,
    k: usize,
    entries: Vec<Array2<f64>>,
    ema_counts: Vec<Vec<f64>>,
    ema_sums: Vec<Array2<f64>>,
    seed: u64,
    k_requested: Option<usize>,
}

#[derive(Serialize, Deserialize)]
struct CodebookHeader {
    n: usize,
    d: usize,
    k: usize,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    k_requested: Option<usize>,
}

impl Codebooks {
    /// Build codebooks directly from entry matrices (`K x d` each).
    pub fn from_entries(entries: Vec<Array2<f64>>, seed: u64) -> Result<Self, TokenizerError> {
        let n = entries.len();
        if n == 0 {
            return Err(TokenizerError::EmptyInput);
        }
        let k = entries[0].nrows();
        let d = entries[0].ncols();
        if k == 0 || d == 0 {
            return Err(TokenizerError::EmptyInput);
        }
        for e in &entries {
            if e.nrows() != k || e.ncols() != d {
                return Err(TokenizerError::ShapeMismatch(
                    "codebooks must share K and d".into(),
                ));
            }
            if e.iter().any(|v| !v.is_finite()) {
                return Err(TokenizerError::ShapeMismatch(
                    "codebook entries must be finite".into(),
                ));
            }
        }
        let ema_counts = vec![vec![0.0; k]; n];
        let ema_sums = vec![Array2::zeros((k, d)); n];
        Ok(Self {
            n,
            d,
            k,
            entries,
            ema_counts,
            ema_sums,
            seed,
            k_requested: None,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Requested code count when training had to shrink K to the data size.
    pub fn k_requested(&self) -> Option<usize> {
        self.k_requested
    }

    pub fn latent_dim(&self) -> usize {
        self.n * self.d
    }

    pub fn entries(&self, codebook: usize) -> &Array2<f64> {
        &self.entries[codebook]
    }

    /// Nearest code to a chunk by squared Euclidean distance; ties break to
    /// the lowest index.
    pub fn nearest(&self, codebook: usize, chunk: &[f64]) -> (usize, f64) {
        let entries = &self.entries[codebook];
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for j in 0..self.k {
            let dist = sq_dist(entries.row(j).to_slice().expect("contiguous row"), chunk);
            if dist < best_d {
                best_d = dist;
                best = j;
            }
        }
        (best, best_d)
    }

    /// Write the codebook file: one JSON header line, then the entries as
    /// row-major little-endian f64.
    pub fn save(&self, path: &Path) -> Result<(), TokenizerError> {
        let header = CodebookHeader {
            n: self.n,
            d: self.d,
            k: self.k,
            seed: self.seed,
            k_requested: self.k_requested,
        };
        let mut out = BufWriter::new(fs::File::create(path)?);
        let head =
            serde_json::to_string(&header).map_err(|e| TokenizerError::FileFormat(e.to_string()))?;
        out.write_all(head.as_bytes())?;
        out.write_all(b"\n")?;
        for cb in &self.entries {
            for v in cb.iter() {
                out.write_all(&v.to_le_bytes())?;
            }
        }
        out.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, TokenizerError> {
        let mut bytes = Vec::new();
        fs::File::open(path)?.read_to_end(&mut bytes)?;
        let newline = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| TokenizerError::FileFormat("missing header line".into()))?;
        let header: CodebookHeader = serde_json::from_slice(&bytes[..newline])
            .map_err(|e| TokenizerError::FileFormat(e.to_string()))?;
        let payload = &bytes[newline + 1..];
        let expected = header.n * header.k * header.d * 8;
        if payload.len() != expected {
            return Err(TokenizerError::FileFormat(format!(
                "expected {expected} payload bytes, found {}",
                payload.len()
            )));
        }
        let mut entries = Vec::with_capacity(header.n);
        let mut offset = 0usize;
        for _ in 0..header.n {
            let mut cb = Array2::zeros((header.k, header.d));
            for j in 0..header.k {
                for c in 0..header.d {
                    let mut buf = [0u8; 8];
                    buf.copy_from_slice(&payload[offset..offset + 8]);
                    cb[[j, c]] = f64::from_le_bytes(buf);
                    offset += 8;
                }
            }
            entries.push(cb);
        }
        let mut books = Self::from_entries(entries, header.seed)?;
        books.k_requested = header.k_requested;
        Ok(books)
    }
}

// ---------------------------------------------------------------------------
// Quantization
// ---------------------------------------------------------------------------

/// Code assignments and quantized latents for one latent matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenSequence {
    /// `T x n` code indices.
    pub codes: Array2<usize>,
    /// `T x D` quantized latents (per-row concatenation of selected codes).
    pub f_hat: Array2<f64>,
}

impl TokenSequence {
    /// Write the code indices as CSV, one latent row per line.
    pub fn save_csv(&self, path: &Path) -> Result<(), TokenizerError> {
        let mut out = BufWriter::new(fs::File::create(path)?);
        for row in self.codes.outer_iter() {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Quantize each latent row chunk-wise against the codebooks.
pub fn quantize(f: &Array2<f64>, cb: &Codebooks) -> Result<TokenSequence, TokenizerError> {
    if f.ncols() != cb.latent_dim() {
        return Err(TokenizerError::DimensionMismatch {
            expected: cb.latent_dim(),
            found: f.ncols(),
        });
    }
    if f.nrows() == 0 {
        return Err(TokenizerError::EmptyInput);
    }
    let t = f.nrows();
    let (n, d) = (cb.n(), cb.d());
    let mut codes = Array2::zeros((t, n));
    let mut f_hat = Array2::zeros((t, n * d));
    for r in 0..t {
        for i in 0..n {
            let chunk: Vec<f64> = (0..d).map(|j| f[[r, i * d + j]]).collect();
            let (idx, _) = cb.nearest(i, &chunk);
            codes[[r, i]] = idx;
            for j in 0..d {
                f_hat[[r, i * d + j]] = cb.entries(i)[[idx, j]];
            }
        }
    }
    Ok(TokenSequence { codes, f_hat })
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

/// Configuration for codebook training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub n: usize,
    pub d: usize,
    pub k: usize,
    pub iters: usize,
    /// EMA decay for center updates; `0` gives plain Lloyd steps.
    pub ema_decay: f64,
    /// Codes whose EMA usage falls below this (and receive no assignments)
    /// are re-seeded from random training chunks.
    pub dead_threshold: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            n: 8,
            d: 32,
            k: 8192,
            iters: 25,
            ema_decay: 0.99,
            dead_threshold: 0.01,
            seed: 0,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<(), TokenizerError> {
        if self.n == 0 || self.d == 0 || self.k == 0 || self.iters == 0 {
            return Err(TokenizerError::InvalidConfig(
                "n, d, k, iters must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.ema_decay) {
            return Err(TokenizerError::InvalidConfig(
                "ema_decay must lie in [0, 1)".into(),
            ));
        }
        if self.dead_threshold < 0.0 {
            return Err(TokenizerError::InvalidConfig(
                "dead_threshold must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// Result of codebook training.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub codebooks: Codebooks,
    /// Mean squared quantization error per latent element, one value per
    /// iteration, measured before that iteration's center update.
    pub error_history: Vec<f64>,
    /// True when K was reduced to the number of training rows.
    pub k_reduced: bool,
}

/// Train the codebooks with full-batch EMA k-means.
///
/// Per codebook: entries start from distinct training chunks, every iteration
/// assigns all chunks to their nearest code, and centers move to the EMA
/// ratio of assignment sums over counts (a convex pull toward the batch
/// centroid, so the full-batch error never increases). Codes that receive no
/// assignments and whose EMA usage is below the dead threshold are re-seeded
/// from random chunks. Deterministic for a fixed seed.
pub fn train_codebooks(
    latents: &Array2<f64>,
    cfg: &TrainConfig,
) -> Result<TrainOutcome, TokenizerError> {
    cfg.validate()?;
    let n_rows = latents.nrows();
    if n_rows == 0 {
        return Err(TokenizerError::EmptyInput);
    }
    if latents.ncols() != cfg.n * cfg.d {
        return Err(TokenizerError::DimensionMismatch {
            expected: cfg.n * cfg.d,
            found: latents.ncols(),
        });
    }
    let k_eff = cfg.k.min(n_rows);
    let k_reduced = k_eff < cfg.k;

    let mut entries: Vec<Array2<f64>> = Vec::with_capacity(cfg.n);
    let mut rngs: Vec<ChaCha8Rng> = Vec::with_capacity(cfg.n);
    for i in 0..cfg.n {
        let mut rng =
            ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add((i as u64).wrapping_mul(0x9E37_79B9)));
        let picks = rand::seq::index::sample(&mut rng, n_rows, k_eff);
        let mut cb = Array2::zeros((k_eff, cfg.d));
        for (j, row) in picks.iter().enumerate() {
            for c in 0..cfg.d {
                cb[[j, c]] = latents[[row, i * cfg.d + c]];
            }
        }
        entries.push(cb);
        rngs.push(rng);
    }

    let mut counts = vec![vec![0.0f64; k_eff]; cfg.n];
    let mut sums = vec![Array2::<f64>::zeros((k_eff, cfg.d)); cfg.n];
    let mut error_history = Vec::with_capacity(cfg.iters);
    let gamma = cfg.ema_decay;

    for _ in 0..cfg.iters {
        let mut total_sq = 0.0f64;
        let mut batch_counts = vec![vec![0usize; k_eff]; cfg.n];
        let mut batch_sums = vec![Array2::<f64>::zeros((k_eff, cfg.d)); cfg.n];

        for r in 0..n_rows {
            for i in 0..cfg.n {
                let chunk: Vec<f64> = (0..cfg.d).map(|c| latents[[r, i * cfg.d + c]]).collect();
                let mut best = 0usize;
                let mut best_d = f64::INFINITY;
                for j in 0..k_eff {
                    let dist = sq_dist(
                        entries[i].row(j).to_slice().expect("contiguous row"),
                        &chunk,
                    );
                    if dist < best_d {
                        best_d = dist;
                        best = j;
                    }
                }
                total_sq += best_d;
                batch_counts[i][best] += 1;
                for c in 0..cfg.d {
                    batch_sums[i][[best, c]] += chunk[c];
                }
            }
        }
        error_history.push(total_sq / (n_rows * cfg.n * cfg.d) as f64);

        for i in 0..cfg.n {
            for j in 0..k_eff {
                counts[i][j] = gamma * counts[i][j] + (1.0 - gamma) * batch_counts[i][j] as f64;
                for c in 0..cfg.d {
                    sums[i][[j, c]] =
                        gamma * sums[i][[j, c]] + (1.0 - gamma) * batch_sums[i][[j, c]];
                }
                if counts[i][j] > 0.0 {
                    for c in 0..cfg.d {
                        entries[i][[j, c]] = sums[i][[j, c]] / counts[i][j];
                    }
                }
            }
            // Re-seed dead codes. Only codes with zero assignments this
            // round may move, which keeps the full-batch error monotone.
            for j in 0..k_eff {
                if batch_counts[i][j] == 0 && counts[i][j] < cfg.dead_threshold {
                    let pick = rngs[i].random_range(0..n_rows);
                    for c in 0..cfg.d {
                        let v = latents[[pick, i * cfg.d + c]];
                        entries[i][[j, c]] = v;
                        sums[i][[j, c]] = v;
                    }
                    counts[i][j] = 1.0;
                }
            }
        }
    }

    let mut codebooks = Codebooks::from_entries(entries, cfg.seed)?;
    codebooks.ema_counts = counts;
    codebooks.ema_sums = sums;
    if k_reduced {
        codebooks.k_requested = Some(cfg.k);
    }
    Ok(TrainOutcome {
        codebooks,
        error_history,
        k_reduced,
    })
}

// ---------------------------------------------------------------------------
// Losses and metrics
// ---------------------------------------------------------------------------

/// Mean squared error between latents and their quantization.
pub fn vq_loss(f: &Array2<f64>, f_hat: &Array2<f64>) -> Result<f64, TokenizerError> {
    if f.dim() != f_hat.dim() {
        return Err(TokenizerError::ShapeMismatch(format!(
            "{:?} vs {:?}",
            f.dim(),
            f_hat.dim()
        )));
    }
    let count = f.len();
    if count == 0 {
        return Ok(0.0);
    }
    let sum: f64 = f
        .iter()
        .zip(f_hat.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(sum / count as f64)
}

/// Result of the temporal cosine-margin loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SemanticLossOutput {
    pub value: f64,
    /// Rows where either side had zero norm; such rows contribute the
    /// defined maximum of 1.
    pub zero_norm_rows: usize,
}

/// Temporal cosine margin loss: mean over rows of `relu(1 - cos)`.
pub fn semantic_loss(
    z_prime: &Array2<f64>,
    f_ref: &Array2<f64>,
) -> Result<SemanticLossOutput, TokenizerError> {
    if z_prime.dim() != f_ref.dim() {
        return Err(TokenizerError::ShapeMismatch(format!(
            "{:?} vs {:?}",
            z_prime.dim(),
            f_ref.dim()
        )));
    }
    let t = z_prime.nrows();
    if t == 0 {
        return Ok(SemanticLossOutput {
            value: 0.0,
            zero_norm_rows: 0,
        });
    }
    let mut total = 0.0;
    let mut zero_norm_rows = 0usize;
    for r in 0..t {
        let a = z_prime.row(r);
        let b = f_ref.row(r);
        let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
        let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        let cos = if na == 0.0 || nb == 0.0 {
            zero_norm_rows += 1;
            0.0
        } else {
            a.iter().zip(b.iter()).map(|(x, y)| x * y).sum::<f64>() / (na * nb)
        };
        total += (1.0 - cos).max(0.0);
    }
    Ok(SemanticLossOutput {
        value: total / t as f64,
        zero_norm_rows,
    })
}

/// Weighted combination of the three training losses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub l_rec: f64,
    pub l_vq: f64,
    pub l_sem: f64,
    pub lambda_vq: f64,
    pub lambda_sem: f64,
    pub total: f64,
}

/// Combine loss components: `total = l_rec + lambda_vq * l_vq + lambda_sem * l_sem`.
pub fn combined_loss(
    l_rec: f64,
    l_vq: f64,
    l_sem: f64,
    lambda_vq: f64,
    lambda_sem: f64,
) -> Result<LossReport, TokenizerError> {
    for v in [l_rec, l_vq, l_sem, lambda_vq, lambda_sem] {
        if v < 0.0 || !v.is_finite() {
            return Err(TokenizerError::NegativeComponent);
        }
    }
    Ok(LossReport {
        l_rec,
        l_vq,
        l_sem,
        lambda_vq,
        lambda_sem,
        total: l_rec + lambda_vq * l_vq + lambda_sem * l_sem,
    })
}

/// Percentage of codes used at least once, averaged over the codebooks.
pub fn codebook_utility(
    tokens: &[&TokenSequence],
    cb: &Codebooks,
) -> Result<f64, TokenizerError> {
    if tokens.is_empty() {
        return Ok(0.0);
    }
    let mut used = vec![vec![false; cb.k()]; cb.n()];
    for seq in tokens {
        if seq.codes.ncols() != cb.n() {
            return Err(TokenizerError::DimensionMismatch {
                expected: cb.n(),
                found: seq.codes.ncols(),
            });
        }
        for r in 0..seq.codes.nrows() {
            for i in 0..cb.n() {
                let code = seq.codes[[r, i]];
                if code >= cb.k() {
                    return Err(TokenizerError::IndexOutOfRange { codebook: i, code });
                }
                used[i][code] = true;
            }
        }
    }
    let mean_fraction: f64 = used
        .iter()
        .map(|u| u.iter().filter(|&&b| b).count() as f64 / cb.k() as f64)
        .sum::<f64>()
        / cb.n() as f64;
    Ok(mean_fraction * 100.0)
}

/// Encode, quantize, and decode a pose sequence.
///
/// Returns the reconstructed sequence and a loss report whose `l_rec` is the
/// mean absolute pose error (the L1 metric) and `l_vq` the latent MSE; the
/// semantic term is zero on this path.
pub fn reconstruct(
    seq: &PoseSequence,
    codec: &LinearCodec,
    cb: &Codebooks,
) -> Result<(PoseSequence, LossReport), TokenizerError> {
    if codec.input_dim() != seq.channel_count() {
        return Err(TokenizerError::DimensionMismatch {
            expected: seq.channel_count(),
            found: codec.input_dim(),
        });
    }
    if codec.latent_dim() != cb.latent_dim() {
        return Err(TokenizerError::DimensionMismatch {
            expected: cb.latent_dim(),
            found: codec.latent_dim(),
        });
    }
    let latents = codec.encode(seq.data())?;
    let tokens = quantize(&latents, cb)?;
    let decoded = codec.decode(&tokens.f_hat)?;
    let l_vq = vq_loss(&latents, &tokens.f_hat)?;
    let l_rec = seq
        .data()
        .iter()
        .zip(decoded.iter())
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        / seq.data().len() as f64;
    let recon = PoseSequence::new(decoded, seq.fps(), seq.channels().to_vec())?;
    let report = combined_loss(l_rec, l_vq, 0.0, LAMBDA_VQ_DEFAULT, LAMBDA_SEM_DEFAULT)?;
    Ok((recon, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motion::{BodyRegion, ChannelDescriptor, ChannelKind};
    use ndarray::array;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
        let mut r = rng(seed);
        Array2::from_shape_fn((rows, cols), |_| r.random_range(-1.0..1.0))
    }

    #[test]
    fn codec_reconstructs_planar_data_exactly() {
        // frames in a 2-D affine subspace of R^4
        let mut r = rng(7);
        let mut frames = Array2::zeros((50, 4));
        for t in 0..50 {
            let a: f64 = r.random_range(-1.0..1.0);
            let b: f64 = r.random_range(-1.0..1.0);
            frames[[t, 0]] = 1.0 + a;
            frames[[t, 1]] = 2.0 + b;
            frames[[t, 2]] = 3.0 + a + b;
            frames[[t, 3]] = 4.0 + a - b;
        }
        let codec = fit_codec_frames(&frames, 2, RankPolicy::Error).unwrap();
        let back = codec.decode(&codec.encode(&frames).unwrap()).unwrap();
        let err = frames
            .iter()
            .zip(back.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-9, "max round-trip error {err}");
    }

    #[test]
    fn full_rank_codec_is_exact() {
        let frames = random_matrix(40, 3, 11);
        let codec = fit_codec_frames(&frames, 3, RankPolicy::Error).unwrap();
        let back = codec.decode(&codec.encode(&frames).unwrap()).unwrap();
        for (a, b) in frames.iter().zip(back.iter()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn dominant_direction_matches_power_iteration() {
        // anisotropic cloud: wide in a fixed direction
        let dir = [3.0f64, 1.0, -2.0];
        let norm = (14.0f64).sqrt();
        let unit: Vec<f64> = dir.iter().map(|v| v / norm).collect();
        let mut r = rng(23);
        let mut frames = Array2::zeros((400, 3));
        for t in 0..400 {
            let major: f64 = r.random_range(-3.0..3.0);
            for c in 0..3 {
                frames[[t, c]] = major * unit[c] + r.random_range(-0.05..0.05);
            }
        }
        let codec = fit_codec_frames(&frames, 1, RankPolicy::Error).unwrap();

        // independent power-iteration oracle on the covariance
        let mean = crate::motion::channel_means(&frames);
        let centered = &frames - &mean.view().insert_axis(ndarray::Axis(0));
        let cov = centered.t().dot(&centered) / 399.0;
        let mut v = Array1::from_vec(vec![1.0, 0.0, 0.0]);
        for _ in 0..500 {
            v = cov.dot(&v);
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.mapv_inplace(|x| x / n);
        }
        let basis = codec.basis().column(0);
        let dot: f64 = basis.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
        assert!(dot.abs() > 1.0 - 1e-6, "|cos| = {}", dot.abs());
    }

    #[test]
    fn rank_deficiency_errors_or_reduces_per_policy() {
        // rank-1 data in R^3
        let mut frames = Array2::zeros((20, 3));
        for t in 0..20 {
            let a = t as f64;
            frames[[t, 0]] = a;
            frames[[t, 1]] = 2.0 * a;
            frames[[t, 2]] = -a;
        }
        assert!(matches!(
            fit_codec_frames(&frames, 2, RankPolicy::Error),
            Err(TokenizerError::RankDeficient { rank: 1, .. })
        ));
        let codec = fit_codec_frames(&frames, 2, RankPolicy::Reduce).unwrap();
        assert_eq!(codec.latent_dim(), 1);
    }

    #[test]
    fn quantize_hand_example() {
        let cb = Codebooks::from_entries(
            vec![array![[0.0], [1.0]], array![[0.0], [2.0]]],
            0,
        )
        .unwrap();
        let tokens = quantize(&array![[0.4, 1.2]], &cb).unwrap();
        assert_eq!(tokens.codes, array![[0, 1]]);
        assert_eq!(tokens.f_hat, array![[0.0, 2.0]]);
    }

    #[test]
    fn quantize_exact_match_has_zero_distance() {
        let cb = Codebooks::from_entries(
            vec![array![[1.0, 2.0], [3.0, 4.0]], array![[5.0, 6.0], [7.0, 8.0]]],
            0,
        )
        .unwrap();
        let f = array![[3.0, 4.0, 5.0, 6.0]];
        let tokens = quantize(&f, &cb).unwrap();
        assert_eq!(tokens.codes, array![[1, 0]]);
        assert_eq!(tokens.f_hat, f);
    }

    #[test]
    fn quantize_ties_break_to_first_index() {
        let cb = Codebooks::from_entries(vec![array![[0.0], [1.0]]], 0).unwrap();
        let tokens = quantize(&array![[0.5]], &cb).unwrap();
        assert_eq!(tokens.codes[[0, 0]], 0);
    }

    #[test]
    fn quantize_rejects_bad_width_and_empty_input() {
        let cb = Codebooks::from_entries(vec![array![[0.0], [1.0]]], 0).unwrap();
        assert!(matches!(
            quantize(&array![[0.0, 1.0]], &cb),
            Err(TokenizerError::DimensionMismatch { .. })
        ));
        let empty = Array2::<f64>::zeros((0, 1));
        assert!(matches!(
            quantize(&empty, &cb),
            Err(TokenizerError::EmptyInput)
        ));
    }

    fn small_cfg(n: usize, d: usize, k: usize, seed: u64) -> TrainConfig {
        TrainConfig {
            n,
            d,
            k,
            iters: 30,
            ema_decay: 0.0,
            dead_threshold: 0.5,
            seed,
        }
    }

    #[test]
    fn training_with_k_equal_n_reaches_zero_error() {
        let latents = random_matrix(16, 4, 3);
        let out = train_codebooks(&latents, &small_cfg(2, 2, 16, 5)).unwrap();
        let final_err = *out.error_history.last().unwrap();
        assert!(final_err < 1e-18, "final error {final_err}");
    }

    #[test]
    fn training_single_code_converges_to_mean() {
        let latents = random_matrix(40, 2, 9);
        let out = train_codebooks(&latents, &small_cfg(1, 2, 1, 1)).unwrap();
        let mean = crate::motion::channel_means(&latents);
        let entry = out.codebooks.entries(0).row(0);
        for (a, b) in entry.iter().zip(mean.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        // error equals the mean squared deviation per element
        let mut expected = 0.0;
        for r in 0..40 {
            for c in 0..2 {
                let d = latents[[r, c]] - mean[c];
                expected += d * d;
            }
        }
        expected /= 80.0;
        let tokens = quantize(&latents, &out.codebooks).unwrap();
        let loss = vq_loss(&latents, &tokens.f_hat).unwrap();
        assert!((loss - expected).abs() < 1e-12);
    }

    #[test]
    fn training_error_is_monotone_non_increasing() {
        for (seed, decay) in [(1u64, 0.0), (2, 0.9), (3, 0.99)] {
            let latents = random_matrix(60, 6, seed + 100);
            let cfg = TrainConfig {
                n: 3,
                d: 2,
                k: 5,
                iters: 40,
                ema_decay: decay,
                dead_threshold: 0.01,
                seed,
            };
            let out = train_codebooks(&latents, &cfg).unwrap();
            for pair in out.error_history.windows(2) {
                assert!(
                    pair[1] <= pair[0] + 1e-12,
                    "seed {seed} decay {decay}: {} -> {}",
                    pair[0],
                    pair[1]
                );
            }
        }
    }

    #[test]
    fn training_reduces_k_when_data_is_small() {
        let latents = random_matrix(5, 2, 77);
        let out = train_codebooks(&latents, &small_cfg(1, 2, 16, 0)).unwrap();
        assert!(out.k_reduced);
        assert_eq!(out.codebooks.k(), 5);
        assert_eq!(out.codebooks.k_requested(), Some(16));
    }

    #[test]
    fn training_is_deterministic() {
        let latents = random_matrix(50, 4, 8);
        let cfg = TrainConfig {
            n: 2,
            d: 2,
            k: 8,
            iters: 20,
            ema_decay: 0.95,
            dead_threshold: 0.01,
            seed: 42,
        };
        let a = train_codebooks(&latents, &cfg).unwrap();
        let b = train_codebooks(&latents, &cfg).unwrap();
        assert_eq!(a.codebooks, b.codebooks);
        let ta = quantize(&latents, &a.codebooks).unwrap();
        let tb = quantize(&latents, &b.codebooks).unwrap();
        assert_eq!(ta, tb);
    }

    #[test]
    fn vq_loss_examples() {
        let f = array![[1.0, 2.0]];
        assert_eq!(vq_loss(&f, &f).unwrap(), 0.0);
        let off = array![[2.0, 3.0]];
        assert_eq!(vq_loss(&f, &off).unwrap(), 1.0);
        let half = array![[1.5, 2.0]];
        assert_eq!(vq_loss(&f, &half).unwrap(), 0.125);
        let bad = array![[1.0]];
        assert!(matches!(
            vq_loss(&f, &bad),
            Err(TokenizerError::ShapeMismatch(_))
        ));
    }

    #[test]
    fn semantic_loss_examples() {
        let f = array![[1.0, 0.0], [0.0, 2.0]];
        let parallel = array![[3.0, 0.0], [0.0, 0.5]];
        assert_eq!(semantic_loss(&parallel, &f).unwrap().value, 0.0);
        let anti = array![[-1.0, 0.0], [0.0, -2.0]];
        assert_eq!(semantic_loss(&anti, &f).unwrap().value, 2.0);
        let ortho = array![[0.0, 1.0], [2.0, 0.0]];
        assert_eq!(semantic_loss(&ortho, &f).unwrap().value, 1.0);
    }

    #[test]
    fn semantic_loss_flags_zero_norm_rows() {
        let f = array![[1.0, 0.0], [0.0, 0.0]];
        let z = array![[1.0, 0.0], [1.0, 1.0]];
        let out = semantic_loss(&z, &f).unwrap();
        assert_eq!(out.zero_norm_rows, 1);
        assert_eq!(out.value, 0.5); // 0 for the parallel row, 1 for the degenerate one
    }

    #[test]
    fn semantic_loss_is_scale_invariant_and_bounded() {
        let mut r = rng(5);
        for _ in 0..50 {
            let z = random_matrix(6, 4, r.random());
            let f = random_matrix(6, 4, r.random());
            let base = semantic_loss(&z, &f).unwrap().value;
            assert!((0.0..=2.0).contains(&base));
            let scaled = &z * 3.5;
            let s = semantic_loss(&scaled, &f).unwrap().value;
            assert!((base - s).abs() < 1e-12);
        }
    }

    #[test]
    fn combined_loss_examples() {
        assert_eq!(
            combined_loss(0.0, 0.0, 0.0, LAMBDA_VQ_DEFAULT, LAMBDA_SEM_DEFAULT)
                .unwrap()
                .total,
            0.0
        );
        assert_eq!(
            combined_loss(1.0, 1.0, 1.0, LAMBDA_VQ_DEFAULT, LAMBDA_SEM_DEFAULT)
                .unwrap()
                .total,
            2.25
        );
        let r = combined_loss(0.5, 0.2, 0.0, LAMBDA_VQ_DEFAULT, LAMBDA_SEM_DEFAULT).unwrap();
        assert!((r.total - 0.55).abs() < 1e-12);
        assert!(matches!(
            combined_loss(-0.1, 0.0, 0.0, 0.25, 1.0),
            Err(TokenizerError::NegativeComponent)
        ));
    }

    #[test]
    fn utility_examples() {
        let cb = Codebooks::from_entries(
            vec![array![[0.0], [1.0], [2.0], [3.0]]],
            0,
        )
        .unwrap();
        let all = quantize(&array![[0.0], [1.0], [2.0], [3.0]], &cb).unwrap();
        assert_eq!(codebook_utility(&[&all], &cb).unwrap(), 100.0);
        let two = quantize(&array![[0.0], [1.0]], &cb).unwrap();
        assert_eq!(codebook_utility(&[&two], &cb).unwrap(), 50.0);
        assert_eq!(codebook_utility(&[], &cb).unwrap(), 0.0);
    }

    fn pose_seq(data: Array2<f64>) -> PoseSequence {
        let layout = (0..data.ncols())
            .map(|i| {
                ChannelDescriptor::new(
                    format!("j{i}"),
                    ChannelKind::Angle,
                    BodyRegion::ArmsShoulders,
                )
            })
            .collect();
        PoseSequence::new(data, 30.0, layout).unwrap()
    }

    #[test]
    fn lossless_path_reconstructs_exactly() {
        let frames = random_matrix(12, 4, 19);
        let seq = pose_seq(frames.clone());
        let codec = fit_codec_frames(&frames, 4, RankPolicy::Error).unwrap();
        let latents = codec.encode(&frames).unwrap();
        // codebooks seeded with the exact latent chunks (n=2, d=2, K=12)
        let entries: Vec<Array2<f64>> = (0..2)
            .map(|i| latents.slice(s![.., i * 2..(i + 1) * 2]).to_owned())
            .collect();
        let cb = Codebooks::from_entries(entries, 0).unwrap();
        let (recon, report) = reconstruct(&seq, &codec, &cb).unwrap();
        assert!(report.l_rec < 1e-9, "L1 = {}", report.l_rec);
        let max_err = seq
            .data()
            .iter()
            .zip(recon.data().iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(max_err < 1e-9);
    }

    #[test]
    fn single_code_reconstruction_matches_mean_substitution_oracle() {
        let frames = random_matrix(20, 3, 31);
        let seq = pose_seq(frames.clone());
        let codec = fit_codec_frames(&frames, 3, RankPolicy::Error).unwrap();
        let latents = codec.encode(&frames).unwrap();
        let out = train_codebooks(&latents, &small_cfg(3, 1, 1, 0)).unwrap();
        let (_, report) = reconstruct(&seq, &codec, &out.codebooks).unwrap();

        // oracle: substitute each chunk's single code explicitly
        let mut f_hat = latents.clone();
        for i in 0..3 {
            let code = out.codebooks.entries(i)[[0, 0]];
            for r in 0..20 {
                f_hat[[r, i]] = code;
            }
        }
        let decoded = codec.decode(&f_hat).unwrap();
        let expected_l1 = frames
            .iter()
            .zip(decoded.iter())
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / frames.len() as f64;
        assert!((report.l_rec - expected_l1).abs() < 1e-12);
    }

    #[test]
    fn quantized_chunks_are_codebook_members_and_optimal() {
        let latents = random_matrix(100, 6, 55);
        let out = train_codebooks(&latents, &small_cfg(3, 2, 7, 2)).unwrap();
        let cb = &out.codebooks;
        let tokens = quantize(&latents, cb).unwrap();
        for r in 0..100 {
            for i in 0..3 {
                let chunk: Vec<f64> = (0..2).map(|c| latents[[r, i * 2 + c]]).collect();
                let quantized: Vec<f64> = (0..2).map(|c| tokens.f_hat[[r, i * 2 + c]]).collect();
                let chosen = tokens.codes[[r, i]];
                // membership
                let entry: Vec<f64> = cb.entries(i).row(chosen).to_vec();
                assert_eq!(quantized, entry);
                // optimality against exhaustive search
                let chosen_d = sq_dist(&entry, &chunk);
                for j in 0..cb.k() {
                    let d = sq_dist(cb.entries(i).row(j).to_slice().unwrap(), &chunk);
                    assert!(d >= chosen_d - 1e-15);
                }
            }
        }
    }

    #[test]
    fn codebook_file_round_trips_and_is_deterministic() {
        let latents = random_matrix(30, 4, 91);
        let out = train_codebooks(&latents, &small_cfg(2, 2, 6, 13)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("a.cbk");
        let p2 = dir.path().join("b.cbk");
        out.codebooks.save(&p1).unwrap();
        out.codebooks.save(&p2).unwrap();
        assert_eq!(fs::read(&p1).unwrap(), fs::read(&p2).unwrap());
        let loaded = Codebooks::load(&p1).unwrap();
        assert_eq!(loaded.n(), 2);
        assert_eq!(loaded.k(), 6);
        for i in 0..2 {
            assert_eq!(loaded.entries(i), out.codebooks.entries(i));
        }
    }
}
