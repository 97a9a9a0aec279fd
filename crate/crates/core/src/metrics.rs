//! Gesture evaluation metrics: Fréchet gesture distance, L1 diversity,
//! beat constancy, and Recall@K retrieval scores.

use ndarray::{Array1, Array2};
use thiserror::Error;

use crate::linalg::sym_eigen;
use crate::motion::{smooth, speed, MotionError, PoseSequence};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("need at least {needed} samples, found {found}")]
    TooFewSamples { found: usize, needed: usize },
    #[error("matrix is not symmetric within tolerance")]
    NotSymmetric,
    #[error("dimension mismatch: {expected} vs {found}")]
    DimMismatch { expected: usize, found: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("need at least two sequences")]
    TooFewSequences,
    #[error("need at least {needed} frames, found {found}")]
    TooFewFrames { found: usize, needed: usize },
    #[error("beat sets must be nonempty")]
    EmptyBeats,
    #[error("beat times must be strictly increasing")]
    UnsortedBeats,
    #[error("sigma must be positive, got {0}")]
    NonPositiveSigma(f64),
    #[error("k = {k} exceeds the candidate pool of {pool}")]
    KTooLarge { k: usize, pool: usize },
    #[error("embedding set is empty")]
    EmptySet,
    #[error("embeddings must be finite")]
    NonFiniteEmbedding,
    #[error(transparent)]
    Motion(#[from] MotionError),
}

/// Mean and covariance of a feature set.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianStats {
    pub mu: Array1<f64>,
    pub sigma: Array2<f64>,
    pub count: usize,
}

/// Empirical mean and covariance (1/(N-1), symmetrized) of feature rows.
pub fn gaussian_stats(features: &Array2<f64>) -> Result<GaussianStats, MetricsError> {
    let n = features.nrows();
    if n < 2 {
        return Err(MetricsError::TooFewSamples {
            found: n,
            needed: 2,
        });
    }
    let d = features.ncols();
    let mu = crate::motion::channel_means(features);
    let centered = features - &mu.view().insert_axis(ndarray::Axis(0));
    let raw = centered.t().dot(&centered) / (n - 1) as f64;
    let mut sigma = Array2::zeros((d, d));
    for i in 0..d {
        for j in 0..d {
            sigma[[i, j]] = 0.5 * (raw[[i, j]] + raw[[j, i]]);
        }
    }
    Ok(GaussianStats {
        mu,
        sigma,
        count: n,
    })
}

/// Principal square root of a symmetric PSD matrix.
///
/// Eigenvalues below a small relative threshold (numerical noise) clamp to
/// zero, so mildly indefinite inputs still produce a real root.
pub fn matrix_sqrt_psd(s: &Array2<f64>) -> Result<Array2<f64>, MetricsError> {
    let n = s.nrows();
    if n != s.ncols() {
        return Err(MetricsError::ShapeMismatch("matrix must be square".into()));
    }
    let scale = s.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    for i in 0..n {
        for j in 0..n {
            if (s[[i, j]] - s[[j, i]]).abs() > 1e-8 * scale {
                return Err(MetricsError::NotSymmetric);
            }
        }
    }
    let (vals, vecs) = sym_eigen(s);
    let clamp = vals[0].max(0.0) * 1e-8;
    let roots: Vec<f64> = vals
        .iter()
        .map(|&v| if v > clamp { v.sqrt() } else { 0.0 })
        .collect();
    let mut out = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            let mut acc = 0.0;
            for (t, &r) in roots.iter().enumerate() {
                acc += vecs[[i, t]] * r * vecs[[j, t]];
            }
            out[[i, j]] = acc;
        }
    }
    Ok(out)
}

fn trace(m: &Array2<f64>) -> f64 {
    (0..m.nrows()).map(|i| m[[i, i]]).sum()
}

/// Fréchet distance between two Gaussians fitted to feature sets.
///
/// Evaluated in the symmetric form
/// `||mu_r - mu_g||^2 + tr(S_r) + tr(S_g) - 2 tr((S_r^{1/2} S_g S_r^{1/2})^{1/2})`,
/// which equals the textbook `(S_r S_g)^{1/2}` term for PSD inputs but stays
/// numerically stable. Nonnegative and symmetric in its arguments.
pub fn fgd(r: &GaussianStats, g: &GaussianStats) -> Result<f64, MetricsError> {
    if r.mu.len() != g.mu.len() {
        return Err(MetricsError::DimMismatch {
            expected: r.mu.len(),
            found: g.mu.len(),
        });
    }
    let sqrt_r = matrix_sqrt_psd(&r.sigma)?;
    let inner = sqrt_r.dot(&g.sigma).dot(&sqrt_r);
    let n = inner.nrows();
    let mut inner_sym = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            inner_sym[[i, j]] = 0.5 * (inner[[i, j]] + inner[[j, i]]);
        }
    }
    let cross = matrix_sqrt_psd(&inner_sym)?;
    let mean_term: f64 = r
        .mu
        .iter()
        .zip(g.mu.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    let value = mean_term + trace(&r.sigma) + trace(&g.sigma) - 2.0 * trace(&cross);
    Ok(value.max(0.0))
}

/// Average pairwise L1 distance across sequences.
///
/// Sums `|p_t^i - p_t^j|` over all ordered pairs, frames, and channels, and
/// normalizes by `2 N (N - 1)`. With `remove_translation`, each sequence's
/// position channels are centered on their temporal mean first, so constant
/// root offsets do not count as diversity.
pub fn l1_diversity(
    sequences: &[&PoseSequence],
    remove_translation: bool,
) -> Result<f64, MetricsError> {
    let n = sequences.len();
    if n < 2 {
        return Err(MetricsError::TooFewSequences);
    }
    let first = sequences[0];
    for s in sequences.iter().skip(1) {
        if s.frames() != first.frames() || s.channels() != first.channels() {
            return Err(MetricsError::ShapeMismatch(
                "sequences must share frame count and channel layout".into(),
            ));
        }
    }
    let mats: Vec<Array2<f64>> = sequences
        .iter()
        .map(|s| {
            let mut m = s.data().clone();
            if remove_translation {
                for (c, desc) in s.channels().iter().enumerate() {
                    if desc.kind.is_position() {
                        let mean =
                            (0..s.frames()).map(|t| m[[t, c]]).sum::<f64>() / s.frames() as f64;
                        for t in 0..s.frames() {
                            m[[t, c]] -= mean;
                        }
                    }
                }
            }
            m
        })
        .collect();

    let mut total = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let pair: f64 = mats[i]
                .iter()
                .zip(mats[j].iter())
                .map(|(a, b)| (a - b).abs())
                .sum();
            total += 2.0 * pair; // both ordered directions
        }
    }
    Ok(total / (2.0 * (n * (n - 1)) as f64))
}

/// A sorted set of beat times in seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct BeatSet {
    times: Vec<f64>,
}

impl BeatSet {
    pub fn new(times: Vec<f64>) -> Result<Self, MetricsError> {
        for pair in times.windows(2) {
            if !(pair[0] < pair[1]) {
                return Err(MetricsError::UnsortedBeats);
            }
        }
        Ok(Self { times })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Detect motion beats as strict local minima of the smoothed joint speed
/// over a channel subset.
///
/// `smooth_window = 1` disables smoothing; larger windows clamp to the speed
/// series length. Plateau minima report their first index. Speed sample `t`
/// sits between frames `t` and `t+1`, so a beat at sample `t` maps to time
/// `(t + 0.5) / fps`.
pub fn extract_motion_beats(
    seq: &PoseSequence,
    upper_body_channels: &[usize],
    smooth_window: usize,
) -> Result<BeatSet, MetricsError> {
    if seq.frames() < 3 {
        return Err(MetricsError::TooFewFrames {
            found: seq.frames(),
            needed: 3,
        });
    }
    let sp = speed(seq, upper_body_channels)?;
    let mut w = smooth_window.max(1).min(sp.values.len());
    if w % 2 == 0 {
        w -= 1;
    }
    let v = if w > 1 {
        smooth(&sp.values, w)?
    } else {
        sp.values.clone()
    };

    let mut beats = Vec::new();
    let len = v.len();
    let mut run_start = 0usize;
    for i in 1..=len {
        if i == len || v[i] != v[run_start] {
            let run_end = i - 1;
            if run_start > 0 && run_end + 1 < len {
                let before = v[run_start - 1];
                let after = v[run_end + 1];
                if v[run_start] < before && v[run_start] < after {
                    beats.push((run_start as f64 + 0.5) / seq.fps());
                }
            }
            run_start = i;
        }
    }
    BeatSet::new(beats)
}

/// Beat constancy: Gaussian-kernel alignment of gesture beats to their
/// nearest audio beat, averaged over the gesture beats. In `(0, 1]`.
pub fn beat_constancy(g: &BeatSet, a: &BeatSet, sigma: f64) -> Result<f64, MetricsError> {
    if g.is_empty() || a.is_empty() {
        return Err(MetricsError::EmptyBeats);
    }
    if !(sigma > 0.0) {
        return Err(MetricsError::NonPositiveSigma(sigma));
    }
    let audio = a.times();
    let mut total = 0.0;
    for &bg in g.times() {
        let idx = audio.partition_point(|&t| t < bg);
        let mut best = f64::INFINITY;
        if idx < audio.len() {
            best = best.min((audio[idx] - bg).abs());
        }
        if idx > 0 {
            best = best.min((bg - audio[idx - 1]).abs());
        }
        total += (-best * best / (2.0 * sigma * sigma)).exp();
    }
    Ok(total / g.len() as f64)
}

/// Paired query/target embeddings; row i of each side corresponds.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    queries: Array2<f64>,
    targets: Array2<f64>,
}

impl EmbeddingSet {
    pub fn new(queries: Array2<f64>, targets: Array2<f64>) -> Result<Self, MetricsError> {
        if queries.nrows() != targets.nrows() || queries.ncols() != targets.ncols() {
            return Err(MetricsError::ShapeMismatch(
                "queries and targets must share shape".into(),
            ));
        }
        if queries.iter().chain(targets.iter()).any(|v| !v.is_finite()) {
            return Err(MetricsError::NonFiniteEmbedding);
        }
        Ok(Self { queries, targets })
    }

    pub fn len(&self) -> usize {
        self.queries.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Candidate pool for retrieval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecallMode {
    /// Rank each query within consecutive batches of this size; a final
    /// partial batch is evaluated as-is.
    PerBatch { batch_size: usize },
    /// Rank each query against every target.
    Global,
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (na * nb)
}

/// Fraction of queries whose true target ranks in the cosine top-k of its
/// candidate pool, as a percentage. Ties break toward the lower target index.
pub fn recall_at_k(emb: &EmbeddingSet, k: usize, mode: RecallMode) -> Result<f64, MetricsError> {
    let n = emb.len();
    if n == 0 {
        return Err(MetricsError::EmptySet);
    }
    let nominal_pool = match mode {
        RecallMode::Global => n,
        RecallMode::PerBatch { batch_size } => {
            if batch_size == 0 {
                return Err(MetricsError::ShapeMismatch("batch size must be positive".into()));
            }
            batch_size.min(n)
        }
    };
    if k == 0 || k > nominal_pool {
        return Err(MetricsError::KTooLarge {
            k,
            pool: nominal_pool,
        });
    }

    let q: Vec<Vec<f64>> = (0..n).map(|i| emb.queries.row(i).to_vec()).collect();
    let t: Vec<Vec<f64>> = (0..n).map(|i| emb.targets.row(i).to_vec()).collect();

    let mut hits = 0usize;
    let eval = |i: usize, pool: std::ops::Range<usize>| -> bool {
        let sim_true = cosine(&q[i], &t[i]);
        let mut better = 0usize;
        for j in pool {
            if j == i {
                continue;
            }
            let sim = cosine(&q[i], &t[j]);
            if sim > sim_true || (sim == sim_true && j < i) {
                better += 1;
            }
        }
        better < k
    };

    match mode {
        RecallMode::Global => {
            for i in 0..n {
                if eval(i, 0..n) {
                    hits += 1;
                }
            }
        }
        RecallMode::PerBatch { batch_size } => {
            let mut start = 0;
            while start < n {
                let end = (start + batch_size).min(n);
                for i in start..end {
                    if eval(i, start..end) {
                        hits += 1;
                    }
                }
                start = end;
            }
        }
    }
    Ok(hits as f64 / n as f64 * 100.0)
}
