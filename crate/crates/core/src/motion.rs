//! Pose sequence loading, canonicalization, smoothing, and differentiation.
//!
//! A pose sequence is a `T × C` matrix of per-frame channel values. Channels
//! are either joint angles (radians) or positional displacements (meters);
//! the split follows how upper-body motion is tracked: elbows, wrists, head,
//! and fingers as angles, hands as 3D positions. Everything downstream
//! (pattern analysis, windowing, tokenization, metrics) consumes these
//! sequences, so invariants are enforced at construction: at least one frame,
//! a positive frame rate, finite values only, and unique `(joint, kind)`
//! channel pairs.

use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors produced by pose sequence construction and processing.
#[derive(Debug, Error)]
pub enum MotionError {
    #[error("file not found: {0}")]
    MissingFile(PathBuf),
    #[error("file is empty: {0}")]
    EmptyFile(PathBuf),
    #[error("row {row}: expected {expected} columns, found {found}")]
    ColumnCountMismatch {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("row {row}, column {col}: non-finite value")]
    NonFiniteValue { row: usize, col: usize },
    #[error("frame rate must be positive, got {0}")]
    NonPositiveFps(f64),
    #[error("sequence must contain at least one frame")]
    NoFrames,
    #[error("duplicate channel ({joint}, {kind})")]
    DuplicateChannel { joint: String, kind: ChannelKind },
    #[error("channel count {channels} does not match data columns {columns}")]
    ChannelCountMismatch { channels: usize, columns: usize },
    #[error("channel index {0} out of range")]
    ChannelOutOfRange(usize),
    #[error("root channel index {0} out of range")]
    RootChannelMissing(usize),
    #[error("root channels must be one position_x, one position_y, one position_z")]
    RootChannelsNotPosition,
    #[error("smoothing window {window} exceeds series length {len}")]
    WindowTooLarge { window: usize, len: usize },
    #[error("smoothing window must be odd, got {0}")]
    WindowEven(usize),
    #[error("channel subset is empty")]
    EmptySubset,
    #[error("need at least {needed} frames, found {found}")]
    TooFewFrames { found: usize, needed: usize },
    #[error("manifest error: {0}")]
    Manifest(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// What a channel's scalar values mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    Angle,
    PositionX,
    PositionY,
    PositionZ,
}

impl ChannelKind {
    /// True for the three positional kinds.
    pub fn is_position(self) -> bool {
        !matches!(self, ChannelKind::Angle)
    }
}

impl fmt::Display for ChannelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ChannelKind::Angle => "angle",
            ChannelKind::PositionX => "position_x",
            ChannelKind::PositionY => "position_y",
            ChannelKind::PositionZ => "position_z",
        };
        f.write_str(s)
    }
}

/// Coarse body region a channel belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BodyRegion {
    Head,
    ArmsShoulders,
    HandsFingers,
    Torso,
    LegsFeet,
}

impl BodyRegion {
    /// All regions in canonical report order.
    pub const ALL: [BodyRegion; 5] = [
        BodyRegion::Head,
        BodyRegion::ArmsShoulders,
        BodyRegion::HandsFingers,
        BodyRegion::Torso,
        BodyRegion::LegsFeet,
    ];
}

impl fmt::Display for BodyRegion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            BodyRegion::Head => "head",
            BodyRegion::ArmsShoulders => "arms_shoulders",
            BodyRegion::HandsFingers => "hands_fingers",
            BodyRegion::Torso => "torso",
            BodyRegion::LegsFeet => "legs_feet",
        };
        f.write_str(s)
    }
}

/// Describes one column of a pose matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelDescriptor {
    #[serde(rename = "joint")]
    pub joint_name: String,
    pub kind: ChannelKind,
    pub region: BodyRegion,
}

impl ChannelDescriptor {
    pub fn new(joint: impl Into<String>, kind: ChannelKind, region: BodyRegion) -> Self {
        Self {
            joint_name: joint.into(),
            kind,
            region,
        }
    }
}

/// Sidecar manifest carrying the frame rate and channel layout of a pose CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub fps: f64,
    pub channels: Vec<ChannelDescriptor>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self, MotionError> {
        if !path.exists() {
            return Err(MotionError::MissingFile(path.to_path_buf()));
        }
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| MotionError::Manifest(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<(), MotionError> {
        let text =
            serde_json::to_string_pretty(self).map_err(|e| MotionError::Manifest(e.to_string()))?;
        fs::write(path, text)?;
        Ok(())
    }
}

/// A frames-by-channels matrix of joint values at a fixed frame rate.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseSequence {
    data: Array2<f64>,
    fps: f64,
    channels: Vec<ChannelDescriptor>,
}

impl PoseSequence {
    /// Build a sequence, validating all invariants.
    pub fn new(
        data: Array2<f64>,
        fps: f64,
        channels: Vec<ChannelDescriptor>,
    ) -> Result<Self, MotionError> {
        if data.nrows() == 0 {
            return Err(MotionError::NoFrames);
        }
        if !(fps > 0.0) || !fps.is_finite() {
            return Err(MotionError::NonPositiveFps(fps));
        }
        if channels.len() != data.ncols() {
            return Err(MotionError::ChannelCountMismatch {
                channels: channels.len(),
                columns: data.ncols(),
            });
        }
        for (i, a) in channels.iter().enumerate() {
            for b in channels.iter().skip(i + 1) {
                if a.joint_name == b.joint_name && a.kind == b.kind {
                    return Err(MotionError::DuplicateChannel {
                        joint: a.joint_name.clone(),
                        kind: a.kind,
                    });
                }
            }
        }
        for ((r, c), v) in data.indexed_iter() {
            if !v.is_finite() {
                return Err(MotionError::NonFiniteValue { row: r, col: c });
            }
        }
        Ok(Self {
            data,
            fps,
            channels,
        })
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn channels(&self) -> &[ChannelDescriptor] {
        &self.channels
    }

    /// Number of frames `T`.
    pub fn frames(&self) -> usize {
        self.data.nrows()
    }

    /// Number of channels `C`.
    pub fn channel_count(&self) -> usize {
        self.data.ncols()
    }

    /// 1-D view of a single channel across all frames.
    pub fn channel(&self, index: usize) -> Result<ArrayView1<'_, f64>, MotionError> {
        if index >= self.channel_count() {
            return Err(MotionError::ChannelOutOfRange(index));
        }
        Ok(self.data.column(index))
    }

    /// Indices of channels in the given region.
    pub fn region_channels(&self, region: BodyRegion) -> Vec<usize> {
        self.channels
            .iter()
            .enumerate()
            .filter(|(_, d)| d.region == region)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Per-frame speed of motion, one value per consecutive frame pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedSeries {
    pub values: Vec<f64>,
    pub fps: f64,
}

/// Load a pose CSV (UTF-8, comma-separated, no header, one frame per row)
/// against a declared channel layout.
pub fn load_pose_sequence(
    path: &Path,
    fps: f64,
    layout: Vec<ChannelDescriptor>,
) -> Result<PoseSequence, MotionError> {
    if !path.exists() {
        return Err(MotionError::MissingFile(path.to_path_buf()));
    }
    let text = fs::read_to_string(path)?;
    let expected = layout.len();
    let mut rows: Vec<f64> = Vec::new();
    let mut n_rows = 0usize;
    for (r, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let mut n_cols = 0usize;
        for (c, field) in line.split(',').enumerate() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| MotionError::NonFiniteValue { row: r, col: c })?;
            if !v.is_finite() {
                return Err(MotionError::NonFiniteValue { row: r, col: c });
            }
            rows.push(v);
            n_cols += 1;
        }
        if n_cols != expected {
            return Err(MotionError::ColumnCountMismatch {
                row: r,
                expected,
                found: n_cols,
            });
        }
        n_rows += 1;
    }
    if n_rows == 0 {
        return Err(MotionError::EmptyFile(path.to_path_buf()));
    }
    let data = Array2::from_shape_vec((n_rows, expected), rows)
        .expect("row-major CSV buffer matches shape");
    PoseSequence::new(data, fps, layout)
}

/// Write a pose CSV with the given number of decimal places.
///
/// Loading the result and saving it again at the same precision reproduces
/// the file byte for byte.
pub fn save_pose_sequence(
    seq: &PoseSequence,
    path: &Path,
    decimals: usize,
) -> Result<(), MotionError> {
    let mut out = fs::File::create(path)?;
    for row in seq.data.rows() {
        let line: Vec<String> = row.iter().map(|v| format!("{v:.decimals$}")).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}

/// Express all position channels relative to the body root, per frame.
///
/// `root_channels` names the root's three position channels (x, y, z in any
/// order). Every position channel of the same axis has the root trajectory
/// subtracted; angle channels pass through; the root channels themselves
/// become identically zero. Idempotent.
pub fn canonicalize(
    seq: &PoseSequence,
    root_channels: [usize; 3],
) -> Result<PoseSequence, MotionError> {
    let mut axis_root: [Option<usize>; 3] = [None; 3];
    for &idx in &root_channels {
        let desc = seq
            .channels
            .get(idx)
            .ok_or(MotionError::RootChannelMissing(idx))?;
        let slot = match desc.kind {
            ChannelKind::PositionX => 0,
            ChannelKind::PositionY => 1,
            ChannelKind::PositionZ => 2,
            ChannelKind::Angle => return Err(MotionError::RootChannelsNotPosition),
        };
        if axis_root[slot].is_some() {
            return Err(MotionError::RootChannelsNotPosition);
        }
        axis_root[slot] = Some(idx);
    }
    let [root_x, root_y, root_z] = axis_root;
    let (root_x, root_y, root_z) = match (root_x, root_y, root_z) {
        (Some(x), Some(y), Some(z)) => (x, y, z),
        _ => return Err(MotionError::RootChannelsNotPosition),
    };

    let mut data = seq.data.clone();
    for c in 0..seq.channel_count() {
        let root_col = match seq.channels[c].kind {
            ChannelKind::Angle => continue,
            ChannelKind::PositionX => root_x,
            ChannelKind::PositionY => root_y,
            ChannelKind::PositionZ => root_z,
        };
        for t in 0..seq.frames() {
            data[[t, c]] -= seq.data[[t, root_col]];
        }
    }
    PoseSequence::new(data, seq.fps, seq.channels.clone())
}

/// Centered moving average with edge replication.
///
/// The window must be odd and no longer than the series; constants are
/// preserved exactly up to rounding.
pub fn smooth(y: &[f64], window: usize) -> Result<Vec<f64>, MotionError> {
    if window % 2 == 0 {
        return Err(MotionError::WindowEven(window));
    }
    if window > y.len() {
        return Err(MotionError::WindowTooLarge {
            window,
            len: y.len(),
        });
    }
    let half = (window / 2) as isize;
    let n = y.len() as isize;
    let mut out = Vec::with_capacity(y.len());
    for i in 0..n {
        let mut acc = 0.0;
        for j in -half..=half {
            let k = (i + j).clamp(0, n - 1) as usize;
            acc += y[k];
        }
        out.push(acc / window as f64);
    }
    Ok(out)
}

/// Default smoothing window for a frame rate: about a sixth of a second,
/// rounded up to the nearest odd frame count (minimum 1).
pub fn default_smooth_window(fps: f64) -> usize {
    let w = (fps / 6.0).round() as usize;
    let w = w.max(1);
    if w % 2 == 0 {
        w + 1
    } else {
        w
    }
}

/// Frame-to-frame speed over a channel subset.
///
/// `values[t] = fps * ||row[t+1] - row[t]||_2` restricted to the subset.
pub fn speed(seq: &PoseSequence, channel_subset: &[usize]) -> Result<SpeedSeries, MotionError> {
    if channel_subset.is_empty() {
        return Err(MotionError::EmptySubset);
    }
    if seq.frames() < 2 {
        return Err(MotionError::TooFewFrames {
            found: seq.frames(),
            needed: 2,
        });
    }
    for &c in channel_subset {
        if c >= seq.channel_count() {
            return Err(MotionError::ChannelOutOfRange(c));
        }
    }
    let mut values = Vec::with_capacity(seq.frames() - 1);
    for t in 0..seq.frames() - 1 {
        let mut sq = 0.0;
        for &c in channel_subset {
            let d = seq.data[[t + 1, c]] - seq.data[[t, c]];
            sq += d * d;
        }
        values.push(seq.fps * sq.sqrt());
    }
    Ok(SpeedSeries {
        values,
        fps: seq.fps,
    })
}

/// Column-stack a slice of equally-shaped sequences into one frame matrix.
pub fn stack_frames(seqs: &[&PoseSequence]) -> Option<Array2<f64>> {
    let first = seqs.first()?;
    let c = first.channel_count();
    let total: usize = seqs.iter().map(|s| s.frames()).sum();
    let mut out = Array2::zeros((total, c));
    let mut row = 0;
    for s in seqs {
        if s.channel_count() != c {
            return None;
        }
        for r in 0..s.frames() {
            for j in 0..c {
                out[[row, j]] = s.data[[r, j]];
            }
            row += 1;
        }
    }
    Some(out)
}

/// Mean of each channel across frames.
pub fn channel_means(data: &Array2<f64>) -> Array1<f64> {
    let n = data.nrows() as f64;
    let mut mean = Array1::zeros(data.ncols());
    for row in data.rows() {
        mean += &row;
    }
    mean / n
}
