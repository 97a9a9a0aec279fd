//! Word-timestamp windowing and per-region gesture description.
//!
//! Utterances are cut into sub-windows of roughly one to two seconds from
//! word-level timestamps: consecutive words are grouped greedily, over-long
//! spans are recursively bisected, and the resulting windows tile the
//! utterance without gaps. Each window is then described per body region by
//! running the pattern analysis on every channel slice, and anchored to three
//! keyframes (first, last, and the most informative interior pose).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::motion::{BodyRegion, ChannelKind, PoseSequence};
use crate::pattern::{
    characterize_with, CharacterizeOptions, MovementDescriptor, PatternError, Thresholds,
};

/// Slack for floating-point length comparisons on second-valued spans.
const LEN_SLACK: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum WindowingError {
    #[error("word {index} starts before the previous word")]
    UnsortedWords { index: usize },
    #[error("word {index} overlaps the previous word")]
    OverlappingWords { index: usize },
    #[error("word {index} has an empty or negative span")]
    InvalidWord { index: usize },
    #[error("window lengths invalid: require 0 < min_len <= max_len")]
    InvalidLengths,
    #[error("frame span [{first}, {last}] outside sequence of {frames} frames")]
    FrameSpanOutOfBounds {
        first: usize,
        last: usize,
        frames: usize,
    },
    #[error("window has an empty frame span")]
    EmptySpan,
    #[error("expected {expected} per-channel sigma values, found {found}")]
    SigmaLengthMismatch { expected: usize, found: usize },
    #[error("line {line}: malformed JSON: {message}")]
    MalformedJson { line: usize, message: String },
    #[error(transparent)]
    Pattern(#[from] PatternError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One word with its start and end time in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordTiming {
    pub word: String,
    pub start: f64,
    pub end: f64,
}

/// A sub-window of an utterance.
///
/// Non-residue windows stay within the configured length bounds; `residue`
/// marks windows where that was unavoidable (utterances shorter than the
/// minimum, or fragments that could not be merged without exceeding the
/// maximum).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub words: Vec<WordTiming>,
    pub start: f64,
    pub end: f64,
    pub residue: bool,
}

impl Window {
    /// Length in seconds.
    pub fn len_secs(&self) -> f64 {
        self.end - self.start
    }

    /// Inclusive frame span at a frame rate, clamped to the sequence length.
    ///
    /// The first frame must lie inside the sequence; the last frame is
    /// clamped so that utterances marginally longer than the pose data are
    /// still analyzable.
    pub fn frame_span(&self, fps: f64, total_frames: usize) -> Result<(usize, usize), WindowingError> {
        let first = (self.start * fps).floor() as usize;
        let last = (self.end * fps).ceil() as usize;
        if total_frames == 0 || first >= total_frames {
            return Err(WindowingError::FrameSpanOutOfBounds {
                first,
                last,
                frames: total_frames,
            });
        }
        Ok((first, last.min(total_frames - 1)))
    }
}

/// Load word timings from a JSON-lines file: `{"word", "start", "end"}`.
pub fn load_word_timings(path: &Path) -> Result<Vec<WordTiming>, WindowingError> {
    let text = fs::read_to_string(path)?;
    let mut words = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let w: WordTiming =
            serde_json::from_str(line).map_err(|e| WindowingError::MalformedJson {
                line: i + 1,
                message: e.to_string(),
            })?;
        words.push(w);
    }
    Ok(words)
}

fn validate_words(words: &[WordTiming]) -> Result<(), WindowingError> {
    for (i, w) in words.iter().enumerate() {
        if !(w.start < w.end) || w.start < 0.0 {
            return Err(WindowingError::InvalidWord { index: i });
        }
        if i > 0 {
            if w.start < words[i - 1].start {
                return Err(WindowingError::UnsortedWords { index: i });
            }
            if w.start < words[i - 1].end {
                return Err(WindowingError::OverlappingWords { index: i });
            }
        }
    }
    Ok(())
}

struct Piece {
    start: f64,
    end: f64,
    words: Vec<WordTiming>,
}

/// Segment an utterance into windows of `min_len..=max_len` seconds.
///
/// Words are grouped greedily while the span stays within `max_len`; each
/// group's window extends to the next group's first word, so the windows tile
/// `[first word start, last word end]`. Over-long windows are bisected at
/// their temporal midpoint, snapping the cut off word interiors (words longer
/// than `max_len` are themselves split, with clipped copies on both sides).
/// Windows shorter than `min_len` merge into their predecessor when that
/// stays within `max_len`, and otherwise carry `residue = true`.
pub fn segment_windows(
    words: &[WordTiming],
    min_len: f64,
    max_len: f64,
) -> Result<Vec<Window>, WindowingError> {
    if !(min_len > 0.0) || !(min_len <= max_len) {
        return Err(WindowingError::InvalidLengths);
    }
    validate_words(words)?;
    if words.is_empty() {
        return Ok(Vec::new());
    }

    // Greedy grouping of consecutive words.
    let mut groups: Vec<Vec<WordTiming>> = Vec::new();
    let mut cur: Vec<WordTiming> = vec![words[0].clone()];
    for w in &words[1..] {
        if w.end - cur[0].start <= max_len + LEN_SLACK {
            cur.push(w.clone());
        } else {
            groups.push(std::mem::take(&mut cur));
            cur.push(w.clone());
        }
    }
    groups.push(cur);

    // Each group's span runs to the next group's first word, absorbing the
    // inter-group silence so the windows tile the utterance.
    let mut pieces: Vec<Piece> = Vec::new();
    for gi in 0..groups.len() {
        let start = groups[gi][0].start;
        let end = if gi + 1 < groups.len() {
            groups[gi + 1][0].start
        } else {
            groups[gi].last().expect("groups are nonempty").end
        };
        let mut flat = Vec::new();
        for piece in bisect(
            Piece {
                start,
                end,
                words: std::mem::take(&mut groups[gi]),
            },
            max_len,
        ) {
            flat.push(piece);
        }
        pieces.extend(flat);
    }

    // Merge sub-minimum windows into their predecessor where possible.
    let mut out: Vec<Window> = Vec::new();
    for piece in pieces {
        let short = piece.end - piece.start + LEN_SLACK < min_len;
        if short {
            if let Some(prev) = out.last_mut() {
                if piece.end - prev.start <= max_len + LEN_SLACK {
                    prev.end = piece.end;
                    prev.words.extend(piece.words);
                    prev.residue = prev.len_secs() + LEN_SLACK < min_len;
                    continue;
                }
            }
        }
        out.push(Window {
            words: piece.words,
            start: piece.start,
            end: piece.end,
            residue: short,
        });
    }
    Ok(out)
}

fn bisect(piece: Piece, max_len: f64) -> Vec<Piece> {
    let mut out = Vec::new();
    bisect_into(piece, max_len, &mut out);
    out
}

fn bisect_into(piece: Piece, max_len: f64, out: &mut Vec<Piece>) {
    if piece.end - piece.start <= max_len + LEN_SLACK {
        out.push(piece);
        return;
    }
    let m0 = 0.5 * (piece.start + piece.end);
    let mut m = m0;
    if let Some(w) = piece
        .words
        .iter()
        .find(|w| w.start < m0 && m0 < w.end)
    {
        // Cut straight through words that are themselves over-long; snap the
        // cut to a word boundary otherwise.
        if w.end - w.start <= max_len + LEN_SLACK {
            let left_ok = w.start > piece.start;
            let right_ok = w.end < piece.end;
            m = match (left_ok, right_ok) {
                (true, false) => w.start,
                (false, true) => w.end,
                (true, true) => {
                    if m0 - w.start <= w.end - m0 {
                        w.start
                    } else {
                        w.end
                    }
                }
                (false, false) => m0,
            };
        }
    }
    if m <= piece.start || m >= piece.end {
        out.push(piece);
        return;
    }

    let mut left_words = Vec::new();
    let mut right_words = Vec::new();
    for w in piece.words {
        if w.end <= m {
            left_words.push(w);
        } else if w.start >= m {
            right_words.push(w);
        } else {
            left_words.push(WordTiming {
                word: w.word.clone(),
                start: w.start,
                end: m,
            });
            right_words.push(WordTiming {
                word: w.word,
                start: m,
                end: w.end,
            });
        }
    }
    bisect_into(
        Piece {
            start: piece.start,
            end: m,
            words: left_words,
        },
        max_len,
        out,
    );
    bisect_into(
        Piece {
            start: m,
            end: piece.end,
            words: right_words,
        },
        max_len,
        out,
    );
}

/// First, last, and representative frame of a window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Keyframes {
    pub first: usize,
    pub last: usize,
    pub representative: usize,
}

/// Per-channel description within a region.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChannelDescription {
    pub joint: String,
    pub kind: ChannelKind,
    pub descriptor: MovementDescriptor,
}

/// Description of one body region over one window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionDescription {
    pub region: BodyRegion,
    pub channels: Vec<ChannelDescription>,
    /// Descriptor of the channel with the largest range.
    pub summary: MovementDescriptor,
    pub keyframes: Keyframes,
}

/// Pick the first, last, and most informative interior frame of a window.
///
/// The representative frame maximizes the summed absolute deviation from the
/// straight line between the first and last poses; ties and the no-interior
/// case fall back to the first frame.
pub fn select_keyframes(
    win: &Window,
    seq: &PoseSequence,
) -> Result<Keyframes, WindowingError> {
    let (first, last) = win.frame_span(seq.fps(), seq.frames())?;
    if last < first {
        return Err(WindowingError::EmptySpan);
    }
    let data = seq.data();
    let mut representative = first;
    let mut best = 0.0f64;
    if last > first + 1 {
        let span = (last - first) as f64;
        for t in first + 1..last {
            let alpha = (t - first) as f64 / span;
            let mut dev = 0.0;
            for c in 0..seq.channel_count() {
                let interp = data[[first, c]] + alpha * (data[[last, c]] - data[[first, c]]);
                dev += (data[[t, c]] - interp).abs();
            }
            if dev > best {
                best = dev;
                representative = t;
            }
        }
    }
    Ok(Keyframes {
        first,
        last,
        representative,
    })
}

/// Describe a window per body region with default characterization options.
pub fn describe_window(
    win: &Window,
    seq: &PoseSequence,
    th: &Thresholds,
    sigma_ref_per_channel: &[f64],
) -> Result<Vec<RegionDescription>, WindowingError> {
    describe_window_with(
        win,
        seq,
        th,
        sigma_ref_per_channel,
        &CharacterizeOptions::default(),
    )
}

/// Describe a window per body region.
///
/// Every channel in the window's frame span is characterized against its own
/// `sigma_ref`; each populated region reports its channels, a summary
/// (the dominant channel by range), and the window keyframes.
pub fn describe_window_with(
    win: &Window,
    seq: &PoseSequence,
    th: &Thresholds,
    sigma_ref_per_channel: &[f64],
    opts: &CharacterizeOptions,
) -> Result<Vec<RegionDescription>, WindowingError> {
    if sigma_ref_per_channel.len() != seq.channel_count() {
        return Err(WindowingError::SigmaLengthMismatch {
            expected: seq.channel_count(),
            found: sigma_ref_per_channel.len(),
        });
    }
    let (first, last) = win.frame_span(seq.fps(), seq.frames())?;
    let keyframes = select_keyframes(win, seq)?;

    let mut regions = Vec::new();
    for region in BodyRegion::ALL {
        let channel_idx = seq.region_channels(region);
        if channel_idx.is_empty() {
            continue;
        }
        let mut channels = Vec::with_capacity(channel_idx.len());
        let mut dominant = 0usize;
        for (k, &c) in channel_idx.iter().enumerate() {
            let slice: Vec<f64> = (first..=last).map(|t| seq.data()[[t, c]]).collect();
            let descriptor =
                characterize_with(&slice, th, sigma_ref_per_channel[c], opts)?;
            if descriptor.range > channels
                .get(dominant)
                .map(|d: &ChannelDescription| d.descriptor.range)
                .unwrap_or(f64::NEG_INFINITY)
            {
                dominant = k;
            }
            channels.push(ChannelDescription {
                joint: seq.channels()[c].joint_name.clone(),
                kind: seq.channels()[c].kind,
                descriptor,
            });
        }
        let summary = channels[dominant].descriptor;
        regions.push(RegionDescription {
            region,
            channels,
            summary,
            keyframes,
        });
    }
    Ok(regions)
}

/// Population standard deviation of per-window motion ranges, per channel.
///
/// This is the reference spread used to grade tiers; channels that never move
/// report zero and should be floored by the caller.
pub fn per_channel_range_std(seq: &PoseSequence, windows: &[Window]) -> Vec<f64> {
    let c_count = seq.channel_count();
    let mut ranges: Vec<Vec<f64>> = vec![Vec::new(); c_count];
    for win in windows {
        let Ok((first, last)) = win.frame_span(seq.fps(), seq.frames()) else {
            continue;
        };
        for c in 0..c_count {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for t in first..=last {
                let v = seq.data()[[t, c]];
                lo = lo.min(v);
                hi = hi.max(v);
            }
            ranges[c].push(hi - lo);
        }
    }
    ranges
        .into_iter()
        .map(|rs| {
            if rs.is_empty() {
                return 0.0;
            }
            let n = rs.len() as f64;
            let mean = rs.iter().sum::<f64>() / n;
            let var = rs.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n;
            var.sqrt()
        })
        .collect()
}
