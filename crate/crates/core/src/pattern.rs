//! Rule-based motion pattern analysis of 1-D trajectories.
//!
//! A trajectory is reduced to its boundary values, global extrema, range, and
//! net change; boolean extrema-boundary relations then drive a deterministic
//! rule cascade that names the motion pattern (round trip, return to extreme,
//! peak between, ...). Direction, movement magnitude, qualitative tier, and
//! shape (monotonic / bidirectional / oscillatory) complete the description.
//!
//! The whole pipeline is O(T) per channel, threshold-driven, and needs no
//! training data.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::motion::smooth;

#[derive(Debug, Error)]
pub enum PatternError {
    #[error("thresholds invalid: require 0 < eps_static, 0 < eps, eps_static < eps_slow")]
    InvalidThresholds,
    #[error("sigma_ref must be positive and finite, got {0}")]
    NonPositiveSigma(f64),
    #[error("tier cut-points must be positive and strictly increasing")]
    InvalidTierCutpoints,
}

/// Detection and classification thresholds, in channel units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// Range below which motion counts as static.
    pub eps_static: f64,
    /// Tolerance for "boundary value is near an extremum".
    pub eps: f64,
    /// Net-change magnitude below which non-static movement counts as slow.
    pub eps_slow: f64,
}

impl Thresholds {
    pub fn new(eps_static: f64, eps: f64, eps_slow: f64) -> Result<Self, PatternError> {
        let th = Self {
            eps_static,
            eps,
            eps_slow,
        };
        if th.is_valid() {
            Ok(th)
        } else {
            Err(PatternError::InvalidThresholds)
        }
    }

    pub fn is_valid(&self) -> bool {
        self.eps_static > 0.0
            && self.eps > 0.0
            && self.eps_static < self.eps_slow
            && self.eps_static.is_finite()
            && self.eps.is_finite()
            && self.eps_slow.is_finite()
    }

    /// Defaults for joint-angle channels (radians).
    pub fn for_angles() -> Self {
        Self {
            eps_static: 0.02,
            eps: 0.01,
            eps_slow: 0.1,
        }
    }

    /// Defaults for positional channels (meters).
    pub fn for_positions() -> Self {
        Self {
            eps_static: 0.01,
            eps: 0.005,
            eps_slow: 0.05,
        }
    }
}

impl Default for Thresholds {
    fn default() -> Self {
        Self::for_angles()
    }
}

/// Qualitative motion pattern of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternClass {
    Linear,
    RoundTrip,
    ReturnToExtreme,
    PeakAtStart,
    PeakAtEnd,
    PeakBetween,
    SingleExtremeInside,
    ComplexExtrema,
    InsufficientData,
}

/// Sign of the net change.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Positive,
    Negative,
    None,
}

/// Coarse movement magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MovementClass {
    Static,
    Slow,
    Significant,
}

/// Qualitative amplitude tier relative to a reference spread.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    VerySlight,
    Slight,
    Moderate,
    Significant,
}

/// Trajectory shape by direction-reversal count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Monotonic,
    Bidirectional,
    Oscillatory,
}

/// Key statistics and extrema-boundary relations of a non-static trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionStats {
    /// The analyzed series.
    pub y: Vec<f64>,
    pub y_start: f64,
    pub y_end: f64,
    /// Index of the first global maximum.
    pub i_max: usize,
    /// Index of the first global minimum.
    pub i_min: usize,
    pub y_max: f64,
    pub y_min: f64,
    /// Range `y_max - y_min`.
    pub range: f64,
    /// Net change `y_end - y_start`.
    pub net_change: f64,
    /// Start value within `eps` of the maximum / minimum.
    pub start_near_max: bool,
    pub start_near_min: bool,
    /// End value within `eps` of the maximum / minimum.
    pub end_near_max: bool,
    pub end_near_min: bool,
    /// Extremum index strictly inside the trajectory.
    pub interior_max: bool,
    pub interior_min: bool,
}

/// Outcome of the static short-circuit branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearResult {
    pub range: f64,
    pub direction: Direction,
}

/// Result of motion detection over one series.
#[derive(Debug, Clone, PartialEq)]
pub enum DetectionOutcome {
    /// Fewer than two samples.
    InsufficientData,
    /// Range below the static threshold.
    Linear(LinearResult),
    /// Full statistics for pattern classification.
    Patterned(MotionStats),
}

/// Extract motion statistics and extrema-boundary relations from a series.
///
/// Total over all inputs: one-sample series yield `InsufficientData`, series
/// whose range stays below `eps_static` yield `Linear`, everything else yields
/// the full `MotionStats`. Extrema ties break to the first occurrence.
pub fn detect_motion(y: &[f64], th: &Thresholds) -> DetectionOutcome {
    let t = y.len();
    if t <= 1 {
        return DetectionOutcome::InsufficientData;
    }
    let y_start = y[0];
    let y_end = y[t - 1];
    let mut i_max = 0usize;
    let mut i_min = 0usize;
    for (i, &v) in y.iter().enumerate().skip(1) {
        if v > y[i_max] {
            i_max = i;
        }
        if v < y[i_min] {
            i_min = i;
        }
    }
    let y_max = y[i_max];
    let y_min = y[i_min];
    let range = y_max - y_min;
    let net_change = y_end - y_start;

    if range < th.eps_static {
        return DetectionOutcome::Linear(LinearResult {
            range,
            direction: get_direction(net_change),
        });
    }

    DetectionOutcome::Patterned(MotionStats {
        y: y.to_vec(),
        y_start,
        y_end,
        i_max,
        i_min,
        y_max,
        y_min,
        range,
        net_change,
        start_near_max: (y_start - y_max).abs() <= th.eps,
        start_near_min: (y_start - y_min).abs() <= th.eps,
        end_near_max: (y_end - y_max).abs() <= th.eps,
        end_near_min: (y_end - y_min).abs() <= th.eps,
        interior_max: i_max != 0 && i_max != t - 1,
        interior_min: i_min != 0 && i_min != t - 1,
    })
}

/// Classify a non-static trajectory from its extrema-boundary relations.
///
/// The rule cascade is evaluated top to bottom; the first match wins:
/// opposite extremes at the boundaries, same extreme at both boundaries,
/// leaving from an extreme, arriving at an extreme, both extrema interior,
/// one extremum interior, and a boundary-aligned remainder.
pub fn classify_pattern(stats: &MotionStats) -> PatternClass {
    let s_max = stats.start_near_max;
    let s_min = stats.start_near_min;
    let e_max = stats.end_near_max;
    let e_min = stats.end_near_min;

    if (s_max && e_min) || (s_min && e_max) {
        PatternClass::RoundTrip
    } else if (s_max || s_min) && (e_max || e_min) {
        PatternClass::ReturnToExtreme
    } else if (s_max || s_min) && !(e_max || e_min) {
        PatternClass::PeakAtStart
    } else if (e_max || e_min) && !(s_max || s_min) {
        PatternClass::PeakAtEnd
    } else if stats.interior_max && stats.interior_min {
        PatternClass::PeakBetween
    } else if stats.interior_max ^ stats.interior_min {
        PatternClass::SingleExtremeInside
    } else {
        PatternClass::ComplexExtrema
    }
}

/// Sign of a net change, with exact zero mapping to `None`.
pub fn get_direction(delta: f64) -> Direction {
    if delta > 0.0 {
        Direction::Positive
    } else if delta < 0.0 {
        Direction::Negative
    } else {
        Direction::None
    }
}

/// Grade a movement amount against the static and slow thresholds.
pub fn classify_movement(delta: f64, th: &Thresholds) -> MovementClass {
    if delta.abs() < th.eps_static {
        MovementClass::Static
    } else if delta.abs() < th.eps_slow {
        MovementClass::Slow
    } else {
        MovementClass::Significant
    }
}

/// Tier cut-points on the ratio range / sigma_ref.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TierCutpoints {
    pub very_slight: f64,
    pub slight: f64,
    pub moderate: f64,
}

impl TierCutpoints {
    pub fn is_valid(&self) -> bool {
        0.0 < self.very_slight && self.very_slight < self.slight && self.slight < self.moderate
    }
}

impl Default for TierCutpoints {
    fn default() -> Self {
        Self {
            very_slight: 0.25,
            slight: 0.75,
            moderate: 1.5,
        }
    }
}

/// Options for [`characterize_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharacterizeOptions {
    /// Moving-average window applied before counting direction reversals.
    /// `1` leaves the series untouched; larger windows are clamped to the
    /// series length (next odd value down).
    pub smooth_window: usize,
    /// Reversal count at or above which a trajectory is oscillatory.
    pub oscillation_min_reversals: usize,
    pub tier_cutpoints: TierCutpoints,
}

impl Default for CharacterizeOptions {
    fn default() -> Self {
        Self {
            smooth_window: 1,
            oscillation_min_reversals: 3,
            tier_cutpoints: TierCutpoints::default(),
        }
    }
}

/// Full qualitative description of one trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MovementDescriptor {
    pub pattern: PatternClass,
    pub direction: Direction,
    pub magnitude: MovementClass,
    pub tier: Tier,
    pub shape: Shape,
    pub range: f64,
}

/// Count direction reversals (sign changes of consecutive differences),
/// ignoring flat steps, after optional smoothing.
pub fn count_reversals(y: &[f64], smooth_window: usize) -> usize {
    if y.len() < 3 {
        return 0;
    }
    let w = effective_window(smooth_window, y.len());
    let series = if w > 1 {
        smooth(y, w).expect("window clamped to series length")
    } else {
        y.to_vec()
    };
    let mut reversals = 0;
    let mut last_sign = 0i8;
    for pair in series.windows(2) {
        let d = pair[1] - pair[0];
        let sign = if d > 0.0 {
            1
        } else if d < 0.0 {
            -1
        } else {
            0
        };
        if sign != 0 {
            if last_sign != 0 && sign != last_sign {
                reversals += 1;
            }
            last_sign = sign;
        }
    }
    reversals
}

fn effective_window(requested: usize, len: usize) -> usize {
    let mut w = requested.max(1).min(len);
    if w % 2 == 0 {
        w -= 1;
    }
    w.max(1)
}

/// Characterize a trajectory with default options (no smoothing).
pub fn characterize(
    y: &[f64],
    th: &Thresholds,
    sigma_ref: f64,
) -> Result<MovementDescriptor, PatternError> {
    characterize_with(y, th, sigma_ref, &CharacterizeOptions::default())
}

/// Characterize a trajectory: pattern, direction, magnitude, tier, and shape.
///
/// The tier grades the motion range against `sigma_ref` (a reference spread
/// of ranges); the magnitude grades the range against the thresholds, so a
/// static report always pairs with the lowest tier. Direction follows the
/// net change.
pub fn characterize_with(
    y: &[f64],
    th: &Thresholds,
    sigma_ref: f64,
    opts: &CharacterizeOptions,
) -> Result<MovementDescriptor, PatternError> {
    if !(sigma_ref > 0.0) || !sigma_ref.is_finite() {
        return Err(PatternError::NonPositiveSigma(sigma_ref));
    }
    if !opts.tier_cutpoints.is_valid() {
        return Err(PatternError::InvalidTierCutpoints);
    }

    let (pattern, direction, range) = match detect_motion(y, th) {
        DetectionOutcome::InsufficientData => {
            (PatternClass::InsufficientData, Direction::None, 0.0)
        }
        DetectionOutcome::Linear(lin) => (PatternClass::Linear, lin.direction, lin.range),
        DetectionOutcome::Patterned(stats) => (
            classify_pattern(&stats),
            get_direction(stats.net_change),
            stats.range,
        ),
    };

    let magnitude = classify_movement(range, th);
    let cuts = opts.tier_cutpoints;
    let ratio = range / sigma_ref;
    let mut tier = if ratio < cuts.very_slight {
        Tier::VerySlight
    } else if ratio < cuts.slight {
        Tier::Slight
    } else if ratio < cuts.moderate {
        Tier::Moderate
    } else {
        Tier::Significant
    };
    if magnitude == MovementClass::Static {
        tier = Tier::VerySlight;
    }

    let reversals = count_reversals(y, opts.smooth_window);
    let shape = if reversals == 0 {
        Shape::Monotonic
    } else if reversals < opts.oscillation_min_reversals {
        Shape::Bidirectional
    } else {
        Shape::Oscillatory
    };

    Ok(MovementDescriptor {
        pattern,
        direction,
        magnitude,
        tier,
        shape,
        range,
    })
}
