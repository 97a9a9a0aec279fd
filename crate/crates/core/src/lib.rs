//! Gesture motion kit.
//!
//! A desk-scale toolkit for co-speech gesture analysis:
//!
//! - [`motion`] — pose sequence loading, canonicalization, smoothing, speed
//! - [`pattern`] — rule-based motion pattern detection and classification
//! - [`windowing`] — word-timestamp windowing, per-region descriptors, keyframes
//! - [`tokenizer`] — multi-codebook vector quantization and its losses
//! - [`metrics`] — FGD, L1 diversity, beat constancy, Recall@K
//! - [`annotations`] — intention-annotation corpora and their statistics
//!
//! All operations are deterministic: anything randomized takes an explicit
//! seed, and repeated runs over the same inputs produce byte-identical
//! artifacts.

pub mod annotations;
pub mod linalg;
pub mod metrics;
pub mod motion;
pub mod pattern;
pub mod tokenizer;
pub mod windowing;

pub use motion::{BodyRegion, ChannelDescriptor, ChannelKind, PoseSequence, SpeedSeries};
pub use pattern::{
    Direction, MotionStats, MovementClass, MovementDescriptor, PatternClass, Shape, Thresholds,
    Tier,
};
pub use windowing::{Window, WordTiming};
