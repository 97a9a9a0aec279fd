//! Run configuration: one JSON file covering every subcommand, echoed into
//! each report so runs are self-describing.

use std::fs;
use std::path::Path;

use gmk_core::pattern::{Thresholds, TierCutpoints};
use gmk_core::tokenizer::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub thresholds: Thresholds,
    pub windowing: WindowingCfg,
    pub analysis: AnalysisCfg,
    pub tokenizer: TokenizerCfg,
    pub losses: LossesCfg,
    pub metrics: MetricsCfg,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowingCfg {
    pub min_len: f64,
    pub max_len: f64,
}

impl Default for WindowingCfg {
    fn default() -> Self {
        Self {
            min_len: 1.0,
            max_len: 2.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisCfg {
    /// Smoothing window for shape analysis; 0 derives one from the frame
    /// rate, otherwise must be odd.
    pub smooth_window: usize,
    pub oscillation_min_reversals: usize,
    pub tier_cutpoints: TierCutpoints,
}

impl Default for AnalysisCfg {
    fn default() -> Self {
        Self {
            smooth_window: 0,
            oscillation_min_reversals: 3,
            tier_cutpoints: TierCutpoints::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TokenizerCfg {
    pub n: usize,
    pub d: usize,
    pub k: usize,
    pub iters: usize,
    pub ema_decay: f64,
    pub dead_threshold: f64,
}

impl Default for TokenizerCfg {
    fn default() -> Self {
        Self {
            n: 8,
            d: 32,
            k: 8192,
            iters: 25,
            ema_decay: 0.99,
            dead_threshold: 0.01,
        }
    }
}

impl TokenizerCfg {
    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            n: self.n,
            d: self.d,
            k: self.k,
            iters: self.iters,
            ema_decay: self.ema_decay,
            dead_threshold: self.dead_threshold,
            seed,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossesCfg {
    pub lambda_vq: f64,
    pub lambda_sem: f64,
}

impl Default for LossesCfg {
    fn default() -> Self {
        Self {
            lambda_vq: 0.25,
            lambda_sem: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsCfg {
    pub bc_sigma: f64,
    pub batch_size: usize,
    pub k_list: Vec<usize>,
}

impl Default for MetricsCfg {
    fn default() -> Self {
        Self {
            bc_sigma: 0.1,
            batch_size: 128,
            k_list: vec![1, 10],
        }
    }
}

impl RunConfig {
    /// Load a config file, falling back to defaults when `path` is `None`.
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let cfg = match path {
            None => Self::default(),
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| {
                    CliError::Config(format!("cannot read config {}: {e}", p.display()))
                })?;
                serde_json::from_str(&text).map_err(|e| {
                    CliError::Config(format!("invalid config {}: {e}", p.display()))
                })?
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !self.thresholds.is_valid() {
            return Err(CliError::Config(
                "thresholds require 0 < eps_static, 0 < eps, eps_static < eps_slow".into(),
            ));
        }
        if !(self.windowing.min_len > 0.0 && self.windowing.min_len <= self.windowing.max_len) {
            return Err(CliError::Config(
                "windowing requires 0 < min_len <= max_len".into(),
            ));
        }
        if self.analysis.smooth_window != 0 && self.analysis.smooth_window % 2 == 0 {
            return Err(CliError::Config(
                "analysis.smooth_window must be 0 (auto) or odd".into(),
            ));
        }
        if !self.analysis.tier_cutpoints.is_valid() {
            return Err(CliError::Config(
                "tier cut-points must be positive and strictly increasing".into(),
            ));
        }
        let t = &self.tokenizer;
        if t.n == 0 || t.d == 0 || t.k == 0 || t.iters == 0 {
            return Err(CliError::Config(
                "tokenizer n, d, k, iters must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&t.ema_decay) {
            return Err(CliError::Config("tokenizer.ema_decay must lie in [0, 1)".into()));
        }
        if t.dead_threshold < 0.0 {
            return Err(CliError::Config(
                "tokenizer.dead_threshold must be nonnegative".into(),
            ));
        }
        if self.losses.lambda_vq < 0.0 || self.losses.lambda_sem < 0.0 {
            return Err(CliError::Config("loss weights must be nonnegative".into()));
        }
        if !(self.metrics.bc_sigma > 0.0) {
            return Err(CliError::Config("metrics.bc_sigma must be positive".into()));
        }
        if self.metrics.batch_size == 0 {
            return Err(CliError::Config("metrics.batch_size must be positive".into()));
        }
        if self.metrics.k_list.is_empty() || self.metrics.k_list.iter().any(|&k| k == 0) {
            return Err(CliError::Config(
                "metrics.k_list must be a nonempty list of positive k".into(),
            ));
        }
        Ok(())
    }
}
