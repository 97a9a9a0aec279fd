//! CLI error classification and exit codes.
//!
//! Exit codes: 0 success, 2 input error, 3 config error, 4 numerical
//! failure. Errors print as one JSON object on stderr so scripts can parse
//! them.

use gmk_core::annotations::AnnotationError;
use gmk_core::metrics::MetricsError;
use gmk_core::motion::MotionError;
use gmk_core::pattern::PatternError;
use gmk_core::tokenizer::TokenizerError;
use gmk_core::windowing::WindowingError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Input(_) => "input",
            CliError::Config(_) => "config",
            CliError::Numerical(_) => "numerical",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Config(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }

    pub fn to_stderr_json(&self) -> String {
        serde_json::json!({
            "error": { "kind": self.kind(), "message": self.to_string() }
        })
        .to_string()
    }
}

impl From<MotionError> for CliError {
    fn from(e: MotionError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<PatternError> for CliError {
    fn from(e: PatternError) -> Self {
        match e {
            PatternError::NonPositiveSigma(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<WindowingError> for CliError {
    fn from(e: WindowingError) -> Self {
        match e {
            WindowingError::InvalidLengths => CliError::Config(e.to_string()),
            WindowingError::Pattern(p) => p.into(),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<TokenizerError> for CliError {
    fn from(e: TokenizerError) -> Self {
        match e {
            TokenizerError::InvalidConfig(_) => CliError::Config(e.to_string()),
            TokenizerError::RankDeficient { .. } | TokenizerError::NotOrthonormal => {
                CliError::Numerical(e.to_string())
            }
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        match e {
            MetricsError::NotSymmetric | MetricsError::NonPositiveSigma(_) => {
                CliError::Numerical(e.to_string())
            }
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<AnnotationError> for CliError {
    fn from(e: AnnotationError) -> Self {
        CliError::Input(e.to_string())
    }
}
