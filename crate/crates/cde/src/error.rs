//! Error type shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CdeError>;

/// Unified error for estimation, simulation, and evaluation failures.
///
/// Variants carry enough context to identify the offending input (query
/// point, epoch, column) without holding references into caller data.
#[derive(Debug, Error)]
pub enum CdeError {
    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    ShapeMismatch {
        context: &'static str,
        expected: String,
        got: String,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("training diverged at epoch {epoch}, batch {batch}: {detail}")]
    TrainingDiverged {
        epoch: usize,
        batch: usize,
        detail: String,
    },

    #[error("invalid transform: {0}")]
    InvalidTransform(String),

    #[error("marginal density underflow at query {query}")]
    Underflow { query: String },

    #[error("no training neighbors within radius {radius} of x = {query}")]
    NoNeighbors { query: String, radius: f64 },

    #[error("ill-conditioned system: {detail}; consider increasing the ridge penalty")]
    IllConditioned { detail: String },

    #[error("degenerate density at query {query}: {detail}")]
    DegenerateDensity { query: String, detail: String },

    #[error("invalid density: {0}")]
    InvalidDensity(String),

    #[error("unsupported dimension: {0}")]
    UnsupportedDimension(String),

    #[error("initialization error: {0}")]
    Initialization(String),

    #[error("search failure: {0}")]
    SearchFailure(String),

    #[error("CSV parse error at line {line}: {detail}")]
    CsvParse { line: usize, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CdeError {
    /// True for errors caused by bad user input (configuration, CLI usage)
    /// rather than runtime failures. The CLI maps these to exit code 2.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            CdeError::InvalidConfig(_)
                | CdeError::InvalidParameter(_)
                | CdeError::CsvParse { .. }
        )
    }
}
