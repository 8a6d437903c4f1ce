use thiserror::Error;

/// Errors raised by the fitting, flow and I/O layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("insufficient data: need at least {needed} points, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("degenerate design: {0}")]
    DegenerateDesign(String),

    #[error("numerical failure in {context} (condition estimate {condition:.3e})")]
    Numerical { context: String, condition: f64 },

    #[error("flow diverged at Euler step {step}")]
    Divergence { step: usize },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Numerical failures (ill-conditioning, divergence) as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical { .. } | Error::Divergence { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
