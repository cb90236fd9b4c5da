use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid detector response: {0}")]
    InvalidResponse(String),

    #[error("invalid sweep data: {0}")]
    InvalidSweep(String),

    #[error("fit did not converge after {starts} start(s); best objective {best_objective}")]
    FitFailure {
        starts: usize,
        best_objective: f64,
        /// Best-so-far parameters in the transformed (unconstrained) space.
        best_parameters: Vec<f64>,
    },

    #[error("{failed} of {total} bootstrap refits failed")]
    BootstrapFailure { failed: usize, total: usize },

    #[error("level {level} is not bracketed by the response curve")]
    NoThreshold { level: f64 },

    #[error("singular design: {0}")]
    Singular(String),

    #[error("collapse score undefined: no bin holds points from two or more series")]
    UndefinedScore,

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error in {source_name} at line {line}: {message}")]
    Parse {
        source_name: String,
        line: u64,
        message: String,
    },

    #[error("I/O error on {path}: {message}")]
    Io { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
