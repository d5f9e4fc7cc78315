use thiserror::Error;

/// Errors raised by the laboratory.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("potential outside the admissible class: {0}")]
    ClassViolation(String),

    #[error("harmonic solver failed at x = {x}: {reason}")]
    Solver { x: f64, reason: String },

    #[error("degenerate harmonic pair: Wronskian {k_v:e} is not positive (potential is effectively zero)")]
    Degenerate { k_v: f64 },

    #[error("eigensolver did not converge for eigenpair {index}")]
    NonConvergence { index: usize },

    #[error("domain too small for t = {t}: need half-width at least {required_half_width}")]
    DomainTooSmall { t: f64, required_half_width: f64 },

    #[error("time {t} is outside the validity range of a truncated spectrum (valid from {valid_from})")]
    SpectrumTruncated { t: f64, valid_from: f64 },

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
