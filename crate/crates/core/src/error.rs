use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("photon number {n} outside cutoff of {dim} levels")]
    OutOfRange { n: usize, dim: usize },

    #[error("cutoff mismatch: {left} vs {right} levels")]
    CutoffMismatch { left: usize, right: usize },

    #[error("truncation: {what} leaks {leaked:.3e} of probability (tolerance {tolerance:.1e})")]
    Truncation {
        what: String,
        leaked: f64,
        tolerance: f64,
    },

    #[error("numerical integrity: {0}")]
    Integrity(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("integration grid too small: boundary integrand {boundary:.3e} vs peak {peak:.3e}")]
    Support { boundary: f64, peak: f64 },
}

impl Error {
    pub(crate) fn truncation(what: impl Into<String>, leaked: f64, tolerance: f64) -> Self {
        Error::Truncation {
            what: what.into(),
            leaked,
            tolerance,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
