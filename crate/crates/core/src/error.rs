use thiserror::Error;

/// Errors raised by the sampling and error-analysis pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("unsupported polynomial degree {0}, expected 1 or 2")]
    UnsupportedDegree(usize),

    #[error("point {0} lies outside [0, 1]")]
    OutOfDomain(f64),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not symmetric positive definite ({0})")]
    NotPositiveDefinite(&'static str),

    #[error("matrix is not symmetric (relative asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("sign of discrete mode {mode} is ambiguous: overlap {overlap:e}")]
    AmbiguousSign { mode: usize, overlap: f64 },

    #[error("invalid exponent beta = {0}")]
    InvalidBeta(f64),

    #[error("fractional part {0} lies in the rejected band (0, 0.02) U (0.98, 1)")]
    FractionalPartRejected(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("noise vector does not match the one used to draw the sample")]
    NoiseMismatch,

    #[error("expected rate is not applicable (nonpositive value {0})")]
    RateNotApplicable(f64),

    #[error("rate fit needs at least two strictly positive errors")]
    DegenerateFit,

    #[error("non-finite value encountered: {0}")]
    NonFinite(&'static str),
}

impl Error {
    /// True for failures of the numerical kernels (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotPositiveDefinite(_)
                | Error::NotSymmetric(_)
                | Error::AmbiguousSign { .. }
                | Error::NonFinite(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
