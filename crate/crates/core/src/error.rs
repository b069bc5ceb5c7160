use thiserror::Error;

/// Errors raised by the numeric layer.
///
/// Every variant is a domain or contract violation the caller can act on;
/// `Internal` marks a broken numeric invariant that should never occur.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("matrix is not symmetric: |a[{i}][{j}] - a[{j}][{i}]| = {gap:.3e} exceeds tolerance")]
    AsymmetricInput { i: usize, j: usize, gap: f64 },

    #[error("bad parameter: {0}")]
    BadParameter(String),

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("false-alarm level must lie strictly between 0 and 1, got {0}")]
    BadAlpha(f64),

    #[error("log-likelihood ratio is constant (every eigenvalue equals 1); no quantile exists")]
    DegenerateStatistic,

    #[error("moment exponent must lie in (1, 2], got {0}")]
    BadExponent(f64),

    #[error("eigenvalue lists have different lengths: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("family of matrices is empty")]
    EmptyFamily,

    #[error("integrand is nonpositive at omega = {omega}: {value}")]
    IntegrandNonpositive { omega: f64, value: f64 },

    #[error("likelihood-ratio moment is infinite; robustness budget undefined")]
    MomentInfinite,

    #[error("internal invariant violated: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
