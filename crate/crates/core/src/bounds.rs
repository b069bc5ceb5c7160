//! Finite-sample bounds on the miss probability of the optimal test.
//!
//! Write `D = D(I || M)` for the divergence of the noise law from the signal
//! law and `beta(alpha)` for the smallest miss probability achievable at
//! false-alarm level `alpha`. Then
//!
//! ```text
//!     ln beta(alpha) >= -(D + h(alpha)) / (1 - alpha)        (lower)
//!     ln beta(alpha) <= -D + mu0                             (upper)
//! ```
//!
//! where `h` is the binary entropy and `mu0` is the calibration offset
//! `D - gamma` of the likelihood-ratio threshold (see [`crate::detector`]).
//! The two sides squeeze the error exponent `-(1/n) ln beta` against `D/n`
//! as the dimension grows.
//!
//! `mu0` itself obeys a distribution-free bound driven by the tail constant
//!
//! ```text
//!     C_p = (1/n) sum_i |1/lambda_i - 1|^p,     p in (1, 2]
//!     mu0 <= (3 C_p n / alpha)^(1/p)
//! ```
//!
//! so the upper bound degrades no faster than n^(1/p).

use serde::Serialize;

use crate::divergence::kl_identity;
use crate::matgauss::CovarianceMatrix;
use crate::{Error, Result};

/// Binary entropy `h(alpha) = -alpha ln alpha - (1-alpha) ln(1-alpha)`, nats.
pub fn binary_entropy(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(-alpha * alpha.ln() - (1.0 - alpha) * (1.0 - alpha).ln())
}

/// Lower bound on `ln beta(alpha)`: `-(D + h(alpha)) / (1 - alpha)`.
pub fn stein_lower(m: &CovarianceMatrix, alpha: f64) -> Result<f64> {
    let h = binary_entropy(alpha)?;
    Ok(-(kl_identity(m) + h) / (1.0 - alpha))
}

/// Upper bound on `ln beta(alpha)`: `-D + mu0`, with `mu0` supplied by the
/// caller (typically from a detector calibrated at level `alpha`). The level
/// enters the bound only through `mu0`; it is accepted here so call sites
/// mirror [`stein_lower`].
pub fn stein_upper(m: &CovarianceMatrix, alpha: f64, mu0: f64) -> f64 {
    let _ = alpha;
    -kl_identity(m) + mu0
}

/// Tail constant `C_p = (1/n) sum |1/lambda_i - 1|^p` for `p` in (1, 2].
pub fn cp_constant(m: &CovarianceMatrix, p: f64) -> Result<f64> {
    check_exponent(p)?;
    let n = m.n() as f64;
    Ok(m.eigenvalues().iter().map(|&l| (1.0 / l - 1.0).abs().powf(p)).sum::<f64>() / n)
}

/// Distribution-free bound `mu0 <= (3 C_p n / alpha)^(1/p)`.
pub fn mu0_upper_bound(m: &CovarianceMatrix, alpha: f64, p: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let cp = cp_constant(m, p)?;
    Ok((3.0 * cp * m.n() as f64 / alpha).powf(1.0 / p))
}

/// The two miss-probability bounds and the quantities they are built from.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SteinBounds {
    /// `D(I || M)`.
    pub d: f64,
    /// Binary entropy of the false-alarm level.
    pub h_alpha: f64,
    /// Calibration offset used in the upper bound.
    pub mu0: f64,
    /// `-(D + h(alpha)) / (1 - alpha)`.
    pub lower_log_beta: f64,
    /// `-D + mu0`.
    pub upper_log_beta: f64,
}

impl SteinBounds {
    /// Assembles both bounds for `M` at level `alpha` with a given `mu0`.
    ///
    /// The bracket is consistent (`lower <= upper`) exactly when
    /// `mu0 >= -(D alpha + h(alpha)) / (1 - alpha)`; with the calibrated
    /// `mu0 = D - gamma` this always holds.
    pub fn assemble(m: &CovarianceMatrix, alpha: f64, mu0: f64) -> Result<Self> {
        let d = kl_identity(m);
        let h_alpha = binary_entropy(alpha)?;
        Ok(SteinBounds {
            d,
            h_alpha,
            mu0,
            lower_log_beta: -(d + h_alpha) / (1.0 - alpha),
            upper_log_beta: -d + mu0,
        })
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !alpha.is_finite() || alpha <= 0.0 || alpha >= 1.0 {
        return Err(Error::BadAlpha(alpha));
    }
    Ok(())
}

fn check_exponent(p: f64) -> Result<()> {
    if !p.is_finite() || p <= 1.0 || p > 2.0 {
        return Err(Error::BadExponent(p));
    }
    Ok(())
}
