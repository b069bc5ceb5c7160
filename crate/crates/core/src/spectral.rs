//! Stationary analogs of the covariance-domain machinery.
//!
//! A stationary Gaussian sequence is described by a power spectral density
//! on [-pi, pi]. The signal-in-white-noise membership test then turns into
//! an integral criterion: with fS the reference signal spectrum and fK a
//! candidate,
//!
//! ```text
//!     J(fS, fK) = integral of ln[ 1 + fS (fK - fS) / (1 + fS)^2 ] d omega
//! ```
//!
//! which is the integrand of the per-coordinate commuting moment evaluated
//! along the spectrum; membership means J <= tol for an explicit slack
//! `tol`, mirroring [`crate::robustset::SlackPolicy`]. The integrand guard
//! (the argument of the logarithm staying positive) is the spectral face of
//! the positive-definiteness guard; it cannot fail for nonnegative
//! densities, but the check is kept for defense in depth.
//!
//! The bridge back to matrices is the Toeplitz construction
//!
//! ```text
//!     r_k = (1/2pi) integral of f(omega) cos(k omega) d omega,
//!     T_n(f)[i, j] = r_|i - j|
//! ```
//!
//! whose log-determinant rate (1/n) sum ln lambda_i approaches the spectral
//! rate (1/2pi) integral of ln f as n grows.
//!
//! All integrals use composite Simpson on a uniform closed grid over
//! [-pi, pi]; `grid_points` counts subintervals and must be even. The same
//! closed-grid convention defines [`SpectralDensity::Grid`] and
//! [`sample_closed_grid`].

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::matgauss::CovarianceMatrix;
use crate::{Error, Result};

/// Default Simpson subinterval count.
pub const DEFAULT_GRID_POINTS: usize = 4096;

/// Smallest accepted Simpson subinterval count.
pub const MIN_GRID_POINTS: usize = 64;

/// Symmetry tolerance for grid densities: value(omega) = value(-omega).
const GRID_SYMMETRY_TOL: f64 = 1e-9;

/// A power spectral density on [-pi, pi].
///
/// ```json
/// {"kind": "ar1", "a": 0.5}
/// {"kind": "grid", "values": [1.0, 2.0, 1.0]}
/// ```
///
/// Grid values sit on a uniform closed grid (both endpoints included) and
/// are interpolated linearly. Values must be nonnegative and symmetric in
/// omega, as befits a real stationary sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpectralDensity {
    /// First-order autoregressive spectrum, the Poisson kernel
    /// `(1 - a^2) / (1 - 2 a cos omega + a^2)`, `0 <= a <= 0.999`.
    Ar1 { a: f64 },
    /// Piecewise-linear density through the given closed-grid values.
    Grid { values: Vec<f64> },
}

impl SpectralDensity {
    /// Checks the declared invariants; every public operation calls this.
    pub fn validate(&self) -> Result<()> {
        match self {
            SpectralDensity::Ar1 { a } => {
                if !a.is_finite() || *a < 0.0 || *a > 0.999 {
                    return Err(Error::BadParameter(format!(
                        "ar1 coefficient must lie in [0, 0.999], got {a}"
                    )));
                }
            }
            SpectralDensity::Grid { values } => {
                if values.len() < 2 {
                    return Err(Error::BadParameter(format!(
                        "grid density needs at least 2 values, got {}",
                        values.len()
                    )));
                }
                for &v in values {
                    if !v.is_finite() || v < 0.0 {
                        return Err(Error::BadParameter(format!(
                            "grid density values must be nonnegative, got {v}"
                        )));
                    }
                }
                for (i, (&lo, &hi)) in values.iter().zip(values.iter().rev()).enumerate() {
                    let tol = GRID_SYMMETRY_TOL * lo.abs().max(hi.abs()).max(1.0);
                    if (lo - hi).abs() > tol {
                        return Err(Error::BadParameter(format!(
                            "grid density must be symmetric in omega; \
                             values[{i}] = {lo} mismatches its mirror {hi}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Evaluates the density; `omega` is clamped into [-pi, pi].
    pub fn eval(&self, omega: f64) -> f64 {
        match self {
            SpectralDensity::Ar1 { a } => {
                (1.0 - a * a) / (1.0 - 2.0 * a * omega.cos() + a * a)
            }
            SpectralDensity::Grid { values } => {
                let last = values.len() - 1;
                let t = (omega.clamp(-PI, PI) + PI) / (2.0 * PI) * last as f64;
                let i = (t.floor() as usize).min(last - 1);
                let frac = t - i as f64;
                values[i] * (1.0 - frac) + values[i + 1] * frac
            }
        }
    }
}

/// The autoregressive spectrum with coefficient `a`.
pub fn ar1_spectrum(a: f64) -> Result<SpectralDensity> {
    let density = SpectralDensity::Ar1 { a };
    density.validate()?;
    Ok(density)
}

/// `J(fS, fK)`: the spectral moment functional (see module docs), by
/// composite Simpson on `grid_points` subintervals.
pub fn spectral_functional(
    f_s: &SpectralDensity,
    f_k: &SpectralDensity,
    grid_points: usize,
) -> Result<f64> {
    f_s.validate()?;
    f_k.validate()?;
    simpson(grid_points, |omega| {
        let s = f_s.eval(omega);
        let k = f_k.eval(omega);
        let argument = 1.0 + s * (k - s) / ((1.0 + s) * (1.0 + s));
        if argument <= 0.0 {
            return Err(Error::IntegrandNonpositive { omega, value: argument });
        }
        Ok(argument.ln())
    })
}

/// Spectral membership: `J(fS, fK) <= tol`, the slack made explicit.
pub fn spectral_membership(
    f_s: &SpectralDensity,
    f_k: &SpectralDensity,
    tol: f64,
    grid_points: usize,
) -> Result<bool> {
    if !tol.is_finite() || tol < 0.0 {
        return Err(Error::BadParameter(format!("tolerance must be nonnegative, got {tol}")));
    }
    Ok(spectral_functional(f_s, f_k, grid_points)? <= tol)
}

/// Autocovariance `r_k = (1/2pi) integral of f(omega) cos(k omega) d omega`.
pub fn fourier_coefficient(f: &SpectralDensity, k: usize, grid_points: usize) -> Result<f64> {
    f.validate()?;
    let integral = simpson(grid_points, |omega| Ok(f.eval(omega) * (k as f64 * omega).cos()))?;
    Ok(integral / (2.0 * PI))
}

/// The n-by-n Toeplitz autocovariance matrix of `f`, entries `r_|i-j|` on
/// the default Simpson grid. Truncation can break positive definiteness for
/// rough grid densities; that surfaces as the construction error.
pub fn toeplitz_from_spectrum(f: &SpectralDensity, n: usize) -> Result<CovarianceMatrix> {
    f.validate()?;
    if n == 0 {
        return Err(Error::BadParameter("dimension must be at least 1".into()));
    }
    let r: Vec<f64> =
        (0..n).map(|k| fourier_coefficient(f, k, DEFAULT_GRID_POINTS)).collect::<Result<_>>()?;
    let entries = DMatrix::from_fn(n, n, |i, j| r[i.abs_diff(j)]);
    CovarianceMatrix::from_dense(&entries)
}

/// The two sides of the log-determinant limit.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SzegoRates {
    /// `(1/n) sum ln lambda_i` of the Toeplitz matrix.
    pub matrix_rate: f64,
    /// `(1/2pi) integral of ln f`.
    pub spectral_rate: f64,
}

/// Both log-determinant rates for `f` at dimension `n >= 2`; their gap
/// shrinks as `n` grows.
pub fn szego_log_det_rate(f: &SpectralDensity, n: usize) -> Result<SzegoRates> {
    if n < 2 {
        return Err(Error::BadParameter(format!("rate comparison needs n >= 2, got {n}")));
    }
    let matrix = toeplitz_from_spectrum(f, n)?;
    let integral = simpson(DEFAULT_GRID_POINTS, |omega| Ok(f.eval(omega).ln()))?;
    Ok(SzegoRates {
        matrix_rate: matrix.log_det() / n as f64,
        spectral_rate: integral / (2.0 * PI),
    })
}

/// Finite-n values of the two spectral regularity diagnostics.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AssumptionIntegrals {
    /// `integral of [ln(fK + 1) + 1/(fK + 1) - 1]`.
    pub a5_value: f64,
    /// `integral of |fK / (fK + 1)|^(1 + delta)`.
    pub a6_value: f64,
}

/// Evaluates both diagnostics for a signal spectrum `fK`.
pub fn spectral_assumptions(
    f_k: &SpectralDensity,
    delta: f64,
    grid_points: usize,
) -> Result<AssumptionIntegrals> {
    f_k.validate()?;
    if !delta.is_finite() || delta <= 0.0 {
        return Err(Error::BadParameter(format!("delta must be positive, got {delta}")));
    }
    let a5 = simpson(grid_points, |omega| {
        let k = f_k.eval(omega);
        Ok((k + 1.0).ln() + 1.0 / (k + 1.0) - 1.0)
    })?;
    let a6 = simpson(grid_points, |omega| {
        let k = f_k.eval(omega);
        Ok((k / (k + 1.0)).abs().powf(1.0 + delta))
    })?;
    Ok(AssumptionIntegrals { a5_value: a5, a6_value: a6 })
}

/// Samples `f` at `n` uniform closed-grid points over [-pi, pi] (both
/// endpoints included), the grid convention shared with
/// [`SpectralDensity::Grid`].
pub fn sample_closed_grid(f: &SpectralDensity, n: usize) -> Result<Vec<f64>> {
    f.validate()?;
    if n < 2 {
        return Err(Error::BadParameter(format!("closed grid needs n >= 2, got {n}")));
    }
    let step = 2.0 * PI / (n - 1) as f64;
    Ok((0..n).map(|j| f.eval(-PI + j as f64 * step)).collect())
}

/// Composite Simpson over [-pi, pi] with `grid_points` even subintervals.
fn simpson<E: FnMut(f64) -> Result<f64>>(grid_points: usize, mut eval: E) -> Result<f64> {
    if grid_points < MIN_GRID_POINTS || grid_points % 2 != 0 {
        return Err(Error::BadParameter(format!(
            "grid_points must be even and at least {MIN_GRID_POINTS}, got {grid_points}"
        )));
    }
    let h = 2.0 * PI / grid_points as f64;
    let mut acc = 0.0;
    for k in 0..=grid_points {
        let weight = if k == 0 || k == grid_points {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc += weight * eval(-PI + k as f64 * h)?;
    }
    Ok(acc * h / 3.0)
}
