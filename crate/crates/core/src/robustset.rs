//! Membership tests for the set of alternatives a detector tolerates.
//!
//! A detector calibrated against M keeps its error exponent under a different
//! alternative V exactly when the noise-side moment of the likelihood ratio
//! stays subexponential:
//!
//! ```text
//!     f(M, V) = E[ p_V(x) / p_M(x) ],    x ~ N(0, I)
//! ```
//!
//! The moment has a closed form. With G = I + V^{-1} - M^{-1},
//!
//! ```text
//!     f(M, V) = exp( (1/2) [ ln det M - ln det V - ln det G ] )   if G > 0
//!     f(M, V) = +inf                                              otherwise
//! ```
//!
//! and for commuting pairs (shared eigenbasis, eigenvalues lambda_i, nu_i)
//! it factors over coordinates:
//!
//! ```text
//!     f = prod_i lambda_i / sqrt( lambda_i + nu_i (lambda_i - 1) )
//! ```
//!
//! The denominators above are the unique form consistent with the scalar
//! moment. Membership is one-sided: ln f(M, V) <= budget certifies that V is
//! tolerated, where the budget stands in for a subexponential allowance that
//! has no canonical value at finite n. [`SlackPolicy`] makes it explicit; the
//! "core" set is the budget-zero case. ln f is strictly concave in V, so the
//! core set is convex and checking the extreme points of a family covers its
//! convex hull.
//!
//! The signal-in-white-noise model (observations x = s + noise, signal
//! covariance S under H1, candidate V) has the same structure with the
//! shifted moment
//!
//! ```text
//!     t(S, V) = det( I + S + (V - S) S (I + S)^{-1} ) / det( I + S )
//! ```
//!
//! guarded by I + (I+V)^{-1} - (I+S)^{-1} > 0.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use nalgebra::{DMatrix, DVector};

use crate::divergence::kl_identity;
use crate::matgauss::{CovarianceMatrix, PD_TOL};
use crate::{Error, Result};

/// Finite-n stand-in for a subexponential slack allowance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SlackPolicy {
    /// Fixed budget in nats.
    Explicit { epsilon: f64 },
    /// Budget `c * sqrt(n)` nats, the square-root growth a finite moment
    /// constant forces on the quantile offset.
    DefaultSqrt { c: f64 },
}

impl SlackPolicy {
    /// Budget in nats at dimension `n`.
    pub fn budget(&self, n: usize) -> Result<f64> {
        match *self {
            SlackPolicy::Explicit { epsilon } => {
                if !epsilon.is_finite() || epsilon < 0.0 {
                    return Err(Error::BadParameter(format!(
                        "slack epsilon must be nonnegative, got {epsilon}"
                    )));
                }
                Ok(epsilon)
            }
            SlackPolicy::DefaultSqrt { c } => {
                if !c.is_finite() || c <= 0.0 {
                    return Err(Error::BadParameter(format!(
                        "slack coefficient must be positive, got {c}"
                    )));
                }
                Ok(c * (n as f64).sqrt())
            }
        }
    }
}

/// Outcome of a membership test. `log_moment` is `+inf` exactly when the
/// positive-definiteness guard fails.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MembershipReport {
    pub pd_guard_ok: bool,
    #[serde(with = "crate::ext_real")]
    pub log_moment: f64,
    pub slack_budget: f64,
    /// `pd_guard_ok && log_moment <= slack_budget`.
    pub member: bool,
    /// `pd_guard_ok && log_moment <= 0`.
    pub core_member: bool,
}

/// Family-level check: does one reference covariance tolerate every member?
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Prop1Report {
    pub all_guards_ok: bool,
    #[serde(with = "crate::ext_real")]
    pub max_log_moment: f64,
    pub satisfied: bool,
}

/// Finite-n diagnostics for one covariance: `a1_value` is the per-coordinate
/// divergence `(1/n) sum (ln lambda + 1/lambda - 1)`, `a2_value` the tail sum
/// `(1/n) sum |1/lambda - 1|^(1+delta)`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AssumptionValues {
    pub a1_value: f64,
    pub a2_value: f64,
}

/// Per-matrix diagnostics plus family maxima. Values are reported as-is;
/// whether they stabilize along a sequence of dimensions is for the caller
/// to judge.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub per_matrix: Vec<AssumptionValues>,
    pub max_a1: f64,
    pub max_a2: f64,
}

/// `f(M, V)`: the noise-side moment of the likelihood ratio, `+inf` when the
/// guard `I + V^{-1} - M^{-1} > 0` fails. Overflows to `+inf` for large
/// dimensions; prefer [`lrt_log_moment`] there.
pub fn lrt_moment(m: &CovarianceMatrix, v: &CovarianceMatrix) -> Result<f64> {
    Ok(lrt_log_moment(m, v)?.exp())
}

/// `ln f(M, V)`, `+inf` when the guard fails.
pub fn lrt_log_moment(m: &CovarianceMatrix, v: &CovarianceMatrix) -> Result<f64> {
    same_dimension(m, v)?;
    match guard_log_det(v.inverse_entries(), m.inverse_entries()) {
        None => Ok(f64::INFINITY),
        Some(log_det_g) => Ok(0.5 * (m.log_det() - v.log_det() - log_det_g)),
    }
}

/// Commuting-pair moment from eigenvalues alone:
/// `prod lambda_i / sqrt(lambda_i + nu_i (lambda_i - 1))`, `+inf` when any
/// denominator is nonpositive.
pub fn commuting_moment(lambda: &[f64], nu: &[f64]) -> Result<f64> {
    if lambda.len() != nu.len() {
        return Err(Error::LengthMismatch { left: lambda.len(), right: nu.len() });
    }
    check_positive_eigenvalues(lambda)?;
    check_positive_eigenvalues(nu)?;
    let mut log_sum = 0.0;
    for (&l, &v) in lambda.iter().zip(nu) {
        let denom = l + v * (l - 1.0);
        if denom <= 0.0 {
            return Ok(f64::INFINITY);
        }
        log_sum += l.ln() - 0.5 * denom.ln();
    }
    Ok(log_sum.exp())
}

/// Tests whether a detector built for `m` tolerates the alternative `v`.
pub fn membership(
    m: &CovarianceMatrix,
    v: &CovarianceMatrix,
    policy: &SlackPolicy,
) -> Result<MembershipReport> {
    let slack_budget = policy.budget(m.n())?;
    let log_moment = lrt_log_moment(m, v)?;
    Ok(report(log_moment, slack_budget))
}

/// Family version of [`membership`]: all guards must hold and the worst
/// member's log moment must fit the budget.
pub fn proposition1_check(
    m0: &CovarianceMatrix,
    family: &[CovarianceMatrix],
    policy: &SlackPolicy,
) -> Result<Prop1Report> {
    if family.is_empty() {
        return Err(Error::EmptyFamily);
    }
    let slack_budget = policy.budget(m0.n())?;
    for v in family {
        same_dimension(m0, v)?;
    }
    let log_moments: Vec<f64> =
        family.par_iter().map(|v| lrt_log_moment(m0, v)).collect::<Result<_>>()?;
    let max_log_moment = log_moments.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let all_guards_ok = max_log_moment.is_finite();
    Ok(Prop1Report {
        all_guards_ok,
        max_log_moment,
        satisfied: all_guards_ok && max_log_moment <= slack_budget,
    })
}

/// `t(S, V)`: the signal-in-white-noise analog of [`lrt_moment`], `+inf`
/// when the guard `I + (I+V)^{-1} - (I+S)^{-1} > 0` fails.
pub fn model2_moment(s: &CovarianceMatrix, v: &CovarianceMatrix) -> Result<f64> {
    same_dimension(s, v)?;
    let s_shifted_inverse = shifted_inverse(s);
    if guard_log_det(shifted_inverse(v), s_shifted_inverse.clone()).is_none() {
        return Ok(f64::INFINITY);
    }
    let n = s.n();
    let identity = DMatrix::identity(n, n);
    let numerator =
        &identity + s.entries() + (v.entries() - s.entries()) * s.entries() * s_shifted_inverse;
    let det_numerator = numerator.lu().determinant();
    let log_det_denominator: f64 = s.eigenvalues().iter().map(|&mu| (1.0 + mu).ln()).sum();
    let t = det_numerator / log_det_denominator.exp();
    if !t.is_finite() || t <= 0.0 {
        return Err(Error::Internal(format!("shifted moment ratio degenerated to {t}")));
    }
    Ok(t)
}

/// Commuting-pair form of [`model2_moment`]:
/// `prod 1 + (nu_i - mu_i) mu_i / (1 + mu_i)^2`, `+inf` when any factor is
/// nonpositive.
pub fn model2_commuting_moment(mu: &[f64], nu: &[f64]) -> Result<f64> {
    if mu.len() != nu.len() {
        return Err(Error::LengthMismatch { left: mu.len(), right: nu.len() });
    }
    check_positive_eigenvalues(mu)?;
    check_positive_eigenvalues(nu)?;
    let mut log_sum = 0.0;
    for (&m, &v) in mu.iter().zip(nu) {
        let factor = 1.0 + (v - m) * m / ((1.0 + m) * (1.0 + m));
        if factor <= 0.0 {
            return Ok(f64::INFINITY);
        }
        log_sum += factor.ln();
    }
    Ok(log_sum.exp())
}

/// Membership test in the signal-in-white-noise model.
pub fn model2_membership(
    s: &CovarianceMatrix,
    v: &CovarianceMatrix,
    policy: &SlackPolicy,
) -> Result<MembershipReport> {
    let slack_budget = policy.budget(s.n())?;
    let log_moment = model2_moment(s, v)?.ln();
    Ok(report(log_moment, slack_budget))
}

/// Finite-n values of the two family-regularity diagnostics, per matrix and
/// maximized over the family.
pub fn check_assumptions(family: &[CovarianceMatrix], delta: f64) -> Result<AssumptionReport> {
    if family.is_empty() {
        return Err(Error::EmptyFamily);
    }
    if !delta.is_finite() || delta <= 0.0 {
        return Err(Error::BadParameter(format!("delta must be positive, got {delta}")));
    }
    let per_matrix: Vec<AssumptionValues> = family
        .iter()
        .map(|m| {
            let n = m.n() as f64;
            let a2 = m
                .eigenvalues()
                .iter()
                .map(|&l| (1.0 / l - 1.0).abs().powf(1.0 + delta))
                .sum::<f64>()
                / n;
            AssumptionValues { a1_value: 2.0 * kl_identity(m) / n, a2_value: a2 }
        })
        .collect();
    let max_a1 = per_matrix.iter().map(|r| r.a1_value).fold(f64::NEG_INFINITY, f64::max);
    let max_a2 = per_matrix.iter().map(|r| r.a2_value).fold(f64::NEG_INFINITY, f64::max);
    Ok(AssumptionReport { per_matrix, max_a1, max_a2 })
}

fn report(log_moment: f64, slack_budget: f64) -> MembershipReport {
    let pd_guard_ok = log_moment.is_finite();
    MembershipReport {
        pd_guard_ok,
        log_moment,
        slack_budget,
        member: pd_guard_ok && log_moment <= slack_budget,
        core_member: pd_guard_ok && log_moment <= 0.0,
    }
}

/// `ln det(I + iv - im)` when that matrix is positive definite, else None.
/// Both summands are exactly symmetric, so the sum is too.
fn guard_log_det(iv: DMatrix<f64>, im: DMatrix<f64>) -> Option<f64> {
    let n = iv.nrows();
    let g = DMatrix::identity(n, n) + iv - im;
    let eigs = g.symmetric_eigenvalues();
    let top = eigs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let bottom = eigs.iter().copied().fold(f64::INFINITY, f64::min);
    if bottom <= PD_TOL * top.abs().max(1.0) {
        return None;
    }
    Some(eigs.iter().map(|&e| e.ln()).sum())
}

/// `(I + C)^{-1}` through the eigendecomposition of C, symmetrized.
fn shifted_inverse(c: &CovarianceMatrix) -> DMatrix<f64> {
    let diag = DVector::from_iterator(c.n(), c.eigenvalues().iter().map(|&l| 1.0 / (1.0 + l)));
    let m = c.basis() * DMatrix::from_diagonal(&diag) * c.basis().transpose();
    0.5 * (&m + m.transpose())
}

fn same_dimension(a: &CovarianceMatrix, b: &CovarianceMatrix) -> Result<()> {
    if a.n() != b.n() {
        return Err(Error::DimensionMismatch { left: a.n(), right: b.n() });
    }
    Ok(())
}

fn check_positive_eigenvalues(values: &[f64]) -> Result<()> {
    for &v in values {
        if !v.is_finite() || v <= 0.0 {
            return Err(Error::BadParameter(format!("eigenvalues must be positive, got {v}")));
        }
    }
    Ok(())
}
