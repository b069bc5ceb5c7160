//! Kullback-Leibler divergences between centered Gaussians and the
//! log-likelihood ratio of the noise-only law against a covariance M.
//!
//! For N(0, V) against N(0, M) in dimension n:
//!
//! ```text
//!     D(V || M) = 1/2 ln(det M / det V) + 1/2 tr(V M^-1) - n/2
//! ```
//!
//! and against the standard law V = I this collapses to a spectral sum
//!
//! ```text
//!     D(I || M) = 1/2 sum_i (ln lambda_i + 1/lambda_i - 1)
//! ```
//!
//! which is the total error exponent budget the detector works against.
//!
//! The observation enters only through the statistic
//!
//! ```text
//!     f_M(y) = ln p_I(y) - ln p_M(y) = 1/2 [ ln det M + (y, (M^-1 - I) y) ]
//! ```
//!
//! evaluated here in the eigenbasis of M, so no dense inverse is ever formed.

use nalgebra::DVector;

use crate::matgauss::CovarianceMatrix;
use crate::{Error, Result};

/// `D(V || M)` in nats. Both arguments must share a dimension.
///
/// Log-determinants come from the eigendecompositions; `tr(V M^-1)` applies
/// `M^-1` through the eigenbasis of M, column by column.
pub fn kl_general(v: &CovarianceMatrix, m: &CovarianceMatrix) -> Result<f64> {
    let n = check_same_dimension(v, m)?;
    let mut trace = 0.0;
    for (col, &lambda) in m.eigenvalues().iter().enumerate() {
        let t = m.basis().column(col);
        let vt = v.entries() * t;
        trace += t.dot(&vt) / lambda;
    }
    Ok(0.5 * (m.log_det() - v.log_det()) + 0.5 * trace - n as f64 / 2.0)
}

/// `D(I || M) = 1/2 sum (ln lambda_i + 1/lambda_i - 1)`, always >= 0.
pub fn kl_identity(m: &CovarianceMatrix) -> f64 {
    0.5 * m.eigenvalues().iter().map(|&l| l.ln() + 1.0 / l - 1.0).sum::<f64>()
}

/// Value of the log-likelihood ratio statistic, in nats.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LlrStatistic {
    pub value: f64,
}

/// `f_M(y) = 1/2 [ ln det M + sum_i (1/lambda_i - 1) w_i^2 ]` with `w = T' y`.
pub fn log_likelihood_ratio(m: &CovarianceMatrix, y: &DVector<f64>) -> Result<LlrStatistic> {
    if y.len() != m.n() {
        return Err(Error::DimensionMismatch { left: y.len(), right: m.n() });
    }
    let w = m.coordinates(y);
    let quad: f64 = m
        .eigenvalues()
        .iter()
        .zip(w.iter())
        .map(|(&l, &wi)| (1.0 / l - 1.0) * wi * wi)
        .sum();
    Ok(LlrStatistic { value: 0.5 * (m.log_det() + quad) })
}

fn check_same_dimension(a: &CovarianceMatrix, b: &CovarianceMatrix) -> Result<usize> {
    if a.n() != b.n() {
        return Err(Error::DimensionMismatch { left: a.n(), right: b.n() });
    }
    Ok(a.n())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matgauss::{sample_gaussian, CovarianceMatrix};
    use crate::rng::trial_rng;
    use nalgebra::DMatrix;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn diag(values: &[f64]) -> CovarianceMatrix {
        CovarianceMatrix::from_diagonal(values).unwrap()
    }

    #[test]
    fn kl_of_matrix_against_itself_vanishes() {
        let m = CovarianceMatrix::ar1(0.5, 4).unwrap();
        assert!(kl_general(&m, &m).unwrap().abs() <= 1e-12);
    }

    #[test]
    fn scalar_kl_matches_closed_form_and_quadrature() {
        // Closed form: 1/2 ln(4/2) + 1/2 * (2/4) - 1/2.
        let want = 0.5 * 2.0_f64.ln() + 0.25 - 0.5;
        let got = kl_general(&diag(&[2.0]), &diag(&[4.0])).unwrap();
        assert!((got - want).abs() < 1e-14);

        // Independent oracle: 1-D quadrature of p ln(p/q) for the two normal
        // densities, Simpson on [-40, 40].
        let p = |x: f64| (-x * x / 4.0).exp() / (2.0 * std::f64::consts::PI * 2.0).sqrt();
        let q = |x: f64| (-x * x / 8.0).exp() / (2.0 * std::f64::consts::PI * 4.0).sqrt();
        let integrand = |x: f64| {
            let px = p(x);
            if px == 0.0 { 0.0 } else { px * (px / q(x)).ln() }
        };
        let (a, b, steps) = (-40.0_f64, 40.0_f64, 8000usize);
        let h = (b - a) / steps as f64;
        let mut acc = integrand(a) + integrand(b);
        for k in 1..steps {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * integrand(a + k as f64 * h);
        }
        let oracle = acc * h / 3.0;
        assert!((got - oracle).abs() < 1e-10, "got {got}, oracle {oracle}");
    }

    #[test]
    fn kl_requires_matching_dimensions() {
        let err = kl_general(&diag(&[1.0]), &diag(&[1.0, 1.0])).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn kl_identity_values() {
        assert_eq!(kl_identity(&CovarianceMatrix::identity(3).unwrap()), 0.0);

        // diag(2, 2): 2 * 1/2 * (ln 2 + 1/2 - 1) = ln 2 - 1/2.
        let want = 2.0_f64.ln() - 0.5;
        assert!((kl_identity(&diag(&[2.0, 2.0])) - want).abs() < 1e-14);
    }

    #[test]
    fn kl_identity_agrees_with_general_form() {
        let m = CovarianceMatrix::ar1(0.5, 8).unwrap();
        let id = CovarianceMatrix::identity(8).unwrap();
        assert!((kl_identity(&m) - kl_general(&id, &m).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn llr_vanishes_for_identity_model() {
        let m = CovarianceMatrix::identity(3).unwrap();
        for y in [
            DVector::from_row_slice(&[0.0, 0.0, 0.0]),
            DVector::from_row_slice(&[1.0, -2.0, 0.5]),
            DVector::from_row_slice(&[10.0, 10.0, 10.0]),
        ] {
            assert_eq!(log_likelihood_ratio(&m, &y).unwrap().value, 0.0);
        }
    }

    #[test]
    fn scalar_llr_matches_closed_form() {
        // M = [2], y = 1: 1/2 (ln 2 + (1/2 - 1) * 1) = 1/2 ln 2 - 1/4.
        let got = log_likelihood_ratio(&diag(&[2.0]), &DVector::from_row_slice(&[1.0])).unwrap();
        assert!((got.value - (0.5 * 2.0_f64.ln() - 0.25)).abs() < 1e-14);

        let err = log_likelihood_ratio(&diag(&[2.0]), &DVector::from_row_slice(&[1.0, 2.0]));
        assert!(matches!(err.unwrap_err(), Error::DimensionMismatch { .. }));
    }

    #[test]
    fn llr_matches_density_formula_on_random_inputs() {
        // Independent oracle: ln p_I(y) - ln p_M(y) through an LU inverse and
        // LU determinant, never touching the eigendecomposition.
        let mut rng = trial_rng(99, 0);
        for n in [1usize, 2, 4, 8] {
            for _ in 0..5 {
                let b = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
                let spd = &b * b.transpose() + DMatrix::identity(n, n) * 0.3;
                let m = CovarianceMatrix::from_dense(&spd).unwrap();
                let y = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal) * 2.0);

                let ln_det = m.entries().clone().lu().determinant().ln();
                let inv = m.entries().clone().try_inverse().unwrap();
                let quad_m = (&y.transpose() * &inv * &y)[(0, 0)];
                let quad_i = y.dot(&y);
                // ln p_I(y) - ln p_M(y) with ln p_S = -1/2 (n ln 2pi + ln det S + y' S^-1 y).
                let oracle = 0.5 * (ln_det + quad_m - quad_i);

                let got = log_likelihood_ratio(&m, &y).unwrap().value;
                assert!(
                    (got - oracle).abs() < 1e-9,
                    "n={n}: got {got}, oracle {oracle}"
                );
            }
        }
    }

    #[test]
    fn llr_mean_under_noise_equals_kl_identity() {
        // E_I f_M(xi) = D(I || M); 10^6 draws, assert within 4 standard errors.
        let m = diag(&[2.0, 0.5, 3.0]);
        let id = CovarianceMatrix::identity(3).unwrap();
        let samples = sample_gaussian(&id, 31, 1_000_000);
        let count = samples.len() as f64;
        let values: Vec<f64> = samples
            .iter()
            .map(|y| log_likelihood_ratio(&m, y).unwrap().value)
            .collect();
        let mean = values.iter().sum::<f64>() / count;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (count - 1.0);
        let se = (var / count).sqrt();
        let want = kl_identity(&m);
        assert!(
            (mean - want).abs() <= 4.0 * se,
            "mean {mean} vs D {want}, se {se}"
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn kl_is_nonnegative(
            lv in proptest::collection::vec(0.2_f64..4.0, 1..6),
            lm in proptest::collection::vec(0.2_f64..4.0, 1..6),
        ) {
            let n = lv.len().min(lm.len());
            let v = diag(&lv[..n]);
            let m = diag(&lm[..n]);
            prop_assert!(kl_general(&v, &m).unwrap() >= -1e-12);
            prop_assert!(kl_identity(&m) >= -1e-12);
        }

        #[test]
        fn kl_identity_is_rotation_invariant(
            lambdas in proptest::collection::vec(0.3_f64..3.0, 2..6),
            seed in 0u64..1000,
        ) {
            let n = lambdas.len();
            let mut rng = trial_rng(seed, 0);
            let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
            let q = g.qr().q();
            let lam = DMatrix::from_fn(n, n, |i, j| if i == j { lambdas[i] } else { 0.0 });
            let rotated = CovarianceMatrix::from_dense(&(&q * lam * q.transpose())).unwrap();
            let straight = diag(&lambdas);
            prop_assert!((kl_identity(&rotated) - kl_identity(&straight)).abs() < 1e-9);
        }
    }
}
