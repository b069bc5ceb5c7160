//! Covariance matrices: declarative specs, validated construction,
//! eigendecomposition, and Gaussian sampling.
//!
//! Every matrix that enters a detection formula passes through
//! [`CovarianceMatrix`], which owns a symmetric positive-definite matrix
//! together with its eigendecomposition
//!
//! ```text
//!     A = T diag(lambda_1, ..., lambda_n) T'     lambda_1 >= ... >= lambda_n > 0
//! ```
//!
//! Downstream code applies inverses and log-determinants only through the
//! eigendecomposition (never by dense inversion), so positive definiteness is
//! checked exactly once, here.
//!
//! Construction invariants (enforced, not assumed):
//! - eigenvalues sorted descending, ties broken by original index;
//! - reconstruction `T diag(lambda) T'` within 1e-8 relative Frobenius error;
//! - `T' T = I` within 1e-10 entrywise;
//! - every eigenvalue exceeds `PD_TOL * lambda_max`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::rng::trial_rng;
use crate::spectral::{self, SpectralDensity};
use crate::{Error, Result};

/// Relative tolerance for accepting a nominally symmetric input.
pub const SYM_TOL: f64 = 1e-10;
/// Relative positive-definiteness threshold on eigenvalues.
pub const PD_TOL: f64 = 1e-10;
/// Relative Frobenius tolerance for the eigendecomposition reconstruction.
pub const RECON_TOL: f64 = 1e-8;
/// Entrywise tolerance for eigenvector orthonormality.
pub const ORTHO_TOL: f64 = 1e-10;

/// Declarative description of a covariance matrix, the JSON input format of
/// the command-line workbench.
///
/// ```json
/// {"kind": "ar1", "a": 0.5, "n": 16}
/// {"kind": "diagonal", "eigenvalues": [2.0, 0.5]}
/// {"kind": "dense", "entries": [[1.0, 0.3], [0.3, 1.0]]}
/// {"kind": "scaled_identity", "c": 2.0, "n": 8}
/// {"kind": "toeplitz_from_spectrum", "density": {"kind": "ar1", "a": 0.5}, "n": 8}
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CovarianceSpec {
    /// Explicit symmetric matrix, row-major.
    Dense { entries: Vec<Vec<f64>> },
    /// Diagonal matrix given by its diagonal, in caller order.
    Diagonal { eigenvalues: Vec<f64> },
    /// `c * I` in dimension `n`.
    ScaledIdentity { c: f64, n: usize },
    /// First-order autoregressive covariance `a^|i-j|`, `0 <= a <= 0.999`.
    Ar1 { a: f64, n: usize },
    /// Toeplitz matrix of the autocovariances of a spectral density.
    ToeplitzFromSpectrum { density: SpectralDensity, n: usize },
}

impl CovarianceSpec {
    /// Dimension the spec will produce, without building it.
    pub fn dimension(&self) -> usize {
        match self {
            CovarianceSpec::Dense { entries } => entries.len(),
            CovarianceSpec::Diagonal { eigenvalues } => eigenvalues.len(),
            CovarianceSpec::ScaledIdentity { n, .. }
            | CovarianceSpec::Ar1 { n, .. }
            | CovarianceSpec::ToeplitzFromSpectrum { n, .. } => *n,
        }
    }

    pub fn build(&self) -> Result<CovarianceMatrix> {
        build(self)
    }
}

/// Symmetric positive-definite matrix with its eigendecomposition.
#[derive(Debug, Clone)]
pub struct CovarianceMatrix {
    entries: DMatrix<f64>,
    /// Descending; ties keep original index order.
    eigenvalues: Vec<f64>,
    /// Orthonormal columns; column i pairs with `eigenvalues[i]`.
    basis: DMatrix<f64>,
}

/// Builds and validates the matrix described by `spec`.
pub fn build(spec: &CovarianceSpec) -> Result<CovarianceMatrix> {
    match spec {
        CovarianceSpec::Dense { entries } => {
            let n = entries.len();
            check_dimension(n)?;
            for row in entries {
                if row.len() != n {
                    return Err(Error::DimensionMismatch { left: row.len(), right: n });
                }
            }
            let m = DMatrix::from_fn(n, n, |i, j| entries[i][j]);
            CovarianceMatrix::from_dense(&m)
        }
        CovarianceSpec::Diagonal { eigenvalues } => CovarianceMatrix::from_diagonal(eigenvalues),
        CovarianceSpec::ScaledIdentity { c, n } => CovarianceMatrix::scaled_identity(*c, *n),
        CovarianceSpec::Ar1 { a, n } => CovarianceMatrix::ar1(*a, *n),
        CovarianceSpec::ToeplitzFromSpectrum { density, n } => {
            spectral::toeplitz_from_spectrum(density, *n)
        }
    }
}

impl CovarianceMatrix {
    /// Validates symmetry and positive definiteness of a dense matrix and
    /// eigendecomposes it. Computations use the symmetrized matrix.
    pub fn from_dense(m: &DMatrix<f64>) -> Result<Self> {
        let n = m.nrows();
        check_dimension(n)?;
        if m.ncols() != n {
            return Err(Error::DimensionMismatch { left: n, right: m.ncols() });
        }
        check_symmetry(m)?;
        let sym = (m + m.transpose()) * 0.5;
        let (eigenvalues, basis) = sorted_symmetric_eigen(&sym);
        let top = eigenvalues[0];
        let bottom = eigenvalues[n - 1];
        if !(top > 0.0) || !(bottom > PD_TOL * top) {
            return Err(Error::NotPositiveDefinite(format!(
                "smallest eigenvalue {bottom:.6e} below threshold {:.6e}",
                PD_TOL * top.max(0.0)
            )));
        }
        let built = CovarianceMatrix { entries: sym, eigenvalues, basis };
        built.check_decomposition()?;
        Ok(built)
    }

    /// Diagonal matrix; `values` are the eigenvalues in caller order.
    pub fn from_diagonal(values: &[f64]) -> Result<Self> {
        let n = values.len();
        check_dimension(n)?;
        if let Some(&bad) = values.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
            return Err(Error::NotPositiveDefinite(format!(
                "diagonal entry {bad:.6e} is not strictly positive"
            )));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| values[j].total_cmp(&values[i]).then(i.cmp(&j)));
        let mut basis = DMatrix::zeros(n, n);
        let mut eigenvalues = Vec::with_capacity(n);
        for (col, &idx) in order.iter().enumerate() {
            eigenvalues.push(values[idx]);
            basis[(idx, col)] = 1.0;
        }
        Ok(CovarianceMatrix {
            entries: DMatrix::from_fn(n, n, |i, j| if i == j { values[i] } else { 0.0 }),
            eigenvalues,
            basis,
        })
    }

    /// `c * I` in dimension `n`.
    pub fn scaled_identity(c: f64, n: usize) -> Result<Self> {
        check_dimension(n)?;
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::NotPositiveDefinite(format!(
                "scale {c:.6e} is not strictly positive"
            )));
        }
        Ok(CovarianceMatrix {
            entries: DMatrix::identity(n, n) * c,
            eigenvalues: vec![c; n],
            basis: DMatrix::identity(n, n),
        })
    }

    /// Identity in dimension `n`.
    pub fn identity(n: usize) -> Result<Self> {
        Self::scaled_identity(1.0, n)
    }

    /// First-order autoregressive covariance `a^|i-j|`.
    ///
    /// `a` is capped at 0.999: beyond that the matrix is numerically singular
    /// and the stationary-spectrum analog blows up.
    pub fn ar1(a: f64, n: usize) -> Result<Self> {
        check_dimension(n)?;
        if !a.is_finite() || !(0.0..=0.999).contains(&a) {
            return Err(Error::BadParameter(format!(
                "ar1 coefficient must lie in [0, 0.999], got {a}"
            )));
        }
        let m = DMatrix::from_fn(n, n, |i, j| a.powi((i as i32 - j as i32).abs()));
        Self::from_dense(&m)
    }

    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Eigenvalues, descending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Orthonormal eigenvector basis; column i pairs with `eigenvalues()[i]`.
    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// `ln det = sum ln lambda_i`, computed from the spectrum.
    pub fn log_det(&self) -> f64 {
        self.eigenvalues.iter().map(|l| l.ln()).sum()
    }

    /// Inverse `T diag(1/lambda) T'`, symmetrized to kill round-off skew.
    pub fn inverse_entries(&self) -> DMatrix<f64> {
        let mut scaled = self.basis.clone();
        for (col, &l) in self.eigenvalues.iter().enumerate() {
            let mut c = scaled.column_mut(col);
            c /= l;
        }
        let inv = &scaled * self.basis.transpose();
        (&inv + inv.transpose()) * 0.5
    }

    /// Coordinates of `y` in the eigenbasis: `T' y`.
    pub fn coordinates(&self, y: &DVector<f64>) -> DVector<f64> {
        self.basis.transpose() * y
    }

    /// True when the matrix is the identity to within `tol` entrywise.
    pub fn is_identity(&self, tol: f64) -> bool {
        let n = self.n();
        (0..n).all(|i| {
            (0..n).all(|j| {
                let want = if i == j { 1.0 } else { 0.0 };
                (self.entries[(i, j)] - want).abs() <= tol
            })
        })
    }

    fn check_decomposition(&self) -> Result<()> {
        let n = self.n();
        let lam = DMatrix::from_fn(n, n, |i, j| if i == j { self.eigenvalues[i] } else { 0.0 });
        let recon = &self.basis * lam * self.basis.transpose();
        let denom = self.entries.norm().max(f64::MIN_POSITIVE);
        if (recon - &self.entries).norm() / denom > RECON_TOL {
            return Err(Error::Internal("eigendecomposition failed to reconstruct input".into()));
        }
        let gram = self.basis.transpose() * &self.basis;
        for i in 0..n {
            for j in 0..n {
                let want = if i == j { 1.0 } else { 0.0 };
                if (gram[(i, j)] - want).abs() > ORTHO_TOL {
                    return Err(Error::Internal("eigenvector basis is not orthonormal".into()));
                }
            }
        }
        Ok(())
    }
}

/// Positive definiteness of a general symmetric matrix: true iff the smallest
/// eigenvalue exceeds `PD_TOL * max(|largest eigenvalue|, 1)`.
pub fn is_positive_definite(m: &DMatrix<f64>) -> Result<bool> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch { left: m.nrows(), right: m.ncols() });
    }
    check_dimension(m.nrows())?;
    check_symmetry(m)?;
    let sym = (m + m.transpose()) * 0.5;
    let eigs = sym.symmetric_eigenvalues();
    let top = eigs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let bottom = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(bottom > PD_TOL * top.abs().max(1.0))
}

/// Draws `count` vectors from N(0, M). Sample i is `T sqrt(lambda) z_i` with
/// `z_i` standard normal from sub-stream (seed, i), so any (seed, i) pair
/// yields the same vector regardless of `count` or thread scheduling.
pub fn sample_gaussian(m: &CovarianceMatrix, seed: u64, count: usize) -> Vec<DVector<f64>> {
    (0..count)
        .into_par_iter()
        .map(|i| sample_one(m, &mut trial_rng(seed, i as u64)))
        .collect()
}

/// One draw from N(0, M) using the next n variates of `rng`.
pub(crate) fn sample_one(m: &CovarianceMatrix, rng: &mut rand_chacha::ChaCha8Rng) -> DVector<f64> {
    let n = m.n();
    let mut z = DVector::zeros(n);
    for k in 0..n {
        let g: f64 = rng.sample(StandardNormal);
        z[k] = m.eigenvalues[k].sqrt() * g;
    }
    &m.basis * z
}

fn check_dimension(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::BadParameter("dimension must be at least 1".into()));
    }
    Ok(())
}

fn check_symmetry(m: &DMatrix<f64>) -> Result<()> {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let gap = (m[(i, j)] - m[(j, i)]).abs() / m[(i, j)].abs().max(1.0);
            if gap > SYM_TOL {
                return Err(Error::AsymmetricInput { i, j, gap });
            }
        }
    }
    Ok(())
}

/// Symmetric eigendecomposition with deterministic ordering: eigenvalues
/// descending, ties by original solver index, and each eigenvector's
/// largest-magnitude component made nonnegative.
fn sorted_symmetric_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let eig = m.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]).then(i.cmp(&j)));
    let mut values = Vec::with_capacity(n);
    let mut basis = DMatrix::zeros(n, n);
    for (col, &idx) in order.iter().enumerate() {
        values.push(eig.eigenvalues[idx]);
        let mut v = eig.eigenvectors.column(idx).clone_owned();
        let mut pivot = 0usize;
        let mut best = v[0].abs();
        for k in 1..n {
            if v[k].abs() > best {
                best = v[k].abs();
                pivot = k;
            }
        }
        if v[pivot] < 0.0 {
            v.neg_mut();
        }
        basis.set_column(col, &v);
    }
    (values, basis)
}
