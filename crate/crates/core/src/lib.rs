//! Minimax likelihood-ratio detection of Gaussian sequences.
//!
//! The library tests H0: y ~ N(0, I) against H1: y ~ N(0, M) for a known
//! covariance M, and quantifies how far the alternative can be perturbed
//! before a detector calibrated on M stops working.
//!
//! Modules:
//! - [`matgauss`]: covariance construction, eigendecomposition, sampling.
//! - [`divergence`]: Kullback-Leibler divergences and the log-likelihood ratio.
//! - [`detector`]: likelihood-ratio tests calibrated to a false-alarm level.
//! - [`bounds`]: finite-sample bounds on the miss probability of the optimal test.
//! - [`robustset`]: closed-form membership tests for the set of covariances a
//!   detector tolerates, for both the pure-covariance and signal-in-noise models.
//! - [`spectral`]: stationary analogs on spectral densities and Szego limits.
//! - [`mcsim`]: Monte Carlo experiments validating every closed form.
//! - [`cli`]: the command-line workbench (config schemas, run manifests).

pub mod bounds;
pub mod cli;
pub mod detector;
pub mod divergence;
mod error;
pub mod ext_real;
pub mod matgauss;
pub mod mcsim;
pub mod robustset;
pub mod rng;
pub mod spectral;

pub use error::{Error, Result};
pub use matgauss::{CovarianceMatrix, CovarianceSpec};
