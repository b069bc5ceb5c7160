//! Python bindings for the detection workbench.
//!
//! Exposes the covariance model, detector calibration, divergences and
//! miss-probability bounds, robust-set moments, spectral limits, and the
//! Monte Carlo estimators. Library errors surface as `ValueError`; infinite
//! moments come back as `float("inf")`.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use nalgebra::{DMatrix, DVector};

use gaussdet::detector::{calibrate as core_calibrate, Detector as CoreDetector, Hypothesis};
use gaussdet::matgauss::{sample_gaussian as core_sample_gaussian, CovarianceMatrix, CovarianceSpec};
use gaussdet::mcsim::{
    estimate_miss, moment_mc_estimate as core_moment_mc, robustness_experiment,
    wilson_interval as core_wilson, DetectorSpec, ExperimentConfig,
};
use gaussdet::robustset::{self, SlackPolicy};
use gaussdet::spectral::{
    ar1_spectrum, spectral_functional as core_spectral_functional,
    szego_log_det_rate as core_szego, DEFAULT_GRID_POINTS,
};
use gaussdet::{bounds, divergence};

fn value_err(e: gaussdet::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn hypothesis_label(h: Hypothesis) -> &'static str {
    match h {
        Hypothesis::H0 => "h0",
        Hypothesis::H1 => "h1",
    }
}

/// Positive-definite covariance of a zero-mean Gaussian sequence.
#[pyclass(skip_from_py_object)]
#[derive(Clone)]
struct Covariance {
    inner: CovarianceMatrix,
}

#[pymethods]
impl Covariance {
    #[staticmethod]
    fn diagonal(eigenvalues: Vec<f64>) -> PyResult<Self> {
        CovarianceMatrix::from_diagonal(&eigenvalues)
            .map(|inner| Self { inner })
            .map_err(value_err)
    }

    #[staticmethod]
    fn scaled_identity(c: f64, n: usize) -> PyResult<Self> {
        CovarianceMatrix::scaled_identity(c, n).map(|inner| Self { inner }).map_err(value_err)
    }

    #[staticmethod]
    fn dense(entries: Vec<Vec<f64>>) -> PyResult<Self> {
        let n = entries.len();
        if entries.iter().any(|row| row.len() != n) {
            return Err(PyValueError::new_err("entries must form a square matrix"));
        }
        let m = DMatrix::from_fn(n, n, |i, j| entries[i][j]);
        CovarianceMatrix::from_dense(&m).map(|inner| Self { inner }).map_err(value_err)
    }

    #[staticmethod]
    fn ar1(a: f64, n: usize) -> PyResult<Self> {
        CovarianceMatrix::ar1(a, n).map(|inner| Self { inner }).map_err(value_err)
    }

    fn n(&self) -> usize {
        self.inner.n()
    }

    fn eigenvalues(&self) -> Vec<f64> {
        self.inner.eigenvalues().to_vec()
    }

    fn log_det(&self) -> f64 {
        self.inner.log_det()
    }

    fn entries(&self) -> Vec<Vec<f64>> {
        let e = self.inner.entries();
        (0..self.inner.n()).map(|i| (0..self.inner.n()).map(|j| e[(i, j)]).collect()).collect()
    }

    fn __repr__(&self) -> String {
        format!("Covariance(n={})", self.inner.n())
    }
}

/// Calibrated likelihood-ratio detector: decide H0 iff the statistic
/// reaches the empirical threshold.
#[pyclass]
struct Detector {
    inner: CoreDetector,
}

#[pymethods]
impl Detector {
    #[staticmethod]
    #[pyo3(signature = (m, alpha, samples = 100_000, seed = 0))]
    fn calibrate(m: &Covariance, alpha: f64, samples: usize, seed: u64) -> PyResult<Self> {
        core_calibrate(m.inner.clone(), alpha, samples, seed)
            .map(|inner| Self { inner })
            .map_err(value_err)
    }

    fn alpha(&self) -> f64 {
        self.inner.alpha()
    }

    fn gamma(&self) -> f64 {
        self.inner.gamma()
    }

    fn mu0(&self) -> f64 {
        self.inner.mu0()
    }

    fn statistic(&self, y: Vec<f64>) -> PyResult<f64> {
        self.inner.statistic(&DVector::from_vec(y)).map_err(value_err)
    }

    /// Returns "h0" or "h1".
    fn decide(&self, y: Vec<f64>) -> PyResult<&'static str> {
        self.inner.decide(&DVector::from_vec(y)).map(hypothesis_label).map_err(value_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Detector(n={}, alpha={}, gamma={})",
            self.inner.m().n(),
            self.inner.alpha(),
            self.inner.gamma(),
        )
    }
}

/// `D(I || M)` in nats.
#[pyfunction]
fn kl_identity(m: &Covariance) -> f64 {
    divergence::kl_identity(&m.inner)
}

/// `D(V || M)` in nats.
#[pyfunction]
fn kl_general(v: &Covariance, m: &Covariance) -> PyResult<f64> {
    divergence::kl_general(&v.inner, &m.inner).map_err(value_err)
}

/// Log-likelihood ratio statistic of one observation vector.
#[pyfunction]
fn log_likelihood_ratio(m: &Covariance, y: Vec<f64>) -> PyResult<f64> {
    divergence::log_likelihood_ratio(&m.inner, &DVector::from_vec(y))
        .map(|s| s.value)
        .map_err(value_err)
}

/// Noise-side moment of the likelihood ratio; `inf` when the guard fails.
#[pyfunction]
fn lrt_moment(m: &Covariance, v: &Covariance) -> PyResult<f64> {
    robustset::lrt_moment(&m.inner, &v.inner).map_err(value_err)
}

/// Product form of the moment for commuting (diagonal) pairs.
#[pyfunction]
fn commuting_moment(lambda: Vec<f64>, nu: Vec<f64>) -> PyResult<f64> {
    robustset::commuting_moment(&lambda, &nu).map_err(value_err)
}

/// Signal-in-white-noise analog of the moment.
#[pyfunction]
fn model2_moment(s: &Covariance, v: &Covariance) -> PyResult<f64> {
    robustset::model2_moment(&s.inner, &v.inner).map_err(value_err)
}

/// Robust-set membership of `v` around `m` with a fixed slack budget.
#[pyfunction]
#[pyo3(signature = (m, v, epsilon = 0.0))]
fn membership(py: Python<'_>, m: &Covariance, v: &Covariance, epsilon: f64) -> PyResult<Py<PyDict>> {
    let policy = SlackPolicy::Explicit { epsilon };
    let report = robustset::membership(&m.inner, &v.inner, &policy).map_err(value_err)?;
    let dict = PyDict::new(py);
    dict.set_item("pd_guard_ok", report.pd_guard_ok)?;
    dict.set_item("log_moment", report.log_moment)?;
    dict.set_item("slack_budget", report.slack_budget)?;
    dict.set_item("member", report.member)?;
    dict.set_item("core_member", report.core_member)?;
    Ok(dict.unbind())
}

/// Divergence-based bracket on the log miss probability.
#[pyfunction]
#[pyo3(signature = (m, alpha, samples = 100_000, seed = 0))]
fn stein_bounds(
    py: Python<'_>,
    m: &Covariance,
    alpha: f64,
    samples: usize,
    seed: u64,
) -> PyResult<Py<PyDict>> {
    let mu0 =
        gaussdet::detector::mu0_quantile(m.inner.clone(), alpha, samples, seed).map_err(value_err)?;
    let b = bounds::SteinBounds::assemble(&m.inner, alpha, mu0).map_err(value_err)?;
    let dict = PyDict::new(py);
    dict.set_item("d", b.d)?;
    dict.set_item("h_alpha", b.h_alpha)?;
    dict.set_item("mu0", b.mu0)?;
    dict.set_item("lower_log_beta", b.lower_log_beta)?;
    dict.set_item("upper_log_beta", b.upper_log_beta)?;
    Ok(dict.unbind())
}

/// Distribution-free bound on the quantile offset, `(3 C_p n / alpha)^(1/p)`.
#[pyfunction]
fn mu0_upper_bound(m: &Covariance, alpha: f64, p: f64) -> PyResult<f64> {
    bounds::mu0_upper_bound(&m.inner, alpha, p).map_err(value_err)
}

/// Spectral relative-entropy-rate functional between two AR(1) spectra.
#[pyfunction]
#[pyo3(signature = (a_s, a_k, grid_points = DEFAULT_GRID_POINTS))]
fn spectral_functional_ar1(a_s: f64, a_k: f64, grid_points: usize) -> PyResult<f64> {
    let fs = ar1_spectrum(a_s).map_err(value_err)?;
    let fk = ar1_spectrum(a_k).map_err(value_err)?;
    core_spectral_functional(&fs, &fk, grid_points).map_err(value_err)
}

/// `(matrix_rate, spectral_rate)` of the Toeplitz log-determinant for an
/// AR(1) spectrum; the two converge as `n` grows.
#[pyfunction]
fn szego_rates_ar1(a: f64, n: usize) -> PyResult<(f64, f64)> {
    let f = ar1_spectrum(a).map_err(value_err)?;
    core_szego(&f, n).map(|r| (r.matrix_rate, r.spectral_rate)).map_err(value_err)
}

/// Draws `count` vectors from `N(0, M)`.
#[pyfunction]
fn sample_gaussian(m: &Covariance, seed: u64, count: usize) -> Vec<Vec<f64>> {
    core_sample_gaussian(&m.inner, seed, count)
        .into_iter()
        .map(|v| v.iter().copied().collect())
        .collect()
}

/// Monte Carlo estimate `(mean, std_err)` of the likelihood-ratio moment.
#[pyfunction]
fn moment_mc_estimate(
    m: &Covariance,
    v: &Covariance,
    trials: usize,
    seed: u64,
) -> PyResult<(f64, f64)> {
    core_moment_mc(&m.inner, &v.inner, trials, seed)
        .map(|e| (e.mean, e.std_err))
        .map_err(value_err)
}

/// Miss-rate experiment for a detector built on `m`, with data from `m`.
#[pyfunction]
#[pyo3(signature = (m, alpha, samples, trials, seed))]
fn miss_rate(
    py: Python<'_>,
    m: &Covariance,
    alpha: f64,
    samples: usize,
    trials: usize,
    seed: u64,
) -> PyResult<Py<PyDict>> {
    let spec = CovarianceSpec::Dense {
        entries: Covariance { inner: m.inner.clone() }.entries(),
    };
    let cfg = ExperimentConfig {
        detector_spec: DetectorSpec { m: spec.clone(), alpha, samples, seed },
        truth: spec,
        trials,
        seed,
    };
    let result = estimate_miss(&cfg, &m.inner).map_err(value_err)?;
    let dict = PyDict::new(py);
    dict.set_item("hit_count", result.hit_count)?;
    dict.set_item("rate", result.rate)?;
    dict.set_item("wilson_ci_95", result.wilson_ci_95)?;
    dict.set_item("log_rate", result.log_rate)?;
    dict.set_item("exponent", result.exponent)?;
    Ok(dict.unbind())
}

/// Paired-stream robustness experiment; returns the budget check fields.
#[pyfunction]
fn robustness(
    py: Python<'_>,
    m: &Covariance,
    v: &Covariance,
    alpha: f64,
    trials: usize,
    seed: u64,
) -> PyResult<Py<PyDict>> {
    let report =
        robustness_experiment(&m.inner, &v.inner, alpha, trials, seed).map_err(value_err)?;
    let dict = PyDict::new(py);
    dict.set_item("log_beta_m", report.log_beta_m)?;
    dict.set_item("log_beta_v", report.log_beta_v)?;
    dict.set_item("budget", report.budget)?;
    dict.set_item("three_sigma", report.three_sigma)?;
    dict.set_item("holds", report.holds)?;
    Ok(dict.unbind())
}

/// Wilson 95% confidence interval for a binomial rate.
#[pyfunction]
fn wilson_interval(hits: u64, trials: usize) -> (f64, f64) {
    core_wilson(hits, trials)
}

#[pymodule]
fn gaussdet_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Covariance>()?;
    m.add_class::<Detector>()?;
    m.add_function(wrap_pyfunction!(kl_identity, m)?)?;
    m.add_function(wrap_pyfunction!(kl_general, m)?)?;
    m.add_function(wrap_pyfunction!(log_likelihood_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(lrt_moment, m)?)?;
    m.add_function(wrap_pyfunction!(commuting_moment, m)?)?;
    m.add_function(wrap_pyfunction!(model2_moment, m)?)?;
    m.add_function(wrap_pyfunction!(membership, m)?)?;
    m.add_function(wrap_pyfunction!(stein_bounds, m)?)?;
    m.add_function(wrap_pyfunction!(mu0_upper_bound, m)?)?;
    m.add_function(wrap_pyfunction!(spectral_functional_ar1, m)?)?;
    m.add_function(wrap_pyfunction!(szego_rates_ar1, m)?)?;
    m.add_function(wrap_pyfunction!(sample_gaussian, m)?)?;
    m.add_function(wrap_pyfunction!(moment_mc_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(miss_rate, m)?)?;
    m.add_function(wrap_pyfunction!(robustness, m)?)?;
    m.add_function(wrap_pyfunction!(wilson_interval, m)?)?;
    Ok(())
}
