//! Command-line workbench tying the library into reproducible experiments.
//!
//! One binary, subcommand style: `kl`, `membership`, `bounds`, `detect`,
//! `simulate`, `spectral`, `inverse`. Every subcommand reads one JSON config
//! file, prints one machine-diffable JSON record to stdout (or CSV rows with
//! `--format csv`), and writes a short human summary to stderr. With
//! `--out DIR` it also persists `result.json`, `results.csv`, and
//! `manifest.json`.
//!
//! Reproducibility contract: the result record is a pure function of the
//! effective config, so re-running a command with the same config and seed
//! produces byte-identical JSON. The manifest records the SHA-256 of the
//! canonicalized (sorted-key, no-whitespace) effective config; it is the
//! only artifact carrying a timestamp.
//!
//! Exit codes: 0 success, 2 config error (unreadable file, malformed JSON,
//! schema violation - diagnosed with the offending key path), 3 math-domain
//! error from the library, 4 internal error.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::bounds::{cp_constant, mu0_upper_bound, SteinBounds};
use crate::detector::{calibrate, mu0_quantile, CalibrationRecord, Hypothesis};
use crate::divergence::{kl_general, kl_identity};
use crate::matgauss::CovarianceSpec;
use crate::mcsim::{
    estimate_false_alarm, estimate_miss, moment_mc_estimate, robustness_experiment, DetectorSpec,
    ExperimentConfig, ExperimentResult, MomentEstimate, RobustnessReport, WILSON_Z,
};
use crate::robustset::{
    check_assumptions, lrt_moment, membership, model2_membership, proposition1_check,
    AssumptionReport, MembershipReport, Prop1Report, SlackPolicy,
};
use crate::spectral::{
    fourier_coefficient, spectral_assumptions, spectral_functional, szego_log_det_rate,
    toeplitz_from_spectrum, SpectralDensity, DEFAULT_GRID_POINTS,
};
use crate::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DOMAIN: i32 = 3;
pub const EXIT_INTERNAL: i32 = 4;

/// Provenance record written next to the results; the only timestamped
/// artifact, so determinism checks compare `result.json` alone.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_path: String,
    /// SHA-256 of the canonicalized effective config JSON.
    pub config_hash: String,
    pub tool_version: String,
    /// ISO-8601 UTC.
    pub timestamp: String,
    pub outputs: Vec<String>,
}

#[derive(Debug, Parser)]
#[command(
    name = "gaussdet",
    version,
    about = "Workbench for likelihood-ratio detection of Gaussian sequences"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Override the config's top-level seed (ignored by seedless commands).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write result.json, results.csv, and manifest.json into this directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Stdout format for the result record.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Divergences D(I||M) and, with a second covariance, D(V||M).
    Kl { config: PathBuf },
    /// Membership of an alternative in the robust set around M.
    Membership { config: PathBuf },
    /// Divergence-based miss-probability bounds and the mu0 tail bound.
    Bounds { config: PathBuf },
    /// Calibrate a detector and decide one observation vector.
    Detect { config: PathBuf },
    /// Monte Carlo experiments: false_alarm, miss, robustness, moment.
    Simulate { config: PathBuf },
    /// Stationary-spectrum operations: functional, membership, fourier,
    /// toeplitz, szego, assumptions.
    Spectral { config: PathBuf },
    /// Family-level check: does the reference tolerate every alternative?
    Inverse { config: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

// ---------------------------------------------------------------- configs

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct KlConfig {
    m: CovarianceSpec,
    #[serde(default)]
    v: Option<CovarianceSpec>,
}

/// Which moment criterion a membership test uses.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Model {
    /// Noise-vs-M likelihood ratio.
    #[default]
    Lrt,
    /// Signal-in-white-noise shifted covariances.
    Signal,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MembershipConfig {
    m: CovarianceSpec,
    v: CovarianceSpec,
    slack: SlackPolicy,
    #[serde(default)]
    model: Model,
}

fn default_samples() -> usize {
    100_000
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BoundsConfig {
    m: CovarianceSpec,
    alpha: f64,
    /// Calibration samples for the mu0 quantile estimate.
    #[serde(default = "default_samples")]
    samples: usize,
    #[serde(default)]
    seed: u64,
    /// Optional moment exponent in (1, 2] for the distribution-free mu0 bound.
    #[serde(default)]
    p: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DetectConfig {
    m: CovarianceSpec,
    alpha: f64,
    #[serde(default = "default_samples")]
    samples: usize,
    #[serde(default)]
    seed: u64,
    y: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "experiment", rename_all = "snake_case")]
enum SimulateConfig {
    FalseAlarm { detector_spec: DetectorSpec, truth: CovarianceSpec, trials: usize, seed: u64 },
    Miss { detector_spec: DetectorSpec, truth: CovarianceSpec, trials: usize, seed: u64 },
    Robustness { m: CovarianceSpec, v: CovarianceSpec, alpha: f64, trials: usize, seed: u64 },
    Moment { m: CovarianceSpec, v: CovarianceSpec, trials: usize, seed: u64 },
}

fn default_grid() -> usize {
    DEFAULT_GRID_POINTS
}

#[derive(Debug, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
enum SpectralConfig {
    Functional {
        f_s: SpectralDensity,
        f_k: SpectralDensity,
        #[serde(default = "default_grid")]
        grid_points: usize,
    },
    Membership {
        f_s: SpectralDensity,
        f_k: SpectralDensity,
        tol: f64,
        #[serde(default = "default_grid")]
        grid_points: usize,
    },
    Fourier {
        density: SpectralDensity,
        k: usize,
        #[serde(default = "default_grid")]
        grid_points: usize,
    },
    Toeplitz {
        density: SpectralDensity,
        n: usize,
    },
    Szego {
        density: SpectralDensity,
        n: usize,
    },
    Assumptions {
        density: SpectralDensity,
        delta: f64,
        #[serde(default = "default_grid")]
        grid_points: usize,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct InverseConfig {
    m0: CovarianceSpec,
    family: Vec<CovarianceSpec>,
    slack: SlackPolicy,
    /// When set, also report the family regularity diagnostics.
    #[serde(default)]
    delta: Option<f64>,
}

// ---------------------------------------------------------------- outputs

#[derive(Serialize)]
struct KlOutput {
    command: &'static str,
    n: usize,
    d_identity_m: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    d_v_m: Option<f64>,
}

#[derive(Serialize)]
struct MembershipOutput {
    command: &'static str,
    model: Model,
    n: usize,
    #[serde(flatten)]
    report: MembershipReport,
}

#[derive(Serialize)]
struct BoundsOutput {
    command: &'static str,
    n: usize,
    alpha: f64,
    samples: usize,
    seed: u64,
    #[serde(flatten)]
    bounds: SteinBounds,
    #[serde(skip_serializing_if = "Option::is_none")]
    p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    cp: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mu0_upper: Option<f64>,
}

#[derive(Serialize)]
struct DetectOutput {
    command: &'static str,
    n: usize,
    alpha: f64,
    gamma: f64,
    mu0: f64,
    statistic: f64,
    decision: Hypothesis,
    calibration: CalibrationRecord,
}

#[derive(Serialize)]
struct RateOutput {
    command: &'static str,
    experiment: &'static str,
    alpha: f64,
    #[serde(flatten)]
    result: ExperimentResult,
}

#[derive(Serialize)]
struct RobustnessOutput {
    command: &'static str,
    experiment: &'static str,
    n: usize,
    alpha: f64,
    trials: usize,
    seed: u64,
    #[serde(flatten)]
    report: RobustnessReport,
}

#[derive(Serialize)]
struct MomentOutput {
    command: &'static str,
    experiment: &'static str,
    n: usize,
    trials: usize,
    seed: u64,
    #[serde(flatten)]
    estimate: MomentEstimate,
    /// The exact moment the estimate targets.
    #[serde(with = "crate::ext_real")]
    closed_form: f64,
}

#[derive(Serialize)]
struct FunctionalOutput {
    command: &'static str,
    op: &'static str,
    grid_points: usize,
    value: f64,
}

#[derive(Serialize)]
struct SpectralMembershipOutput {
    command: &'static str,
    op: &'static str,
    grid_points: usize,
    tol: f64,
    functional: f64,
    member: bool,
}

#[derive(Serialize)]
struct FourierOutput {
    command: &'static str,
    op: &'static str,
    k: usize,
    grid_points: usize,
    value: f64,
}

#[derive(Serialize)]
struct ToeplitzOutput {
    command: &'static str,
    op: &'static str,
    n: usize,
    log_det: f64,
    entries: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct SzegoOutput {
    command: &'static str,
    op: &'static str,
    n: usize,
    matrix_rate: f64,
    spectral_rate: f64,
    gap: f64,
}

#[derive(Serialize)]
struct AssumptionsOutput {
    command: &'static str,
    op: &'static str,
    delta: f64,
    grid_points: usize,
    a5_value: f64,
    a6_value: f64,
}

#[derive(Serialize)]
struct InverseOutput {
    command: &'static str,
    n: usize,
    family_size: usize,
    slack_budget: f64,
    #[serde(flatten)]
    report: Prop1Report,
    #[serde(skip_serializing_if = "Option::is_none")]
    assumptions: Option<AssumptionReport>,
}

// -------------------------------------------------------------- plumbing

#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Failure { code: EXIT_CONFIG, message: message.into() }
    }

    fn internal(message: impl Into<String>) -> Self {
        Failure { code: EXIT_INTERNAL, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Internal(_) => EXIT_INTERNAL,
            _ => EXIT_DOMAIN,
        };
        Failure { code, message: e.to_string() }
    }
}

/// One CSV record; empty columns mean "not applicable to this metric".
struct CsvRow {
    metric: &'static str,
    value: f64,
    n: Option<usize>,
    alpha: Option<f64>,
    ci: Option<(f64, f64)>,
    seed: Option<u64>,
}

impl CsvRow {
    fn new(metric: &'static str, value: f64) -> Self {
        CsvRow { metric, value, n: None, alpha: None, ci: None, seed: None }
    }

    fn n(mut self, n: usize) -> Self {
        self.n = Some(n);
        self
    }

    fn alpha(mut self, alpha: f64) -> Self {
        self.alpha = Some(alpha);
        self
    }

    fn ci(mut self, lo: f64, hi: f64) -> Self {
        self.ci = Some((lo, hi));
        self
    }

    fn seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }
}

struct CommandOutput {
    command: &'static str,
    json: Value,
    rows: Vec<CsvRow>,
    human: Vec<String>,
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// Infinities and NaN as the same sentinels the JSON encoding uses.
fn fmt_value(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v}")
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<Value, Failure> {
    serde_json::to_value(value).map_err(|e| Failure::internal(format!("serialization: {e}")))
}

fn sha256_hex(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    let mut hex = String::with_capacity(64);
    for byte in digest {
        hex.push_str(&format!("{byte:02x}"));
    }
    hex
}

struct Loaded<T> {
    config: T,
    /// SHA-256 of the canonical effective config.
    hash: String,
}

/// Reads, seed-overrides, canonicalizes, hashes, and type-checks a config.
fn load_config<T: DeserializeOwned>(
    path: &Path,
    seed_override: Option<u64>,
    accepts_seed: bool,
) -> Result<Loaded<T>, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::config(format!("cannot read config {}: {e}", path.display())))?;
    let mut value: Value = serde_json::from_str(&text)
        .map_err(|e| Failure::config(format!("config {} is not valid JSON: {e}", path.display())))?;
    let Value::Object(fields) = &mut value else {
        return Err(Failure::config(format!(
            "config {} must be a JSON object at the top level",
            path.display()
        )));
    };
    if let Some(seed) = seed_override {
        if accepts_seed {
            fields.insert("seed".into(), Value::from(seed));
        } else {
            eprintln!("note: --seed has no effect on this command");
        }
    }
    // serde_json maps are sorted, so this is the canonical form already.
    let canonical = serde_json::to_string(&value)
        .map_err(|e| Failure::internal(format!("canonicalization: {e}")))?;
    let hash = sha256_hex(&canonical);
    let config = typed_config(value)?;
    Ok(Loaded { config, hash })
}

/// The typed deserialization step, diagnosing failures by key path.
fn typed_config<T: DeserializeOwned>(value: Value) -> Result<T, Failure> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        Failure::config(format!("config error at `{path}`: {}", e.inner()))
    })
}

// -------------------------------------------------------------- commands

fn cmd_kl(cfg: KlConfig) -> Result<CommandOutput, Failure> {
    let m = cfg.m.build()?;
    let d_identity_m = kl_identity(&m);
    let d_v_m = match &cfg.v {
        Some(spec) => Some(kl_general(&spec.build()?, &m)?),
        None => None,
    };
    let n = m.n();
    let mut rows = vec![CsvRow::new("d_identity_m", d_identity_m).n(n)];
    let mut human = vec![format!("D(I||M) = {} (n = {n})", fmt_value(d_identity_m))];
    if let Some(d) = d_v_m {
        rows.push(CsvRow::new("d_v_m", d).n(n));
        human.push(format!("D(V||M) = {}", fmt_value(d)));
    }
    Ok(CommandOutput {
        command: "kl",
        json: to_json(&KlOutput { command: "kl", n, d_identity_m, d_v_m })?,
        rows,
        human,
    })
}

fn cmd_membership(cfg: MembershipConfig) -> Result<CommandOutput, Failure> {
    let m = cfg.m.build()?;
    let v = cfg.v.build()?;
    let report = match cfg.model {
        Model::Lrt => membership(&m, &v, &cfg.slack)?,
        Model::Signal => model2_membership(&m, &v, &cfg.slack)?,
    };
    let n = m.n();
    let rows = vec![
        CsvRow::new("log_moment", report.log_moment).n(n),
        CsvRow::new("slack_budget", report.slack_budget).n(n),
        CsvRow::new("member", flag(report.member)).n(n),
        CsvRow::new("core_member", flag(report.core_member)).n(n),
    ];
    let human = vec![format!(
        "member = {} (log moment {} vs budget {}), core member = {}",
        report.member,
        fmt_value(report.log_moment),
        fmt_value(report.slack_budget),
        report.core_member,
    )];
    Ok(CommandOutput {
        command: "membership",
        json: to_json(&MembershipOutput { command: "membership", model: cfg.model, n, report })?,
        rows,
        human,
    })
}

fn cmd_bounds(cfg: BoundsConfig) -> Result<CommandOutput, Failure> {
    let m = cfg.m.build()?;
    let mu0 = mu0_quantile(m.clone(), cfg.alpha, cfg.samples, cfg.seed)?;
    let bounds = SteinBounds::assemble(&m, cfg.alpha, mu0)?;
    let (cp, mu0_upper) = match cfg.p {
        Some(p) => (
            Some(cp_constant(&m, p)?),
            Some(mu0_upper_bound(&m, cfg.alpha, p)?),
        ),
        None => (None, None),
    };
    let n = m.n();
    let mut rows = vec![
        CsvRow::new("d", bounds.d).n(n).alpha(cfg.alpha).seed(cfg.seed),
        CsvRow::new("h_alpha", bounds.h_alpha).n(n).alpha(cfg.alpha).seed(cfg.seed),
        CsvRow::new("mu0", bounds.mu0).n(n).alpha(cfg.alpha).seed(cfg.seed),
        CsvRow::new("lower_log_beta", bounds.lower_log_beta).n(n).alpha(cfg.alpha).seed(cfg.seed),
        CsvRow::new("upper_log_beta", bounds.upper_log_beta).n(n).alpha(cfg.alpha).seed(cfg.seed),
    ];
    if let (Some(cp), Some(upper)) = (cp, mu0_upper) {
        rows.push(CsvRow::new("cp", cp).n(n).alpha(cfg.alpha).seed(cfg.seed));
        rows.push(CsvRow::new("mu0_upper", upper).n(n).alpha(cfg.alpha).seed(cfg.seed));
    }
    let human = vec![
        format!("D(I||M) = {} (n = {n}, alpha = {})", fmt_value(bounds.d), cfg.alpha),
        format!(
            "ln beta bracket = [{}, {}] with mu0 = {}",
            fmt_value(bounds.lower_log_beta),
            fmt_value(bounds.upper_log_beta),
            fmt_value(bounds.mu0),
        ),
    ];
    Ok(CommandOutput {
        command: "bounds",
        json: to_json(&BoundsOutput {
            command: "bounds",
            n,
            alpha: cfg.alpha,
            samples: cfg.samples,
            seed: cfg.seed,
            bounds,
            p: cfg.p,
            cp,
            mu0_upper,
        })?,
        rows,
        human,
    })
}

fn cmd_detect(cfg: DetectConfig) -> Result<CommandOutput, Failure> {
    let m = cfg.m.build()?;
    let detector = calibrate(m, cfg.alpha, cfg.samples, cfg.seed)?;
    let y = DVector::from_vec(cfg.y.clone());
    let statistic = detector.statistic(&y)?;
    let decision = detector.decide(&y)?;
    let n = detector.m().n();
    let rows = vec![
        CsvRow::new("statistic", statistic).n(n).alpha(cfg.alpha).seed(cfg.seed),
        CsvRow::new("gamma", detector.gamma()).n(n).alpha(cfg.alpha).seed(cfg.seed),
        CsvRow::new("mu0", detector.mu0()).n(n).alpha(cfg.alpha).seed(cfg.seed),
        CsvRow::new("decide_h1", flag(decision == Hypothesis::H1))
            .n(n)
            .alpha(cfg.alpha)
            .seed(cfg.seed),
    ];
    let human = vec![format!(
        "decision = {decision} (statistic {} vs gamma {})",
        fmt_value(statistic),
        fmt_value(detector.gamma()),
    )];
    Ok(CommandOutput {
        command: "detect",
        json: to_json(&DetectOutput {
            command: "detect",
            n,
            alpha: cfg.alpha,
            gamma: detector.gamma(),
            mu0: detector.mu0(),
            statistic,
            decision,
            calibration: detector.calibration(),
        })?,
        rows,
        human,
    })
}

fn rate_output(
    experiment: &'static str,
    alpha: f64,
    result: ExperimentResult,
) -> Result<CommandOutput, Failure> {
    let (lo, hi) = result.wilson_ci_95;
    let rows = vec![
        CsvRow::new("rate", result.rate)
            .n(result.n)
            .alpha(alpha)
            .ci(lo, hi)
            .seed(result.seeds.trial_seed),
        CsvRow::new("log_rate", result.log_rate)
            .n(result.n)
            .alpha(alpha)
            .seed(result.seeds.trial_seed),
        CsvRow::new("exponent", result.exponent)
            .n(result.n)
            .alpha(alpha)
            .seed(result.seeds.trial_seed),
    ];
    let human = vec![format!(
        "{experiment} rate = {} [{}, {}] ({} of {} trials), exponent = {}",
        fmt_value(result.rate),
        fmt_value(lo),
        fmt_value(hi),
        result.hit_count,
        result.trials,
        fmt_value(result.exponent),
    )];
    Ok(CommandOutput {
        command: "simulate",
        json: to_json(&RateOutput { command: "simulate", experiment, alpha, result })?,
        rows,
        human,
    })
}

fn cmd_simulate(cfg: SimulateConfig) -> Result<CommandOutput, Failure> {
    match cfg {
        SimulateConfig::FalseAlarm { detector_spec, truth, trials, seed } => {
            let alpha = detector_spec.alpha;
            let cfg = ExperimentConfig { detector_spec, truth, trials, seed };
            rate_output("false_alarm", alpha, estimate_false_alarm(&cfg)?)
        }
        SimulateConfig::Miss { detector_spec, truth, trials, seed } => {
            let alpha = detector_spec.alpha;
            let v = truth.build()?;
            let cfg = ExperimentConfig { detector_spec, truth, trials, seed };
            rate_output("miss", alpha, estimate_miss(&cfg, &v)?)
        }
        SimulateConfig::Robustness { m, v, alpha, trials, seed } => {
            let m = m.build()?;
            let v = v.build()?;
            let report = robustness_experiment(&m, &v, alpha, trials, seed)?;
            let n = m.n();
            let rows = vec![
                CsvRow::new("log_beta_m", report.log_beta_m).n(n).alpha(alpha).seed(seed),
                CsvRow::new("log_beta_v", report.log_beta_v).n(n).alpha(alpha).seed(seed),
                CsvRow::new("budget", report.budget).n(n).alpha(alpha).seed(seed),
                CsvRow::new("three_sigma", report.three_sigma).n(n).alpha(alpha).seed(seed),
                CsvRow::new("holds", flag(report.holds)).n(n).alpha(alpha).seed(seed),
            ];
            let human = vec![format!(
                "ln beta(V) = {} vs ln beta(M) + budget = {} + {}: holds = {}",
                fmt_value(report.log_beta_v),
                fmt_value(report.log_beta_m),
                fmt_value(report.budget),
                report.holds,
            )];
            Ok(CommandOutput {
                command: "simulate",
                json: to_json(&RobustnessOutput {
                    command: "simulate",
                    experiment: "robustness",
                    n,
                    alpha,
                    trials,
                    seed,
                    report,
                })?,
                rows,
                human,
            })
        }
        SimulateConfig::Moment { m, v, trials, seed } => {
            let m = m.build()?;
            let v = v.build()?;
            let estimate = moment_mc_estimate(&m, &v, trials, seed)?;
            let closed_form = lrt_moment(&m, &v)?;
            let n = m.n();
            let mut mean_row =
                CsvRow::new("mean", estimate.mean).n(n).seed(seed);
            if estimate.mean.is_finite() && estimate.std_err.is_finite() {
                mean_row = mean_row.ci(
                    estimate.mean - WILSON_Z * estimate.std_err,
                    estimate.mean + WILSON_Z * estimate.std_err,
                );
            }
            let rows = vec![
                mean_row,
                CsvRow::new("std_err", estimate.std_err).n(n).seed(seed),
                CsvRow::new("closed_form", closed_form).n(n).seed(seed),
            ];
            let human = vec![format!(
                "moment mean = {} +- {} (closed form {})",
                fmt_value(estimate.mean),
                fmt_value(estimate.std_err),
                fmt_value(closed_form),
            )];
            Ok(CommandOutput {
                command: "simulate",
                json: to_json(&MomentOutput {
                    command: "simulate",
                    experiment: "moment",
                    n,
                    trials,
                    seed,
                    estimate,
                    closed_form,
                })?,
                rows,
                human,
            })
        }
    }
}

fn cmd_spectral(cfg: SpectralConfig) -> Result<CommandOutput, Failure> {
    match cfg {
        SpectralConfig::Functional { f_s, f_k, grid_points } => {
            let value = spectral_functional(&f_s, &f_k, grid_points)?;
            Ok(CommandOutput {
                command: "spectral",
                json: to_json(&FunctionalOutput {
                    command: "spectral",
                    op: "functional",
                    grid_points,
                    value,
                })?,
                rows: vec![CsvRow::new("functional", value)],
                human: vec![format!("functional = {}", fmt_value(value))],
            })
        }
        SpectralConfig::Membership { f_s, f_k, tol, grid_points } => {
            if !tol.is_finite() || tol < 0.0 {
                return Err(Error::BadParameter(format!(
                    "tolerance must be nonnegative, got {tol}"
                ))
                .into());
            }
            let functional = spectral_functional(&f_s, &f_k, grid_points)?;
            let member = functional <= tol;
            Ok(CommandOutput {
                command: "spectral",
                json: to_json(&SpectralMembershipOutput {
                    command: "spectral",
                    op: "membership",
                    grid_points,
                    tol,
                    functional,
                    member,
                })?,
                rows: vec![
                    CsvRow::new("functional", functional),
                    CsvRow::new("member", flag(member)),
                ],
                human: vec![format!(
                    "member = {member} (functional {} vs tol {})",
                    fmt_value(functional),
                    fmt_value(tol),
                )],
            })
        }
        SpectralConfig::Fourier { density, k, grid_points } => {
            let value = fourier_coefficient(&density, k, grid_points)?;
            Ok(CommandOutput {
                command: "spectral",
                json: to_json(&FourierOutput {
                    command: "spectral",
                    op: "fourier",
                    k,
                    grid_points,
                    value,
                })?,
                rows: vec![CsvRow::new("fourier_coefficient", value)],
                human: vec![format!("r_{k} = {}", fmt_value(value))],
            })
        }
        SpectralConfig::Toeplitz { density, n } => {
            let matrix = toeplitz_from_spectrum(&density, n)?;
            let entries: Vec<Vec<f64>> =
                (0..n).map(|i| (0..n).map(|j| matrix.entries()[(i, j)]).collect()).collect();
            let log_det = matrix.log_det();
            Ok(CommandOutput {
                command: "spectral",
                json: to_json(&ToeplitzOutput {
                    command: "spectral",
                    op: "toeplitz",
                    n,
                    log_det,
                    entries,
                })?,
                rows: vec![CsvRow::new("log_det", log_det).n(n)],
                human: vec![format!("toeplitz n = {n}, ln det = {}", fmt_value(log_det))],
            })
        }
        SpectralConfig::Szego { density, n } => {
            let rates = szego_log_det_rate(&density, n)?;
            let gap = (rates.matrix_rate - rates.spectral_rate).abs();
            Ok(CommandOutput {
                command: "spectral",
                json: to_json(&SzegoOutput {
                    command: "spectral",
                    op: "szego",
                    n,
                    matrix_rate: rates.matrix_rate,
                    spectral_rate: rates.spectral_rate,
                    gap,
                })?,
                rows: vec![
                    CsvRow::new("matrix_rate", rates.matrix_rate).n(n),
                    CsvRow::new("spectral_rate", rates.spectral_rate).n(n),
                    CsvRow::new("gap", gap).n(n),
                ],
                human: vec![format!(
                    "matrix rate = {}, spectral rate = {}, gap = {}",
                    fmt_value(rates.matrix_rate),
                    fmt_value(rates.spectral_rate),
                    fmt_value(gap),
                )],
            })
        }
        SpectralConfig::Assumptions { density, delta, grid_points } => {
            let integrals = spectral_assumptions(&density, delta, grid_points)?;
            Ok(CommandOutput {
                command: "spectral",
                json: to_json(&AssumptionsOutput {
                    command: "spectral",
                    op: "assumptions",
                    delta,
                    grid_points,
                    a5_value: integrals.a5_value,
                    a6_value: integrals.a6_value,
                })?,
                rows: vec![
                    CsvRow::new("a5_value", integrals.a5_value),
                    CsvRow::new("a6_value", integrals.a6_value),
                ],
                human: vec![format!(
                    "a5 = {}, a6 = {}",
                    fmt_value(integrals.a5_value),
                    fmt_value(integrals.a6_value),
                )],
            })
        }
    }
}

fn cmd_inverse(cfg: InverseConfig) -> Result<CommandOutput, Failure> {
    let m0 = cfg.m0.build()?;
    let family: Vec<_> =
        cfg.family.iter().map(|spec| spec.build()).collect::<crate::Result<_>>()?;
    let slack_budget = cfg.slack.budget(m0.n())?;
    let report = proposition1_check(&m0, &family, &cfg.slack)?;
    let assumptions = match cfg.delta {
        Some(delta) => Some(check_assumptions(&family, delta)?),
        None => None,
    };
    let n = m0.n();
    let mut rows = vec![
        CsvRow::new("max_log_moment", report.max_log_moment).n(n),
        CsvRow::new("slack_budget", slack_budget).n(n),
        CsvRow::new("satisfied", flag(report.satisfied)).n(n),
    ];
    if let Some(a) = &assumptions {
        rows.push(CsvRow::new("max_a1", a.max_a1).n(n));
        rows.push(CsvRow::new("max_a2", a.max_a2).n(n));
    }
    let human = vec![format!(
        "satisfied = {} (max log moment {} vs budget {}, family of {})",
        report.satisfied,
        fmt_value(report.max_log_moment),
        fmt_value(slack_budget),
        family.len(),
    )];
    Ok(CommandOutput {
        command: "inverse",
        json: to_json(&InverseOutput {
            command: "inverse",
            n,
            family_size: family.len(),
            slack_budget,
            report,
            assumptions,
        })?,
        rows,
        human,
    })
}

// ------------------------------------------------------------------ main

/// Parses arguments, runs the command, and returns the process exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            failure.code
        }
    }
}

fn execute(cli: Cli) -> Result<(), Failure> {
    let (output, hash, config_path) = match &cli.command {
        Command::Kl { config } => {
            let loaded = load_config::<KlConfig>(config, cli.seed, false)?;
            (cmd_kl(loaded.config)?, loaded.hash, config)
        }
        Command::Membership { config } => {
            let loaded = load_config::<MembershipConfig>(config, cli.seed, false)?;
            (cmd_membership(loaded.config)?, loaded.hash, config)
        }
        Command::Bounds { config } => {
            let loaded = load_config::<BoundsConfig>(config, cli.seed, true)?;
            (cmd_bounds(loaded.config)?, loaded.hash, config)
        }
        Command::Detect { config } => {
            let loaded = load_config::<DetectConfig>(config, cli.seed, true)?;
            (cmd_detect(loaded.config)?, loaded.hash, config)
        }
        Command::Simulate { config } => {
            let loaded = load_config::<SimulateConfig>(config, cli.seed, true)?;
            (cmd_simulate(loaded.config)?, loaded.hash, config)
        }
        Command::Spectral { config } => {
            let loaded = load_config::<SpectralConfig>(config, cli.seed, false)?;
            (cmd_spectral(loaded.config)?, loaded.hash, config)
        }
        Command::Inverse { config } => {
            let loaded = load_config::<InverseConfig>(config, cli.seed, false)?;
            (cmd_inverse(loaded.config)?, loaded.hash, config)
        }
    };

    let json_line = serde_json::to_string(&output.json)
        .map_err(|e| Failure::internal(format!("result serialization: {e}")))?;
    match cli.format {
        Format::Json => println!("{json_line}"),
        Format::Csv => print!("{}", render_csv(&output, &hash)),
    }
    for line in &output.human {
        eprintln!("{line}");
    }

    if let Some(dir) = &cli.out {
        write_outputs(dir, &output, &hash, config_path, &json_line)?;
    }
    Ok(())
}

fn render_csv(output: &CommandOutput, hash: &str) -> String {
    let mut text = String::from("command,config_hash,n,alpha,metric,value,ci_lo,ci_hi,seed\n");
    for row in &output.rows {
        let n = row.n.map(|n| n.to_string()).unwrap_or_default();
        let alpha = row.alpha.map(fmt_value).unwrap_or_default();
        let (ci_lo, ci_hi) = match row.ci {
            Some((lo, hi)) => (fmt_value(lo), fmt_value(hi)),
            None => (String::new(), String::new()),
        };
        let seed = row.seed.map(|s| s.to_string()).unwrap_or_default();
        text.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            output.command,
            hash,
            n,
            alpha,
            row.metric,
            fmt_value(row.value),
            ci_lo,
            ci_hi,
            seed,
        ));
    }
    text
}

fn write_outputs(
    dir: &Path,
    output: &CommandOutput,
    hash: &str,
    config_path: &Path,
    json_line: &str,
) -> Result<(), Failure> {
    fs::create_dir_all(dir)
        .map_err(|e| Failure::internal(format!("cannot create {}: {e}", dir.display())))?;
    let result_path = dir.join("result.json");
    let csv_path = dir.join("results.csv");
    let manifest_path = dir.join("manifest.json");

    fs::write(&result_path, format!("{json_line}\n"))
        .map_err(|e| Failure::internal(format!("cannot write {}: {e}", result_path.display())))?;
    fs::write(&csv_path, render_csv(output, hash))
        .map_err(|e| Failure::internal(format!("cannot write {}: {e}", csv_path.display())))?;

    let manifest = RunManifest {
        command: output.command.to_string(),
        config_path: config_path.display().to_string(),
        config_hash: hash.to_string(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        outputs: vec![
            result_path.display().to_string(),
            csv_path.display().to_string(),
            manifest_path.display().to_string(),
        ],
    };
    let manifest_json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Failure::internal(format!("manifest serialization: {e}")))?;
    fs::write(&manifest_path, format!("{manifest_json}\n")).map_err(|e| {
        Failure::internal(format!("cannot write {}: {e}", manifest_path.display()))
    })?;
    Ok(())
}
