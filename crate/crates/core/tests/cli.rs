//! End-to-end checks of the command-line surface: worked examples with known
//! outputs, exit-code conventions, config diagnostics, output artifacts, and
//! the CSV schema.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};
use std::time::Instant;

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gaussdet"))
}

struct Run {
    output: Output,
}

impl Run {
    fn code(&self) -> i32 {
        self.output.status.code().expect("process terminated by signal")
    }

    fn stdout_json(&self) -> Value {
        serde_json::from_slice(&self.output.stdout).expect("stdout is one JSON record")
    }

    fn stderr(&self) -> String {
        String::from_utf8_lossy(&self.output.stderr).into_owned()
    }
}

fn run(args: &[&str]) -> Run {
    let output = bin().args(args).output().expect("binary runs");
    Run { output }
}

fn write_config(dir: &tempfile::TempDir, name: &str, body: &str) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, body).unwrap();
    path
}

fn path_str(path: &PathBuf) -> &str {
    path.to_str().unwrap()
}

#[test]
fn kl_of_the_identity_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(&dir, "kl.json", r#"{"m": {"kind": "scaled_identity", "c": 1.0, "n": 4}}"#);
    let run = run(&["kl", path_str(&cfg)]);
    assert_eq!(run.code(), 0);
    let json = run.stdout_json();
    assert_eq!(json["d_identity_m"], 0.0);
    assert_eq!(json["command"], "kl");
}

#[test]
fn kl_matches_the_closed_form_to_five_decimals() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(&dir, "kl.json", r#"{"m": {"kind": "diagonal", "eigenvalues": [2.0, 2.0]}}"#);
    let run = run(&["kl", path_str(&cfg)]);
    assert_eq!(run.code(), 0);
    let d = run.stdout_json()["d_identity_m"].as_f64().unwrap();
    assert!((d - 0.19315).abs() < 5e-6, "{d}");
}

#[test]
fn membership_of_the_reference_in_its_own_set() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        &dir,
        "memb.json",
        r#"{"m": {"kind": "scaled_identity", "c": 2.0, "n": 3},
            "v": {"kind": "scaled_identity", "c": 2.0, "n": 3},
            "slack": {"kind": "explicit", "epsilon": 0.0}}"#,
    );
    let run = run(&["membership", path_str(&cfg)]);
    assert_eq!(run.code(), 0);
    let json = run.stdout_json();
    assert_eq!(json["member"], true);
    assert_eq!(json["core_member"], true);
    assert_eq!(json["log_moment"], 0.0);
}

#[test]
fn scalar_membership_reports_the_closed_form_log_moment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        &dir,
        "memb.json",
        r#"{"m": {"kind": "diagonal", "eigenvalues": [2.0]},
            "v": {"kind": "diagonal", "eigenvalues": [4.0]},
            "slack": {"kind": "explicit", "epsilon": 1.0}}"#,
    );
    let run = run(&["membership", path_str(&cfg)]);
    assert_eq!(run.code(), 0);
    let log_moment = run.stdout_json()["log_moment"].as_f64().unwrap();
    assert!((log_moment - (-0.20273)).abs() < 1e-5, "{log_moment}");
}

#[test]
fn guard_failure_reports_an_infinite_moment_and_no_membership() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        &dir,
        "memb.json",
        r#"{"m": {"kind": "diagonal", "eigenvalues": [0.5]},
            "v": {"kind": "diagonal", "eigenvalues": [4.0]},
            "slack": {"kind": "explicit", "epsilon": 0.0}}"#,
    );
    let run = run(&["membership", path_str(&cfg)]);
    assert_eq!(run.code(), 0);
    let json = run.stdout_json();
    assert_eq!(json["member"], false);
    assert_eq!(json["log_moment"], "inf");
    assert_eq!(json["pd_guard_ok"], false);
}

#[test]
fn spectral_functional_of_identical_spectra_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        &dir,
        "spec.json",
        r#"{"op": "functional", "f_s": {"kind": "ar1", "a": 0.0}, "f_k": {"kind": "ar1", "a": 0.0}}"#,
    );
    let run = run(&["spectral", path_str(&cfg)]);
    assert_eq!(run.code(), 0);
    assert_eq!(run.stdout_json()["value"], 0.0);
}

#[test]
fn inverse_check_accepts_the_reference_alone() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        &dir,
        "inv.json",
        r#"{"m0": {"kind": "diagonal", "eigenvalues": [2.0, 3.0]},
            "family": [{"kind": "diagonal", "eigenvalues": [2.0, 3.0]}],
            "slack": {"kind": "explicit", "epsilon": 0.0}}"#,
    );
    let run = run(&["inverse", path_str(&cfg)]);
    assert_eq!(run.code(), 0);
    let json = run.stdout_json();
    assert_eq!(json["satisfied"], true);
    assert_eq!(json["max_log_moment"], 0.0);
}

#[test]
fn small_simulation_finishes_within_five_seconds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        &dir,
        "sim.json",
        r#"{"experiment": "false_alarm",
            "detector_spec": {"m": {"kind": "scaled_identity", "c": 2.0, "n": 4},
                              "alpha": 0.1, "samples": 10000, "seed": 5},
            "truth": {"kind": "scaled_identity", "c": 1.0, "n": 4},
            "trials": 1000, "seed": 9}"#,
    );
    let start = Instant::now();
    let run = run(&["simulate", path_str(&cfg)]);
    let elapsed = start.elapsed();
    assert_eq!(run.code(), 0);
    assert!(elapsed.as_secs_f64() < 5.0, "took {elapsed:?}");
    let json = run.stdout_json();
    assert_eq!(json["trials"], 1000);
    let rate = json["rate"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&rate));
}

#[test]
fn malformed_json_exits_with_the_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(&dir, "broken.json", "{\"m\": \n");
    let run = run(&["kl", path_str(&cfg)]);
    assert_eq!(run.code(), 2);
    assert!(run.stderr().contains("not valid JSON"), "{}", run.stderr());
}

#[test]
fn missing_config_file_exits_with_the_config_code() {
    let run = run(&["kl", "/nonexistent/nowhere.json"]);
    assert_eq!(run.code(), 2);
    assert!(run.stderr().contains("cannot read config"), "{}", run.stderr());
}

#[test]
fn domain_errors_exit_with_the_math_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        &dir,
        "bounds.json",
        r#"{"m": {"kind": "diagonal", "eigenvalues": [2.0, 2.0]}, "alpha": 1.5}"#,
    );
    let run = run(&["bounds", path_str(&cfg)]);
    assert_eq!(run.code(), 3);
    assert!(run.stderr().contains("error:"), "{}", run.stderr());
}

#[test]
fn twenty_corrupted_configs_are_rejected_with_key_diagnostics() {
    // Each case: (command, corrupted config, token the diagnostic must name).
    let cases: Vec<(&str, &str, &str)> = vec![
        ("kl", r#"[1, 2, 3]"#, "JSON object"),
        ("kl", r#"{"m": {"kind": "diagonal", "eigenvalues": [2.0]}, "extra": 1}"#, "extra"),
        ("kl", r#"{}"#, "missing field `m`"),
        ("kl", r#"{"m": {"kind": "banana"}}"#, "banana"),
        ("kl", r#"{"m": 7}"#, "`m`"),
        (
            "membership",
            r#"{"m": {"kind": "diagonal", "eigenvalues": [2.0]},
                "slack": {"kind": "explicit", "epsilon": 0.0}}"#,
            "missing field `v`",
        ),
        (
            "membership",
            r#"{"m": {"kind": "diagonal", "eigenvalues": [2.0]},
                "v": {"kind": "diagonal", "eigenvalues": [2.0]}}"#,
            "missing field `slack`",
        ),
        (
            "membership",
            r#"{"m": {"kind": "diagonal", "eigenvalues": [2.0]},
                "v": {"kind": "diagonal", "eigenvalues": [2.0]},
                "slack": {"kind": "explicit", "epsilon": 0.0},
                "model": "quadratic"}"#,
            "quadratic",
        ),
        (
            "membership",
            r#"{"m": {"kind": "diagonal", "eigenvalues": [2.0]},
                "v": {"kind": "diagonal", "eigenvalues": [2.0]},
                "slack": {"kind": "explicit", "epsilon": 0.0},
                "tol": 0.1}"#,
            "tol",
        ),
        (
            "membership",
            r#"{"m": {"kind": "diagonal", "eigenvalues": [2.0]},
                "v": {"kind": "diagonal", "eigenvalues": [2.0]},
                "slack": {"kind": "loose"}}"#,
            "loose",
        ),
        (
            "bounds",
            r#"{"m": {"kind": "diagonal", "eigenvalues": [2.0]}, "alpha": "high"}"#,
            "`alpha`",
        ),
        (
            "bounds",
            r#"{"m": {"kind": "diagonal", "eigenvalues": [2.0]}, "alpha": 0.1, "samples": -5}"#,
            "`samples`",
        ),
        (
            "bounds",
            r#"{"m": {"kind": "diagonal", "eigenvalues": [2.0]}, "alpha": 0.1, "trials": 10}"#,
            "trials",
        ),
        (
            "detect",
            r#"{"m": {"kind": "diagonal", "eigenvalues": [2.0]}, "alpha": 0.1}"#,
            "missing field `y`",
        ),
        (
            "detect",
            r#"{"m": {"kind": "diagonal", "eigenvalues": [2.0]}, "alpha": 0.1, "y": [0.5, null]}"#,
            "y[1]",
        ),
        (
            "detect",
            r#"{"m": {"kind": "diagonal", "eigenvalues": [2.0]}, "alpha": 0.1,
                "y": [0.5], "seed": 1.5}"#,
            "`seed`",
        ),
        (
            "simulate",
            r#"{"m": {"kind": "diagonal", "eigenvalues": [2.0]},
                "v": {"kind": "diagonal", "eigenvalues": [2.0]},
                "alpha": 0.2, "trials": 1000, "seed": 1}"#,
            "experiment",
        ),
        (
            "simulate",
            r#"{"experiment": "warp",
                "m": {"kind": "diagonal", "eigenvalues": [2.0]},
                "v": {"kind": "diagonal", "eigenvalues": [2.0]},
                "alpha": 0.2, "trials": 1000, "seed": 1}"#,
            "warp",
        ),
        (
            "simulate",
            r#"{"experiment": "robustness",
                "m": {"kind": "diagonal", "eigenvalues": [2.0]},
                "v": {"kind": "diagonal", "eigenvalues": [2.0]},
                "alpha": 0.2, "seed": 1}"#,
            "missing field `trials`",
        ),
        (
            "spectral",
            r#"{"op": "convolve", "density": {"kind": "ar1", "a": 0.5}, "n": 8}"#,
            "convolve",
        ),
        ("spectral", r#"{"density": {"kind": "ar1", "a": 0.5}, "n": 8}"#, "op"),
        (
            "inverse",
            r#"{"m0": {"kind": "diagonal", "eigenvalues": [2.0]},
                "family": {"kind": "diagonal", "eigenvalues": [2.0]},
                "slack": {"kind": "explicit", "epsilon": 0.0}}"#,
            "`family`",
        ),
        (
            "inverse",
            r#"{"family": [{"kind": "diagonal", "eigenvalues": [2.0]}],
                "slack": {"kind": "explicit", "epsilon": 0.0}}"#,
            "missing field `m0`",
        ),
    ];
    assert!(cases.len() >= 20, "need at least twenty corrupted configs");

    let dir = tempfile::tempdir().unwrap();
    for (i, (command, body, token)) in cases.iter().enumerate() {
        let cfg = write_config(&dir, &format!("bad{i}.json"), body);
        let run = run(&[command, path_str(&cfg)]);
        let stderr = run.stderr();
        assert_eq!(run.code(), 2, "case {i} ({command}) stderr: {stderr}");
        assert!(stderr.contains(token), "case {i} ({command}): {stderr}");
    }
}

#[test]
fn csv_format_has_the_fixed_column_schema() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        &dir,
        "memb.json",
        r#"{"m": {"kind": "diagonal", "eigenvalues": [0.5]},
            "v": {"kind": "diagonal", "eigenvalues": [4.0]},
            "slack": {"kind": "explicit", "epsilon": 0.0}}"#,
    );
    let run = run(&["membership", path_str(&cfg), "--format", "csv"]);
    assert_eq!(run.code(), 0);
    let stdout = String::from_utf8_lossy(&run.output.stdout).into_owned();
    let mut lines = stdout.lines();
    assert_eq!(
        lines.next().unwrap(),
        "command,config_hash,n,alpha,metric,value,ci_lo,ci_hi,seed",
    );
    let first = lines.next().unwrap();
    let fields: Vec<&str> = first.split(',').collect();
    assert_eq!(fields.len(), 9);
    assert_eq!(fields[0], "membership");
    assert_eq!(fields[1].len(), 64);
    assert_eq!(fields[4], "log_moment");
    assert_eq!(fields[5], "inf");
}

#[test]
fn seed_flag_overrides_the_config_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        &dir,
        "sim.json",
        r#"{"experiment": "false_alarm",
            "detector_spec": {"m": {"kind": "scaled_identity", "c": 2.0, "n": 4},
                              "alpha": 0.1, "samples": 10000, "seed": 5},
            "truth": {"kind": "scaled_identity", "c": 1.0, "n": 4},
            "trials": 1000, "seed": 9}"#,
    );
    let base = run(&["simulate", path_str(&cfg)]);
    let overridden = run(&["simulate", path_str(&cfg), "--seed", "42"]);
    assert_eq!(base.code(), 0);
    assert_eq!(overridden.code(), 0);
    assert_eq!(base.stdout_json()["seeds"]["trial_seed"], 9);
    assert_eq!(overridden.stdout_json()["seeds"]["trial_seed"], 42);
}

#[test]
fn out_directory_receives_result_csv_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(&dir, "kl.json", r#"{"m": {"kind": "diagonal", "eigenvalues": [2.0]}}"#);
    let out = dir.path().join("artifacts");
    let run = run(&["kl", path_str(&cfg), "--out", out.to_str().unwrap()]);
    assert_eq!(run.code(), 0);

    let result: Value =
        serde_json::from_str(&fs::read_to_string(out.join("result.json")).unwrap()).unwrap();
    assert_eq!(result, run.stdout_json());

    let csv = fs::read_to_string(out.join("results.csv")).unwrap();
    assert!(csv.starts_with("command,config_hash,n,alpha,metric,value,ci_lo,ci_hi,seed\n"));

    let manifest: Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    for key in ["command", "config_path", "config_hash", "tool_version", "timestamp", "outputs"] {
        assert!(manifest.get(key).is_some(), "manifest missing {key}");
    }
    assert_eq!(manifest["command"], "kl");
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
    // The result record itself carries no timestamp; the manifest does.
    assert!(result.get("timestamp").is_none());
}

#[test]
fn identical_configs_hash_identically_across_formatting() {
    let dir = tempfile::tempdir().unwrap();
    let a = write_config(&dir, "a.json", r#"{"m": {"kind": "diagonal", "eigenvalues": [2.0]}}"#);
    let b = write_config(
        &dir,
        "b.json",
        "{\n  \"m\": {\"eigenvalues\": [2.0], \"kind\": \"diagonal\"}\n}\n",
    );
    let hash_of = |cfg: &PathBuf| {
        let out_dir = dir.path().join(format!("{}-out", cfg.file_stem().unwrap().to_str().unwrap()));
        let run = run(&["kl", path_str(cfg), "--out", out_dir.to_str().unwrap()]);
        assert_eq!(run.code(), 0);
        let manifest: Value =
            serde_json::from_str(&fs::read_to_string(out_dir.join("manifest.json")).unwrap())
                .unwrap();
        manifest["config_hash"].as_str().unwrap().to_owned()
    };
    assert_eq!(hash_of(&a), hash_of(&b));
}
