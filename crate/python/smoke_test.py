#!/usr/bin/env python3
"""Builds the gaussdet_py extension and exercises it against known values.

Run from anywhere:  python3 python/smoke_test.py
"""

import math
import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent


def build_extension() -> Path:
    subprocess.run(
        ["cargo", "build", "-p", "gaussdet-py"],
        cwd=REPO,
        check=True,
    )
    lib = REPO / "target" / "debug" / "libgaussdet_py.so"
    if not lib.exists():
        sys.exit(f"extension library not found at {lib}")
    return lib


def import_module(lib: Path, scratch: Path):
    target = scratch / "gaussdet_py.so"
    shutil.copyfile(lib, target)
    sys.path.insert(0, str(scratch))
    import gaussdet_py  # noqa: E402

    return gaussdet_py


CHECKS = 0


def check(label: str, condition: bool) -> None:
    global CHECKS
    if not condition:
        sys.exit(f"FAIL: {label}")
    CHECKS += 1


def close(a: float, b: float, tol: float = 1e-12) -> bool:
    return abs(a - b) <= tol


def main() -> None:
    lib = build_extension()
    with tempfile.TemporaryDirectory() as scratch:
        g = import_module(lib, Path(scratch))

        # Covariance construction and spectra of eigenvalues.
        m22 = g.Covariance.diagonal([2.0, 2.0])
        check("dimension", m22.n() == 2)
        check("eigenvalues", m22.eigenvalues() == [2.0, 2.0])
        check("log_det", close(m22.log_det(), 2.0 * math.log(2.0)))
        ident4 = g.Covariance.scaled_identity(1.0, 4)

        # Divergences.
        check("kl of identity", g.kl_identity(ident4) == 0.0)
        check("kl closed form", close(g.kl_identity(m22), math.log(2.0) - 0.5))
        check("kl general at m", g.kl_general(m22, m22) == 0.0)

        # Log-likelihood ratio at the origin is half the log determinant.
        check(
            "llr at origin",
            close(g.log_likelihood_ratio(m22, [0.0, 0.0]), math.log(2.0)),
        )

        # Robust-set moments: scalar closed form 2 / sqrt(6).
        m2 = g.Covariance.diagonal([2.0])
        v4 = g.Covariance.diagonal([4.0])
        expected = 2.0 / math.sqrt(6.0)
        check("lrt moment", close(g.lrt_moment(m2, v4), expected))
        check("commuting moment", close(g.commuting_moment([2.0], [4.0]), expected))
        check("model2 moment at s", close(g.model2_moment(m2, m2), 1.0))

        rep = g.membership(m2, v4, epsilon=1.0)
        check("membership log moment", close(rep["log_moment"], math.log(expected)))
        check("membership member", rep["member"] is True)
        check("membership core", rep["core_member"] is True)

        guard = g.membership(g.Covariance.diagonal([0.5]), v4)
        check("guard failure inf", math.isinf(guard["log_moment"]))
        check("guard failure member", guard["member"] is False)

        # Detector calibration: threshold plus offset recovers the divergence.
        det = g.Detector.calibrate(m2, 0.5, samples=20000, seed=0)
        check("gamma plus mu0", close(det.gamma() + det.mu0(), g.kl_identity(m2)))
        check("statistic at origin", close(det.statistic([0.0]), 0.5 * math.log(2.0)))
        check("decision at origin", det.decide([0.0]) == "h0")

        # Bounds.
        sb = g.stein_bounds(m22, 0.2, samples=20000, seed=1)
        check("stein d", close(sb["d"], g.kl_identity(m22)))
        check("stein order", sb["lower_log_beta"] <= sb["upper_log_beta"])
        check(
            "mu0 tail bound",
            close(g.mu0_upper_bound(m22, 0.2, 2.0), math.sqrt(7.5)),
        )

        # Spectral limits.
        check("functional of equal spectra", g.spectral_functional_ar1(0.0, 0.0) == 0.0)
        check(
            "functional frozen value",
            close(g.spectral_functional_ar1(0.5, 0.3), -0.008182887386106591, 1e-9),
        )
        matrix_rate, spectral_rate = g.szego_rates_ar1(0.5, 256)
        check("szego limit", close(spectral_rate, math.log(0.75), 1e-6))
        check("szego gap", abs(matrix_rate - spectral_rate) < 2e-3)

        # Sampling determinism.
        draws = g.sample_gaussian(m22, 1, 5)
        check("sample shape", len(draws) == 5 and all(len(x) == 2 for x in draws))
        check("sample determinism", draws == g.sample_gaussian(m22, 1, 5))

        # Monte Carlo estimators.
        mean, std_err = g.moment_mc_estimate(m2, v4, 20000, 3)
        check("moment mc", abs(mean - expected) <= 4.0 * std_err)

        miss = g.miss_rate(g.Covariance.scaled_identity(2.0, 4), 0.2, 20000, 20000, 5)
        check("miss rate range", 0.0 < miss["rate"] < 1.0)
        check("miss exponent sign", miss["exponent"] > 0.0)

        rob = g.robustness(
            g.Covariance.scaled_identity(2.0, 4),
            g.Covariance.scaled_identity(2.2, 4),
            0.2,
            20000,
            7,
        )
        check("robustness holds", rob["holds"] is True)

        lo, hi = g.wilson_interval(50, 100)
        check("wilson lo", close(lo, 0.40383153, 1e-6))
        check("wilson hi", close(hi, 0.59616847, 1e-6))

        # Errors surface as ValueError.
        try:
            g.Covariance.diagonal([-1.0])
        except ValueError:
            check("negative eigenvalue rejected", True)
        else:
            sys.exit("FAIL: negative eigenvalue accepted")
        try:
            g.kl_general(m2, m22)
        except ValueError:
            check("dimension mismatch rejected", True)
        else:
            sys.exit("FAIL: dimension mismatch accepted")

    print(f"smoke test passed: {CHECKS} checks")


if __name__ == "__main__":
    main()
