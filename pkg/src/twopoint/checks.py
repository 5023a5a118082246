"""Named PASS/FAIL suites run by ``twopoint check``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from twopoint.diagnostics import (
    infinity_norm_moment,
    lipschitz_concentration_check,
    md_inequality_audit,
    second_moment_scan,
)
from twopoint.estimators import smoothed_gradient_mc, smoothed_value
from twopoint.geometry import entropic_setup, euclidean_setup, sample_ball, sample_domain
from twopoint.objectives import builtin_objective
from twopoint.optimizer import default_parameters, run_bandit

# (E ||u||_inf^4)^(1/4) at d = 2, from E = 3/8 + 1/pi
INF_NORM_D2 = (3.0 / 8.0 + 1.0 / np.pi) ** 0.25
INF_NORM_BOUND = 150.0**0.25


@dataclass(frozen=True)
class CheckResult:
    suite: str
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.suite}/{self.name}: {self.detail}"


def anchored_d2(rng, samples: int):
    out = []
    rep = second_moment_scan("anchored", "l2norm", "origin", (2, 10, 100), max(samples // 10, 1000), rng)
    for d, est in zip(rep.dims, rep.estimates):
        err = abs(est - d * d)
        out.append(CheckResult("anchored_d2", f"d={d}", err <= 1e-9, f"E||g||^2={float(est)!r} d^2={d * d} |diff|={err:.3g}"))
    return out


def symmetric_moment(rng, samples: int):
    dims = tuple(2**k for k in range(1, 10))
    rep = second_moment_scan("symmetric", "l2norm", "random_ball", dims, samples, rng)
    ok = 0.8 <= rep.fitted_log_slope <= 1.2
    return [
        CheckResult("symmetric_moment", "log_slope", ok, f"slope={rep.fitted_log_slope:.4f} in [0.8, 1.2]"),
        CheckResult("symmetric_moment", "max_ratio", bool(np.isfinite(rep.fitted_constant)),
                    f"max_d E||g||^2/d={rep.fitted_constant:.4f}"),
    ]


def unbiasedness(rng, samples: int):
    out = []
    d = 4
    a = np.array([1.0, -2.0, 0.5, 0.0])
    lin = builtin_objective("linear", d, {"a": a}).oracle(0)
    mean, se = smoothed_gradient_mc(lin, np.array([0.3, 0.1, -0.2, 0.4]), 0.01, samples, rng)
    z = np.abs(mean - a) / np.where(se > 0, se, np.inf)
    ok = bool(np.all((z <= 5) | (np.abs(mean - a) <= 1e-12)))
    out.append(CheckResult("unbiasedness", "linear", ok, f"max z={np.max(np.where(np.isfinite(z), z, 0)):.2f}"))
    w0 = np.array([0.2, -0.1, 0.0, 0.3])
    w = np.array([0.5, 0.5, -0.5, 0.1])
    quad = builtin_objective("quadratic", d, {"w0": w0}).oracle(0)
    mean, se = smoothed_gradient_mc(quad, w, 0.01, samples, rng)
    z = np.abs(mean - (w - w0)) / se
    out.append(CheckResult("unbiasedness", "quadratic", bool(np.all(z <= 5)), f"max z={z.max():.2f}"))
    return out


def md_inequality(rng, samples: int):
    out = []
    for label, setup, obj in (("euclidean", euclidean_setup(5), "abs_regression"), ("entropic", entropic_setup(5), "abs_regression")):
        stream = builtin_objective(obj, 5, domain=setup.domain, seed=int(rng.integers(2**31)))
        G2 = stream.lipschitz_l2 if setup.norm_id == "L2" else None
        params = default_parameters(setup, G2, 5, 500, G1=stream.lipschitz_l1)
        rec = run_bandit(stream, setup, params, rng)
        probes = sample_domain(setup.domain, 100, rng)
        if setup.norm_id == "L1":
            probes = np.vstack([probes, np.eye(5)])
        v = md_inequality_audit(rec, setup, probes)
        out.append(CheckResult("md_inequality", label, v <= 1e-6, f"max_violation={v:.4g}"))
    return out


def smoothing_gap(rng, samples: int):
    d, delta = 5, 0.1
    oracle = builtin_objective("l2norm", d, {"w0": np.zeros(d)}).oracle(0)
    est, se = smoothed_value(oracle, np.zeros(d), delta, samples, rng)
    out = [CheckResult("smoothing_gap", "origin", abs(est - delta) <= 4 * se + 1e-12, f"f_hat(0)={est:.6g} delta={delta}")]
    worst = -np.inf
    for w in sample_ball(20, d, rng):
        v, s = smoothed_value(oracle, w, delta, max(samples // 10, 1000), rng)
        worst = max(worst, abs(v - np.linalg.norm(w)) - delta - 4 * s)
    out.append(CheckResult("smoothing_gap", "sampled", worst <= 0, f"max(|f_hat-f| - delta - 4se)={worst:.3g}"))
    return out


def inf_norm(rng, samples: int):
    est, se = infinity_norm_moment(2, max(samples, 10_000), rng)
    out = [CheckResult("inf_norm", "d=2", abs(est - INF_NORM_D2) <= 3 * se, f"estimate={est:.5f} exact={INF_NORM_D2:.5f} se={se:.2g}")]
    ratios = []
    for d in (2, 8, 64, 512, 4096):
        n = max(10_000, min(samples, 20_000_000 // d))
        r, _ = infinity_norm_moment(d, n, rng)
        ratios.append(r / np.sqrt(np.log(d) / d))
    c = max(ratios)
    out.append(CheckResult("inf_norm", "ratio", c <= INF_NORM_BOUND, f"max ratio={c:.4f} <= 150^(1/4)={INF_NORM_BOUND:.4f}"))
    return out


def concentration(rng, samples: int):
    a = np.eye(4)[0]
    root, _, se = lipschitz_concentration_check(lambda U: U @ a, 1.0, 4, samples, rng)
    exact = np.sqrt(3.0 / (4 * 6))
    out = [CheckResult("concentration", "linear_d4", abs(root - exact) <= 3 * se, f"value={root:.5f} exact={exact:.5f} se={se:.2g}")]
    ratios = []
    for d in (4, 16, 64, 256):
        e1 = np.eye(d)[0]
        _, ratio, _ = lipschitz_concentration_check(lambda U, e1=e1: np.linalg.norm(U - e1, axis=1), 1.0, d, samples, rng)
        ratios.append(ratio)
    out.append(CheckResult("concentration", "ratio", bool(np.all(np.isfinite(ratios))), "ratios=" + ",".join(f"{r:.3f}" for r in ratios)))
    return out


SUITES = {
    "anchored_d2": anchored_d2,
    "symmetric_moment": symmetric_moment,
    "unbiasedness": unbiasedness,
    "md_inequality": md_inequality,
    "smoothing_gap": smoothing_gap,
    "inf_norm": inf_norm,
    "concentration": concentration,
}
