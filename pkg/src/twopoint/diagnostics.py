"""Monte-Carlo checks of the estimator moments, sphere concentration,
the mirror-descent inequality and regret scaling laws.

Every routine takes an explicit seed or generator and is reproducible
bit-for-bit under a fixed seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from twopoint.estimators import TwoPointOracle
from twopoint.geometry import MirrorSetup, sample_ball, sample_unit_sphere_batch
from twopoint.objectives import builtin_objective, regret, setup_for
from twopoint.optimizer import RunRecord, ScheduleParams, default_parameters, run_bandit

_CHUNK = 4_000_000  # floats per Monte-Carlo batch


def _chunks(n: int, d: int):
    step = max(1, _CHUNK // max(d, 1))
    for start in range(0, n, step):
        yield min(step, n - start)


def loglog_fit(x, y) -> tuple[float, float]:
    """Least-squares ``log y = log c + slope * log x``; returns ``(slope, c)``."""
    lx, ly = np.log(np.asarray(x, dtype=float)), np.log(np.asarray(y, dtype=float))
    slope, intercept = np.polyfit(lx, ly, 1)
    return float(slope), float(np.exp(intercept))


@dataclass(frozen=True)
class MomentReport:
    dims: list
    estimates: np.ndarray
    std_errors: np.ndarray
    fitted_log_slope: float
    fitted_constant: float


def _oracle_for(objective, d: int) -> TwoPointOracle:
    if isinstance(objective, str):
        params = {"w0": np.zeros(d)} if objective in ("l2norm", "shifted_l1norm", "quadratic") else None
        s = builtin_objective(objective, d, params)
        if s.kind == "stochastic":
            raise ValueError("moment scans need a deterministic objective")
        return s.oracle(0)
    return objective(d)


def second_moment_scan(
    estimator_kind: str,
    objective: Union[str, Callable[[int], TwoPointOracle]] = "l2norm",
    w_policy: str = "random_ball",
    dims: Sequence[int] = (2, 4, 8, 16, 32, 64, 128, 256, 512),
    n_samples: int = 100_000,
    rng=None,
    *,
    delta: float = 1e-3,
    norm_id: str = "L2",
) -> MomentReport:
    """Estimate ``E ||g||_*^2`` of one estimator across dimensions.

    ``w_policy="origin"`` evaluates at 0; ``"random_ball"`` draws a fresh
    uniform point of the unit ball for every sample, so the estimate averages
    the conditional second moment over ``w``. ``fitted_constant`` is the
    largest ``estimate / d`` over the grid.
    """
    if estimator_kind not in ("symmetric", "anchored"):
        raise ValueError(f"unknown estimator kind {estimator_kind!r}")
    if w_policy not in ("origin", "random_ball"):
        raise ValueError(f"unknown w policy {w_policy!r}")
    if not dims:
        raise ValueError("dims must be nonempty")
    if n_samples < 1000:
        raise ValueError("n_samples must be >= 1000")
    rng = np.random.default_rng(rng)
    est, se = [], []
    for d in dims:
        oracle = _oracle_for(objective, d)
        s1 = s2 = 0.0
        for m in _chunks(n_samples, d):
            U = sample_unit_sphere_batch(m, d, rng)
            W = sample_ball(m, d, rng) if w_policy == "random_ball" else np.zeros((m, d))
            f_plus = oracle.evaluate_batch(W + delta * U)
            if estimator_kind == "symmetric":
                scale = (d / (2.0 * delta)) * (f_plus - oracle.evaluate_batch(W - delta * U))
            else:
                scale = (d / delta) * (f_plus - oracle.evaluate_batch(W))
            G = scale[:, None] * U
            sq = (np.linalg.norm(G, axis=1) if norm_id == "L2" else np.abs(G).max(axis=1)) ** 2
            s1 += sq.sum()
            s2 += (sq * sq).sum()
        mean = s1 / n_samples
        var = max(s2 / n_samples - mean * mean, 0.0) * n_samples / (n_samples - 1)
        est.append(mean)
        se.append(np.sqrt(var / n_samples))
    est_a, se_a = np.array(est), np.array(se)
    dims_a = np.asarray(dims, dtype=float)
    if len(dims) >= 2 and np.all(est_a > 0):
        slope, _ = loglog_fit(dims_a, est_a)
    else:
        slope = float("nan")
    return MomentReport(list(dims), est_a, se_a, slope, float(np.max(est_a / dims_a)))


def infinity_norm_moment(d: int, n_samples: int = 1_000_000, rng=None) -> tuple[float, float]:
    """``(E ||u||_inf^4)^(1/4)`` for uniform ``u`` on the sphere, with a delta-method standard error."""
    if d <= 1:
        raise ValueError(f"d must be > 1, got {d}")
    if n_samples < 10_000:
        raise ValueError("n_samples must be >= 1e4")
    rng = np.random.default_rng(rng)
    s1 = s2 = 0.0
    for m in _chunks(n_samples, d):
        z = rng.standard_normal((m, d))
        q = (np.abs(z).max(axis=1) / np.linalg.norm(z, axis=1)) ** 4
        s1 += q.sum()
        s2 += (q * q).sum()
    m4 = s1 / n_samples
    var = max(s2 / n_samples - m4 * m4, 0.0) * n_samples / (n_samples - 1)
    se_m4 = np.sqrt(var / n_samples)
    return float(m4**0.25), float(0.25 * m4**-0.75 * se_m4)


def dual_norm_p_star(norm_id: str, d: int, n_samples: int = 1_000_000, rng=None) -> float:
    """Estimate ``(E ||u||_*^4)^(1/4)``; exactly 1 for the self-dual 2-norm."""
    if norm_id == "L2":
        return 1.0
    if norm_id != "L1":
        raise ValueError(f"unknown norm {norm_id!r}")
    if d == 1:
        return 1.0
    return infinity_norm_moment(d, n_samples, rng)[0]


def lipschitz_concentration_check(
    fn: Callable[[np.ndarray], np.ndarray], L: float, d: int, n_samples: int = 100_000, rng=None
) -> tuple[float, float, float]:
    """Monte-Carlo ``sqrt(E (g(u) - E g)^4)`` for a vectorized ``L``-Lipschitz ``g`` on the sphere.

    Returns ``(value, value / (L**2 / d), std error of value)``.
    """
    if n_samples < 2:
        raise ValueError("n_samples must be >= 2")
    rng = np.random.default_rng(rng)
    vals = np.concatenate([np.asarray(fn(sample_unit_sphere_batch(m, d, rng)), dtype=float) for m in _chunks(n_samples, d)])
    c4 = (vals - vals.mean()) ** 4
    m4 = c4.mean()
    root = float(np.sqrt(m4))
    se = float(c4.std(ddof=1) / np.sqrt(n_samples) / (2.0 * root)) if root > 0 else 0.0
    return root, root / (L**2 / d), se


def md_inequality_audit(record: RunRecord, setup: MirrorSetup, probes) -> float:
    """Largest ``sum_t <g_t, w_t - w*> - R^2/eta - eta sum_t ||g_t||_*^2`` over the probes."""
    probes = np.atleast_2d(np.asarray(probes, dtype=float))
    for p in probes:
        if not setup.contains(p):
            raise ValueError(f"probe {p} is outside the domain")
    slack = setup.R**2 / record.eta
    if record.T == 0:
        return float(-slack)
    G = record.gradients
    lhs = np.sum(G * record.iterates) - probes @ G.sum(axis=0)
    rhs = slack + record.eta * np.sum(setup.dual_norm(G) ** 2)
    return float(np.max(lhs - rhs))


def run_replication(
    geometry: str,
    objective: str,
    d: int,
    T: int,
    seed: int,
    *,
    objective_params: Optional[dict] = None,
    radius: float = 1.0,
    shrink: Optional[float] = None,
    eta: Optional[float] = None,
    delta: Optional[float] = None,
    n_mc: int = 100_000,
) -> dict:
    """One seeded run and its regret summary, as a flat row."""
    setup = setup_for(geometry, d, radius, shrink)
    stream = builtin_objective(objective, d, objective_params, domain=setup.domain, seed=seed)
    if setup.norm_id == "L2":
        params = default_parameters(setup, stream.lipschitz_l2, d, T)
    else:
        params = default_parameters(setup, None, d, T, G1=stream.lipschitz_l1 or stream.lipschitz_l2)
    if eta is not None or delta is not None:
        params = ScheduleParams(T, d, eta if eta is not None else params.eta, delta if delta is not None else params.delta)
    record = run_bandit(stream, setup, params, [seed, 1])
    row = {"seed": seed, "d": d, "T": T, "eta": params.eta, "delta": params.delta_at(0)}
    rep = regret(record, stream, setup=setup, n_mc=n_mc)
    row.update(avg_regret=rep.average_regret, opt_error=rep.optimization_error, opt_error_se=rep.optimization_error_se)
    G2 = stream.lipschitz_l2 if setup.norm_id == "L2" else np.sqrt(d) * (stream.lipschitz_l1 or stream.lipschitz_l2)
    row["theory"] = setup.p_star * G2 * setup.R * np.sqrt(d / T)
    return row


def replication_seed(master: int, cell: int, rep: int) -> int:
    return int(np.random.SeedSequence([master, cell, rep]).generate_state(1)[0])


@dataclass
class ScalingResult:
    rows: list  # per (d, T): mean regret and standard error
    replicates: list = field(default_factory=list)
    alpha_d: float = float("nan")
    alpha_T: float = float("nan")
    alpha_d_se: float = float("nan")
    alpha_T_se: float = float("nan")
    log_constant: float = float("nan")


def fit_exponents(rows) -> dict:
    """OLS ``log regret = c + a_d log d + a_T log T`` on cell means.

    Axes with a single grid value are dropped from the design. Returns a dict
    with ``alpha_d``, ``alpha_T``, their standard errors and ``log_constant``
    (NaN for dropped axes).
    """
    cols = [np.ones(len(rows))]
    names = []
    for key in ("d", "T"):
        v = np.log([r[key] for r in rows])
        if np.ptp(v) > 0:
            cols.append(v)
            names.append(key)
    X = np.column_stack(cols)
    y = np.log([r["mean_regret"] for r in rows])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    dof = len(rows) - X.shape[1]
    resid = y - X @ coef
    s2 = float(resid @ resid) / dof if dof > 0 else float("nan")
    se = np.sqrt(np.diag(s2 * np.linalg.inv(X.T @ X)))
    out = {"alpha_d": float("nan"), "alpha_T": float("nan"), "alpha_d_se": float("nan"),
           "alpha_T_se": float("nan"), "log_constant": float(coef[0])}
    for i, key in enumerate(names, start=1):
        out[f"alpha_{key}"] = float(coef[i])
        out[f"alpha_{key}_se"] = float(se[i])
    return out


def regret_scaling_experiment(
    setup_kind: str,
    objective_name: str,
    dims: Sequence[int],
    horizons: Sequence[int],
    replications: int,
    seed: int = 0,
    *,
    objective_params: Optional[dict] = None,
    n_mc: int = 0,
    on_replicate: Optional[Callable[[dict], None]] = None,
) -> ScalingResult:
    """Mean average regret over a ``dims x horizons`` grid and fitted log-log exponents.

    ``setup_kind`` is ``"l2ball"`` (or ``"euclidean"``) or ``"simplex"`` (or
    ``"entropic"``). Each cell ``(d, T)`` derives its replication seeds from
    ``(seed, cell index, replication)``.
    """
    geometry = {"euclidean": "l2ball", "entropic": "simplex"}.get(setup_kind, setup_kind)
    n_d, n_T = len(set(dims)), len(set(horizons))
    if n_d < 2 and n_T < 2:
        raise ValueError("need at least 2 grid points on a fitted axis")
    rows, reps = [], []
    cell = 0
    for d in dims:
        for T in horizons:
            vals = []
            for r in range(replications):
                row = run_replication(geometry, objective_name, d, T, replication_seed(seed, cell, r),
                                      objective_params=objective_params, n_mc=n_mc)
                row["rep"] = r
                reps.append(row)
                vals.append(row["avg_regret"])
                if on_replicate is not None:
                    on_replicate(row)
            vals = np.array(vals)
            se = float(vals.std(ddof=1) / np.sqrt(len(vals))) if len(vals) > 1 else float("nan")
            rows.append({"d": d, "T": T, "mean_regret": float(vals.mean()), "std_error": se, "theory": reps[-1]["theory"]})
            cell += 1
    result = ScalingResult(rows, reps)
    if all(r["mean_regret"] > 0 for r in rows):
        for key, value in fit_exponents(rows).items():
            setattr(result, key, value)
    return result
