"""Two-point gradient estimators and the sphere-smoothed objective.

The symmetric estimator ``(d / 2 delta) (f(w + delta u) - f(w - delta u)) u``
has second moment linear in ``d``; the anchored estimator
``(d / delta) (f(w + delta u) - f(w)) u`` has the same mean but a second
moment that can reach ``d**2`` at kinks.

Both means equal ``E_u[(d / delta) f(w + delta u) u]``, the gradient of the
*ball* average ``E_v f(w + delta v)`` (``v`` uniform in the unit ball). For
affine and quadratic ``f`` this coincides with the gradient of the sphere
average computed by :func:`smoothed_value`; in general it does not.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from twopoint.geometry import sample_unit_sphere_batch


class OracleError(RuntimeError):
    """Objective returned a non-finite value or failed outright."""

    def __init__(self, message: str, point=None):
        super().__init__(message)
        self.point = None if point is None else np.array(point, dtype=float)


class TwoPointOracle:
    """Black-box objective with query accounting.

    Parameters
    ----------
    fn : callable
        Maps a point of shape ``(d,)`` to a float.
    batch_fn : callable, optional
        Vectorized version mapping ``(n, d)`` to ``(n,)``. Used by Monte-Carlo
        diagnostics; falls back to looping over ``fn``.
    lipschitz_l2, lipschitz_l1 : float, optional
        Declared Lipschitz constants w.r.t. the 2-norm and 1-norm.
    round_reset : callable, optional
        Called by :meth:`reset` to draw a fresh instance (e.g. a new sample
        of the stochastic parameter). Both queries of one round must see the
        same instance, so resets happen between rounds only.
    """

    def __init__(
        self,
        fn: Callable[[np.ndarray], float],
        batch_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None,
        lipschitz_l2: Optional[float] = None,
        lipschitz_l1: Optional[float] = None,
        round_reset: Optional[Callable[[], None]] = None,
    ):
        self.fn = fn
        self.batch_fn = batch_fn
        self.lipschitz_l2 = lipschitz_l2
        self.lipschitz_l1 = lipschitz_l1
        self.round_reset = round_reset
        self.query_count = 0
        self.diagnostic_count = 0

    def __call__(self, x) -> float:
        x = np.asarray(x, dtype=float)
        self.query_count += 1
        try:
            v = float(self.fn(x))
        except OracleError:
            raise
        except Exception as exc:
            raise OracleError(f"oracle raised {exc!r}", x) from exc
        if not np.isfinite(v):
            raise OracleError(f"non-finite oracle value {v!r}", x)
        return v

    def peek(self, x) -> float:
        """Evaluate for bookkeeping; counted separately from learning queries."""
        x = np.asarray(x, dtype=float)
        self.diagnostic_count += 1
        return float(self.fn(x))

    def evaluate_batch(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        self.query_count += X.shape[0]
        if self.batch_fn is not None:
            v = np.asarray(self.batch_fn(X), dtype=float)
        else:
            v = np.array([float(self.fn(x)) for x in X])
        bad = ~np.isfinite(v)
        if np.any(bad):
            i = int(np.argmax(bad))
            raise OracleError(f"non-finite oracle value {v[i]!r}", X[i])
        return v

    def reset(self) -> None:
        if self.round_reset is not None:
            self.round_reset()


@dataclass(frozen=True)
class GradientEstimate:
    """One gradient estimate together with the raw queries that produced it.

    ``f_minus_or_anchor`` is ``f(w - delta u)`` for the symmetric estimator
    and ``f(w)`` for the anchored one.
    """

    g: np.ndarray
    u: np.ndarray
    delta: float
    f_plus: float
    f_minus_or_anchor: float
    queries_used: int = 2
    kind: str = "symmetric"


def _check(w, delta, u):
    w = np.asarray(w, dtype=float)
    u = np.asarray(u, dtype=float)
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    if w.shape != u.shape or w.ndim != 1:
        raise ValueError(f"point shape {w.shape} and direction shape {u.shape} disagree")
    return w, u


def two_point_gradient(oracle: TwoPointOracle, w, delta: float, u) -> GradientEstimate:
    w, u = _check(w, delta, u)
    d = w.shape[0]
    f_plus = oracle(w + delta * u)
    f_minus = oracle(w - delta * u)
    g = (d / (2.0 * delta)) * (f_plus - f_minus) * u
    return GradientEstimate(g, u, float(delta), f_plus, f_minus, 2, "symmetric")


def anchored_gradient(oracle: TwoPointOracle, w, delta: float, u) -> GradientEstimate:
    w, u = _check(w, delta, u)
    d = w.shape[0]
    f_plus = oracle(w + delta * u)
    f_anchor = oracle(w)
    g = (d / delta) * (f_plus - f_anchor) * u
    return GradientEstimate(g, u, float(delta), f_plus, f_anchor, 2, "anchored")


def symmetric_estimates(oracle: TwoPointOracle, w, delta: float, U: np.ndarray) -> np.ndarray:
    """Symmetric estimates for every row of ``U``; returns an ``(n, d)`` array."""
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    w = np.asarray(w, dtype=float)
    d = w.shape[0]
    diff = oracle.evaluate_batch(w + delta * U) - oracle.evaluate_batch(w - delta * U)
    return (d / (2.0 * delta)) * diff[:, None] * U


def anchored_estimates(oracle: TwoPointOracle, w, delta: float, U: np.ndarray) -> np.ndarray:
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    w = np.asarray(w, dtype=float)
    d = w.shape[0]
    f_w = oracle.evaluate_batch(np.broadcast_to(w, U.shape))
    diff = oracle.evaluate_batch(w + delta * U) - f_w
    return (d / delta) * diff[:, None] * U


def _batches(n: int, d: int, budget: int = 2_000_000):
    step = max(1, budget // max(d, 1))
    for start in range(0, n, step):
        yield min(step, n - start)


def smoothed_value(oracle: TwoPointOracle, w, delta: float, n_samples: int, rng) -> tuple[float, float]:
    """Monte-Carlo ``E_u f(w + delta u)`` and its standard error."""
    if n_samples < 2:
        raise ValueError("n_samples must be >= 2 for a standard error")
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    w = np.asarray(w, dtype=float)
    d = w.shape[0]
    vals = np.concatenate(
        [oracle.evaluate_batch(w + delta * sample_unit_sphere_batch(m, d, rng)) for m in _batches(n_samples, d)]
    )
    return float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(n_samples))


def smoothed_gradient_mc(
    oracle: TwoPointOracle, w, delta: float, n_samples: int, rng
) -> tuple[np.ndarray, np.ndarray]:
    """Average of ``n_samples`` symmetric estimates, with per-coordinate standard errors.

    Unbiased for the gradient of the ball-smoothed ``f`` (see module docstring).
    """
    if n_samples < 2:
        raise ValueError("n_samples must be >= 2 for a standard error")
    w = np.asarray(w, dtype=float)
    d = w.shape[0]
    total = np.zeros(d)
    total_sq = np.zeros(d)
    for m in _batches(n_samples, d):
        G = symmetric_estimates(oracle, w, delta, sample_unit_sphere_batch(m, d, rng))
        total += G.sum(axis=0)
        total_sq += (G * G).sum(axis=0)
    mean = total / n_samples
    var = np.maximum(total_sq - n_samples * mean * mean, 0.0) / (n_samples - 1)
    return mean, np.sqrt(var / n_samples)
