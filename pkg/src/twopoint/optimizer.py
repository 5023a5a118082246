"""Dual-averaging mirror descent driven by the symmetric two-point estimator."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional, Sequence, Union

import numpy as np

from twopoint.estimators import GradientEstimate, OracleError, TwoPointOracle, two_point_gradient
from twopoint.geometry import DimensionError, MirrorSetup, mirror_step, sample_unit_sphere


@dataclass(frozen=True)
class ScheduleParams:
    T: int
    d: int
    eta: float
    delta: Union[float, Sequence[float]]
    delta_cap: float = np.inf

    def __post_init__(self):
        if self.T < 1:
            raise ValueError(f"T must be >= 1, got {self.T}")
        if self.d < 1:
            raise DimensionError(f"d must be >= 1, got {self.d}")
        if not self.eta > 0:
            raise ValueError(f"eta must be positive, got {self.eta}")
        deltas = np.atleast_1d(np.asarray(self.delta, dtype=float))
        if deltas.size not in (1, self.T):
            raise ValueError(f"delta sequence has length {deltas.size}, expected 1 or T={self.T}")
        if not np.all(deltas > 0):
            raise ValueError("every delta_t must be positive")

    def delta_at(self, t: int) -> float:
        """Exploration radius of round ``t`` (0-based)."""
        if np.ndim(self.delta) == 0:
            return float(self.delta)
        return float(self.delta[t])

    def deltas(self) -> np.ndarray:
        return np.array([self.delta_at(t) for t in range(self.T)])


def default_parameters(
    setup: MirrorSetup,
    G2: Optional[float],
    d: int,
    T: int,
    *,
    G1: Optional[float] = None,
    delta_cap: Optional[float] = None,
) -> ScheduleParams:
    """Step size ``R / (p* G2 sqrt(d T))`` and constant ``delta = min(p* R sqrt(d / T), cap)``.

    If only ``G1`` (Lipschitz w.r.t. the 1-norm) is known, ``G2 = sqrt(d) G1``.
    The cap defaults to ``1e-3 * R``.
    """
    if G2 is None:
        if G1 is None:
            raise ValueError("need G2 or G1")
        if not G1 > 0:
            raise ValueError(f"G1 must be positive, got {G1}")
        G2 = np.sqrt(d) * G1
    if not G2 > 0:
        raise ValueError(f"G2 must be positive, got {G2}")
    if d < 1 or T < 1:
        raise ValueError(f"d and T must be >= 1, got d={d}, T={T}")
    if d != setup.d:
        raise DimensionError(f"setup has dimension {setup.d}, got d={d}")
    R, p = setup.R, setup.p_star
    if delta_cap is None:
        delta_cap = 1e-3 * R
    if not delta_cap > 0:
        raise ValueError(f"delta_cap must be positive, got {delta_cap}")
    eta = R / (p * G2 * np.sqrt(d * T))
    delta = min(p * R * np.sqrt(d / T), delta_cap)
    return ScheduleParams(T=T, d=d, eta=float(eta), delta=float(delta), delta_cap=float(delta_cap))


@dataclass(frozen=True)
class RunRecord:
    """Trajectory of one run.

    ``dual_states[t]`` is the dual vector from which ``iterates[t]`` was
    predicted; ``final_dual`` is the state after the last update. ``losses``
    holds out-of-band evaluations ``f_t(w_t)`` (not part of the learner's
    feedback) and is ``None`` when loss tracking is off.
    """

    iterates: np.ndarray
    dual_states: np.ndarray
    final_dual: np.ndarray
    estimates: list[GradientEstimate]
    losses: Optional[np.ndarray]
    eta: float
    deltas: np.ndarray
    seed: Any
    total_queries: int
    diagnostic_queries: int
    completed: bool = True
    average_iterate: Optional[np.ndarray] = field(default=None)

    @property
    def T(self) -> int:
        return int(self.iterates.shape[0])

    @property
    def d(self) -> int:
        return int(self.iterates.shape[1])

    @property
    def gradients(self) -> np.ndarray:
        if not self.estimates:
            return np.zeros((0, self.d))
        return np.array([e.g for e in self.estimates])


class RunAborted(RuntimeError):
    """An oracle failed mid-run; ``record`` holds the rounds completed so far."""

    def __init__(self, record: RunRecord, cause: Exception):
        super().__init__(f"run aborted after {record.T} rounds: {cause}")
        self.record = record
        self.cause = cause


def average_iterate(record: RunRecord) -> np.ndarray:
    """Arithmetic mean of the iterates (online-to-batch point)."""
    if record.iterates.shape[0] == 0:
        raise ValueError("record has no iterates")
    return record.iterates.mean(axis=0)


def _as_rng(rng) -> tuple[np.random.Generator, Any]:
    if isinstance(rng, np.random.Generator):
        return rng, None
    if rng is None:
        return np.random.default_rng(), None
    seed = int(rng) if np.ndim(rng) == 0 else [int(x) for x in rng]
    return np.random.default_rng(seed), seed


def run_bandit(losses, setup: MirrorSetup, params: ScheduleParams, rng=None, *, track_losses: bool = True) -> RunRecord:
    """Run the two-point bandit algorithm for ``params.T`` rounds.

    ``losses`` is either a stream exposing ``oracle(t)`` and ``loss(t, w)``
    (see :class:`twopoint.objectives.LossStream`) or a single
    :class:`TwoPointOracle`, which is ``reset()`` before every round. ``rng``
    is a seed (int or entropy list) or a ``numpy.random.Generator`` and
    drives only the directions.
    """
    if params.d != setup.d:
        raise DimensionError(f"params have d={params.d}, setup has d={setup.d}")
    gen, seed = _as_rng(rng)
    T, d, eta = params.T, params.d, params.eta
    is_stream = not isinstance(losses, TwoPointOracle)

    iterates = np.empty((T, d))
    duals = np.empty((T, d))
    loss_vals = np.empty(T) if track_losses else None
    estimates: list[GradientEstimate] = []
    deltas = params.deltas()
    theta = np.zeros(d)
    queries = diag = 0

    def record(n: int, completed: bool) -> RunRecord:
        its = iterates[:n].copy()
        return RunRecord(
            iterates=its,
            dual_states=duals[:n].copy(),
            final_dual=theta.copy(),
            estimates=list(estimates),
            losses=None if loss_vals is None else loss_vals[:n].copy(),
            eta=eta,
            deltas=deltas[:n].copy(),
            seed=seed,
            total_queries=queries,
            diagnostic_queries=diag,
            completed=completed,
            average_iterate=its.mean(axis=0) if n else None,
        )

    for t in range(T):
        w = mirror_step(setup, theta)
        if is_stream:
            oracle = losses.oracle(t)
        else:
            oracle = losses
            oracle.reset()
        u = sample_unit_sphere(d, gen)
        try:
            est = two_point_gradient(oracle, w, deltas[t], u)
        except OracleError as exc:
            raise RunAborted(record(t, False), exc) from exc
        queries += est.queries_used
        iterates[t] = w
        duals[t] = theta
        estimates.append(est)
        if loss_vals is not None:
            loss_vals[t] = losses.loss(t, w) if is_stream else oracle.peek(w)
            diag += 1
        theta = theta - eta * est.g
    return record(T, True)
