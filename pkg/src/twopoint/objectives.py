"""Test objectives, loss streams and regret accounting.

A :class:`LossStream` hands the learner one :class:`TwoPointOracle` per
round. Objective formulas are written to broadcast over a leading axis of
either the points or the per-round parameters, so the same code evaluates
one point on many rounds (regret) or many points on one round (Monte-Carlo).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from twopoint.estimators import TwoPointOracle
from twopoint.geometry import (
    Domain,
    L2Ball,
    MirrorSetup,
    Shrunk,
    Simplex,
    base_kind,
    entropic_setup,
    euclidean_setup,
    linear_minimizer,
    mirror_step,
    sample_ball,
    sample_unit_sphere_batch,
)
from twopoint.optimizer import RunRecord, average_iterate

OBJECTIVES = ("l2norm", "linear", "quadratic", "abs_regression", "shifted_l1norm")
_BLOCK = 1024


def _l2norm(W, w0):
    return np.linalg.norm(W - w0, axis=-1)


def _l2norm_grad(W, w0):
    diff = W - w0
    n = np.linalg.norm(diff, axis=-1, keepdims=True)
    return np.divide(diff, n, out=np.zeros_like(diff), where=n > 0)


def _linear(W, a):
    return np.sum(a * W, axis=-1)


def _linear_grad(W, a):
    return np.broadcast_to(a, np.broadcast_shapes(np.shape(W), np.shape(a))).copy()


def _quadratic(W, c):
    diff = W - c
    return 0.5 * np.sum(diff * diff, axis=-1)


def _quadratic_grad(W, c):
    return W - c


def _abs_regression(W, x, y):
    return np.abs(np.sum(x * W, axis=-1) - y)


def _abs_regression_grad(W, x, y):
    s = np.sign(np.sum(x * W, axis=-1) - y)
    return s[..., None] * x


def _l1norm(W, w0):
    return np.sum(np.abs(W - w0), axis=-1)


def _l1norm_grad(W, w0):
    return np.sign(W - w0)


@dataclass
class LossStream:
    """Per-round producer of loss oracles.

    ``kind`` is ``"fixed"`` (same f every round), ``"stochastic"`` (i.i.d.
    draws ``f(.; xi_t)`` from ``sampler``) or ``"oblivious"`` (a sequence fixed
    in advance). ``params`` holds the fixed parameter tuple or, for oblivious
    streams, arrays stacked along a leading round axis.
    """

    name: str
    kind: str
    d: int
    value: Callable[..., np.ndarray]
    subgradient: Callable[..., np.ndarray]
    lipschitz_l2: float
    lipschitz_l1: Optional[float] = None
    params: tuple = ()
    sampler: Optional[Callable[[np.random.Generator, int], tuple]] = None
    seed: int = 0
    comparator_hint: Optional[np.ndarray] = None
    min_value: Optional[float] = None
    info: dict = field(default_factory=dict)
    _drawn: list = field(default_factory=list, init=False, repr=False)
    _stacked: Optional[tuple] = field(default=None, init=False, repr=False)
    _rng: Optional[np.random.Generator] = field(default=None, init=False, repr=False)

    def __post_init__(self):
        if self.kind not in ("fixed", "stochastic", "oblivious"):
            raise ValueError(f"unknown stream kind {self.kind!r}")
        if self.kind == "stochastic" and self.sampler is None:
            raise ValueError("stochastic stream needs a sampler")
        self._rng = np.random.default_rng(self.seed)

    def _stochastic_upto(self, T: int) -> tuple:
        while len(self._drawn) * _BLOCK < T:
            self._drawn.append(self.sampler(self._rng, _BLOCK))
            self._stacked = None
        if self._stacked is None:
            self._stacked = tuple(np.concatenate(parts) for parts in zip(*self._drawn))
        return self._stacked

    def params_at(self, t: int) -> tuple:
        if self.kind == "fixed":
            return self.params
        if self.kind == "oblivious":
            return tuple(p[t] for p in self.params)
        block, i = divmod(t, _BLOCK)
        self._stochastic_upto(t + 1)
        return tuple(p[i] for p in self._drawn[block])

    def stacked_params(self, T: int) -> tuple:
        """Parameters of rounds ``0..T-1`` stacked along a leading axis (fixed: unstacked)."""
        if self.kind == "fixed":
            return self.params
        if self.kind == "oblivious":
            if T > len(self.params[0]):
                raise ValueError(f"oblivious stream has only {len(self.params[0])} rounds")
            return tuple(p[:T] for p in self.params)
        return tuple(p[:T] for p in self._stochastic_upto(T))

    def oracle(self, t: int) -> TwoPointOracle:
        p = self.params_at(t)
        value = self.value
        return TwoPointOracle(
            fn=lambda x: float(value(x, *p)),
            batch_fn=lambda X: value(X, *p),
            lipschitz_l2=self.lipschitz_l2,
            lipschitz_l1=self.lipschitz_l1,
        )

    def loss(self, t: int, w) -> float:
        return float(self.value(np.asarray(w, dtype=float), *self.params_at(t)))

    def round_values(self, w, T: int) -> np.ndarray:
        """``f_t(w)`` for ``t = 0..T-1``."""
        v = self.value(np.asarray(w, dtype=float), *self.stacked_params(T))
        return np.broadcast_to(v, (T,)).astype(float)

    def mean_subgradient(self, w, T: int) -> np.ndarray:
        g = self.subgradient(np.asarray(w, dtype=float), *self.stacked_params(T))
        g = np.asarray(g, dtype=float)
        return g if g.ndim == 1 else g.mean(axis=0)

    def population_values(self, points, n: int, rng: np.random.Generator) -> np.ndarray:
        """Values of ``n`` fresh draws at each point: shape ``(len(points), n)``."""
        if self.kind != "stochastic":
            raise ValueError("population values need a stochastic stream")
        fresh = self.sampler(rng, n)
        return np.stack([self.value(np.asarray(p, dtype=float), *fresh) for p in points])


def _default_center(domain: Domain, rng: np.random.Generator) -> np.ndarray:
    if base_kind(domain) is Simplex:
        w = rng.dirichlet(np.ones(domain.d))
        return domain.from_base(w) if isinstance(domain, Shrunk) else w
    return sample_ball(1, domain.d, rng, 0.5 * domain.radius)[0]


def _domain_radius(domain: Domain) -> float:
    """Bound on ``||w||_2`` over the domain."""
    return domain.radius if isinstance(domain, L2Ball) else 1.0


def builtin_objective(name: str, d: int, params: Optional[dict] = None, *, domain: Optional[Domain] = None, seed: int = 0) -> LossStream:
    """Build one of the test streams.

    ``l2norm``          ``||w - w0||_2``; G2 = 1, G1 = 1.
    ``linear``          ``<a, w>``; G2 = ||a||_2, G1 = ||a||_inf. ``a`` may be a
                        ``(T, d)`` array for an oblivious sequence.
    ``quadratic``       ``0.5 ||w - c||^2``; ``c = w0`` or, with ``noise > 0``,
                        ``c = w0 + noise * u`` with ``u`` uniform on the sphere.
                        G2 = sup over the domain of ``||w - c||``.
    ``abs_regression``  ``|<x, w> - y|`` with ``x`` uniform on the sphere and
                        ``y = <x, w0> + noise * s`` (``s`` Rademacher); G2 = G1 = 1.
    ``shifted_l1norm``  ``||w - w0||_1``; G2 = sqrt(d), G1 = 1.
    """
    if name not in OBJECTIVES:
        raise ValueError(f"unknown objective {name!r}; choose from {', '.join(OBJECTIVES)}")
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    params = dict(params or {})
    if domain is None:
        domain = L2Ball(d, 1.0)
    if domain.d != d:
        raise ValueError(f"domain has dimension {domain.d}, got d={d}")
    rng = np.random.default_rng([seed, 0xB0B])
    w0 = params.pop("w0", None)
    w0 = _default_center(domain, rng) if w0 is None else np.asarray(w0, dtype=float)
    noise = float(params.pop("noise", 0.0))
    hint = w0 if domain.contains(w0) else None
    common = dict(d=d, seed=seed, info={"w0": w0, "noise": noise})

    if name == "l2norm":
        stream = LossStream(name, "fixed", value=_l2norm, subgradient=_l2norm_grad, lipschitz_l2=1.0,
                            lipschitz_l1=1.0, params=(w0,), comparator_hint=hint, min_value=0.0 if hint is not None else None, **common)
    elif name == "shifted_l1norm":
        stream = LossStream(name, "fixed", value=_l1norm, subgradient=_l1norm_grad, lipschitz_l2=float(np.sqrt(d)),
                            lipschitz_l1=1.0, params=(w0,), comparator_hint=hint, min_value=0.0 if hint is not None else None, **common)
    elif name == "linear":
        a = np.asarray(params.pop("a", np.eye(d)[0]), dtype=float)
        if a.ndim == 1:
            w_star = linear_minimizer(domain, a)
            stream = LossStream(name, "fixed", value=_linear, subgradient=_linear_grad,
                                lipschitz_l2=float(np.linalg.norm(a)), lipschitz_l1=float(np.abs(a).max()),
                                params=(a,), comparator_hint=w_star, min_value=float(a @ w_star), **common)
        else:
            # best fixed point against a linear sequence minimizes the summed direction
            w_star = linear_minimizer(domain, a.sum(axis=0))
            stream = LossStream(name, "oblivious", value=_linear, subgradient=_linear_grad,
                                lipschitz_l2=float(np.linalg.norm(a, axis=1).max()),
                                lipschitz_l1=float(np.abs(a).max()), params=(a,), comparator_hint=w_star, **common)
    elif name == "quadratic":
        G2 = _domain_radius(domain) + float(np.linalg.norm(w0)) + noise
        if noise > 0:
            def sampler(r, n, _w0=w0, _s=noise):
                return (_w0 + _s * sample_unit_sphere_batch(n, d, r),)

            stream = LossStream(name, "stochastic", value=_quadratic, subgradient=_quadratic_grad, lipschitz_l2=G2,
                                sampler=sampler, comparator_hint=hint,
                                min_value=0.5 * noise**2 if hint is not None else None, **common)
        else:
            stream = LossStream(name, "fixed", value=_quadratic, subgradient=_quadratic_grad, lipschitz_l2=G2,
                                params=(w0,), comparator_hint=hint, min_value=0.0 if hint is not None else None, **common)
    else:
        def sampler(r, n, _w0=w0, _s=noise):
            x = sample_unit_sphere_batch(n, d, r)
            y = x @ _w0
            if _s > 0:
                y = y + _s * r.choice((-1.0, 1.0), size=n)
            return (x, y)

        # noise is symmetric and independent of x, so F is minimized at w0 with F(w0) = noise
        stream = LossStream(name, "stochastic", value=_abs_regression, subgradient=_abs_regression_grad,
                            lipschitz_l2=1.0, lipschitz_l1=1.0, sampler=sampler, comparator_hint=hint,
                            min_value=noise if hint is not None else None, **common)
    if params:
        raise ValueError(f"unknown parameters for {name}: {', '.join(sorted(params))}")
    return stream


def setup_for(geometry: str, d: int, radius: float = 1.0, shrink: Optional[float] = None) -> MirrorSetup:
    """``"l2ball"`` or ``"simplex"`` mirror setup."""
    if geometry == "l2ball":
        return euclidean_setup(d, radius if shrink is None else radius * shrink)
    if geometry == "simplex":
        return entropic_setup(d, shrink=shrink)
    raise ValueError(f"unknown geometry {geometry!r}")


def solve_comparator(stream: LossStream, setup: MirrorSetup, T: int, iters: int = 100_000, tol: float = 1e-4) -> tuple[np.ndarray, float]:
    """Minimize ``(1/T) sum_t f_t`` over the domain by subgradient dual averaging.

    Returns the best point found and a certified optimality gap: the best
    value minus the minimum over the domain of the averaged linear lower
    bounds collected along the way. Warns when the gap exceeds ``tol``.
    """
    G = stream.lipschitz_l2 if setup.norm_id == "L2" else (stream.lipschitz_l1 or stream.lipschitz_l2)
    step = setup.R / (G * np.sqrt(iters))
    theta = np.zeros(setup.d)
    best_w, best_v = None, np.inf
    cut_g = np.zeros(setup.d)
    cut_c = 0.0
    for _ in range(iters):
        w = mirror_step(setup, theta)
        v = float(stream.round_values(w, T).mean())
        g = stream.mean_subgradient(w, T)
        if v < best_v:
            best_w, best_v = w, v
        cut_g += g
        cut_c += v - g @ w
        theta -= step * g
    cut_g /= iters
    cut_c /= iters
    lower = cut_c + cut_g @ linear_minimizer(setup.domain, cut_g)
    gap = best_v - lower
    if gap > tol:
        warnings.warn(f"comparator solve: certified gap {gap:.3g} exceeds tolerance {tol:g}", RuntimeWarning)
    return best_w, float(gap)


@dataclass(frozen=True)
class RegretReport:
    average_regret: float
    comparator: np.ndarray
    per_round_losses: np.ndarray
    comparator_losses: np.ndarray
    optimization_error: Optional[float] = None
    optimization_error_se: Optional[float] = None


def _resolve_comparator(stream: LossStream, comparator, setup: Optional[MirrorSetup], T: int) -> np.ndarray:
    if comparator is not None:
        return np.asarray(comparator, dtype=float)
    if stream.comparator_hint is not None:
        return stream.comparator_hint
    if setup is None:
        raise ValueError("no comparator given, none known in closed form, and no setup to solve for one")
    return solve_comparator(stream, setup, T)[0]


def optimization_error(stream: LossStream, w_bar, comparator, n_mc: int = 100_000, rng=None) -> tuple[float, float]:
    """Monte-Carlo ``F(w_bar) - F(comparator)`` on fresh draws, paired; returns (estimate, std error).

    With the population minimizer as comparator this estimates ``F(w_bar) - min F``.
    """
    rng = np.random.default_rng(rng)
    vals = stream.population_values([w_bar, comparator], n_mc, rng)
    diff = vals[0] - vals[1]
    return float(diff.mean()), float(diff.std(ddof=1) / np.sqrt(n_mc))


def regret(record: RunRecord, stream: LossStream, comparator=None, *, setup: Optional[MirrorSetup] = None,
           n_mc: int = 100_000, mc_seed: Optional[int] = None) -> RegretReport:
    """Average regret of a run against a fixed comparator.

    Stochastic streams additionally get the optimization error of the
    average iterate, evaluated on draws independent of the training ones
    (skipped when ``n_mc == 0``).
    """
    if record.losses is None:
        raise ValueError("record was produced without loss tracking")
    if record.d != stream.d:
        raise ValueError(f"record has d={record.d}, stream has d={stream.d}")
    T = record.T
    w_star = _resolve_comparator(stream, comparator, setup, T)
    comp = stream.round_values(w_star, T)
    avg = float(record.losses.mean() - comp.mean())
    opt = opt_se = None
    if stream.kind == "stochastic" and n_mc > 0:
        seed = [stream.seed, 0xF00D] if mc_seed is None else mc_seed
        opt, opt_se = optimization_error(stream, average_iterate(record), w_star, n_mc, seed)
    return RegretReport(avg, w_star, record.losses, comp, opt, opt_se)


def online_to_batch_check(record: RunRecord, stream: LossStream, n_mc: int = 100_000, rng=None) -> tuple[float, float, float]:
    """Return ``(F(w_bar) - min F, average regret, Monte-Carlo std error of the first)``.

    The comparator is the population minimizer carried by the stream.
    """
    if stream.kind != "stochastic":
        raise ValueError("online-to-batch check needs a stochastic stream")
    if stream.comparator_hint is None:
        raise ValueError("stream has no known population minimizer")
    rep = regret(record, stream, n_mc=n_mc, mc_seed=rng)
    return rep.optimization_error, rep.average_regret, rep.optimization_error_se
