"""Feasible sets, sphere sampling and mirror steps.

Two geometries are supported: the Euclidean ball with the half-squared-norm
regularizer (mirror step = projection) and the probability simplex with the
scaled negative entropy (mirror step = softmax).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

MEMBERSHIP_TOL = 1e-9
# Floor applied to simplex weights so downstream logs stay finite.
PROB_FLOOR = 1e-300
# sup_d (E||u||_inf^4)^(1/4) / sqrt(log d / d), attained at d=2 (3/8 + 1/pi)^(1/4) / sqrt(log(2)/2) = 1.5500.
INF_NORM_CONSTANT = 1.56


class DimensionError(ValueError):
    pass


@dataclass(frozen=True)
class L2Ball:
    d: int
    radius: float = 1.0

    def __post_init__(self):
        if self.d < 1:
            raise DimensionError(f"d must be >= 1, got {self.d}")
        if not self.radius > 0:
            raise ValueError(f"radius must be positive, got {self.radius}")

    @property
    def center(self) -> np.ndarray:
        return np.zeros(self.d)

    def contains(self, x, tol: float = MEMBERSHIP_TOL) -> bool:
        x = np.asarray(x, dtype=float)
        return x.shape == (self.d,) and float(np.linalg.norm(x)) <= self.radius + tol


@dataclass(frozen=True)
class Simplex:
    d: int

    def __post_init__(self):
        if self.d < 2:
            raise DimensionError(f"simplex needs d > 1, got {self.d}")

    @property
    def center(self) -> np.ndarray:
        return np.full(self.d, 1.0 / self.d)

    def contains(self, x, tol: float = MEMBERSHIP_TOL) -> bool:
        x = np.asarray(x, dtype=float)
        return x.shape == (self.d,) and bool(np.all(x >= -tol)) and abs(x.sum() - 1.0) <= tol


@dataclass(frozen=True)
class Shrunk:
    """Homothetic copy ``center + factor * (base - center)`` of a base set.

    For a ball centred at the origin this is ``x / factor in base``; for the
    simplex it is the mixture ``(1 - lam) * w + lam * uniform`` with
    ``lam = 1 - factor``, which keeps every coordinate at least ``lam / d``.
    """

    base: Union[L2Ball, Simplex]
    factor: float

    def __post_init__(self):
        if not 0.0 < self.factor < 1.0:
            raise ValueError(f"shrink factor must lie in (0, 1), got {self.factor}")

    @property
    def d(self) -> int:
        return self.base.d

    @property
    def center(self) -> np.ndarray:
        return self.base.center

    def to_base(self, x) -> np.ndarray:
        c = self.center
        return c + (np.asarray(x, dtype=float) - c) / self.factor

    def from_base(self, v) -> np.ndarray:
        c = self.center
        return c + self.factor * (np.asarray(v, dtype=float) - c)

    def contains(self, x, tol: float = MEMBERSHIP_TOL) -> bool:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.d,):
            return False
        return self.base.contains(self.to_base(x), tol=tol / self.factor)


Domain = Union[L2Ball, Simplex, Shrunk]


def base_kind(domain: Domain) -> type:
    return type(domain.base) if isinstance(domain, Shrunk) else type(domain)


def shrink_domain(domain: Domain, gamma: float) -> Domain:
    """Shrink ``domain`` by ``gamma`` towards its centre.

    A ball of radius ``rho`` becomes the ball of radius ``gamma * rho``, so any
    member perturbed by ``delta <= (1 - gamma) * rho`` stays in the original
    ball. The simplex becomes a :class:`Shrunk` mixture whose coordinates are
    all at least ``(1 - gamma) / d``.
    """
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must lie in (0, 1), got {gamma}")
    if isinstance(domain, L2Ball):
        return L2Ball(domain.d, gamma * domain.radius)
    if isinstance(domain, Simplex):
        return Shrunk(domain, gamma)
    raise TypeError(f"can only shrink an L2Ball or Simplex, got {type(domain).__name__}")


def sample_unit_sphere(d: int, rng: np.random.Generator) -> np.ndarray:
    """Draw a direction uniformly from the unit sphere in R^d (normalized Gaussian)."""
    if d < 1:
        raise DimensionError(f"d must be >= 1, got {d}")
    while True:
        z = rng.standard_normal(d)
        n = np.linalg.norm(z)
        if n > 0.0:
            return z / n


def sample_unit_sphere_batch(n: int, d: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` i.i.d. uniform sphere directions as an ``(n, d)`` array."""
    if d < 1:
        raise DimensionError(f"d must be >= 1, got {d}")
    z = rng.standard_normal((n, d))
    norms = np.linalg.norm(z, axis=1, keepdims=True)
    # a zero Gaussian vector has probability zero; redraw to keep the contract exact
    while np.any(norms == 0.0):
        bad = norms[:, 0] == 0.0
        z[bad] = rng.standard_normal((int(bad.sum()), d))
        norms = np.linalg.norm(z, axis=1, keepdims=True)
    return z / norms


def sample_ball(n: int, d: int, rng: np.random.Generator, radius: float = 1.0) -> np.ndarray:
    """``n`` points uniform in the Euclidean ball."""
    u = sample_unit_sphere_batch(n, d, rng)
    r = radius * rng.random(n) ** (1.0 / d)
    return u * r[:, None]


def sample_domain(domain: Domain, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` random members of ``domain`` (uniform for balls and simplices)."""
    if isinstance(domain, L2Ball):
        return sample_ball(n, domain.d, rng, domain.radius)
    if isinstance(domain, Simplex):
        return rng.dirichlet(np.ones(domain.d), size=n)
    base = sample_domain(domain.base, n, rng)
    return domain.center + domain.factor * (base - domain.center)


def linear_minimizer(domain: Domain, c) -> np.ndarray:
    """A minimizer of ``<c, w>`` over ``domain``."""
    c = np.asarray(c, dtype=float)
    if isinstance(domain, Shrunk):
        return domain.from_base(linear_minimizer(domain.base, c))
    if isinstance(domain, L2Ball):
        n = np.linalg.norm(c)
        return np.zeros(domain.d) if n == 0.0 else -domain.radius * c / n
    w = np.zeros(domain.d)
    w[int(np.argmin(c))] = 1.0
    return w


def _softmax(theta: np.ndarray) -> np.ndarray:
    z = np.exp(theta - theta.max())
    p = z / z.sum()
    return np.maximum(p, PROB_FLOOR)


@dataclass(frozen=True)
class MirrorSetup:
    """Norm, regularizer and feasible set used by mirror descent.

    ``R`` bounds the regularizer, ``sup r(w) <= R**2`` with ``min r = 0``;
    ``p_star`` bounds the fourth root of E||u||_*^4 for uniform sphere ``u``.
    """

    norm_id: str
    regularizer_id: str
    R: float
    p_star: float
    domain: Domain = field(repr=True)

    def __post_init__(self):
        if self.norm_id not in ("L2", "L1"):
            raise ValueError(f"unknown norm {self.norm_id!r}")
        if self.regularizer_id not in ("HalfSquaredL2", "NegEntropyScaled"):
            raise ValueError(f"unknown regularizer {self.regularizer_id!r}")
        if not (self.R > 0 and self.p_star > 0):
            raise ValueError("R and p_star must be positive")
        kind = base_kind(self.domain)
        if self.regularizer_id == "HalfSquaredL2" and kind is not L2Ball:
            raise ValueError("HalfSquaredL2 requires an L2Ball domain")
        if self.regularizer_id == "NegEntropyScaled" and kind is not Simplex:
            raise ValueError("NegEntropyScaled requires a simplex domain")

    @property
    def d(self) -> int:
        return self.domain.d

    def norm(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(np.linalg.norm(x)) if self.norm_id == "L2" else float(np.abs(x).sum())

    def dual_norm(self, g) -> np.ndarray:
        """Dual norm along the last axis (2-norm or infinity-norm)."""
        g = np.asarray(g, dtype=float)
        if self.norm_id == "L2":
            return np.linalg.norm(g, axis=-1)
        return np.abs(g).max(axis=-1)

    def regularizer(self, w) -> float:
        w = np.asarray(w, dtype=float)
        if isinstance(self.domain, Shrunk):
            w = self.domain.to_base(w)
        if self.regularizer_id == "HalfSquaredL2":
            return 0.5 * float(w @ w)
        w = np.clip(w, 0.0, None)
        pos = w > 0
        return float(np.sum(w[pos] * np.log(self.d * w[pos])))

    def contains(self, x, tol: float = MEMBERSHIP_TOL) -> bool:
        return self.domain.contains(x, tol)


def euclidean_setup(d: int, radius: float = 1.0) -> MirrorSetup:
    """Half-squared-norm regularizer on the ball: ``R**2 = radius**2 / 2``, ``p_star = 1``."""
    return MirrorSetup("L2", "HalfSquaredL2", radius / np.sqrt(2.0), 1.0, L2Ball(d, radius))


def entropic_setup(d: int, p_star: float | None = None, shrink: float | None = None) -> MirrorSetup:
    """Scaled negative entropy ``sum w_i log(d w_i)`` on the simplex: ``R**2 = log d``."""
    if d < 2:
        raise DimensionError(f"entropic setup needs d > 1, got {d}")
    if p_star is None:
        p_star = INF_NORM_CONSTANT * np.sqrt(np.log(d) / d)
    domain: Domain = Simplex(d)
    if shrink is not None:
        domain = shrink_domain(domain, shrink)
    return MirrorSetup("L1", "NegEntropyScaled", float(np.sqrt(np.log(d))), float(p_star), domain)


def mirror_step(setup: MirrorSetup, theta) -> np.ndarray:
    """Return ``argmax_{w in domain} <theta, w> - r(w)``.

    Ball: Euclidean projection of ``theta``. Simplex: softmax of ``theta``;
    the ``log d`` offset inside ``r`` shifts values only, not the maximizer.
    On a shrunk simplex the regularizer is pulled back through the homothety,
    giving ``center + factor * softmax(factor * theta)``.
    """
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (setup.d,):
        raise DimensionError(f"theta has shape {theta.shape}, expected ({setup.d},)")
    if not np.all(np.isfinite(theta)):
        raise ValueError("theta has non-finite entries")
    dom = setup.domain
    if isinstance(dom, L2Ball):
        n = np.linalg.norm(theta)
        return theta.copy() if n <= dom.radius else theta * (dom.radius / n)
    if isinstance(dom, Simplex):
        return _softmax(theta)
    if isinstance(dom.base, Simplex):
        return dom.from_base(_softmax(dom.factor * theta))
    raise TypeError(f"unsupported domain {dom!r}")
