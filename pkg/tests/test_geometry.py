import numpy as np
import pytest
from hypothesis import given, strategies as st

from twopoint.geometry import (
    DimensionError,
    L2Ball,
    Shrunk,
    Simplex,
    entropic_setup,
    euclidean_setup,
    linear_minimizer,
    mirror_step,
    sample_domain,
    sample_unit_sphere,
    sample_unit_sphere_batch,
    shrink_domain,
)

finite = st.floats(-50, 50, allow_nan=False)


def test_sphere_d1_is_a_fair_sign(rng):
    draws = np.array([sample_unit_sphere(1, rng)[0] for _ in range(20_000)])
    assert set(np.unique(draws)) == {-1.0, 1.0}
    # Binomial(20000, 1/2): 4 sigma = 4 * sqrt(20000) / 2
    assert abs((draws > 0).sum() - 10_000) < 4 * np.sqrt(20_000) / 2


def test_sphere_unit_norm(rng):
    for _ in range(100):
        u = sample_unit_sphere(16, rng)
        assert abs(np.linalg.norm(u) - 1.0) < 1e-9


def test_sphere_mean_is_zero(rng):
    U = sample_unit_sphere_batch(100_000, 3, rng)
    assert np.all(np.abs(U.mean(axis=0)) < 4 / np.sqrt(100_000))


def test_sphere_second_moment_is_identity_over_d(rng):
    d, n = 4, 100_000
    U = sample_unit_sphere_batch(n, d, rng)
    outer = U[:, :, None] * U[:, None, :]
    m = outer.mean(axis=0)
    se = outer.std(axis=0) / np.sqrt(n)
    off = ~np.eye(d, dtype=bool)
    assert np.all(np.abs(m[off]) <= 5 * se[off])
    assert np.all(np.abs(np.diag(m) - 1 / d) <= 5 * np.diag(se))


def test_sphere_deterministic_given_seed():
    a = sample_unit_sphere(7, np.random.default_rng(3))
    b = sample_unit_sphere(7, np.random.default_rng(3))
    assert np.array_equal(a, b)


def test_sphere_rejects_d0(rng):
    with pytest.raises(DimensionError):
        sample_unit_sphere(0, rng)


def test_euclidean_step_examples():
    setup = euclidean_setup(2, 1.0)
    assert np.allclose(mirror_step(setup, [3.0, 4.0]), [0.6, 0.8], atol=1e-15)
    assert np.array_equal(mirror_step(setup, [0.1, 0.2]), [0.1, 0.2])


def test_entropic_step_examples():
    assert np.allclose(mirror_step(entropic_setup(3), np.zeros(3)), np.full(3, 1 / 3), atol=1e-15)
    assert np.allclose(mirror_step(entropic_setup(2), [np.log(2.0), 0.0]), [2 / 3, 1 / 3], atol=1e-15)


def test_entropic_step_overflow_safe():
    w = mirror_step(entropic_setup(3), [1e4, 0.0, -1e4])
    assert np.all(np.isfinite(w)) and np.all(w > 0)
    assert abs(w.sum() - 1) < 1e-9


def test_mirror_step_errors():
    setup = euclidean_setup(3)
    with pytest.raises(DimensionError):
        mirror_step(setup, np.zeros(2))
    with pytest.raises(ValueError):
        mirror_step(setup, [0.0, np.nan, 1.0])
    with pytest.raises(ValueError):
        mirror_step(setup, [0.0, np.inf, 1.0])


SETUPS = [euclidean_setup(4, 1.0), euclidean_setup(3, 2.5), entropic_setup(4), entropic_setup(3, shrink=0.8)]


@pytest.mark.parametrize("setup", SETUPS, ids=["ball1", "ball2.5", "simplex", "shrunk_simplex"])
@given(theta=st.lists(finite, min_size=4, max_size=4), seed=st.integers(0, 2**31))
def test_mirror_step_is_feasible_and_optimal(setup, theta, seed):
    theta = np.array(theta[: setup.d])
    w = mirror_step(setup, theta)
    assert setup.contains(w)
    best = theta @ w - setup.regularizer(w)
    cands = sample_domain(setup.domain, 200, np.random.default_rng(seed))
    vals = cands @ theta - np.array([setup.regularizer(c) for c in cands])
    assert np.all(best >= vals - 1e-8)


def test_mirror_step_optimality_10k_pairs(rng):
    # 10^4 random (theta, candidate) pairs per geometry
    for setup in SETUPS:
        thetas = rng.normal(scale=3.0, size=(100, setup.d))
        for theta in thetas:
            w = mirror_step(setup, theta)
            cands = sample_domain(setup.domain, 100, rng)
            vals = cands @ theta - np.array([setup.regularizer(c) for c in cands])
            assert theta @ w - setup.regularizer(w) >= vals.max() - 1e-8


@given(theta=st.lists(finite, min_size=5, max_size=5), c=finite)
def test_entropic_shift_invariance(theta, c):
    setup = entropic_setup(5)
    theta = np.array(theta)
    assert np.allclose(mirror_step(setup, theta + c), mirror_step(setup, theta), atol=1e-9)


def test_membership():
    assert L2Ball(2, 1.0).contains([0.6, 0.8])
    assert not L2Ball(2, 1.0).contains([0.7, 0.8])
    assert Simplex(3).contains([0.2, 0.3, 0.5])
    assert not Simplex(3).contains([0.2, 0.3, 0.6])
    assert not Simplex(3).contains([-0.1, 0.6, 0.5])
    s = Shrunk(Simplex(2), 0.5)
    assert s.contains([0.5, 0.5]) and s.contains([0.75, 0.25])
    assert not s.contains([0.8, 0.2])


def test_shrink_ball_examples(rng):
    assert shrink_domain(L2Ball(3, 1.0), 0.9) == L2Ball(3, 0.9)
    assert shrink_domain(L2Ball(3, 2.0), 0.5) == L2Ball(3, 1.0)
    small = shrink_domain(L2Ball(3, 1.0), 0.9)
    for w in sample_domain(small, 500, rng):
        assert L2Ball(3, 1.0).contains(w + 0.1 * sample_unit_sphere(3, rng))


def test_shrink_simplex_keeps_margin(rng):
    d, margin = 3, 0.01
    gamma = 1 - d * margin
    shrunk = shrink_domain(Simplex(d), gamma)
    members = sample_domain(shrunk, 2000, rng)
    assert np.all([shrunk.contains(m) for m in members])
    assert members.min() >= margin - 1e-12
    # feasible perturbations (zero-sum directions) of size <= margin stay in the simplex
    for w in members[:500]:
        u = sample_unit_sphere(d, rng)
        u -= u.mean()
        u /= np.linalg.norm(u)
        assert Simplex(d).contains(w + margin * u)


def test_shrink_rejects_bad_gamma():
    for g in (0.0, 1.0, -0.5, 1.5):
        with pytest.raises(ValueError):
            shrink_domain(L2Ball(2), g)


def test_setup_constants():
    s = euclidean_setup(4, 2.0)
    assert s.R**2 >= 2.0**2 / 2 - 1e-12 and s.p_star == 1.0
    e = entropic_setup(16)
    assert e.R**2 >= np.log(16) - 1e-12
    assert abs(e.regularizer(np.eye(16)[0]) - np.log(16)) < 1e-12
    assert abs(e.regularizer(np.full(16, 1 / 16))) < 1e-12


def test_linear_minimizer():
    assert np.allclose(linear_minimizer(L2Ball(2, 2.0), [3.0, 4.0]), [-1.2, -1.6])
    assert np.array_equal(linear_minimizer(Simplex(3), [1.0, -1.0, 0.0]), [0.0, 1.0, 0.0])
