import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from twopoint.diagnostics import md_inequality_audit
from twopoint.estimators import TwoPointOracle
from twopoint.geometry import entropic_setup, euclidean_setup, mirror_step, sample_domain
from twopoint.objectives import builtin_objective
from twopoint.optimizer import (
    RunAborted,
    RunRecord,
    ScheduleParams,
    average_iterate,
    default_parameters,
    run_bandit,
)


def test_default_parameters_example():
    setup = euclidean_setup(4, np.sqrt(2.0))  # R = 1, p* = 1
    assert setup.R == pytest.approx(1.0)
    p = default_parameters(setup, 1.0, 4, 100)
    assert p.eta == pytest.approx(0.05, rel=1e-12)
    assert np.sqrt(4 / 100) == pytest.approx(0.2)
    assert p.delta == pytest.approx(1e-3, rel=1e-12)


def test_default_delta_respects_bound():
    for d, T in [(2, 10), (4, 10**6), (100, 5)]:
        setup = euclidean_setup(d)
        p = default_parameters(setup, 1.0, d, T, delta_cap=10.0)
        assert p.delta <= setup.p_star * setup.R * np.sqrt(d / T) * (1 + 1e-12)


def test_eta_scales_as_inverse_sqrt_T():
    setup = euclidean_setup(3)
    a, b = default_parameters(setup, 2.0, 3, 100), default_parameters(setup, 2.0, 3, 400)
    assert b.eta == pytest.approx(a.eta / 2, rel=1e-12)


def test_entropic_uses_sqrt_d_times_G1():
    d = 9
    setup = entropic_setup(d)
    via_g1 = default_parameters(setup, None, d, 50, G1=0.5)
    direct = default_parameters(setup, np.sqrt(d) * 0.5, d, 50)
    assert via_g1.eta == direct.eta


def test_default_parameters_errors():
    setup = euclidean_setup(2)
    for args in [(0.0, 2, 10), (-1.0, 2, 10), (1.0, 2, 0), (1.0, 3, 10)]:
        with pytest.raises(ValueError):
            default_parameters(setup, *args)
    with pytest.raises(ValueError):
        default_parameters(setup, None, 2, 10)


def test_schedule_validation():
    with pytest.raises(ValueError):
        ScheduleParams(T=0, d=2, eta=0.1, delta=0.1)
    with pytest.raises(ValueError):
        ScheduleParams(T=3, d=2, eta=0.1, delta=[0.1, 0.2])
    with pytest.raises(ValueError):
        ScheduleParams(T=2, d=2, eta=0.1, delta=[0.1, 0.0])
    p = ScheduleParams(T=3, d=2, eta=0.1, delta=[0.3, 0.2, 0.1])
    assert p.delta_at(2) == 0.1


@pytest.mark.parametrize("setup", [euclidean_setup(3), entropic_setup(3)])
def test_single_round_predicts_center(setup):
    stream = builtin_objective("l2norm", 3, domain=setup.domain)
    rec = run_bandit(stream, setup, ScheduleParams(1, 3, 0.1, 0.01), 0)
    assert np.allclose(rec.iterates[0], setup.domain.center)
    assert rec.T == 1 and rec.total_queries == 2


def _linear_run(seed=3):
    d, T = 5, 10_000
    setup = euclidean_setup(d)
    stream = builtin_objective("linear", d, {"a": np.eye(d)[0]}, domain=setup.domain)
    params = default_parameters(setup, stream.lipschitz_l2, d, T)
    return run_bandit(stream, setup, params, seed), setup, params


def test_linear_loss_converges_to_boundary_minimizer():
    rec, _, _ = _linear_run()
    assert rec.losses.mean() == pytest.approx(-1.0, abs=0.1)
    assert np.linalg.norm(rec.iterates[-1] - (-np.eye(5)[0])) < 0.2


def test_deterministic_given_seed():
    a, _, _ = _linear_run(11)
    b, _, _ = _linear_run(11)
    for field in ("iterates", "dual_states", "final_dual", "losses", "gradients", "average_iterate"):
        assert np.array_equal(getattr(a, field), getattr(b, field))
    c, _, _ = _linear_run(12)
    assert not np.array_equal(a.iterates, c.iterates)


def test_record_invariants():
    rec, setup, params = _linear_run()
    G = rec.gradients
    duals = np.vstack([rec.dual_states, rec.final_dual])
    assert np.array_equal(duals[1:], duals[:-1] - params.eta * G)
    assert np.allclose(rec.dual_states[0], 0.0)
    assert all(setup.contains(w) for w in rec.iterates)
    assert np.allclose(rec.average_iterate, rec.iterates.mean(axis=0), atol=1e-9)
    assert rec.total_queries == 2 * rec.T
    assert rec.diagnostic_queries == rec.T
    for t in (0, 17, rec.T - 1):
        assert np.array_equal(rec.iterates[t], mirror_step(setup, rec.dual_states[t]))


def test_single_oracle_reset_and_query_budget():
    resets = []
    orc = TwoPointOracle(lambda x: float(np.abs(x).sum()), round_reset=lambda: resets.append(1))
    setup = euclidean_setup(3)
    rec = run_bandit(orc, setup, default_parameters(setup, np.sqrt(3), 3, 250), 1)
    assert orc.query_count == 2 * 250 == rec.total_queries
    assert orc.diagnostic_count == 250
    assert len(resets) == 250


def test_no_loss_tracking_means_no_extra_queries():
    orc = TwoPointOracle(lambda x: float(x @ x))
    setup = euclidean_setup(2)
    rec = run_bandit(orc, setup, default_parameters(setup, 2.0, 2, 40), 0, track_losses=False)
    assert orc.query_count == 80 and orc.diagnostic_count == 0 and rec.losses is None


def test_oracle_failure_aborts_with_partial_record():
    calls = {"n": 0}

    def f(x):
        calls["n"] += 1
        return np.inf if calls["n"] > 21 else float(x @ x)

    setup = euclidean_setup(2)
    with pytest.raises(RunAborted) as info:
        run_bandit(TwoPointOracle(f), setup, default_parameters(setup, 2.0, 2, 100), 0, track_losses=False)
    rec = info.value.record
    assert rec.T == 10 and not rec.completed and rec.total_queries == 20


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        run_bandit(TwoPointOracle(lambda x: 0.0), euclidean_setup(3), ScheduleParams(5, 2, 0.1, 0.1), 0)


def test_average_iterate_examples():
    def rec(its):
        its = np.asarray(its, dtype=float)
        return RunRecord(its, its, its[-1] if len(its) else np.zeros(2), [], None, 0.1, np.full(len(its), 0.1), 0, 0, 0)

    assert np.array_equal(average_iterate(rec([[0.3, 0.4]] * 5)), [0.3, 0.4])
    assert np.array_equal(average_iterate(rec([[0.0, 0.0], [1.0, 0.0]])), [0.5, 0.0])
    with pytest.raises(ValueError):
        average_iterate(rec(np.zeros((0, 2))))


def test_simplex_average_sums_to_one():
    setup = entropic_setup(6)
    stream = builtin_objective("shifted_l1norm", 6, domain=setup.domain, seed=2)
    rec = run_bandit(stream, setup, default_parameters(setup, None, 6, 500, G1=1.0), 4)
    assert abs(average_iterate(rec).sum() - 1.0) < 1e-9


def test_decreasing_delta_sequence():
    setup = euclidean_setup(2)
    T = 50
    deltas = 1e-3 / np.sqrt(np.arange(1, T + 1))
    rec = run_bandit(builtin_objective("l2norm", 2), setup, ScheduleParams(T, 2, 0.05, deltas), 0)
    assert np.array_equal(rec.deltas, deltas)
    assert [e.delta for e in rec.estimates] == list(deltas)


@settings(max_examples=15)
@given(seed=st.integers(0, 2**31), entropic=st.booleans(), T=st.integers(1, 300))
def test_mirror_descent_inequality_holds_per_run(seed, entropic, T):
    d = 4
    setup = entropic_setup(d) if entropic else euclidean_setup(d)
    stream = builtin_objective("abs_regression", d, domain=setup.domain, seed=seed)
    params = default_parameters(setup, None if entropic else 1.0, d, T, G1=1.0)
    rec = run_bandit(stream, setup, params, seed)
    probes = sample_domain(setup.domain, 50, np.random.default_rng(seed))
    if entropic:
        probes = np.vstack([probes, np.eye(d)])
    assert md_inequality_audit(rec, setup, probes) <= 1e-6
