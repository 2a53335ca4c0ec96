import numpy as np
import pytest
from hypothesis import given, strategies as st

from gossipage import mdp

TINY = dict(n=1, b_max=1, delta=1.0, p=0.5, q=(1.0,), x_max=6)


def test_rows_sum_to_one():
    m = mdp.build(2, 2, 0.4, 0.6, (0.3, 0.5), 5)
    for P in m.P:
        assert P.min() >= 0
        assert np.allclose(np.asarray(P.sum(axis=1)).ravel(), 1.0, atol=1e-12)


@given(n=st.integers(1, 2), b=st.integers(0, 2), d=st.floats(0, 1), p=st.floats(0, 1), q=st.floats(0, 1))
def test_rows_sum_to_one_property(n, b, d, p, q):
    m = mdp.build(n, b, d, p, (q / n,) * n, 3)
    for P in m.P:
        assert np.allclose(np.asarray(P.sum(axis=1)).ravel(), 1.0, atol=1e-12)


def test_tiny_instance_matches_brute_force():
    pol = mdp.solve(mdp.build(**TINY))
    best, thr = mdp.brute_force_thresholds(pol.mdp)
    assert pol.gain == pytest.approx(best, abs=1e-6)
    assert mdp.verify_threshold(pol).ok


def test_nontrivial_instance_matches_brute_force():
    m = mdp.build(1, 2, 0.3, 0.6, (0.8,), 7)
    pol = mdp.solve(m)
    best, thr = mdp.brute_force_thresholds(m)
    assert pol.gain == pytest.approx(best, abs=1e-6)
    assert 0 < pol.gain < m.x_max
    rep = mdp.verify_threshold(pol)
    assert rep.ok
    assert mdp.evaluate_policy(m, mdp.threshold_actions(m, thr)) == pytest.approx(best)


def test_no_source_updates_gain_zero():
    pol = mdp.solve(mdp.build(1, 1, 0.5, 0.0, (0.7,), 4))
    assert pol.gain == pytest.approx(0.0, abs=1e-9)


def test_empty_battery_gain_is_x_max():
    pol = mdp.solve(mdp.build(1, 0, 0.5, 0.5, (0.5,), 5))
    assert pol.gain == pytest.approx(5.0, abs=1e-6)
    rep = mdp.verify_threshold(pol)
    assert rep.trivial_slices == [0] and rep.ok


def test_zero_harvest_makes_empty_slice_trivial():
    pol = mdp.solve(mdp.build(1, 1, 0.0, 0.5, (0.5,), 4))
    assert 0 in mdp.verify_threshold(pol).trivial_slices


def test_truncation_insensitive():
    a = mdp.solve(mdp.build(**TINY)).gain
    b = mdp.solve(mdp.build(**{**TINY, "x_max": 12})).gain
    assert abs(a - b) < 1e-3


def test_policy_evaluation_reproduces_gain():
    m = mdp.build(2, 2, 0.35, 0.5, (0.4, 0.3), 6)
    pol = mdp.solve(m, tol=1e-10)
    assert mdp.evaluate_policy(m, pol.actions) == pytest.approx(pol.gain, abs=1e-8)
    assert 0 <= pol.gain <= m.x_max


def test_large_chain_uses_power_iteration():
    m = mdp.build(3, 1, 0.4, 0.5, (0.3, 0.3, 0.2), 7)
    pol = mdp.solve(m)
    assert m.n_states > 3000
    assert mdp.evaluate_policy(m, pol.actions) == pytest.approx(pol.gain, abs=1e-7)


def test_random_policy_reports_violations():
    m = mdp.build(2, 2, 0.5, 0.5, (0.4, 0.4), 4)
    pol = mdp.solve(m)
    rng = np.random.default_rng(0)
    bad = mdp.Policy(m, rng.integers(0, 2, m.n_states), pol.gain, pol.bias)
    rep = mdp.verify_threshold(bad)
    assert not rep.ok and rep.violations


def test_policy_csv(tmp_path):
    pol = mdp.solve(mdp.build(2, 1, 0.5, 0.5, (0.3, 0.3), 3))
    p = tmp_path / "pol.csv"
    pol.to_csv(p)
    lines = p.read_text().splitlines()
    assert lines[0] == "b,XC,X1,X2,action"
    assert len(lines) == 1 + pol.mdp.n_states


def test_non_convergence():
    with pytest.raises(mdp.ConvergenceError):
        mdp.solve(mdp.build(**TINY), max_iters=2)


def test_bad_parameters():
    with pytest.raises(ValueError):
        mdp.build(2, 1, 0.5, 0.5, (0.7, 0.7), 3)
    with pytest.raises(ValueError):
        mdp.build(1, 1, 1.5, 0.5, (0.5,), 3)
