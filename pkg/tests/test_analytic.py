import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gossipage.analytic import (UnreachableError, exact_subset_ages, fc_bounds, fc_closed_form, fc_profile,
                                fc_single_node_ages, generalized_ring_profile, grid_profile, harmonic,
                                min_incoming_edges, renewal_line_limit, ring_asymptote, ring_closed_form,
                                scheme_limits, subset_age_table, upper_bound_recursion)
from gossipage.analytic.bounds import contiguous_incoming, grid_edge_lower_bound, infinite_grid_edge_bound
from gossipage.engine import parse_distribution
from gossipage.experiments import random_network, toy_network
from gossipage.topology import Network, build


def test_toy_example_subsets():
    t = subset_age_table(toy_network())
    assert t.v([1, 2, 3]) == pytest.approx(0.5)
    assert t.v([1, 2]) == pytest.approx(0.75)
    assert t.v([2, 3]) == pytest.approx(0.75)
    assert t.node_values() == pytest.approx([0.875, 1.25, 0.875])


def test_lazy_table_matches_full():
    net = toy_network()
    full = subset_age_table(net, max_moment=2)
    lazy = subset_age_table(net, max_moment=2, lazy=True)
    assert not lazy.computed[0b101]  # {1, 3} is never needed
    assert np.allclose(lazy.node_values(2), full.node_values(2))


@pytest.mark.parametrize("n", range(1, 9))
def test_closed_forms_match_exact(n):
    assert exact_subset_ages(build("fc", n))[:, 0] == pytest.approx(fc_closed_form(n)[0], abs=1e-9)
    assert exact_subset_ages(build("ring", n))[:, 0] == pytest.approx(ring_closed_form(n)[0], abs=1e-9)


def test_closed_form_subsets_match_exact_table():
    n = 7
    t = subset_age_table(build("ring", n))
    v = ring_closed_form(n)
    for j in range(1, n + 1):
        assert t.v(range(1, j + 1)) == pytest.approx(v[j - 1], abs=1e-12)


@given(st.integers(0, 2**32 - 1))
def test_subset_ages_anti_monotone(seed):
    net = random_network(np.random.default_rng(seed), 3, 6)
    t = subset_age_table(net)
    full = (1 << net.n) - 1
    for S in range(1, full + 1):
        for i in range(net.n):
            T = S | (1 << i)
            assert t.values[T, 1] <= t.values[S, 1] + 1e-12


@given(st.integers(0, 2**32 - 1))
def test_aoi_equals_version_age_with_unit_self_update_rate(seed):
    net = random_network(np.random.default_rng(seed), 3, 6).with_self_update_rate(1.0)
    assert exact_subset_ages(net, "aoi")[:, 0] == pytest.approx(exact_subset_ages(net, "version")[:, 0], rel=1e-12)


@given(st.integers(0, 2**32 - 1))
def test_second_moment_at_least_mean_square(seed):
    net = random_network(np.random.default_rng(seed), 3, 5)
    for metric in ("version", "aoi"):
        m = exact_subset_ages(net, metric, max_moment=2)
        assert np.all(m[:, 1] >= m[:, 0] ** 2 - 1e-12)


@pytest.mark.parametrize("l01,l12", [(1.0, 1.0), (1.0, 2.0), (0.5, 3.0)])
def test_two_node_line_variances(l01, l12):
    net = build("arbitrary", 2, edges={(1, 2): l12}, source={1: l01})
    var = subset_age_table(net, "aoi", 2).variances()
    assert var == pytest.approx([1 / l01**2, 1 / l01**2 + 1 / l12**2], rel=1e-12)


def test_unreachable_raises():
    with pytest.raises(UnreachableError):
        subset_age_table(Network(2, {}, {1: 1.0}, 1.0))


def test_table_csv(tmp_path):
    t = subset_age_table(toy_network(), max_moment=2)
    p = tmp_path / "t.csv"
    t.to_csv(p)
    lines = p.read_text().splitlines()
    assert lines[0] == "subset_bitmask,v,moment2"
    assert len(lines) == 1 + 7


@given(st.integers(2, 400))
def test_fc_between_bounds(n):
    lo, hi = fc_bounds(n)
    assert lo - 1e-12 <= fc_closed_form(n)[0] <= hi + 1e-12


def test_fc_vectorized_matches_scalar():
    v = fc_single_node_ages(300)
    for n in (1, 2, 5, 77, 300):
        assert v[n - 1] == pytest.approx(fc_closed_form(n)[0], rel=1e-14)


def test_fc_closed_form_large_n_is_harmonic():
    n = 10**4
    assert 0.85 <= fc_closed_form(n)[0] / harmonic(n) <= 1.0


def test_ring_asymptote_ratio():
    n = 4096
    assert ring_closed_form(n)[0] / ring_asymptote(n) == pytest.approx(1.0, abs=0.05)


def test_fc_profile_reproduces_closed_form():
    for n in (2, 5, 40):
        u1, u = upper_bound_recursion(fc_profile(n), clamp=False)
        assert u == pytest.approx(fc_closed_form(n), rel=1e-12)


@pytest.mark.parametrize("net", [build("grid", 9), build("grid", 16), build("generalized_ring", 9, f=2),
                                 build("generalized_ring", 12, f=3), build("ring", 10), build("line", 8)],
                         ids=lambda n: f"{n.kind}{n.n}")
def test_brute_force_bound_dominates_exact_ages(net):
    n = net.n
    inc = min_incoming_edges(net).astype(float)
    rate = min(r for r in net.gossip_rates.values() if r > 0)
    src = np.arange(1, n + 1) / n
    from gossipage.analytic import BoundProfile
    u1, u = upper_bound_recursion(BoundProfile(n, inc, np.full(n - 1, rate), src), net.self_update_rate)
    exact = exact_subset_ages(net)[:, 0]
    assert exact.max() <= u1 + 1e-12


@pytest.mark.parametrize("n", [9, 16])
def test_grid_edge_bound_below_exact_minimum(n):
    exact = min_incoming_edges(build("grid", n))
    lower = [grid_edge_lower_bound(n, j) for j in range(1, n)]
    assert np.all(np.array(lower) <= exact)
    assert infinite_grid_edge_bound(1) == 4


@pytest.mark.parametrize("n,f", [(9, 2), (12, 3), (14, 2)])
def test_contiguous_arcs_minimize_incoming_edges(n, f):
    exact = min_incoming_edges(build("generalized_ring", n, f=f))
    arcs = [contiguous_incoming(n, f, j) for j in range(1, n)]
    assert np.array_equal(exact, arcs)
    prof = generalized_ring_profile(n, f, brute_force=False)
    assert np.array_equal(prof.incoming, exact)


def test_grid_bound_values_grow():
    u = [upper_bound_recursion(grid_profile(n))[0] for n in (64, 256, 1024)]
    assert u[0] < u[1] < u[2]


def test_scheme_limits():
    assert scheme_limits("asuman") == pytest.approx(3.0)
    assert scheme_limits("minage_set") == pytest.approx(2.0)
    assert scheme_limits("optimal") == pytest.approx(2.0)
    assert scheme_limits("fully_distributed") == pytest.approx(1 + math.e)
    assert scheme_limits("asuman", 10**6) == pytest.approx(3.0, rel=1e-5)
    assert scheme_limits("semi_distributed", 10**6) == pytest.approx(2.0, rel=1e-5)
    with pytest.raises(ValueError):
        scheme_limits("nope")


def test_renewal_limit_mixed_hops():
    hops = [parse_distribution(t) for t in ("gamma:2,0.5", "deterministic:1.5", "uniform:0,2")]
    assert renewal_line_limit(hops) == pytest.approx(0.75 + 0.75 + 2 / 3)
    assert renewal_line_limit(hops[::-1]) == pytest.approx(renewal_line_limit(hops))
