import numpy as np
import pytest
from hypothesis import given, strategies as st

from gossipage.topology import (JammerPlan, Network, TopologyError, apply_jammers, build, components, grid_side,
                                line_order, ring_link, validate)

KINDS = ["fully_connected", "ring_bidirectional", "ring_unidirectional", "line", "grid"]


@given(kind=st.sampled_from(KINDS), n=st.integers(2, 30), lam=st.floats(0.1, 5))
def test_every_node_gossips_at_total_rate_lam(kind, n, lam):
    if kind == "grid":
        n = max(2, int(n**0.5)) ** 2
    net = build(kind, n, lam=lam)
    out = net.gossip_matrix().sum(axis=1)
    assert np.allclose(out, lam)
    assert np.isclose(net.source_vector().sum(), 1.0)
    assert validate(net).ok


@given(n=st.integers(5, 40), f=st.integers(1, 4))
def test_generalized_ring_degree(n, f):
    if f >= n / 2:
        with pytest.raises(TopologyError):
            build("generalized_ring", n, f=f)
        return
    net = build("generalized_ring", n, f=f)
    assert all(len(net.out_neighbors(i)) == 2 * f for i in range(1, n + 1))
    assert np.allclose(net.gossip_matrix(), net.gossip_matrix().T)


def test_fc_rates_and_ring_links():
    net = build("fc", 4, lam=3.0)
    assert net.rate(1, 2) == pytest.approx(1.0)
    assert ring_link(0, 6) == (1, 2)
    assert ring_link(5, 6) == (1, 6)


def test_grid_needs_square():
    with pytest.raises(TopologyError):
        build("grid", 10)
    assert grid_side(16) == 4


def test_unknown_kind():
    with pytest.raises(TopologyError):
        build("torus", 5)


def test_equidistant_jammers_split_ring_into_lines():
    net = apply_jammers(build("ring", 6), JammerPlan(2, "equidistant"))
    assert sorted(len(c) for c in components(net)) == [3, 3]
    for c in components(net):
        order = line_order(net, c)
        assert sorted(order) == sorted(c)
        for a, b in zip(order, order[1:]):
            assert net.rate(a, b) > 0


def test_adjacent_jammers_isolate_nodes():
    net = apply_jammers(build("ring", 10), JammerPlan(3, "adjacent"))
    sizes = sorted(len(c) for c in components(net))
    assert sizes == [1, 1, 8]
    assert validate(net).ok  # isolated nodes still hear the source


@given(n=st.integers(8, 60), k=st.integers(1, 6))
def test_jammers_remove_exactly_k_links(n, k):
    ring = build("ring", n)
    for placement in ("equidistant", "adjacent"):
        net = apply_jammers(ring, JammerPlan(k, placement))
        assert len(net.undirected_links()) == n - k
        assert len(components(net)) == k


def test_jammer_on_missing_link():
    with pytest.raises(TopologyError):
        apply_jammers(build("ring", 6), JammerPlan(1, "explicit", ((1, 4),)))


def test_greedy_jammers_fc():
    net = apply_jammers(build("fc", 6), JammerPlan(5, "greedy"))
    assert len(net.undirected_links()) == 15 - 5


def test_validate_flags_unreachable():
    net = Network(3, {(1, 2): 1.0}, {1: 1.0}, 1.0)
    rep = validate(net)
    assert not rep.ok and rep.unreachable == [3]


def test_text_round_trip(tmp_path):
    net = build("grid", 9, lam=2.0, lam_e=0.5)
    p = tmp_path / "g.txt"
    net.save(p)
    back = Network.load(p)
    assert back == net


def test_bad_text():
    with pytest.raises(TopologyError):
        Network.from_text("3 1.0\nbogus 1 2\n")


def test_with_source_rates_drops_zeros():
    net = build("line", 3).with_source_rates([0.5, 0.0, 0.5])
    assert net.source_rates == {1: 0.5, 3: 0.5}
