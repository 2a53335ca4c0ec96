import math

import pytest
from hypothesis import given, strategies as st

from gossipage.protocols import (MISINFORMATION, RELIABLE, TRUE, UNRELIABLE, NodeState, ProtocolSpec,
                                 TimestompPolicy, apply_source_update_all, asuman_active_set, fresh_packet,
                                 fully_distributed_active, merge_baseline, merge_g_gap, merge_mutation,
                                 merge_timestomped, mutate_in_flight, timestomp_transform)

states = st.builds(NodeState, version_age=st.integers(0, 20), gen_time=st.floats(0, 100),
                   reliability=st.sampled_from([RELIABLE, UNRELIABLE]), truth=st.sampled_from([TRUE, MISINFORMATION]),
                   claimed=st.floats(0, 100))


@given(states, states)
def test_version_merge_keeps_min(r, s):
    out = merge_baseline(r, s)
    assert out.version_age == min(r.version_age, s.version_age)
    assert merge_baseline(out, s) == out  # idempotent


@given(states, states)
def test_aoi_merge_keeps_freshest(r, s):
    assert merge_baseline(r, s, "aoi").gen_time == max(r.gen_time, s.gen_time)


@given(states, states, states)
def test_version_merge_associative_on_age(a, b, c):
    x = merge_baseline(merge_baseline(a, b), c).version_age
    y = merge_baseline(a, merge_baseline(b, c)).version_age
    assert x == y


@given(states, states)
def test_g_gap_zero_matches_baseline_age(r, s):
    assert merge_g_gap(r, s, 0.0).version_age <= max(r.version_age, s.version_age)


@given(states, states)
def test_g_gap_inf_never_prefers_unreliable(r, s):
    out = merge_g_gap(r, s, math.inf)
    if RELIABLE in (r.reliability, s.reliability):
        assert out.reliability == RELIABLE


def test_g_gap_examples():
    rel = NodeState(3, reliability=RELIABLE)
    unrel = NodeState(1, reliability=UNRELIABLE)
    assert merge_g_gap(rel, unrel, 2) is rel
    assert merge_g_gap(rel, unrel, 1) is unrel
    assert merge_g_gap(unrel, rel, 2) is rel


def test_mutation_rules():
    a = NodeState(2, truth=MISINFORMATION)
    b = mutate_in_flight(NodeState(2), 1)
    assert merge_mutation(a, b).truth == TRUE
    assert mutate_in_flight(NodeState(2), 0).truth == MISINFORMATION
    assert merge_mutation(NodeState(1), NodeState(3)).version_age == 1


def test_source_update_increments():
    out = apply_source_update_all([NodeState(0), NodeState(4)])
    assert [s.version_age for s in out] == [1, 5]
    assert fresh_packet(2.5).aoi(3.0) == pytest.approx(0.5)


def test_timestomp():
    pol = TimestompPolicy.aggressive()
    assert timestomp_transform(1.0, 9.0, "outgoing", pol, 0.3) == 9.0
    assert timestomp_transform(1.0, 9.0, "incoming", pol, 0.3) == 0.0
    assert timestomp_transform(1.0, 9.0, "incoming", TimestompPolicy(), 0.3) == 1.0
    old = NodeState(0, gen_time=1.0, claimed=8.0)
    new = NodeState(0, gen_time=5.0, claimed=5.0)
    assert merge_timestomped(new, old) is old  # the stale packet wins on its forged stamp
    with pytest.raises(ValueError):
        TimestompPolicy(raise_out=0.7, lower_out=0.5)


def test_schemes_helpers():
    active, rate = asuman_active_set([2, 0, 0, 5], 8.0)
    assert active == {2, 3} and rate == 4.0
    assert fully_distributed_active({1: 0.0, 2: 0.9}, 1.0, 0.5) == {2}


def test_protocol_spec_validation():
    with pytest.raises(ValueError):
        ProtocolSpec("gossip")
    with pytest.raises(ValueError):
        ProtocolSpec("mutation", p_mut=1.5)
    assert ProtocolSpec("timestomp").metric == "aoi"
