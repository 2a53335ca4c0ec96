import csv
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gossipage.analytic import exact_subset_ages, renewal_line_limit
from gossipage.engine import (Deterministic, Exponential, Gamma, Pareto, Uniform, aggregate, parse_distribution, run,
                              run_renewal_line, run_renewal_replications, run_replications, split_seeds)
from gossipage.engine.events import PoissonStream, alias_table, channel_table
from gossipage.engine.reference import replay, run_clocks
from gossipage.engine.simulate import as_seed_sequence
from gossipage.protocols import ProtocolSpec, TimestompPolicy
from gossipage.topology import Network, build


def small_net():
    edges = {(1, 2): 0.7, (2, 1): 1.3, (2, 3): 0.9, (3, 1): 0.4, (3, 2): 1.1}
    return build("arbitrary", 3, lam_e=0.8, edges=edges, source={1: 1.0, 3: 0.5})


STATIC = [ProtocolSpec("baseline_version"), ProtocolSpec("baseline_aoi"),
          ProtocolSpec("g_gap", gap=1.0, unreliable_rate=0.7), ProtocolSpec("mutation", p_mut=0.3),
          ProtocolSpec("timestomp", adversaries=(2,), policy=TimestompPolicy(0.5, 0.2, 0.1, 0.6))]


@pytest.mark.parametrize("proto", STATIC, ids=lambda p: p.variant)
def test_kernel_matches_python_reference_bit_for_bit(proto):
    net = small_net()
    T, w, seed = 300.0, 30.0, 11
    fast = run(net, proto, T, w, seed)
    ch = channel_table(net, proto)
    rng = np.random.default_rng(as_seed_sequence(seed))
    chunks = list(PoissonStream(ch, rng).chunks(T))
    slow = replay(net, proto, ch, chunks, T, w)
    assert np.array_equal(fast.version_moments, slow.version_moments)
    assert np.array_equal(fast.aoi_moments, slow.aoi_moments)
    assert fast.fraction == slow.fraction


def test_same_seed_same_result_and_different_seeds_differ():
    net = small_net()
    a, b = run(net, horizon=200, seed=5), run(net, horizon=200, seed=5)
    c = run(net, horizon=200, seed=6)
    assert np.array_equal(a.version_moments, b.version_moments)
    assert not np.array_equal(a.version_age, c.version_age)


def test_single_node():
    net = build("fc", 1, lam_source=2.0, lam_e=1.0)
    m = run_replications(net, horizon=4000, replications=4)
    assert m.version_age[0] == pytest.approx(0.5, rel=0.05)
    m = run_replications(net, ProtocolSpec("baseline_aoi"), horizon=4000, replications=4)
    assert m.aoi[0] == pytest.approx(0.5, rel=0.05)


@pytest.mark.parametrize("metric,variant", [("version", "baseline_version"), ("aoi", "baseline_aoi")])
def test_simulation_agrees_with_exact(metric, variant):
    net = small_net()
    m = run_replications(net, ProtocolSpec(variant), horizon=5000, replications=8, master_seed=3)
    exact = exact_subset_ages(net, metric)[:, 0]
    z = np.abs(m.age(metric) - exact) / m.se(metric)
    assert np.all(z < 5), z


def test_event_counts_match_rates():
    net = small_net()
    T = 5000.0
    m = run(net, horizon=T, seed=2)
    ch = channel_table(net)
    counts = m.event_counts["per_channel"]
    assert np.all(np.abs(counts - ch.rate * T) <= 4 * np.sqrt(ch.rate * T))


def test_renewal_clock_engine_with_exponential_clocks_matches_exact():
    net = small_net()
    runs = [run_clocks(net, horizon=3000, seed=s) for s in split_seeds(1, 4)]
    m = aggregate(runs)
    exact = exact_subset_ages(net)[:, 0]
    assert np.all(np.abs(m.version_age - exact) < 5 * m.version_se + 1e-9)


def test_trace_file(tmp_path):
    path = tmp_path / "trace.csv"
    run(small_net(), horizon=20, seed=1, trace=path)
    rows = list(csv.DictReader(open(path)))
    assert rows and set(rows[0]) == {"time", "kind", "i", "j", "X_j_before", "X_j_after"}
    times = [float(r["time"]) for r in rows]
    assert times == sorted(times)
    for r in rows:
        if r["kind"] == "gossip":
            assert int(r["X_j_after"]) <= int(r["X_j_before"])
        if r["kind"] == "source_to_node":
            assert int(r["X_j_after"]) == 0


def test_replication_seed_checks():
    net = small_net()
    with pytest.raises(ValueError):
        run_replications(net, horizon=10, seeds=[1, 1])
    with pytest.raises(ValueError):
        run_replications(net, horizon=10, replications=1)
    m = run_replications(net, horizon=50, replications=3, threads=2)
    assert m.replications == 3 and m.version_se.shape == (3,)


def test_unreachable_nodes_warn():
    net = Network(2, {}, {1: 1.0}, 1.0)
    m = run(net, horizon=50)
    assert m.warnings


@given(st.lists(st.floats(0.01, 10), min_size=1, max_size=30))
def test_alias_table_reproduces_weights(w):
    w = np.array(w)
    prob, alias = alias_table(w)
    k = len(w)
    mass = prob / k
    for i in range(k):
        mass[alias[i]] += (1 - prob[i]) / k
    assert np.allclose(mass, w / w.sum())


def test_backward_recurrence_means():
    assert Exponential(2.0).backward_recurrence_mean() == pytest.approx(0.5)
    assert Deterministic(1.5).backward_recurrence_mean() == pytest.approx(0.75)
    assert Uniform(0, 2).backward_recurrence_mean() == pytest.approx(2 / 3)
    assert Gamma(2, 0.5).backward_recurrence_mean() == pytest.approx(0.75)
    with pytest.raises(ValueError):
        Pareto(1.5).backward_recurrence_mean()
    assert parse_distribution("gamma:2,0.5") == Gamma(2, 0.5)
    with pytest.raises(ValueError):
        parse_distribution("weibull:1")


def test_renewal_line_exponential_hops():
    hops = [Exponential(1.0), Exponential(2.0)]
    m = run_renewal_replications(hops, horizon=2e4, replications=4)
    assert m.aoi[-1] == pytest.approx(1.5, rel=0.03)
    assert m.aoi[0] == pytest.approx(1.0, rel=0.03)


def test_renewal_version_age():
    m = run_renewal_line([Exponential(1.0)], Exponential(1.0), metric="version", horizon=2e4, seed=1)
    assert m.version_age[0] == pytest.approx(renewal_line_limit([Exponential(1.0)], "version", Exponential(1.0)),
                                             rel=0.05)


def test_network_average_se():
    m = run_replications(small_net(), horizon=200, replications=4)
    avg, se = m.network_average()
    assert avg == pytest.approx(m.version_age.mean())
    assert se > 0 and math.isfinite(se)
    sub, _ = m.subset_average([1, 3])
    assert sub == pytest.approx(m.version_age[[0, 2]].mean())


@pytest.mark.parametrize("variant", ["asuman", "semi_distributed", "fully_distributed"])
def test_schemes_run(variant):
    m = run(build("fc", 20), ProtocolSpec(variant), horizon=200, seed=1)
    assert np.all(np.isfinite(m.version_age)) and m.version_age.mean() > 0
    if variant == "asuman":
        assert m.minset_age is not None and m.minset_age <= m.version_age.mean()
