"""Named experiments, one per acceptance claim.

Each experiment takes a parameter dict, a master seed and a thread count and
returns a ``Result`` with CSV rows and pass/fail checks.  Randomness flows
from the master seed through ``split_seeds(seed, R, experiment_id, point)``.
"""
from __future__ import annotations

import csv
import hashlib
import io
import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np
from scipy import stats

from . import mdp as mdpmod
from .analytic import (exact_subset_ages, fc_bounds, fc_closed_form, fc_single_node_ages, generalized_ring_profile,
                       grid_upper_bound, harmonic, renewal_line_limit, ring_asymptote, ring_closed_form,
                       scheme_limits, upper_bound_recursion)
from .bayesopt import WorstNodeAge, optimize
from .engine import parse_distribution, run_renewal_replications, run_replications, split_seeds
from .fitting import fit_exponent
from .protocols import ProtocolSpec, TimestompPolicy
from .topology import JammerPlan, Network, apply_jammers, build, components, line_order, validate

COLUMNS = ("n", "protocol", "param", "node", "v_hat", "se", "analytic", "analytic_kind")


@dataclass
class Check:
    name: str
    detail: str
    passed: bool


@dataclass
class Result:
    exp_id: int
    name: str
    rows: list[tuple] = field(default_factory=list)
    checks: list[Check] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def row(self, n, protocol, param, node, v_hat=None, se=None, analytic=None, analytic_kind=""):
        self.rows.append((n, protocol, param, node, v_hat, se, analytic, analytic_kind))

    def check(self, name: str, passed: bool, detail: str) -> bool:
        self.checks.append(Check(name, detail, bool(passed)))
        return bool(passed)

    def csv_text(self) -> str:
        def cell(v):
            if v is None:
                return ""
            if isinstance(v, (float, np.floating)):
                return repr(float(v))
            return str(v)

        def key(r):
            node = r[3]
            return (r[0], r[1], str(r[2]), (0, node, "") if isinstance(node, int) else (1, 0, str(node)))

        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in sorted(self.rows, key=key):
            w.writerow([cell(v) for v in r])
        return buf.getvalue()

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.csv_text())

    def summary(self) -> str:
        lines = [f"[{self.exp_id}] {self.name}"]
        for c in self.checks:
            lines.append(f"  {'PASS' if c.passed else 'FAIL'} {c.name}: {c.detail}")
        return "\n".join(lines)


@dataclass
class Experiment:
    exp_id: int
    name: str
    func: Callable[[dict, int, int], Result]
    defaults: dict[str, Any]
    quick: dict[str, Any]

    def params(self, overrides: dict | None = None, quick: bool = False) -> dict[str, Any]:
        p = dict(self.defaults)
        if quick:
            p.update(self.quick)
        if overrides:
            unknown = set(overrides) - set(p)
            if unknown:
                raise KeyError(f"unknown parameters for {self.name}: {sorted(unknown)}")
            p.update(overrides)
        return p

    def run(self, params: dict | None = None, seed: int = 0, threads: int = 1, quick: bool = False) -> Result:
        return self.func(self.params(params, quick), int(seed), int(threads))


REGISTRY: dict[str, Experiment] = {}


def experiment(exp_id: int, name: str, quick: dict | None = None, **defaults):
    def wrap(func):
        REGISTRY[name] = Experiment(exp_id, name, func, defaults, quick or {})
        return func
    return wrap


def get(name_or_id: str | int) -> Experiment:
    if isinstance(name_or_id, int) or str(name_or_id).isdigit():
        for e in REGISTRY.values():
            if e.exp_id == int(name_or_id):
                return e
    if name_or_id in REGISTRY:
        return REGISTRY[name_or_id]
    raise KeyError(f"unknown experiment {name_or_id!r}; known: {', '.join(names())}")


def names() -> list[str]:
    return [e.name for e in sorted(REGISTRY.values(), key=lambda e: e.exp_id)]


# helpers -------------------------------------------------------------------


def _reps(net, proto, horizon, seed, exp_id, point, R, threads, warmup=None):
    return run_replications(net, proto, horizon, warmup, seeds=split_seeds(seed, R, exp_id, point),
                            threads=threads)


def _within(x, target, rel):
    return abs(x - target) <= rel * abs(target)


def _subseed(seed, *key) -> int:
    """Integer master seed for a component that splits its own seeds."""
    return int(split_seeds(seed, 1, *key)[0].generate_state(1)[0])


def _diff_se(a, b):
    return math.sqrt(a**2 + b**2)


def _fmt(x, digits=4):
    return f"{x:.{digits}g}"


def _slope_check(res: Result, name: str, pts, lo: float, hi: float) -> float:
    fit = fit_exponent(pts)
    res.check(name, lo <= fit.slope <= hi, f"slope {fit.slope:.4f} (r2 {fit.r2:.4f}) in [{lo}, {hi}]")
    return fit.slope


def random_network(rng: np.random.Generator, n_min=3, n_max=8, edge_prob=0.5, rate_min=0.1,
                   rate_max=2.0) -> Network:
    """Random directed network whose nodes are all reachable from the source."""
    while True:
        n = int(rng.integers(n_min, n_max + 1))
        edges = {}
        for i in range(1, n + 1):
            for j in range(1, n + 1):
                if i != j and rng.random() < edge_prob:
                    edges[(i, j)] = float(rng.uniform(rate_min, rate_max))
        fed = [j for j in range(1, n + 1) if rng.random() < 0.5] or [int(rng.integers(1, n + 1))]
        source = {j: float(rng.uniform(rate_min, rate_max)) for j in fed}
        lam_e = float(rng.uniform(rate_min, rate_max))
        net = build("arbitrary", n, lam_e=lam_e, edges=edges, source=source)
        if validate(net).ok:
            return net


# 1 -------------------------------------------------------------------------


@experiment(1, "exact_vs_sim", quick=dict(networks=3, replications=4, horizon=500.0),
            networks=20, n_min=3, n_max=8, edge_prob=0.5, rate_min=0.1, rate_max=2.0, replications=16,
            horizon=2e4, sigmas=3.0)
def exact_vs_sim(p, seed, threads):
    res = Result(1, "exact_vs_sim")
    rng = np.random.default_rng(split_seeds(seed, 1, 1, 0)[0])
    worst = {"version": (0.0, ""), "aoi": (0.0, "")}
    outside = {"version": 0, "aoi": 0}
    total = 0
    for k in range(p["networks"]):
        net = random_network(rng, p["n_min"], p["n_max"], p["edge_prob"], p["rate_min"], p["rate_max"])
        for mi, (metric, variant) in enumerate((("version", "baseline_version"), ("aoi", "baseline_aoi"))):
            exact = exact_subset_ages(net, metric)[:, 0]
            m = _reps(net, ProtocolSpec(variant), p["horizon"], seed, 1, 2 * k + mi + 1, p["replications"], threads)
            est, se = m.age(metric), m.se(metric)
            for i in range(net.n):
                res.row(net.n, variant, f"net{k:02d}", i + 1, est[i], se[i], exact[i], "exact")
                z = abs(est[i] - exact[i]) / se[i] if se[i] > 0 else math.inf
                total += 1
                if z > p["sigmas"]:
                    outside[metric] += 1
                if z > worst[metric][0]:
                    worst[metric] = (z, f"net{k:02d} node {i + 1}")
    for metric in ("version", "aoi"):
        z, where = worst[metric]
        res.check(f"{metric}: every node within {p['sigmas']:g} SE", outside[metric] == 0,
                  f"{outside[metric]} of {total // 2} nodes outside; largest |z| {z:.2f} at {where}")
    # diagnostic: is the exceedance count plausible for t-distributed z with R-1 dof?
    q = 2 * stats.t.sf(p["sigmas"], p["replications"] - 1)
    limit = int(stats.binom.ppf(0.999, total, q))
    count = sum(outside.values())
    res.check("diagnostic: exceedances at chance level", count <= limit,
              f"{count} of {total} vs expected {total * q:.2f}, 99.9% quantile {limit}")
    return res


# 2 -------------------------------------------------------------------------


def toy_network(lam=1.0, lam_e=1.0) -> Network:
    edges = {(1, 2): lam, (2, 1): lam, (2, 3): lam, (3, 2): lam}
    return build("arbitrary", 3, lam_e=lam_e, edges=edges, source={1: lam, 3: lam})


@experiment(2, "toy_and_closed_forms", n_max=8, tol=1e-9)
def toy_and_closed_forms(p, seed, threads):
    res = Result(2, "toy_and_closed_forms")
    expected = (0.875, 1.25, 0.875)
    got = exact_subset_ages(toy_network())[:, 0]
    for i, (g, e) in enumerate(zip(got, expected)):
        res.row(3, "exact", "toy", i + 1, g, None, e, "hand")
    res.check("toy ages", np.allclose(got, expected, rtol=0, atol=1e-12), f"got {np.round(got, 12).tolist()}")
    worst = {"fully_connected": 0.0, "ring_bidirectional": 0.0}
    for kind, closed in (("fully_connected", fc_closed_form), ("ring_bidirectional", ring_closed_form)):
        for n in range(1, p["n_max"] + 1):
            v = exact_subset_ages(build(kind, n))[:, 0]
            c = closed(n)[0]
            res.row(n, kind, "closed_vs_exact", 1, v[0], None, c, "closed_form")
            worst[kind] = max(worst[kind], float(np.abs(v - c).max()))
        res.check(f"{kind} closed form = exact for n <= {p['n_max']}", worst[kind] <= p["tol"],
                  f"max abs diff {worst[kind]:.2e}")
    return res


# 3 -------------------------------------------------------------------------


@experiment(3, "fc_scaling", quick=dict(n_bound_max=200, ns=(16, 32), horizons=(200.0, 200.0), replications=2),
            n_bound_max=10000, ns=(64, 256, 1024), horizons=(2000.0, 1000.0, 300.0), replications=4,
            rel_tol=0.10, ratio_lo=0.85, ratio_hi=1.0)
def fc_scaling(p, seed, threads):
    res = Result(3, "fc_scaling")
    N = p["n_bound_max"]
    v1 = fc_single_node_ages(N)
    bad = []
    for n in range(2, N + 1):
        lo, hi = fc_bounds(n)
        if not (lo * (1 - 1e-12) <= v1[n - 1] <= hi * (1 + 1e-12)):
            bad.append(n)
    for n in sorted({2, 10, 100, 1000, N} & set(range(2, N + 1))):
        lo, hi = fc_bounds(n)
        res.row(n, "closed_form", "lower_bound", 1, v1[n - 1], None, lo, "fc_lower")
        res.row(n, "closed_form", "upper_bound", 1, v1[n - 1], None, hi, "fc_upper")
    res.check(f"v_1 within the two-sided bounds for n in 2..{N}", not bad, f"{len(bad)} violations {bad[:5]}")
    ratio = v1[N - 1] / harmonic(N)
    res.check(f"v_1 / H_n at n={N}", p["ratio_lo"] <= ratio <= p["ratio_hi"],
              f"{ratio:.5f} in [{p['ratio_lo']}, {p['ratio_hi']}]")
    for pt, (n, T) in enumerate(zip(p["ns"], p["horizons"])):
        m = _reps(build("fully_connected", n), None, T, seed, 3, pt, p["replications"], threads)
        avg, se = m.network_average()
        c = fc_closed_form(n)[0]
        res.row(n, "baseline_version", f"T={T:g}", "avg", avg, se, c, "closed_form")
        res.check(f"simulated n={n} within {p['rel_tol']:.0%}", _within(avg, c, p["rel_tol"]),
                  f"v_hat {_fmt(avg)} +- {_fmt(se, 2)} vs {_fmt(c)}")
    return res


# 4 -------------------------------------------------------------------------


@experiment(4, "ring_scaling", quick=dict(ns=(16, 32, 64), horizon=300.0, replications=2, ratio_n=64),
            ns=(64, 128, 256, 512, 1024, 2048), horizon=2000.0, replications=4, ratio_n=1024, ratio_lo=0.9,
            ratio_hi=1.1, slope_lo=0.42, slope_hi=0.58)
def ring_scaling(p, seed, threads):
    res = Result(4, "ring_scaling")
    pts = []
    for pt, n in enumerate(p["ns"]):
        m = _reps(build("ring_bidirectional", n), None, p["horizon"], seed, 4, pt, p["replications"], threads)
        avg, se = m.network_average()
        pts.append((n, avg))
        res.row(n, "baseline_version", f"T={p['horizon']:g}", "avg", avg, se, ring_closed_form(n)[0], "closed_form")
        res.row(n, "baseline_version", f"T={p['horizon']:g}", "asymptote", avg, se, ring_asymptote(n), "asymptote")
        if n == p["ratio_n"]:
            r = avg / ring_asymptote(n)
            res.check(f"v_hat / sqrt(pi n / 2) at n={n}", p["ratio_lo"] <= r <= p["ratio_hi"],
                      f"{r:.4f} in [{p['ratio_lo']}, {p['ratio_hi']}]")
    _slope_check(res, "log-log slope", pts, p["slope_lo"], p["slope_hi"])
    return res


# 5 -------------------------------------------------------------------------


@experiment(5, "grid_scaling", quick=dict(ns=(16, 64, 256), horizon=200.0, replications=2),
            ns=(64, 256, 1024, 4096), horizon=1000.0, replications=4, slope_lo=0.22, slope_hi=0.42)
def grid_scaling(p, seed, threads):
    res = Result(5, "grid_scaling")
    pts = []
    for pt, n in enumerate(p["ns"]):
        m = _reps(build("grid", n), None, p["horizon"], seed, 5, pt, p["replications"], threads)
        avg, se = m.network_average()
        u1 = grid_upper_bound(n)
        worst = int(np.argmax(m.version_age))
        pts.append((n, avg))
        res.row(n, "baseline_version", f"T={p['horizon']:g}", "avg", avg, se, u1, "upper_bound")
        res.row(n, "baseline_version", f"T={p['horizon']:g}", 1, m.version_age[0], m.version_se[0], u1,
                "upper_bound")
        res.row(n, "baseline_version", f"T={p['horizon']:g}", worst + 1, m.version_age[worst], m.version_se[worst],
                u1, "upper_bound")
        res.check(f"bound u_1 >= max_i v_hat_i at n={n}", u1 >= m.version_age.max(),
                  f"u_1 {_fmt(u1)} vs max v_hat {_fmt(m.version_age.max())} (node {worst + 1})")
    _slope_check(res, "log-log slope of the node average", pts, p["slope_lo"], p["slope_hi"])
    return res


# 6 -------------------------------------------------------------------------


@experiment(6, "generalized_ring", quick=dict(ns=(32, 64, 128), horizon=300.0, replications=2),
            ns=(64, 128, 256, 512, 1024, 2048), f_const=2, horizon=2000.0, replications=4, const_lo=0.42,
            const_hi=0.58, cube_lo=0.22, cube_hi=0.45)
def generalized_ring(p, seed, threads):
    res = Result(6, "generalized_ring")
    families = (("f_const", lambda n: p["f_const"], p["const_lo"], p["const_hi"]),
                ("f_cuberoot", lambda n: max(1, round(n ** (1 / 3))), p["cube_lo"], p["cube_hi"]))
    for fi, (label, fof, lo, hi) in enumerate(families):
        pts = []
        for pt, n in enumerate(p["ns"]):
            f = int(fof(n))
            m = _reps(build("generalized_ring", n, f=f), None, p["horizon"], seed, 6, 100 * fi + pt,
                      p["replications"], threads)
            avg, se = m.network_average()
            u1 = upper_bound_recursion(generalized_ring_profile(n, f))[0]
            pts.append((n, avg))
            res.row(n, "baseline_version", f"{label} f={f}", "avg", avg, se, u1, "upper_bound")
        _slope_check(res, f"{label} slope", pts, lo, hi)
    return res


# 7 -------------------------------------------------------------------------


@experiment(7, "age_aware_schemes",
            quick=dict(ns=(10, 20), check_n=20, horizon=200.0, replications=2, fd_n=30, fd_horizon=100.0),
            ns=(25, 50, 100, 200), check_n=200, horizon=2000.0, replications=4, fd_n=500, fd_horizon=500.0,
            fd_replications=2, rel_tol=0.10)
def age_aware_schemes(p, seed, threads):
    res = Result(7, "age_aware_schemes")
    tol = p["rel_tol"]
    asu, semi = [], []
    for pt, n in enumerate(p["ns"]):
        net = build("fully_connected", n)
        m = _reps(net, ProtocolSpec("asuman"), p["horizon"], seed, 7, pt, p["replications"], threads)
        avg, se = m.network_average()
        res.row(n, "asuman", "per_node", "avg", avg, se, scheme_limits("asuman", n), "finite_n")
        res.row(n, "asuman", "minset", "minset", m.minset_age, m.minset_se, scheme_limits("minage_set", n), "limit")
        asu.append((n, avg, m.minset_age))
        m = _reps(net, ProtocolSpec("semi_distributed"), p["horizon"], seed, 7, 100 + pt, p["replications"], threads)
        avg, se = m.network_average()
        res.row(n, "semi_distributed", "per_node", "avg", avg, se, scheme_limits("semi_distributed", n), "finite_n")
        semi.append((n, avg))
    by_n = {n: (a, ms) for n, a, ms in asu}
    if p["check_n"] in by_n:
        a, ms = by_n[p["check_n"]]
        f = scheme_limits("asuman", p["check_n"])
        res.check(f"asuman n={p['check_n']} within {tol:.0%} of the finite-n value", _within(a, f, tol),
                  f"{_fmt(a)} vs {_fmt(f)}")
        res.check(f"min-age set n={p['check_n']} within {tol:.0%} of 2", _within(ms, 2.0, tol), f"{_fmt(ms)}")
    lim = scheme_limits("asuman")
    first, last = asu[0][1], asu[-1][1]
    res.check("asuman sweep approaches 3", abs(last - lim) <= abs(first - lim) and _within(last, lim, tol),
              f"n={asu[0][0]}: {_fmt(first)}, n={asu[-1][0]}: {_fmt(last)}, limit {lim:g}")
    lim = scheme_limits("semi_distributed")
    first, last = semi[0][1], semi[-1][1]
    res.check("semi-distributed sweep approaches 2", abs(last - lim) <= abs(first - lim) and _within(last, lim, tol),
              f"n={semi[0][0]}: {_fmt(first)}, n={semi[-1][0]}: {_fmt(last)}, limit {lim:g}")
    n = p["fd_n"]
    m = _reps(build("fully_connected", n), ProtocolSpec("fully_distributed"), p["fd_horizon"], seed, 7, 200,
              p["fd_replications"], threads)
    avg, se = m.network_average()
    lim = scheme_limits("fully_distributed")
    res.row(n, "fully_distributed", "per_node", "avg", avg, se, lim, "limit")
    res.check(f"fully distributed n={n} within {tol:.0%} of 1+e", _within(avg, lim, tol),
              f"{_fmt(avg)} vs {_fmt(lim)}")
    return res


# 8 -------------------------------------------------------------------------


@experiment(8, "moments", quick=dict(horizon=2000.0, replications=2),
            cases=(1.0, 1.0, 1.0, 2.0), horizon=2e4, replications=8, rel_tol=0.10, ratio_lo=0.5, ratio_hi=2.0)
def moments(p, seed, threads):
    res = Result(8, "moments")
    cases = list(zip(p["cases"][0::2], p["cases"][1::2]))
    for ci, (l01, l12) in enumerate(cases):
        net = build("arbitrary", 2, edges={(1, 2): l12}, source={1: l01})
        ex = exact_subset_ages(net, "aoi", max_moment=2)
        var = ex[:, 1] - ex[:, 0] ** 2
        target = np.array([1 / l01**2, 1 / l01**2 + 1 / l12**2])
        tag = f"l01={l01:g},l12={l12:g}"
        res.check(f"analytic variances {tag}", np.allclose(var, target, rtol=1e-12, atol=0),
                  f"{var.tolist()} vs {target.tolist()}")
        m = _reps(net, ProtocolSpec("baseline_aoi"), p["horizon"], seed, 8, ci, p["replications"], threads)
        m2, m2se = m.aoi_moments[:, 1], m.aoi_moments_se[:, 1]
        sim_var = m2 - m.aoi**2
        ratio = np.sqrt(np.maximum(sim_var, 0)) / m.aoi
        for i in range(2):
            res.row(2, "baseline_aoi", f"{tag}:mean", i + 1, m.aoi[i], m.aoi_se[i], ex[i, 0], "exact")
            res.row(2, "baseline_aoi", f"{tag}:m2", i + 1, m2[i], m2se[i], ex[i, 1], "exact")
            res.row(2, "baseline_aoi", f"{tag}:var", i + 1, sim_var[i], None, var[i], "exact")
            res.row(2, "baseline_aoi", f"{tag}:std_over_mean", i + 1, ratio[i], None,
                    math.sqrt(var[i]) / ex[i, 0], "exact")
        ok = all(_within(m2[i], ex[i, 1], p["rel_tol"]) for i in range(2))
        res.check(f"simulated second moments {tag} within {p['rel_tol']:.0%}", ok,
                  f"{np.round(m2, 4).tolist()} vs {np.round(ex[:, 1], 4).tolist()}")
        res.check(f"std/mean {tag} in [{p['ratio_lo']}, {p['ratio_hi']}]",
                  bool(np.all((ratio >= p["ratio_lo"]) & (ratio <= p["ratio_hi"]))), f"{np.round(ratio, 4).tolist()}")
    return res


# 9 -------------------------------------------------------------------------


@experiment(9, "jamming",
            quick=dict(n=64, jammers=4, horizon=500.0, replications=3, ns=(64, 128, 256), sweep_horizon=300.0,
                       sweep_replications=2),
            n=512, jammers=8, horizon=5000.0, replications=8, ns=(64, 128, 256, 512, 1024, 2048),
            sweep_horizon=2000.0, sweep_replications=4, sigmas=3.0, slope_lo=0.42, slope_hi=0.58)
def jamming(p, seed, threads):
    res = Result(9, "jamming")
    n, k, s = p["n"], p["jammers"], p["sigmas"]
    ring = build("ring_bidirectional", n)
    avgs = {}
    for pi, placement in enumerate(("adjacent", "equidistant")):
        net = apply_jammers(ring, JammerPlan(k, placement))
        m = _reps(net, None, p["horizon"], seed, 9, pi, p["replications"], threads)
        avgs[placement] = m.network_average()
        res.row(n, "baseline_version", f"{placement} jammers={k}", "avg", *avgs[placement], None, "")
        if placement == "equidistant":
            _line_profile(res, net, m, s)
    (a, sa), (e, se) = avgs["adjacent"], avgs["equidistant"]
    margin = s * _diff_se(sa, se)
    res.check("adjacent placement at least as harmful", a - e >= margin,
              f"adjacent {_fmt(a)} - equidistant {_fmt(e)} = {_fmt(a - e)} vs {s:g} SE {_fmt(margin)}")
    pts = []
    for pt, nn in enumerate(p["ns"]):
        kk = max(1, round(nn**0.25))
        net = apply_jammers(build("ring_bidirectional", nn), JammerPlan(kk, "equidistant"))
        m = _reps(net, None, p["sweep_horizon"], seed, 9, 100 + pt, p["sweep_replications"], threads)
        avg, sse = m.network_average()
        pts.append((nn, avg))
        res.row(nn, "baseline_version", f"equidistant jammers={kk}", "avg", avg, sse, ring_asymptote(nn), "asymptote")
    _slope_check(res, "slope with n^0.25 jammers", pts, p["slope_lo"], p["slope_hi"])
    return res


def _line_profile(res: Result, net: Network, m, sigmas: float) -> None:
    """Fold each line component by distance to its nearest end and compare end vs center."""
    orders = [line_order(net, c) for c in components(net) if len(c) > 2]
    L = min(len(o) for o in orders)
    half = (L + 1) // 2
    per_run = []
    for r in m.runs:
        prof = np.zeros(half)
        for o in orders:
            ages = r.version_age[np.asarray(o) - 1]
            ln = len(ages)
            for d in range(half):
                prof[d] += 0.5 * (ages[d] + ages[ln - 1 - d])
        per_run.append(prof / len(orders))
    per_run = np.array(per_run)
    mean = per_run.mean(axis=0)
    se = per_run.std(axis=0, ddof=1) / math.sqrt(len(per_run))
    for d in range(half):
        res.row(net.n, "baseline_version", "line_profile", f"dist{d:03d}", mean[d], se[d], None, "")
    drop = per_run[:, 0] - per_run[:, -1]
    dse = drop.std(ddof=1) / math.sqrt(len(drop))
    res.check("line profile falls from the ends to the center", drop.mean() >= sigmas * dse and drop.mean() > 0,
              f"end {_fmt(mean[0])} vs center {_fmt(mean[-1])}, drop {_fmt(drop.mean())} +- {_fmt(dse, 2)}")


# 10 ------------------------------------------------------------------------


@experiment(10, "timestomp",
            quick=dict(fc_ns=(16, 64), horizon=2000.0, replications=2, honest_horizon=500.0, ring_ns=(32, 64, 128),
                       ring_horizon=500.0, ring_replications=2),
            fc_ns=(64, 128, 256), horizon=4e4, replications=8, honest_horizon=2000.0, honest_replications=4,
            ring_ns=(64, 128, 256, 512, 1024, 2048), ring_horizon=4000.0, ring_replications=4, ratio_lo=3.2,
            ratio_hi=4.8, honest_max=1.6, slope_lo=0.42, slope_hi=0.58, adversary=1)
def timestomp(p, seed, threads):
    res = Result(10, "timestomp")
    adv = (int(p["adversary"]),)
    proto = ProtocolSpec("timestomp", adversaries=adv, policy=TimestompPolicy.aggressive())
    small, big = p["fc_ns"][0], p["fc_ns"][-1]
    ages, honest = {}, {}
    for pt, n in enumerate(p["fc_ns"]):
        net = build("fully_connected", n)
        m = _reps(net, proto, p["horizon"], seed, 10, pt, p["replications"], threads)
        ages[n] = m.network_average("aoi")
        res.row(n, "timestomp", f"adversary={adv[0]}", "avg", *ages[n], None, "")
        if n in (small, big):
            h = _reps(net, ProtocolSpec("baseline_aoi"), p["honest_horizon"], seed, 10, 50 + pt,
                      p["honest_replications"], threads)
            honest[n] = h.network_average("aoi")
            res.row(n, "baseline_aoi", "honest", "avg", *honest[n], None, "")
    r = ages[big][0] / ages[small][0]
    res.check(f"timestomped age ratio n={big}/n={small}", p["ratio_lo"] <= r <= p["ratio_hi"],
              f"{r:.3f} in [{p['ratio_lo']}, {p['ratio_hi']}]")
    r = honest[big][0] / honest[small][0]
    res.check(f"honest age ratio n={big}/n={small}", r < p["honest_max"], f"{r:.3f} < {p['honest_max']}")
    pts = []
    for pt, n in enumerate(p["ring_ns"]):
        net = build("ring_unidirectional", n)
        m = _reps(net, proto, p["ring_horizon"], seed, 10, 100 + pt, p["ring_replications"], threads)
        far = [i for i in range(1, n + 1) if (i - adv[0]) % n > n / 2]
        avg, se = m.subset_average(far, "aoi")
        pts.append((n, avg))
        res.row(n, "timestomp", "uniring_far_nodes", "far_avg", avg, se, None, "")
    _slope_check(res, "unidirectional ring far-node slope", pts, p["slope_lo"], p["slope_hi"])
    return res


# 11 ------------------------------------------------------------------------


@experiment(11, "mutation_and_ggap", quick=dict(n=16, horizon=300.0, replications=2),
            n=64, p_mut=0.2, rates=(0.1, 1.0, 10.0), horizon=2000.0, replications=4, gaps=(0, 1, 2, 5),
            unreliable_rate=1.0, sigmas=3.0)
def mutation_and_ggap(p, seed, threads):
    res = Result(11, "mutation_and_ggap")
    n, s = p["n"], p["sigmas"]
    F = {}
    for pt, lam in enumerate(p["rates"]):
        net = build("fully_connected", n, lam=lam)
        m = _reps(net, ProtocolSpec("mutation", p_mut=p["p_mut"]), p["horizon"], seed, 11, pt, p["replications"],
                  threads)
        F[lam] = (m.fraction, m.fraction_se)
        res.row(n, "mutation", f"lam={lam:g}", "fraction_true", m.fraction, m.fraction_se, None, "")
    lo, mid, hi = p["rates"]
    for a in (lo, hi):
        d = F[a][0] - F[mid][0]
        marg = s * _diff_se(F[a][1], F[mid][1])
        res.check(f"F(lam={a:g}) > F(lam={mid:g})", d >= marg and d > 0, f"difference {_fmt(d)} vs {_fmt(marg)}")
    frac, ver = [], []
    for pt, g in enumerate(p["gaps"]):
        proto = ProtocolSpec("g_gap", gap=float(g), unreliable_rate=p["unreliable_rate"])
        m = _reps(build("fully_connected", n), proto, p["horizon"], seed, 11, 100 + pt, p["replications"], threads)
        frac.append((m.fraction, m.fraction_se))
        ver.append(m.network_average())
        res.row(n, "g_gap", f"G={g}", "fraction_unreliable", m.fraction, m.fraction_se, None, "")
        res.row(n, "g_gap", f"G={g}", "avg", *ver[-1], None, "")
    bad_f = [i for i in range(1, len(frac)) if frac[i][0] - frac[i - 1][0] > s * _diff_se(frac[i][1], frac[i - 1][1])]
    bad_v = [i for i in range(1, len(ver)) if ver[i - 1][0] - ver[i][0] > s * _diff_se(ver[i][1], ver[i - 1][1])]
    res.check("unreliable fraction non-increasing in G", not bad_f,
              f"{[round(f, 4) for f, _ in frac]} over G={list(p['gaps'])}")
    res.check("version age non-decreasing in G", not bad_v, f"{[round(v, 4) for v, _ in ver]} over G={list(p['gaps'])}")
    return res


# 12 ------------------------------------------------------------------------


@experiment(12, "renewal", quick=dict(horizon=5000.0, replications=2),
            hops=("gamma:2,0.5", "deterministic:1.5", "uniform:0,2"), horizon=1e5, replications=8, rel_tol=0.05,
            sigmas=3.0)
def renewal(p, seed, threads):
    res = Result(12, "renewal")
    dists = [parse_distribution(h) for h in p["hops"]]
    lim = renewal_line_limit(dists, "aoi")
    est = {}
    for oi, order in enumerate((tuple(range(len(dists))), tuple(reversed(range(len(dists)))))):
        hop = [dists[i] for i in order]
        m = run_renewal_replications(hop, metric="aoi", horizon=p["horizon"], master_seed=seed,
                                     replications=p["replications"], key=(12, oi))
        est[order] = (float(m.aoi[-1]), float(m.aoi_se[-1]))
        res.row(len(dists), "renewal_line", "order=" + "-".join(p["hops"][i] for i in order), len(dists),
                *est[order], lim, "additive_limit")
    (a, sa), (b, sb) = est.values()
    res.check(f"last-hop AoI within {p['rel_tol']:.0%} of the additive limit", _within(a, lim, p["rel_tol"]),
              f"{_fmt(a)} vs {_fmt(lim)}")
    marg = p["sigmas"] * _diff_se(sa, sb)
    res.check("reversing the hop order", abs(a - b) < marg, f"|{_fmt(a)} - {_fmt(b)}| = {_fmt(abs(a - b))} < {_fmt(marg)}")
    return res


# 13 ------------------------------------------------------------------------


def mdp_sweep(seed: int, count: int = 10, x_max: int = 8):
    """Deterministic list of MDP instances for the threshold check."""
    rng = np.random.default_rng(split_seeds(seed, 1, 13, 0)[0])
    out = []
    for k in range(count):
        n = 1 + k % 3
        b_max = 1 + (k // 3) % 3
        q = rng.dirichlet(np.ones(n)) * rng.uniform(0.5, 1.0)
        out.append(dict(n=n, b_max=b_max, delta=round(float(rng.uniform(0.1, 0.9)), 3),
                        p=round(float(rng.uniform(0.1, 0.9)), 3), q=tuple(round(float(v), 3) for v in q),
                        x_max=x_max))
    return out


@experiment(13, "mdp_threshold", quick=dict(instances=3, x_max=5),
            instances=10, x_max=8, tol=1e-9, oracle_tol=1e-6, truncation_tol=1e-3, brute_force_work=500_000)
def mdp_threshold(p, seed, threads):
    res = Result(13, "mdp_threshold")
    tiny = dict(n=1, b_max=1, delta=1.0, p=0.5, q=(1.0,), x_max=6)
    pol = mdpmod.solve(mdpmod.build(**tiny), tol=p["tol"])
    bf, thr = mdpmod.brute_force_thresholds(pol.mdp)
    res.row(1, "mdp", "tiny", "gain", pol.gain, None, bf, "brute_force")
    res.check("tiny instance gain matches brute force", abs(pol.gain - bf) <= p["oracle_tol"],
              f"{pol.gain:.3e} vs {bf:.3e} (thresholds {thr})")
    big = mdpmod.solve(mdpmod.build(**{**tiny, "x_max": 2 * tiny["x_max"]}), tol=p["tol"])
    res.row(1, "mdp", "tiny_xmax_doubled", "gain", big.gain, None, pol.gain, "x_max=6")
    res.check("gain insensitive to doubling x_max", abs(big.gain - pol.gain) < p["truncation_tol"],
              f"|{big.gain:.3e} - {pol.gain:.3e}|")
    failed, oracle_bad = [], []
    for k, inst in enumerate(mdp_sweep(seed, p["instances"], p["x_max"])):
        m = mdpmod.build(**inst)
        pol = mdpmod.solve(m, tol=p["tol"])
        rep = mdpmod.verify_threshold(pol)
        tag = f"inst{k:02d} n={inst['n']} b={inst['b_max']} d={inst['delta']} p={inst['p']} q={inst['q']}"
        ev = mdpmod.evaluate_policy(m, pol.actions)
        analytic, kind = ev, "policy_evaluation"
        if (m.x_max + 2) ** (m.b_max + 1) * m.n_states <= p["brute_force_work"]:
            analytic, _ = mdpmod.brute_force_thresholds(m)
            kind = "brute_force"
            if abs(analytic - pol.gain) > p["oracle_tol"]:
                oracle_bad.append(k)
        if abs(ev - pol.gain) > 10 * max(p["tol"], 1e-9) * max(1.0, m.x_max) or not 0 <= pol.gain <= m.x_max:
            oracle_bad.append(k)
        res.row(inst["n"], "mdp", tag, "gain", pol.gain, None, analytic, kind)
        for b, t in rep.thresholds.items():
            res.row(inst["n"], "mdp", tag, f"threshold_b{b}", None if t is None else float(t), None, None,
                    "trivial" if b in rep.trivial_slices else "")
        if not rep.ok:
            failed.append(k)
    res.check(f"threshold structure on {p['instances']} instances", not failed, f"failing instances {failed}")
    res.check("gains agree with policy evaluation and brute force", not oracle_bad, f"mismatches {oracle_bad}")
    return res


# 14 ------------------------------------------------------------------------


def bo_network() -> Network:
    """Four-node line whose last link is slow, so node 4 needs direct source rate."""
    edges = {(1, 2): 1.0, (2, 1): 1.0, (2, 3): 1.0, (3, 2): 1.0, (3, 4): 0.1, (4, 3): 1.0}
    return build("arbitrary", 4, edges=edges, source={i: 0.25 for i in range(1, 5)})


@experiment(14, "bayesopt", quick=dict(steps=8, horizon=500.0, replications=3),
            steps=50, horizon=1e4, replications=16, budget=1.0, jitter=1e-8, sigmas=3.0, mean_tol=1e-3)
def bayesopt(p, seed, threads):
    res = Result(14, "bayesopt")
    net = bo_network()
    lam = p["budget"]
    ev = WorstNodeAge(net, horizon=p["horizon"], seed=_subseed(seed, 14, 0))
    out = optimize(ev, net.n, steps=p["steps"], lam=lam, seed=_subseed(seed, 14, 1), jitter=p["jitter"])
    for m, (x, a, inc) in enumerate(zip(out.xs, out.values, out.incumbent), start=1):
        res.row(net.n, "bayesopt", f"m={m:03d}", "a_hat", a, None, inc, "incumbent")
    judge = WorstNodeAge(net, horizon=p["horizon"], seed=_subseed(seed, 14, 2), replications=p["replications"])
    uni = np.full(net.n, lam / net.n)
    a_u = judge.ages(uni, 1)
    a_b = judge.ages(out.best_x, 2)
    mu, su = a_u.mean(), a_u.std(ddof=1) / math.sqrt(len(a_u))
    mb, sb = a_b.mean(), a_b.std(ddof=1) / math.sqrt(len(a_b))
    res.row(net.n, "bayesopt", "uniform", "worst", mu, su, None, "")
    res.row(net.n, "bayesopt", "incumbent " + ",".join(repr(round(float(v), 6)) for v in out.best_x), "worst", mb, sb,
            None, "")
    marg = p["sigmas"] * _diff_se(su, sb)
    res.check("incumbent beats uniform allocation", mu - mb >= marg and mu > mb,
              f"uniform {_fmt(mu)} - incumbent {_fmt(mb)} = {_fmt(mu - mb)} vs {_fmt(marg)}")
    worst_err = max((c[1] for c in out.fit_checks), default=0.0)
    worst_var = max((c[2] for c in out.fit_checks), default=0.0)
    res.check("posterior mean interpolates on every fit", worst_err <= p["mean_tol"],
              f"max |mu - f| / sigma {worst_err:.2e} over {len(out.fit_checks)} fits")
    res.check("posterior variance <= jitter at training points", worst_var <= p["jitter"] * (1 + 1e-6),
              f"max var / sigma^2 {worst_var:.3e}")
    return res


# 15 ------------------------------------------------------------------------


@experiment(15, "determinism", quick=dict(only=(2, 8, 12)), only=())
def determinism(p, seed, threads):
    """Run the quick configuration of every experiment twice and compare CSV bytes."""
    res = Result(15, "determinism")
    ids = set(p["only"]) if p["only"] else None
    for e in sorted(REGISTRY.values(), key=lambda e: e.exp_id):
        if e.exp_id == 15 or (ids is not None and e.exp_id not in ids):
            continue
        a = e.run(seed=seed, threads=threads, quick=True).csv_text().encode()
        b = e.run(seed=seed, threads=threads, quick=True).csv_text().encode()
        da, db = hashlib.sha256(a).hexdigest(), hashlib.sha256(b).hexdigest()
        res.row(e.exp_id, e.name, "sha256", da[:16], float(len(a)), None, None, "")
        res.check(f"{e.name} byte-identical", a == b, f"{len(a)} bytes, sha256 {da[:16]} vs {db[:16]}")
    return res
