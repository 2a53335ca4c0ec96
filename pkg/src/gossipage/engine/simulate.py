"""Monte Carlo runs and replication aggregation."""
from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..protocols import ProtocolSpec
from ..topology import Network, validate
from . import kernels, schemes
from .clocks import KIND_NAMES, SELF_UPDATE, SOURCE, GOSSIP, UNRELIABLE_SOURCE
from .events import PoissonStream, channel_table

log = logging.getLogger(__name__)

DEFAULT_MOMENTS = 2


@dataclass
class Metrics:
    """Time averages over ``(warmup, horizon]``.

    ``version_moments[:, m-1]`` and ``aoi_moments[:, m-1]`` hold the m-th
    moments.  ``fraction`` is the time-averaged fraction of unreliable nodes
    (G-gap) or of truthful nodes (mutation).  ``*_se`` fields are standard
    errors across replications (``None`` for a single run).
    """

    version_age: np.ndarray
    aoi: np.ndarray
    version_moments: np.ndarray
    aoi_moments: np.ndarray
    horizon: float
    warmup: float
    fraction: float | None = None
    minset_age: float | None = None
    event_counts: dict[str, int] = field(default_factory=dict)
    replications: int = 1
    version_se: np.ndarray | None = None
    aoi_se: np.ndarray | None = None
    fraction_se: float | None = None
    minset_se: float | None = None
    version_moments_se: np.ndarray | None = None
    aoi_moments_se: np.ndarray | None = None
    warnings: list[str] = field(default_factory=list)
    runs: list["Metrics"] = field(default_factory=list, repr=False)

    def age(self, metric: str = "version") -> np.ndarray:
        return self.version_age if metric == "version" else self.aoi

    def se(self, metric: str = "version") -> np.ndarray | None:
        return self.version_se if metric == "version" else self.aoi_se

    def moments(self, metric: str = "version") -> np.ndarray:
        return self.version_moments if metric == "version" else self.aoi_moments

    def network_average(self, metric: str = "version") -> tuple[float, float]:
        """Mean of the node-averaged age and its SE across replications."""
        if self.runs:
            vals = np.array([r.age(metric).mean() for r in self.runs])
            return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(len(vals)))
        return float(self.age(metric).mean()), float("nan")

    def subset_average(self, nodes, metric: str = "version") -> tuple[float, float]:
        """Mean age over the 1-based ``nodes`` and its SE across replications."""
        idx = np.asarray(list(nodes)) - 1
        if self.runs:
            vals = np.array([r.age(metric)[idx].mean() for r in self.runs])
            return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(len(vals)))
        return float(self.age(metric)[idx].mean()), float("nan")


def as_seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(int(seed))


def split_seeds(master: int, count: int, *key: int) -> list[np.random.SeedSequence]:
    """Replication seeds: ``SeedSequence(master, spawn_key=key + (r,))`` for r = 0..count-1.

    ``key`` carries the experiment and sweep-point counters so every
    (experiment, point, replication) triple gets an independent stream.
    """
    return [np.random.SeedSequence(int(master), spawn_key=tuple(int(k) for k in key) + (r,)) for r in range(count)]


def _check_run(net: Network, horizon: float, warmup: float) -> list[str]:
    if not horizon > warmup >= 0:
        raise ValueError(f"need horizon > warmup >= 0, got horizon={horizon}, warmup={warmup}")
    report = validate(net)
    return list(report.messages) if not report.ok else []


def run(net: Network, proto: ProtocolSpec | None = None, horizon: float = 1000.0, warmup: float | None = None,
        seed=0, moments: int = DEFAULT_MOMENTS, trace: str | Path | None = None) -> Metrics:
    """Simulate one replication; deterministic for a fixed seed."""
    proto = proto or ProtocolSpec()
    warmup = 0.1 * horizon if warmup is None else float(warmup)
    warnings = _check_run(net, horizon, warmup)
    for w in warnings:
        log.warning("%s; reporting measured (growing) ages", w)
    ss = as_seed_sequence(seed)
    rng = np.random.default_rng(ss)
    if proto.variant in schemes.SCHEMES:
        m = _run_scheme(net, proto, horizon, warmup, rng, moments)
    else:
        m = _run_static(net, proto, horizon, warmup, rng, moments, trace)
    m.warnings = warnings
    return m


def _metrics_from(state, horizon, warmup, fraction, minset, counts) -> Metrics:
    span = horizon - warmup
    mv = state.acc_version / span
    ma = state.acc_aoi / span
    return Metrics(mv[:, 0].copy(), ma[:, 0].copy(), mv, ma, horizon, warmup, fraction=fraction,
                   minset_age=minset, event_counts=counts)


def _run_static(net, proto, horizon, warmup, rng, moments, trace) -> Metrics:
    mode = kernels.MODES[proto.variant]
    ch = channel_table(net, proto)
    state = kernels.SimState(net.n, len(ch), moments, mode)
    adversary = np.zeros(net.n, dtype=np.bool_)
    for a in proto.adversaries:
        adversary[a - 1] = True
    pol = proto.policy
    policy = np.array([pol.raise_out, pol.lower_out, pol.raise_in, pol.lower_in])
    gap = float(min(proto.gap, 1e18))
    writer = None
    fh = None
    if trace is not None:
        fh = open(trace, "w", newline="")
        writer = csv.writer(fh)
        writer.writerow(["time", "kind", "i", "j", "X_j_before", "X_j_after"])
    try:
        for chunk in PoissonStream(ch, rng).chunks(horizon):
            tr = np.zeros((len(chunk.times) if writer else 0, 4), dtype=np.int64)
            kernels.advance(mode, chunk.times, chunk.channel, chunk.uniforms, ch.kind, ch.src, ch.dst, warmup,
                            gap, proto.p_mut, adversary, policy, state.X, state.gen, state.claim, state.flag,
                            state.last, state.acc_version, state.acc_aoi, state.glob, state.counts, tr)
            if writer:
                for k in range(len(chunk.times)):
                    kind = KIND_NAMES[int(ch.kind[chunk.channel[k]])]
                    i, j, xb, xa = (int(v) for v in tr[k])
                    if i == j == -1:
                        writer.writerow([repr(float(chunk.times[k])), kind, 0, 0, "", ""])
                    else:
                        writer.writerow([repr(float(chunk.times[k])), kind, i + 1, j + 1, xb, xa])
    finally:
        if fh:
            fh.close()
    kernels.finish(horizon, warmup, state.X, state.gen, state.last, state.acc_version, state.acc_aoi, state.glob)
    fraction = None
    if mode in (kernels.MODE_GGAP, kernels.MODE_MUTATION):
        fraction = state.glob[0] / (horizon - warmup) / net.n
    counts = {name: int(state.counts[ch.kind == k].sum()) for k, name in KIND_NAMES.items()}
    counts["per_channel"] = state.counts.copy()
    return _metrics_from(state, horizon, warmup, fraction, None, counts)


def _run_scheme(net, proto, horizon, warmup, rng, moments) -> Metrics:
    scheme = schemes.SCHEMES[proto.variant]
    gossip_total = sum(net.gossip_rates.values())
    capacity = proto.capacity if proto.capacity is not None else gossip_total
    lam = capacity / net.n
    duration = proto.duration if proto.duration is not None else 1.0 / lam
    src = net.source_vector()
    src_cum = np.cumsum(src)
    ptr, idx = schemes.neighbor_csr(net)
    state = kernels.SimState(net.n, 3, moments, kernels.MODE_VERSION)
    state.glob[:] = 0.0
    counts = np.zeros(3, dtype=np.int64)
    schemes.run_scheme(scheme, rng, float(horizon), float(warmup), float(net.self_update_rate), src_cum,
                       float(capacity), float(duration), ptr, idx, state.X, state.gen, state.last,
                       state.acc_version, state.acc_aoi, state.glob, counts)
    minset = state.glob[0] / (horizon - warmup) if scheme == schemes.ASUMAN else None
    names = [KIND_NAMES[SELF_UPDATE], KIND_NAMES[SOURCE], KIND_NAMES[GOSSIP]]
    return _metrics_from(state, horizon, warmup, None, minset, dict(zip(names, map(int, counts))))


def aggregate(runs: list[Metrics]) -> Metrics:
    """Mean across replications with SE = sample std / sqrt(R), folded in seed order."""
    r = len(runs)
    stack = lambda attr: np.stack([getattr(m, attr) for m in runs])

    def mean_se(attr):
        a = stack(attr)
        se = a.std(axis=0, ddof=1) / math.sqrt(r) if r > 1 else None
        return a.mean(axis=0), se

    va, va_se = mean_se("version_age")
    aa, aa_se = mean_se("aoi")
    vm, vm_se = mean_se("version_moments")
    am, am_se = mean_se("aoi_moments")
    frac = frac_se = None
    if runs[0].fraction is not None:
        f = np.array([m.fraction for m in runs])
        frac, frac_se = float(f.mean()), (float(f.std(ddof=1) / math.sqrt(r)) if r > 1 else None)
    ms = ms_se = None
    if runs[0].minset_age is not None:
        f = np.array([m.minset_age for m in runs])
        ms, ms_se = float(f.mean()), (float(f.std(ddof=1) / math.sqrt(r)) if r > 1 else None)
    counts: dict[str, int] = {}
    for m in runs:
        for k, v in m.event_counts.items():
            if k != "per_channel":
                counts[k] = counts.get(k, 0) + v
    warnings = sorted({w for m in runs for w in m.warnings})
    return Metrics(va, aa, vm, am, runs[0].horizon, runs[0].warmup, fraction=frac, minset_age=ms,
                   event_counts=counts, replications=r, version_se=va_se, aoi_se=aa_se, fraction_se=frac_se,
                   minset_se=ms_se, version_moments_se=vm_se, aoi_moments_se=am_se, warnings=warnings,
                   runs=list(runs))


def run_replications(net: Network, proto: ProtocolSpec | None = None, horizon: float = 1000.0,
                     warmup: float | None = None, seeds=None, master_seed: int = 0, replications: int = 8,
                     moments: int = DEFAULT_MOMENTS, threads: int = 1) -> Metrics:
    """Independent replications aggregated with standard errors.

    ``seeds`` may be an explicit list (ints or SeedSequences, duplicates are
    rejected); otherwise ``replications`` seeds are split from ``master_seed``.
    """
    if seeds is None:
        seeds = split_seeds(master_seed, replications)
    seeds = list(seeds)
    keys = [(s.entropy, tuple(s.spawn_key)) if isinstance(s, np.random.SeedSequence) else int(s) for s in seeds]
    if len(set(keys)) != len(keys):
        raise ValueError("replication seeds must be distinct")
    if len(seeds) < 2:
        raise ValueError("need at least 2 replications for a standard error")

    def one(s):
        return run(net, proto, horizon, warmup, s, moments)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            runs = list(pool.map(one, seeds))
    else:
        runs = [one(s) for s in seeds]
    return aggregate(runs)
