"""Line network 0 -> 1 -> ... -> n with renewal (non-Poisson) hop processes.

On a line every delivery carries a packet at least as fresh as the
receiver's, so node j's packet is node (j-1)'s packet at the last epoch of
hop j.  That makes the whole run vectorizable with ``searchsorted``.
"""
from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .clocks import Distribution
from .simulate import Metrics, aggregate, as_seed_sequence, split_seeds


def _check(dist: Distribution) -> None:
    if not (math.isfinite(dist.mean) and math.isfinite(dist.second_moment)):
        raise ValueError(f"{dist} has an infinite first or second moment")


def renewal_epochs(dist: Distribution, horizon: float, rng: np.random.Generator) -> np.ndarray:
    """Epochs of an ordinary renewal process on (0, horizon]."""
    out = []
    t = 0.0
    block = max(16, int(1.2 * horizon / dist.mean) + 16)
    while t <= horizon:
        steps = np.asarray(dist.sample(rng, block), dtype=float)
        e = t + np.cumsum(steps)
        out.append(e)
        t = float(e[-1])
    e = np.concatenate(out)
    return e[: np.searchsorted(e, horizon, side="right")]


def _step_moments(breaks: np.ndarray, values: np.ndarray, w: float, T: float, moments: int) -> np.ndarray:
    """Integrals over (w, T] of value**m for a right-continuous step function
    equal to ``values[k]`` on [breaks[k], breaks[k+1])."""
    right = np.append(breaks[1:], T)
    lo = np.clip(breaks, w, T)
    hi = np.clip(right, w, T)
    dt = hi - lo
    return np.array([np.sum(values.astype(float) ** m * dt) for m in range(1, moments + 1)])


def _aoi_moments(breaks: np.ndarray, gens: np.ndarray, w: float, T: float, moments: int) -> np.ndarray:
    right = np.append(breaks[1:], T)
    lo = np.clip(breaks, w, T)
    hi = np.clip(right, w, T)
    return np.array([np.sum(((hi - gens) ** (m + 1) - (lo - gens) ** (m + 1)) / (m + 1))
                     for m in range(1, moments + 1)])


def run_renewal_line(hop_dists: Sequence[Distribution], source_dist: Distribution | None = None,
                     metric: str = "aoi", horizon: float = 1e5, seed=0, warmup: float | None = None,
                     moments: int = 2) -> Metrics:
    """Simulate one replication; node j's estimate is the time average over (warmup, horizon].

    AoI is always reported.  Version age needs ``source_dist``: the source
    moves to a new version at each of its own renewal epochs.
    """
    if metric not in ("aoi", "version"):
        raise ValueError(f"unknown metric {metric!r}")
    if metric == "version" and source_dist is None:
        raise ValueError("version age needs a source update distribution")
    if not hop_dists:
        raise ValueError("need at least one hop")
    for d in list(hop_dists) + ([source_dist] if source_dist else []):
        _check(d)
    warmup = 0.1 * horizon if warmup is None else float(warmup)
    if not horizon > warmup >= 0:
        raise ValueError("need horizon > warmup >= 0")
    rng = np.random.default_rng(as_seed_sequence(seed))
    n = len(hop_dists)
    span = horizon - warmup

    src_epochs = renewal_epochs(source_dist, horizon, rng) if source_dist is not None else None
    # node 0 (the source) holds generation time t and version count N_0(t)
    prev_breaks = None
    aoi = np.zeros((n, moments))
    ver = np.zeros((n, moments))
    for j, dist in enumerate(hop_dists):
        e = renewal_epochs(dist, horizon, rng)
        if prev_breaks is None:
            gens = e.copy()
            versions = np.searchsorted(src_epochs, e, side="right") if src_epochs is not None else None
        else:
            k = np.searchsorted(prev_breaks, e, side="right") - 1
            gens = np.where(k >= 0, prev_gens[np.maximum(k, 0)], 0.0)
            if src_epochs is not None:
                versions = np.where(k >= 0, prev_versions[np.maximum(k, 0)], 0)
        breaks = np.concatenate(([0.0], e))
        gens = np.concatenate(([0.0], gens))
        aoi[j] = _aoi_moments(breaks, gens, warmup, horizon, moments) / span
        if src_epochs is not None:
            versions = np.concatenate(([0], versions))
            grid = np.union1d(breaks, src_epochs)
            held = versions[np.searchsorted(breaks, grid, side="right") - 1]
            age = np.searchsorted(src_epochs, grid, side="right") - held
            ver[j] = _step_moments(grid, age, warmup, horizon, moments) / span
            prev_versions = versions
        prev_breaks, prev_gens = breaks, gens
    return Metrics(ver[:, 0].copy(), aoi[:, 0].copy(), ver, aoi, horizon, warmup,
                   event_counts={"hops": n})


def run_renewal_replications(hop_dists, source_dist=None, metric="aoi", horizon=1e5, master_seed=0,
                             replications=8, warmup=None, moments=2, key=()) -> Metrics:
    seeds = split_seeds(master_seed, replications, *key)
    return aggregate([run_renewal_line(hop_dists, source_dist, metric, horizon, s, warmup, moments) for s in seeds])
