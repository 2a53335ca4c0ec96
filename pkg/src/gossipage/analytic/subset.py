"""Exact subset-age recursion for version age, AoI and their moments.

For a subset S of nodes, v_S is the limiting mean age of the freshest node in
S.  It depends only on supersets one element larger, so the table is filled
for masks in decreasing numeric order (S | bit(i) > S for every i outside S).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from math import comb
from pathlib import Path
from typing import Iterable

import numba
import numpy as np

from ..topology import Network

MAX_NODES = 20


class UnreachableError(ValueError):
    """Some node never hears from the source, so its age diverges."""


@numba.njit(cache=True)
def _needed_masks(n, G):
    """Subsets reached from singletons by repeatedly adding an updating neighbor."""
    size = 1 << n
    need = np.zeros(size, dtype=np.bool_)
    for j in range(n):
        need[1 << j] = True
    for S in range(1, size):
        if not need[S]:
            continue
        for i in range(n):
            if S & (1 << i):
                continue
            for j in range(n):
                if S & (1 << j) and G[i, j] > 0.0:
                    need[S | (1 << i)] = True
                    break
    return need


@numba.njit(cache=True)
def _fill(n, G, src, lam00, aoi, binom, need, table):
    """``table[S, m]`` holds the m-th moment; column 0 is 1."""
    size = 1 << n
    orders = table.shape[1]
    rates = np.zeros(n)
    for S in range(size - 1, 0, -1):
        if not need[S]:
            continue
        table[S, 0] = 1.0
        l0 = 0.0
        for j in range(n):
            if S & (1 << j):
                l0 += src[j]
        total = l0
        for i in range(n):
            r = 0.0
            if not S & (1 << i):
                for j in range(n):
                    if S & (1 << j):
                        r += G[i, j]
            rates[i] = r
            total += r
        for m in range(1, orders):
            if total <= 0.0:
                table[S, m] = np.inf
                continue
            if aoi:
                num = m * table[S, m - 1]
            else:
                num = 0.0
                for k in range(m):
                    num += binom[m, k] * table[S, k]
                num *= lam00
            for i in range(n):
                if rates[i] > 0.0:
                    num += rates[i] * table[S | (1 << i), m]
            table[S, m] = num / total


@dataclass
class SubsetAgeTable:
    """All subset ages of one network; ``values[mask, m]`` is the m-th moment."""

    n: int
    metric: str
    values: np.ndarray
    computed: np.ndarray

    @staticmethod
    def mask(nodes: Iterable[int]) -> int:
        m = 0
        for i in nodes:
            m |= 1 << (i - 1)
        return m

    def v(self, nodes: Iterable[int], moment: int = 1) -> float:
        S = self.mask(nodes)
        if not self.computed[S]:
            raise KeyError(f"subset {sorted(nodes)} was not computed (lazy table)")
        return float(self.values[S, moment])

    def node_values(self, moment: int = 1) -> np.ndarray:
        return np.array([self.values[1 << i, moment] for i in range(self.n)])

    def variances(self) -> np.ndarray:
        return self.node_values(2) - self.node_values(1) ** 2

    def to_csv(self, path: str | Path) -> None:
        orders = self.values.shape[1] - 1
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["subset_bitmask", "v"] + [f"moment{m}" for m in range(2, orders + 1)])
            for S in range(1, 1 << self.n):
                if self.computed[S]:
                    w.writerow([S] + [repr(float(x)) for x in self.values[S, 1:]])


def subset_age_table(net: Network, metric: str = "version", max_moment: int = 1,
                     lazy: bool = False) -> SubsetAgeTable:
    """Fill the subset table.  ``metric='aoi'`` runs the same recursion with
    unit self-update rate for the mean and the AoI moment numerator above."""
    if metric not in ("version", "aoi"):
        raise ValueError(f"unknown metric {metric!r}")
    if max_moment < 1:
        raise ValueError("max_moment must be >= 1")
    n = net.n
    if n > MAX_NODES:
        raise ValueError(f"exact table needs n <= {MAX_NODES}, got {n}")
    G = net.gossip_matrix()
    src = net.source_vector()
    lam00 = 1.0 if metric == "aoi" else float(net.self_update_rate)
    binom = np.array([[comb(m, k) for k in range(max_moment + 1)] for m in range(max_moment + 1)], dtype=float)
    need = _needed_masks(n, G) if lazy else np.ones(1 << n, dtype=np.bool_)
    need[0] = False
    table = np.zeros((1 << n, max_moment + 1))
    _fill(n, G, src, lam00, metric == "aoi", binom, need, table)
    out = SubsetAgeTable(n, metric, table, need)
    bad = [i + 1 for i in range(n) if not np.isfinite(table[1 << i, 1])]
    if bad:
        raise UnreachableError(f"nodes {bad} are not reachable from the source")
    return out


def exact_subset_ages(net: Network, metric: str = "version", max_moment: int = 1,
                      lazy: bool = False) -> np.ndarray:
    """Per-node moments, shape ``(n, max_moment)``; column m-1 is the m-th moment."""
    t = subset_age_table(net, metric, max_moment, lazy)
    return np.column_stack([t.node_values(m) for m in range(1, max_moment + 1)])
