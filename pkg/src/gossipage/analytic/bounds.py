"""Upper bounds on single-node age from size-indexed lower bounds on incoming rate.

If every (j+1)-subset has age at most u_{j+1}, then any j-subset S satisfies

    v_S <= max(u_{j+1}, (lam_e + K u_{j+1}) / (l0 + K))

for any K at most the total incoming gossip rate into S and l0 at most the
source rate into S: the second expression only exceeds u_{j+1} where it is
decreasing in both K and l0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..topology import build, grid_side

BRUTE_FORCE_MAX = 16


@dataclass(frozen=True)
class BoundProfile:
    """Per-size lower bounds; index j-1 holds the value for subsets of size j.

    ``incoming[j-1]`` counts incoming edges (j < n), ``edge_rate[j-1]`` is a
    lower bound on the rate of each of them and ``source[j-1]`` a lower bound
    on the source rate into the subset (defined for j = 1..n).
    """

    n: int
    incoming: np.ndarray
    edge_rate: np.ndarray
    source: np.ndarray
    label: str = ""

    def __post_init__(self):
        if len(self.incoming) != self.n - 1 or len(self.edge_rate) != self.n - 1 or len(self.source) != self.n:
            raise ValueError("profile needs n-1 incoming/edge-rate entries and n source entries")
        if np.any(np.asarray(self.source) < 0) or np.any(np.asarray(self.incoming) < 0):
            raise ValueError("profile entries must be non-negative")

    def total_incoming(self, j: int) -> float:
        return float(self.incoming[j - 1] * self.edge_rate[j - 1])


def upper_bound_recursion(profile: BoundProfile, lam_e: float = 1.0, clamp: bool = True) -> tuple[float, np.ndarray]:
    """Return ``(u_1, u)`` with ``u[j-1]`` bounding the age of every j-subset.

    ``clamp`` also applies the direct-source bound lam_e / l0_j.
    """
    n = profile.n
    if profile.source[n - 1] <= 0:
        raise ZeroDivisionError("no source rate into the full set")
    u = np.empty(n)
    u[n - 1] = lam_e / profile.source[n - 1]
    for j in range(n - 1, 0, -1):
        k = profile.total_incoming(j)
        l0 = float(profile.source[j - 1])
        if k + l0 <= 0:
            raise ZeroDivisionError(f"zero denominator at subset size {j}")
        val = max(u[j], (lam_e + k * u[j]) / (l0 + k))
        if clamp and l0 > 0:
            val = min(val, lam_e / l0)
        u[j - 1] = val
    return float(u[0]), u


def min_incoming_edges(net) -> np.ndarray:
    """Exact minimum number of directed edges into a j-subset, j = 1..n-1 (brute force)."""
    n = net.n
    if n > BRUTE_FORCE_MAX:
        raise ValueError(f"brute force limited to n <= {BRUTE_FORCE_MAX}")
    adj = np.zeros(n, dtype=np.int64)  # bitmask of in-neighbors of each node
    for (i, j), r in net.gossip_rates.items():
        if r > 0:
            adj[j - 1] |= 1 << (i - 1)
    best = np.full(n - 1, np.iinfo(np.int64).max)
    for S in range(1, (1 << n) - 1):
        size = bin(S).count("1")
        total = 0
        for j in range(n):
            if S >> j & 1:
                total += bin(int(adj[j]) & ~S).count("1")
        if total < best[size - 1]:
            best[size - 1] = total
    return best


def infinite_grid_edge_bound(j: int) -> int:
    """Minimum perimeter of j unit cells in the plane: 2 * ceil(2 sqrt(j))."""
    return 2 * math.ceil(2 * math.sqrt(j))


def grid_edge_lower_bound(n: int, j: int) -> int:
    """Lower bound on the edge boundary of a j-subset of the k x k grid.

    Edge-isoperimetry on [k]^2 gives min(2 sqrt(m), k) with m = min(j, n - j);
    the count is an integer so the bound is rounded up.  Never exceeds the
    infinite-plane bound.
    """
    k = grid_side(n)
    m = min(j, n - j)
    two_root = 2 * math.sqrt(m)
    b = min(two_root, k)
    # ceil with a tolerance so exact squares do not round up on float noise
    bound = math.ceil(b - 1e-12)
    return int(min(bound, infinite_grid_edge_bound(j)))


def grid_profile(n: int, lam: float = 1.0, lam_source: float = 1.0, brute_force: bool | None = None) -> BoundProfile:
    """Grid with lam split over actual neighbors: every edge carries at least lam/4."""
    k = grid_side(n)
    if brute_force is None:
        brute_force = n <= BRUTE_FORCE_MAX
    if brute_force:
        inc = min_incoming_edges(build("grid", n, lam=lam, lam_source=lam_source)).astype(float)
    else:
        inc = np.array([grid_edge_lower_bound(n, j) for j in range(1, n)], dtype=float)
    rate = np.full(n - 1, lam / 4 if k > 2 else lam / 2)
    src = np.arange(1, n + 1) * lam_source / n
    return BoundProfile(n, inc, rate, src, label=f"grid n={n}")


def contiguous_incoming(n: int, f: int, j: int) -> int:
    """Directed edges into the contiguous arc {0..j-1} of the generalized ring."""
    inside = np.zeros(n, dtype=bool)
    inside[:j] = True
    count = 0
    for d in range(1, f + 1):
        # node x sends to x + d and x - d
        count += int(np.sum(~inside & np.roll(inside, -d)))
        count += int(np.sum(~inside & np.roll(inside, d)))
    return count


def generalized_ring_profile(n: int, f: int, lam: float = 1.0, lam_source: float = 1.0,
                             brute_force: bool | None = None) -> BoundProfile:
    """Each node talks to f nodes on both sides at lam/(2f) per edge.

    Beyond the brute-force size the incoming counts come from contiguous arcs,
    which minimize them for the sizes checked exhaustively.
    """
    if not 1 <= f < n / 2:
        raise ValueError("need 1 <= f < n/2")
    if brute_force is None:
        brute_force = n <= BRUTE_FORCE_MAX
    if brute_force:
        inc = min_incoming_edges(build("generalized_ring", n, lam=lam, lam_source=lam_source, f=f)).astype(float)
    else:
        inc = np.array([contiguous_incoming(n, f, j) for j in range(1, n)], dtype=float)
    rate = np.full(n - 1, lam / (2 * f))
    src = np.arange(1, n + 1) * lam_source / n
    return BoundProfile(n, inc, rate, src, label=f"generalized ring n={n} f={f}")


def fc_profile(n: int, lam: float = 1.0, lam_source: float = 1.0) -> BoundProfile:
    """Exact fully connected quantities; the recursion then reproduces the closed form."""
    j = np.arange(1, n)
    inc = (j * (n - j)).astype(float)
    rate = np.full(n - 1, lam / (n - 1))
    src = np.arange(1, n + 1) * lam_source / n
    return BoundProfile(n, inc, rate, src, label=f"fully connected n={n}")


def grid_upper_bound(n: int, lam: float = 1.0, lam_e: float = 1.0, lam_source: float = 1.0) -> float:
    return upper_bound_recursion(grid_profile(n, lam, lam_source), lam_e)[0]


__all__ = ["BoundProfile", "upper_bound_recursion", "min_incoming_edges", "infinite_grid_edge_bound",
           "grid_edge_lower_bound", "grid_profile", "contiguous_incoming", "generalized_ring_profile", "fc_profile",
           "grid_upper_bound"]
