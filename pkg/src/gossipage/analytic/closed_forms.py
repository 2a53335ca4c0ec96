"""Size-indexed recursions for symmetric topologies and other closed forms."""
from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from ..engine.clocks import Distribution


def harmonic(n: int) -> float:
    return math.fsum(1.0 / k for k in range(1, n + 1))


def _check(n, lam, lam_e, lam_source):
    if n < 1:
        raise ValueError("n must be >= 1")
    if not (lam > 0 and lam_e >= 0 and lam_source > 0):
        raise ValueError("rates must be positive")


def fc_closed_form(n: int, lam: float = 1.0, lam_e: float = 1.0, lam_source: float | None = None) -> np.ndarray:
    """``v[j-1]`` is the age of any j-subset of the fully connected network.

    Accumulates in ``np.longdouble``; the backward recursion is a contraction
    so the float64 result is stable for n in the millions.
    """
    lam_source = lam if lam_source is None else lam_source
    _check(n, lam, lam_e, lam_source)
    L, Le, Ls = np.longdouble(lam), np.longdouble(lam_e), np.longdouble(lam_source)
    out = np.empty(n, dtype=np.longdouble)
    v = Le / Ls
    out[n - 1] = v
    for j in range(n - 1, 0, -1):
        g = np.longdouble(j * (n - j)) * L / (n - 1)
        v = (Le + g * v) / (np.longdouble(j) * Ls / n + g)
        out[j - 1] = v
    return out.astype(float)


def fc_single_node_ages(n_max: int, lam: float = 1.0, lam_e: float = 1.0,
                        lam_source: float | None = None) -> np.ndarray:
    """``out[n-1]`` is the single-node fully connected age for every n up to ``n_max``.

    Runs the same recursion as ``fc_closed_form`` for all n at once.
    """
    lam_source = lam if lam_source is None else lam_source
    _check(n_max, lam, lam_e, lam_source)
    L, Le, Ls = np.longdouble(lam), np.longdouble(lam_e), np.longdouble(lam_source)
    n = np.arange(1, n_max + 1).astype(np.longdouble)
    v = np.full(n_max, Le / Ls, dtype=np.longdouble)
    for k in range(1, n_max):
        sl = slice(k, None)  # sizes n >= k + 1 still have j = n - k >= 1
        nn = n[sl]
        j = nn - k
        g = j * (nn - j) * L / (nn - 1)
        v[sl] = (Le + g * v[sl]) / (j * Ls / nn + g)
    return v.astype(float)


def fc_bounds(n: int, lam: float = 1.0, lam_e: float = 1.0) -> tuple[float, float]:
    """Two-sided bound on the single-node fully connected age (source rate lam)."""
    r = lam_e / lam
    lower = r * ((n - 1) / n * harmonic(n - 1) + 1 / n)
    return lower, r * harmonic(n)


def ring_closed_form(n: int, lam: float = 1.0, lam_e: float = 1.0, lam_source: float | None = None) -> np.ndarray:
    """``v[j-1]`` is the age of a contiguous j-subset of the bidirectional ring."""
    lam_source = lam if lam_source is None else lam_source
    _check(n, lam, lam_e, lam_source)
    L, Le, Ls = np.longdouble(lam), np.longdouble(lam_e), np.longdouble(lam_source)
    out = np.empty(n, dtype=np.longdouble)
    v = Le / Ls
    out[n - 1] = v
    for j in range(n - 1, 0, -1):
        v = (Le + L * v) / (np.longdouble(j) * Ls / n + L)
        out[j - 1] = v
    return out.astype(float)


def ring_asymptote(n: int, lam: float = 1.0, lam_e: float = 1.0) -> float:
    return lam_e / lam * math.sqrt(math.pi * n / 2)


SCHEMES = ("asuman", "minage_set", "optimal", "semi_distributed", "fully_distributed")


def scheme_limits(scheme: str, n: float = math.inf, lam: float = 1.0, lam_e: float = 1.0) -> float:
    """Per-node limiting version age of the age-aware schemes with capacity n*lam.

    ``n=math.inf`` gives the large-n limit.  ``fully_distributed`` is only
    known as a large-n value and ignores ``n``.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    r = lam_e / lam
    big = math.isinf(n)
    if scheme == "asuman":
        if big:
            return 2 * r + 1
        return r * (1 + n * lam / (n - 1) * (1 / lam + 1 / lam_e)) / (1 / n + n / (n - 1))
    if scheme == "minage_set":
        return (lam_e + lam) / lam
    if scheme in ("optimal", "semi_distributed"):
        if big:
            return 2 * r
        return r * (1 + n / (n - 1)) / (1 / n + n / (n - 1))
    if scheme == "fully_distributed":
        return (1 + math.e) * r
    raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")


def renewal_line_limit(hop_dists: Sequence[Distribution], metric: str = "aoi",
                       source_dist: Distribution | None = None) -> float:
    """Additive limit: sum of per-hop mean backward recurrence times.

    For version age the sum is divided by the mean source inter-update time.
    """
    total = math.fsum(d.backward_recurrence_mean() for d in hop_dists)
    if metric == "aoi":
        return total
    if metric == "version":
        if source_dist is None:
            raise ValueError("version age needs a source update distribution")
        m = source_dist.mean
        if not (math.isfinite(m) and m > 0):
            raise ValueError("source inter-update mean must be finite and positive")
        return total / m
    raise ValueError(f"unknown metric {metric!r}")


__all__ = ["harmonic", "fc_closed_form", "fc_single_node_ages", "fc_bounds", "ring_closed_form", "ring_asymptote", "scheme_limits",
           "renewal_line_limit"]
