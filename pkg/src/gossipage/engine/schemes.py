"""Age-aware gossiping schemes with state-dependent gossip rates.

Between rate changes every clock is exponential, so the loop draws the next
event from the current total rate and redraws after each change.
"""
from __future__ import annotations

import numba
import numpy as np

from .kernels import _flush, _flush_glob

ASUMAN, SEMI_DISTRIBUTED, FULLY_DISTRIBUTED = 0, 1, 2
SCHEMES = {"asuman": ASUMAN, "semi_distributed": SEMI_DISTRIBUTED, "fully_distributed": FULLY_DISTRIBUTED}


@numba.njit(cache=True, nogil=True)
def _recompute_min_set(X, active, members):
    n = X.shape[0]
    low = X[0]
    for i in range(1, n):
        if X[i] < low:
            low = X[i]
    k = 0
    total = 0.0
    for i in range(n):
        if X[i] == low:
            active[i] = True
            members[k] = i
            k += 1
            total += X[i]
        else:
            active[i] = False
    return k, total


@numba.njit(cache=True, nogil=True)
def run_scheme(scheme, rng, horizon, warmup, lam_e, src_cum, capacity, duration, nbr_ptr, nbr_idx,
               X, gen, last, acc_v, acc_a, glob, counts):
    """Simulate on ``(0, horizon]``.  ``glob`` accumulates the mean age of the
    ASUMAN minimum-age set; ``counts`` = [self-updates, source deliveries, gossips]."""
    n = X.shape[0]
    src_total = src_cum[-1] if src_cum.shape[0] > 0 else 0.0
    active = np.zeros(n, dtype=np.bool_)
    members = np.zeros(n, dtype=np.int64)
    end = np.full(n, -1.0)
    n_active = 0
    leader = -1
    set_sum = 0.0
    if scheme == ASUMAN:
        n_active, set_sum = _recompute_min_set(X, active, members)
        glob[2] = set_sum / n_active
    t = 0.0
    while True:
        if scheme == FULLY_DISTRIBUTED:
            g = capacity * n_active
        elif scheme == SEMI_DISTRIBUTED:
            g = capacity if leader >= 0 else 0.0
        else:
            g = capacity
        total = lam_e + src_total + g
        tn = t + rng.exponential(1.0 / total)
        if scheme == FULLY_DISTRIBUTED and n_active > 0:
            first = 0
            for a in range(1, n_active):
                if end[members[a]] < end[members[first]]:
                    first = a
            t_exp = end[members[first]]
            if t_exp <= tn and t_exp <= horizon:
                t = t_exp
                active[members[first]] = False
                members[first] = members[n_active - 1]
                n_active -= 1
                continue
        if tn > horizon:
            break
        t = tn
        u = rng.random() * total
        if u < lam_e:
            counts[0] += 1
            for i in range(n):
                _flush(i, t, warmup, X, gen, last, acc_v, acc_a)
                X[i] += 1
            if scheme == ASUMAN:
                _flush_glob(t, warmup, glob)
                n_active, set_sum = _recompute_min_set(X, active, members)
                glob[2] = set_sum / n_active
        elif u < lam_e + src_total:
            counts[1] += 1
            j = np.searchsorted(src_cum, u - lam_e, side="right")
            if j >= n:
                j = n - 1
            old = X[j]
            _flush(j, t, warmup, X, gen, last, acc_v, acc_a)
            X[j] = 0
            gen[j] = t
            if scheme == ASUMAN:
                if active[j] and old != 0:
                    _flush_glob(t, warmup, glob)
                    set_sum -= old
                    glob[2] = set_sum / n_active
            elif scheme == SEMI_DISTRIBUTED:
                leader = j
            else:
                if not active[j]:
                    active[j] = True
                    members[n_active] = j
                    n_active += 1
                end[j] = t + duration
        else:
            counts[2] += 1
            if scheme == SEMI_DISTRIBUTED:
                i = leader
            else:
                i = members[rng.integers(0, n_active)]
            deg = nbr_ptr[i + 1] - nbr_ptr[i]
            if deg == 0:
                continue
            j = nbr_idx[nbr_ptr[i] + rng.integers(0, deg)]
            if gen[i] > gen[j]:
                old = X[j]
                _flush(j, t, warmup, X, gen, last, acc_v, acc_a)
                X[j] = X[i]
                gen[j] = gen[i]
                if scheme == ASUMAN and active[j] and old != X[j]:
                    _flush_glob(t, warmup, glob)
                    set_sum += X[j] - old
                    glob[2] = set_sum / n_active
    for i in range(n):
        _flush(i, horizon, warmup, X, gen, last, acc_v, acc_a)
    _flush_glob(horizon, warmup, glob)


def neighbor_csr(net) -> tuple[np.ndarray, np.ndarray]:
    ptr = [0]
    idx: list[int] = []
    for i in range(1, net.n + 1):
        idx.extend(j - 1 for j in net.out_neighbors(i))
        ptr.append(len(idx))
    return np.array(ptr, dtype=np.int64), np.array(idx, dtype=np.int64)
