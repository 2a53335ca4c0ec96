"""Compiled event loops.  Each call consumes one chunk of events and mutates
the state arrays in place, so a run is a fold over chunks."""
from __future__ import annotations

import numba
import numpy as np

from .clocks import GOSSIP, SELF_UPDATE, SOURCE, UNRELIABLE_SOURCE

MODE_VERSION, MODE_AOI, MODE_GGAP, MODE_MUTATION, MODE_TIMESTOMP = 0, 1, 2, 3, 4
MODES = {"baseline_version": MODE_VERSION, "baseline_aoi": MODE_AOI, "g_gap": MODE_GGAP,
         "mutation": MODE_MUTATION, "timestomp": MODE_TIMESTOMP}


class SimState:
    """Mutable per-run arrays shared with the kernels."""

    def __init__(self, n: int, n_channels: int, moments: int, mode: int):
        self.X = np.zeros(n, dtype=np.int64)
        self.gen = np.zeros(n)
        self.claim = np.zeros(n)
        # reliability flag for G-gap (0 reliable), truth flag for mutation (1 true)
        self.flag = np.full(n, 1 if mode == MODE_MUTATION else 0, dtype=np.int64)
        self.last = np.zeros(n)
        self.acc_version = np.zeros((n, moments))
        self.acc_aoi = np.zeros((n, moments))
        # [integral of flag count, time of last flush, current flag count]
        self.glob = np.array([0.0, 0.0, float(self.flag.sum())])
        self.counts = np.zeros(n_channels, dtype=np.int64)


@numba.njit(cache=True, nogil=True, inline="always")
def _flush(i, t, warmup, X, gen, last, acc_v, acc_a):
    a = last[i]
    if t > warmup:
        if a < warmup:
            a = warmup
        dt = t - a
        if dt > 0.0:
            x = float(X[i])
            p = 1.0
            a0 = a - gen[i]
            a1 = t - gen[i]
            p0 = a0
            p1 = a1
            for m in range(acc_v.shape[1]):
                p *= x
                acc_v[i, m] += p * dt
                p0 *= a0
                p1 *= a1
                acc_a[i, m] += (p1 - p0) / (m + 2)
    last[i] = t


@numba.njit(cache=True, nogil=True, inline="always")
def _flush_glob(t, warmup, glob):
    a = glob[1]
    if t > warmup:
        if a < warmup:
            a = warmup
        if t > a:
            glob[0] += glob[2] * (t - a)
    glob[1] = t


@numba.njit(cache=True, nogil=True)
def advance(mode, times, chan, uni, ckind, csrc, cdst, warmup, gap, p_mut, adversary, policy,
            X, gen, claim, flag, last, acc_v, acc_a, glob, counts, trace):
    """Process one chunk.  ``trace`` is ``(m, 4)`` [i, j, X_j before, X_j after]
    or shape ``(0, 4)`` when tracing is off."""
    n = X.shape[0]
    tracing = trace.shape[0] > 0
    for k in range(times.shape[0]):
        t = times[k]
        c = chan[k]
        counts[c] += 1
        kind = ckind[c]
        if kind == SELF_UPDATE:
            for i in range(n):
                _flush(i, t, warmup, X, gen, last, acc_v, acc_a)
                X[i] += 1
            if tracing:
                trace[k, 0] = -1
                trace[k, 1] = -1
                trace[k, 2] = -1
                trace[k, 3] = -1
            continue
        j = cdst[c]
        before = X[j]
        if kind == SOURCE or kind == UNRELIABLE_SOURCE:
            i = -1
            s_in = 1 if kind == UNRELIABLE_SOURCE else 0
            adopt = True
            if mode == MODE_GGAP:
                if flag[j] == s_in:
                    adopt = 0 < X[j]
                elif s_in == 0:
                    adopt = 0 <= X[j] + gap
                else:
                    adopt = not (X[j] <= gap)
            elif mode == MODE_MUTATION:
                adopt = X[j] > 0 or flag[j] == 0
            elif mode == MODE_TIMESTOMP:
                adopt = t > claim[j]
            elif mode == MODE_VERSION:
                adopt = X[j] > 0
            else:
                adopt = t > gen[j]
            if adopt:
                _flush(j, t, warmup, X, gen, last, acc_v, acc_a)
                X[j] = 0
                gen[j] = t
                claim[j] = t
                if mode == MODE_GGAP or mode == MODE_MUTATION:
                    new_flag = s_in if mode == MODE_GGAP else 1
                    if new_flag != flag[j]:
                        _flush_glob(t, warmup, glob)
                        glob[2] += new_flag - flag[j]
                        flag[j] = new_flag
        else:
            i = csrc[c]
            adopt = False
            new_flag = flag[j]
            sent_claim = claim[i]
            if mode == MODE_VERSION:
                adopt = X[i] < X[j]
            elif mode == MODE_AOI:
                adopt = gen[i] > gen[j]
            elif mode == MODE_GGAP:
                if flag[i] == flag[j]:
                    adopt = X[i] < X[j]
                elif flag[i] == 0:
                    adopt = X[i] <= X[j] + gap
                else:
                    adopt = not (X[j] <= X[i] + gap)
                new_flag = flag[i]
            elif mode == MODE_MUTATION:
                sent_truth = flag[i]
                if uni[k, 0] < p_mut:
                    sent_truth = 0
                if X[i] != X[j]:
                    adopt = X[i] < X[j]
                else:
                    adopt = sent_truth == 1 and flag[j] == 0
                new_flag = sent_truth
            else:  # timestomp
                if adversary[i]:
                    u = uni[k, 0]
                    if u < policy[0]:
                        sent_claim = t
                    elif u < policy[0] + policy[1]:
                        sent_claim = 0.0
                if adversary[j]:
                    u = uni[k, 1]
                    if u < policy[2]:
                        sent_claim = t
                    elif u < policy[2] + policy[3]:
                        sent_claim = 0.0
                adopt = sent_claim > claim[j]
            if adopt:
                _flush(j, t, warmup, X, gen, last, acc_v, acc_a)
                X[j] = X[i]
                gen[j] = gen[i]
                claim[j] = sent_claim
                if (mode == MODE_GGAP or mode == MODE_MUTATION) and new_flag != flag[j]:
                    _flush_glob(t, warmup, glob)
                    glob[2] += new_flag - flag[j]
                    flag[j] = new_flag
        if tracing:
            trace[k, 0] = i
            trace[k, 1] = j
            trace[k, 2] = before
            trace[k, 3] = X[j]


@numba.njit(cache=True, nogil=True)
def finish(t, warmup, X, gen, last, acc_v, acc_a, glob):
    for i in range(X.shape[0]):
        _flush(i, t, warmup, X, gen, last, acc_v, acc_a)
    _flush_glob(t, warmup, glob)
