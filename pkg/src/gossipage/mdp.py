"""Average-cost MDP for an energy-harvesting sensor feeding a caching aggregator.

State ``(b, X_1..X_n, X_C)``: battery level, version ages of the n users
and of the aggregator cache.  In each slot, for the action ``a`` chosen in
the current state:

1. the source moves to a new version w.p. ``p``: every age grows by one,
   saturating at ``x_max``;
2. the battery harvests one unit w.p. ``delta`` (capped at ``b_max``);
3. user i requests w.p. ``q[i]``.  With ``a = 1`` and a non-empty battery the
   aggregator samples the sensor (battery - 1, X_C = X_i = 0); otherwise the
   user gets the cached copy (X_i = X_C).

The per-slot cost is the mean user age in the current state.
"""
from __future__ import annotations

import csv
import itertools
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class ConvergenceError(RuntimeError):
    pass


@dataclass
class EhMdp:
    n: int
    b_max: int
    delta: float
    p: float
    q: tuple[float, ...]
    x_max: int
    P: tuple[sp.csr_matrix, sp.csr_matrix] = field(repr=False)
    cost: np.ndarray = field(repr=False)
    states: np.ndarray = field(repr=False)  # (S, n + 2) columns b, X_1..X_n, X_C

    @property
    def n_states(self) -> int:
        return self.states.shape[0]

    def index(self, b: int, xs: Sequence[int], xc: int) -> int:
        r = self.x_max + 1
        idx = b
        for x in list(xs) + [xc]:
            idx = idx * r + x
        return int(idx)


def _encode(cols: np.ndarray, r: int) -> np.ndarray:
    idx = cols[:, 0].copy()
    for k in range(1, cols.shape[1]):
        idx = idx * r + cols[:, k]
    return idx


def build(n: int, b_max: int, delta: float, p: float, q: Sequence[float], x_max: int) -> EhMdp:
    q = tuple(float(v) for v in q)
    if n < 1 or x_max < 1 or b_max < 0:
        raise ValueError("need n >= 1, x_max >= 1, b_max >= 0")
    if len(q) != n:
        raise ValueError(f"need {n} request probabilities, got {len(q)}")
    for name, v in [("delta", delta), ("p", p)] + [(f"q_{i + 1}", v) for i, v in enumerate(q)]:
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"{name} must be a probability, got {v}")
    if sum(q) > 1.0 + 1e-12:
        raise ValueError(f"request probabilities sum to {sum(q)} > 1")
    r = x_max + 1
    grids = np.indices((b_max + 1,) + (r,) * (n + 1)).reshape(n + 2, -1).T
    S = grids.shape[0]
    cost = grids[:, 1:n + 1].mean(axis=1).astype(float)

    requests = [(-1, max(0.0, 1.0 - sum(q)))] + [(i, q[i]) for i in range(n)]
    mats = []
    for a in (0, 1):
        rows, cols, vals = [], [], []
        for (u, pu), (h, ph), (i, pq) in itertools.product(((0, 1 - p), (1, p)), ((0, 1 - delta), (1, delta)),
                                                          requests):
            prob = pu * ph * pq
            if prob == 0.0:
                continue
            nxt = grids.copy()
            if u:
                nxt[:, 1:] = np.minimum(nxt[:, 1:] + 1, x_max)
            if h:
                nxt[:, 0] = np.minimum(nxt[:, 0] + 1, b_max)
            if i >= 0:
                fetch = (nxt[:, 0] > 0) if a == 1 else np.zeros(S, dtype=bool)
                nxt[:, 1 + i] = np.where(fetch, 0, nxt[:, -1])
                nxt[:, -1] = np.where(fetch, 0, nxt[:, -1])
                nxt[:, 0] = nxt[:, 0] - fetch
            rows.append(np.arange(S))
            cols.append(_encode(nxt, r))
            vals.append(np.full(S, prob))
        P = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(S, S))
        P.sum_duplicates()
        mats.append(P)
    return EhMdp(n, b_max, float(delta), float(p), q, x_max, tuple(mats), cost, grids)


@dataclass
class Policy:
    mdp: EhMdp
    actions: np.ndarray
    gain: float
    bias: np.ndarray
    iterations: int = 0

    def action(self, b: int, xs: Sequence[int], xc: int) -> int:
        return int(self.actions[self.mdp.index(b, xs, xc)])

    def to_csv(self, path: str | Path) -> None:
        m = self.mdp
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["b", "XC"] + [f"X{i + 1}" for i in range(m.n)] + ["action"])
            for s, a in zip(m.states, self.actions):
                w.writerow([int(s[0]), int(s[-1])] + [int(x) for x in s[1:-1]] + [int(a)])


def _span(x: np.ndarray) -> float:
    return float(x.max() - x.min())


def solve(mdp: EhMdp, tol: float = 1e-9, max_iters: int = 200_000, tie_tol: float | None = None) -> Policy:
    """Synchronous relative value iteration.

    Iterates on the lazy chain ``(P + I) / 2``, which has the same gain and
    optimal policies and rules out periodicity.  Stops when the span of the
    value change drops below ``tol``; ties within ``tie_tol`` go to action 0.
    """
    P0, P1 = (0.5 * (P + sp.identity(mdp.n_states, format="csr")) for P in mdp.P)
    c = mdp.cost
    h = np.zeros(mdp.n_states)
    for it in range(1, max_iters + 1):
        q0 = c + P0 @ h
        q1 = c + P1 @ h
        new = np.minimum(q0, q1)
        diff = new - h
        h = new - new[0]
        if _span(diff) < tol:
            break
    else:
        raise ConvergenceError(f"relative value iteration did not converge in {max_iters} sweeps")
    gain = 0.5 * float(diff.max() + diff.min())
    if tie_tol is None:
        tie_tol = max(1e3 * tol, 1e-9) * max(1.0, float(np.abs(h).max()))
    q0 = c + P0 @ h
    q1 = c + P1 @ h
    actions = (q1 < q0 - tie_tol).astype(np.int64)
    # bias of the original chain is twice that of the lazy one
    return Policy(mdp, actions, gain, 2.0 * h, it)


def policy_matrix(mdp: EhMdp, actions: np.ndarray) -> sp.csr_matrix:
    pick = sp.diags(actions.astype(float))
    keep = sp.diags(1.0 - actions.astype(float))
    return (keep @ mdp.P[0] + pick @ mdp.P[1]).tocsr()


def stationary_distribution(P: sp.csr_matrix, tol: float = 1e-13, max_iters: int = 1_000_000,
                            direct_max: int = 3000) -> np.ndarray:
    """Solve pi P = pi, sum(pi) = 1.

    Small chains use a direct sparse solve.  Larger ones (where LU fill-in
    gets expensive) use power iteration on the lazy chain (P + I) / 2 from
    the uniform vector, stopping when the L1 change drops below ``tol``.
    """
    S = P.shape[0]
    if S <= direct_max:
        A = (P.T - sp.identity(S, format="csr")).tolil()
        A[0, :] = np.ones(S)
        b = np.zeros(S)
        b[0] = 1.0
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", spla.MatrixRankWarning)
            pi = spla.spsolve(A.tocsc(), b)
        if not np.all(np.isfinite(pi)):
            pi = np.linalg.lstsq(A.toarray(), b, rcond=None)[0]
        pi = np.clip(pi, 0.0, None)
        return pi / pi.sum()
    PT = (0.5 * (P + sp.identity(S, format="csr"))).T.tocsr()
    pi = np.full(S, 1.0 / S)
    for _ in range(max_iters // 20):
        prev = pi
        for _ in range(20):
            pi = PT @ pi
        if np.abs(pi - prev).sum() < tol:
            break
    else:
        raise ConvergenceError("power iteration for the stationary distribution did not converge")
    return pi / pi.sum()


def evaluate_policy(mdp: EhMdp, actions: np.ndarray) -> float:
    """Average cost of a stationary deterministic policy."""
    pi = stationary_distribution(policy_matrix(mdp, actions))
    return float(pi @ mdp.cost)


def threshold_actions(mdp: EhMdp, thresholds: Sequence[int]) -> np.ndarray:
    """Fetch iff X_C >= thresholds[b]."""
    t = np.asarray(thresholds)
    return (mdp.states[:, -1] >= t[mdp.states[:, 0]]).astype(np.int64)


def brute_force_thresholds(mdp: EhMdp) -> tuple[float, tuple[int, ...]]:
    """Best threshold policy by exhaustive enumeration (x_max + 2 thresholds per battery level)."""
    best = (np.inf, ())
    for t in itertools.product(range(mdp.x_max + 2), repeat=mdp.b_max + 1):
        g = evaluate_policy(mdp, threshold_actions(mdp, t))
        if g < best[0] - 1e-12:
            best = (g, t)
    return best


@dataclass
class ThresholdReport:
    independent: bool
    threshold: bool
    thresholds: dict[int, int | None]
    trivial_slices: list[int]
    violations: list[tuple[int, ...]]

    @property
    def ok(self) -> bool:
        return self.independent and self.threshold


def verify_threshold(policy: Policy) -> ThresholdReport:
    """Check that actions ignore X_1..X_n and switch to 1 at most once as X_C grows.

    ``thresholds[b]`` is the smallest X_C fetching at battery level b (None if
    never).  Battery slices where both actions move identically are listed in
    ``trivial_slices`` and count as threshold.  Violations are full states
    for X-dependence and ``(b, -1, X_C)`` for a non-monotone switch.
    """
    m = policy.mdp
    st, act = m.states, policy.actions
    violations: list[tuple[int, ...]] = []
    independent = True
    threshold = True
    thresholds: dict[int, int | None] = {}
    trivial: list[int] = []
    diff_rows = np.asarray(abs(m.P[0] - m.P[1]).sum(axis=1)).ravel() > 0
    for b in range(m.b_max + 1):
        in_slice = st[:, 0] == b
        if not diff_rows[in_slice].any():
            trivial.append(b)
            thresholds[b] = None
            continue
        per_xc = []
        for xc in range(m.x_max + 1):
            sel = in_slice & (st[:, -1] == xc)
            acts = act[sel]
            if acts.min() != acts.max():
                independent = False
                majority = int(round(acts.mean()))
                for s in st[sel][acts != majority]:
                    violations.append(tuple(int(v) for v in s))
            per_xc.append(int(round(acts.mean())))
        per_xc = np.array(per_xc)
        switches = np.flatnonzero(np.diff(per_xc) != 0)
        if len(switches) > 1 or (len(switches) == 1 and per_xc[0] == 1):
            threshold = False
            for xc in switches + 1:
                violations.append((b, -1, int(xc)))
        ones = np.flatnonzero(per_xc == 1)
        thresholds[b] = int(ones[0]) if len(ones) else None
    return ThresholdReport(independent, threshold, thresholds, trivial, violations)
