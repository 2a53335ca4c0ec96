"""GP-UCB search for the source-rate split that minimizes the worst node's age.

Rewards are ``f = -a_hat`` where ``a_hat`` is the largest per-node empirical
average age.  The feasible set is D = {x in [0, lam]^n : sum(x) <= lam}.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve, LinAlgError

from .engine.simulate import run, split_seeds
from .topology import Network


class EvaluationError(RuntimeError):
    """The objective failed at a specific rate vector."""

    def __init__(self, x, cause):
        super().__init__(f"evaluator failed at lambda={np.round(np.asarray(x), 6).tolist()}: {cause}")
        self.x = np.asarray(x)


def se_kernel(a: np.ndarray, b: np.ndarray, length: float, variance: float = 1.0) -> np.ndarray:
    d2 = ((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=-1)
    return variance * np.exp(-0.5 * d2 / length**2)


@dataclass
class GpPosterior:
    """Noise-free GP regression with jitter on the kernel diagonal.

    ``jitter`` is relative to ``signal_var``, so at a training point the
    posterior variance is at most ``jitter * signal_var``.
    """

    points: np.ndarray
    rewards: np.ndarray
    length: float
    signal_var: float
    jitter: float
    prior_mean: float
    factor: tuple | None = field(default=None, repr=False)
    alpha: np.ndarray | None = field(default=None, repr=False)

    @property
    def m(self) -> int:
        return len(self.rewards)

    def mean_var(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.m == 0:
            return np.full(len(x), self.prior_mean), np.full(len(x), self.signal_var)
        k = se_kernel(x, self.points, self.length, self.signal_var)
        mu = self.prior_mean + k @ self.alpha
        v = cho_solve(self.factor, k.T)
        var = self.signal_var - np.einsum("ij,ji->i", k, v)
        return mu, np.maximum(var, 0.0)

    def mean(self, x):
        return self.mean_var(x)[0]

    def var(self, x):
        return self.mean_var(x)[1]

    def covariance(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        x, y = np.atleast_2d(x), np.atleast_2d(y)
        kxy = se_kernel(x, y, self.length, self.signal_var)
        if self.m == 0:
            return kxy
        kx = se_kernel(x, self.points, self.length, self.signal_var)
        ky = se_kernel(y, self.points, self.length, self.signal_var)
        return kxy - kx @ cho_solve(self.factor, ky.T)

    def interpolation_error(self) -> tuple[float, float]:
        """Largest |mu - f| and largest variance over the training points."""
        if self.m == 0:
            return 0.0, 0.0
        mu, var = self.mean_var(self.points)
        return float(np.abs(mu - self.rewards).max()), float(var.max())


def gp_fit(points, rewards, length: float = 0.25, signal_var: float | None = None, jitter: float = 1e-8,
           prior_mean: float = 0.0) -> GpPosterior:
    """Factor the kernel matrix once.  ``signal_var`` defaults to the squared
    reward range (1 when the rewards are all equal)."""
    X = np.asarray(points, dtype=float).reshape(len(rewards), -1) if len(rewards) else np.zeros((0, 0))
    f = np.asarray(rewards, dtype=float)
    if signal_var is None:
        rng = float(f.max() - f.min()) if len(f) else 0.0
        signal_var = rng**2 if rng > 0 else 1.0
    post = GpPosterior(X, f, float(length), float(signal_var), float(jitter), float(prior_mean))
    if len(f) == 0:
        return post
    K = se_kernel(X, X, length, signal_var) + jitter * signal_var * np.eye(len(f))
    try:
        post.factor = cho_factor(K, lower=True)
    except LinAlgError as e:
        raise LinAlgError(f"kernel matrix not positive definite despite jitter {jitter}") from e
    post.alpha = cho_solve(post.factor, f - prior_mean)
    return post


def project_to_domain(x: np.ndarray, lam: float) -> np.ndarray:
    """Euclidean projection onto {x in [0, lam]^n : sum(x) <= lam} (works row-wise)."""
    x = np.asarray(x, dtype=float)
    flat = x.ndim == 1
    X = np.atleast_2d(x)
    Y = np.clip(X, 0.0, lam)
    over = Y.sum(axis=1) > lam
    if over.any():
        Z = X[over]
        # projection onto the face sum = lam of the simplex
        u = -np.sort(-Z, axis=1)
        css = np.cumsum(u, axis=1) - lam
        idx = np.arange(1, Z.shape[1] + 1)
        rho = (u - css / idx > 0).sum(axis=1)
        theta = css[np.arange(len(Z)), rho - 1] / rho
        P = np.maximum(Z - theta[:, None], 0.0)
        # fix rounding so the sum never exceeds lam
        s = P.sum(axis=1)
        P = np.where((s > lam)[:, None], P * (lam / s)[:, None], P)
        Y[over] = P
    return Y[0] if flat else Y


def beta_schedule(m: int, delta: float = 0.1) -> float:
    """beta_m = 2 log(m^2 pi^2 / (6 delta))."""
    return 2.0 * math.log(m * m * math.pi**2 / (6.0 * delta))


def ucb_select(post: GpPosterior, beta: float, lam: float, n: int | None = None, starts: int = 32,
               seed: int | np.random.SeedSequence = 0, min_step: float = 1e-4) -> np.ndarray:
    """Approximate argmax of mu + sqrt(beta) sigma over D by projected coordinate search.

    Starts are the training points plus random feasible points (up to
    ``starts`` in total).  With no data the centroid of D is returned.
    """
    n = post.points.shape[1] if n is None and post.m else n
    if n is None:
        raise ValueError("dimension unknown for an empty posterior")
    if post.m == 0:
        return np.full(n, lam / (n + 1))
    if beta < 0:
        raise ValueError("beta must be non-negative")
    rng = np.random.default_rng(seed)
    root = math.sqrt(beta)

    def acq(x):
        mu, var = post.mean_var(x)
        return mu + root * np.sqrt(var)

    k_data = min(post.m, starts // 2)
    order = np.argsort(-post.rewards, kind="stable")[:k_data]
    rand = rng.dirichlet(np.ones(n + 1), starts - k_data)[:, :n] * lam
    X = project_to_domain(np.vstack([post.points[order], rand]), lam)
    val = acq(X)
    step = np.full(len(X), lam / 4)
    dirs = np.vstack([np.eye(n), -np.eye(n)])
    active = step >= min_step * lam
    while active.any():
        idx = np.flatnonzero(active)
        cand = X[idx, None, :] + step[idx, None, None] * dirs[None, :, :]
        cand = project_to_domain(cand.reshape(-1, n), lam).reshape(len(idx), len(dirs), n)
        cv = acq(cand.reshape(-1, n)).reshape(len(idx), len(dirs))
        best = cv.argmax(axis=1)
        gain = cv[np.arange(len(idx)), best] > val[idx] + 1e-15
        moved = idx[gain]
        X[moved] = cand[gain, best[gain]]
        val[moved] = cv[gain, best[gain]]
        stuck = idx[~gain]
        step[stuck] *= 0.5
        active = step >= min_step * lam
    return X[int(np.argmax(val))].copy()


@dataclass
class OptResult:
    best_x: np.ndarray
    best_value: float
    xs: np.ndarray
    values: np.ndarray
    incumbent: np.ndarray
    fit_checks: list[tuple[int, float, float]]

    def to_csv(self, path: str | Path) -> None:
        n = self.xs.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["m"] + [f"lambda_{i + 1}" for i in range(n)] + ["a_hat", "incumbent"])
            for m, (x, a, inc) in enumerate(zip(self.xs, self.values, self.incumbent), start=1):
                w.writerow([m] + [repr(float(v)) for v in x] + [repr(float(a)), repr(float(inc))])


def optimize(evaluator: Callable[[np.ndarray], float], n: int, steps: int = 50, lam: float = 1.0, seed: int = 0,
             length: float | None = None, jitter: float = 1e-8, beta: Callable[[int], float] = beta_schedule,
             starts: int = 32, initial: Sequence[Sequence[float]] | None = None) -> OptResult:
    """Sequential GP-UCB: fit, select, evaluate, ``steps`` times.

    Points in ``initial`` (projected onto D) are evaluated first and appear
    at the head of the trace.

    The GP prior mean is the mean observed reward.  ``fit_checks`` holds
    ``(m, max |mu - f| / sigma, max variance / sigma^2)`` at the training
    points of every fit, with sigma^2 the signal variance.
    """
    length = lam / 4 if length is None else length
    xs: list[np.ndarray] = []
    vals: list[float] = []
    checks: list[tuple[int, float, float]] = []
    seeds = split_seeds(seed, steps)
    design = [project_to_domain(np.asarray(x, dtype=float), lam) for x in (initial if initial is not None else [])]
    for m in range(1, steps + len(design) + 1):
        if m <= len(design):
            x = design[m - 1]
        else:
            rewards = -np.asarray(vals)
            prior = float(rewards.mean()) if len(rewards) else 0.0
            post = gp_fit(np.array(xs).reshape(len(xs), n), rewards, length, jitter=jitter, prior_mean=prior)
            if post.m:
                err, var = post.interpolation_error()
                checks.append((m - 1, err / math.sqrt(post.signal_var), var / post.signal_var))
            x = ucb_select(post, beta(m - len(design)), lam, n, starts, seeds[m - len(design) - 1])
        try:
            a = float(evaluator(x))
        except Exception as e:  # propagate with the offending point
            raise EvaluationError(x, e) from e
        if not math.isfinite(a):
            raise EvaluationError(x, f"non-finite objective {a}")
        xs.append(x)
        vals.append(a)
    values = np.array(vals)
    inc = np.minimum.accumulate(values)
    b = int(np.argmin(values))
    return OptResult(xs[b], float(values[b]), np.array(xs), values, inc, checks)


class WorstNodeAge:
    """Objective: max_i of the simulated version age with source rates ``x``.

    Each call uses the next seed of a counter-based split, so a run of the
    optimizer is reproducible.
    """

    def __init__(self, net: Network, horizon: float = 1e4, warmup: float | None = None, seed: int = 0,
                 replications: int = 1):
        self.net = net
        self.horizon = horizon
        self.warmup = warmup
        self.seed = seed
        self.replications = replications
        self.calls = 0

    def ages(self, x: Sequence[float], key: int) -> np.ndarray:
        net = self.net.with_source_rates(x)
        out = []
        for s in split_seeds(self.seed, self.replications, key):
            out.append(run(net, horizon=self.horizon, warmup=self.warmup, seed=s).version_age.max())
        return np.array(out)

    def __call__(self, x) -> float:
        self.calls += 1
        return float(self.ages(x, self.calls).mean())
