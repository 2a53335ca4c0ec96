"""Inter-event time distributions and per-channel clocks."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class Distribution:
    name = "abstract"

    def sample(self, rng: np.random.Generator, size=None):
        raise NotImplementedError

    @property
    def mean(self) -> float:
        raise NotImplementedError

    @property
    def second_moment(self) -> float:
        raise NotImplementedError

    def backward_recurrence_mean(self) -> float:
        """Limiting mean time since the last renewal, E[Y^2] / (2 E[Y])."""
        m1, m2 = self.mean, self.second_moment
        if not (math.isfinite(m1) and math.isfinite(m2)) or m1 <= 0:
            raise ValueError(f"{self} needs finite, positive first and second moments")
        return m2 / (2.0 * m1)


@dataclass(frozen=True)
class Exponential(Distribution):
    rate: float
    name = "exponential"

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError("exponential rate must be positive")

    def sample(self, rng, size=None):
        return rng.exponential(1.0 / self.rate, size)

    @property
    def mean(self):
        return 1.0 / self.rate

    @property
    def second_moment(self):
        return 2.0 / self.rate**2


@dataclass(frozen=True)
class Deterministic(Distribution):
    d: float
    name = "deterministic"

    def __post_init__(self):
        if not self.d > 0:
            raise ValueError("deterministic interval must be positive")

    def sample(self, rng, size=None):
        return self.d if size is None else np.full(size, float(self.d))

    @property
    def mean(self):
        return self.d

    @property
    def second_moment(self):
        return self.d**2


@dataclass(frozen=True)
class Gamma(Distribution):
    shape: float
    scale: float
    name = "gamma"

    def __post_init__(self):
        if not (self.shape > 0 and self.scale > 0):
            raise ValueError("gamma shape and scale must be positive")

    def sample(self, rng, size=None):
        return rng.gamma(self.shape, self.scale, size)

    @property
    def mean(self):
        return self.shape * self.scale

    @property
    def second_moment(self):
        return self.shape * (self.shape + 1) * self.scale**2


@dataclass(frozen=True)
class Uniform(Distribution):
    a: float
    b: float
    name = "uniform"

    def __post_init__(self):
        if not 0 <= self.a < self.b:
            raise ValueError("uniform needs 0 <= a < b")

    def sample(self, rng, size=None):
        return rng.uniform(self.a, self.b, size)

    @property
    def mean(self):
        return 0.5 * (self.a + self.b)

    @property
    def second_moment(self):
        return (self.a**2 + self.a * self.b + self.b**2) / 3.0


@dataclass(frozen=True)
class Pareto(Distribution):
    """Pareto with tail index ``alpha`` and minimum ``xm``; heavy-tailed for alpha <= 2."""

    alpha: float
    xm: float = 1.0
    name = "pareto"

    def sample(self, rng, size=None):
        return self.xm * (1.0 + rng.pareto(self.alpha, size))

    @property
    def mean(self):
        return math.inf if self.alpha <= 1 else self.alpha * self.xm / (self.alpha - 1)

    @property
    def second_moment(self):
        return math.inf if self.alpha <= 2 else self.alpha * self.xm**2 / (self.alpha - 2)


def parse_distribution(text: str) -> Distribution:
    """``exponential:2``, ``deterministic:0.5``, ``gamma:2,0.5``, ``uniform:0,1``, ``pareto:3,1``."""
    name, _, args = text.partition(":")
    vals = [float(v) for v in args.split(",") if v.strip()]
    table = {"exponential": Exponential, "exp": Exponential, "deterministic": Deterministic,
             "det": Deterministic, "gamma": Gamma, "uniform": Uniform, "pareto": Pareto}
    try:
        return table[name.strip().lower()](*vals)
    except KeyError:
        raise ValueError(f"unknown distribution {name!r}") from None


SELF_UPDATE, SOURCE, GOSSIP, UNRELIABLE_SOURCE = 0, 1, 2, 3
KIND_NAMES = {SELF_UPDATE: "source_self_update", SOURCE: "source_to_node", GOSSIP: "gossip",
              UNRELIABLE_SOURCE: "unreliable_source_to_node"}


@dataclass
class EventClock:
    """One renewal clock: ``kind`` with endpoints ``i -> j`` (1-based, 0 = source)."""

    kind: int
    i: int
    j: int
    distribution: Distribution
    next_fire_time: float = 0.0

    def reschedule(self, now: float, rng: np.random.Generator) -> float:
        # exponential clocks are memoryless, renewal clocks draw a full inter-arrival
        step = float(self.distribution.sample(rng))
        if step <= 0:
            step = np.nextafter(0.0, 1.0)
        self.next_fire_time = now + step
        return self.next_fire_time
