"""Channel tables and superposed Poisson event streams.

A channel is one independent clock: the source self-update, a source link
``0 -> j``, a gossip edge ``i -> j`` or (for the G-gap protocol) an
unreliable-source link.  With exponential clocks the superposition is a
single Poisson process of the total rate whose marks pick the channel with
probability proportional to its rate, which is what the stream samples.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..protocols import ProtocolSpec
from ..topology import Network
from .clocks import GOSSIP, SELF_UPDATE, SOURCE, UNRELIABLE_SOURCE


@dataclass(frozen=True)
class Channels:
    kind: np.ndarray  # int64
    src: np.ndarray  # 0-based sender index, -1 for the source
    dst: np.ndarray  # 0-based receiver index, -1 for a self-update
    rate: np.ndarray

    def __len__(self):
        return len(self.rate)

    @property
    def total_rate(self) -> float:
        return float(self.rate.sum())


def channel_table(net: Network, proto: ProtocolSpec | None = None) -> Channels:
    """Deterministic channel order: self-update, source links, gossip edges
    (lexicographic), unreliable-source links."""
    kind, src, dst, rate = [], [], [], []

    def add(k, i, j, r):
        if r > 0:
            kind.append(k)
            src.append(i)
            dst.append(j)
            rate.append(r)

    add(SELF_UPDATE, -1, -1, net.self_update_rate)
    for j in sorted(net.source_rates):
        add(SOURCE, -1, j - 1, net.source_rates[j])
    for i, j in sorted(net.gossip_rates):
        add(GOSSIP, i - 1, j - 1, net.gossip_rates[(i, j)])
    if proto is not None and proto.variant == "g_gap" and proto.unreliable_rate > 0:
        targets = [j for j in sorted(net.source_rates) if net.source_rates[j] > 0] or list(range(1, net.n + 1))
        for j in targets:
            add(UNRELIABLE_SOURCE, -1, j - 1, proto.unreliable_rate / len(targets))
    return Channels(np.array(kind, dtype=np.int64), np.array(src, dtype=np.int64),
                    np.array(dst, dtype=np.int64), np.array(rate, dtype=float))


def alias_table(weights: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Walker/Vose alias table for O(1) categorical sampling."""
    k = len(weights)
    p = np.asarray(weights, dtype=float) * k / np.sum(weights)
    prob = np.zeros(k)
    alias = np.zeros(k, dtype=np.int64)
    small = [i for i in range(k) if p[i] < 1.0]
    large = [i for i in range(k) if p[i] >= 1.0]
    while small and large:
        s, l = small.pop(), large.pop()
        prob[s] = p[s]
        alias[s] = l
        p[l] = p[l] + p[s] - 1.0
        (small if p[l] < 1.0 else large).append(l)
    for i in large + small:
        prob[i] = 1.0
        alias[i] = i
    return prob, alias


@dataclass
class EventChunk:
    times: np.ndarray
    channel: np.ndarray
    uniforms: np.ndarray  # (m, 2), extra randomness for mutation / timestomping


class PoissonStream:
    """Chunks of ``(time, channel, uniforms)`` on ``(t0, horizon]``."""

    def __init__(self, channels: Channels, rng: np.random.Generator, chunk: int = 1 << 16):
        if len(channels) == 0 or channels.total_rate <= 0:
            raise ValueError("no channel with positive rate")
        self.channels = channels
        self.rng = rng
        self.chunk = chunk
        self.total = channels.total_rate
        self.prob, self.alias = alias_table(channels.rate)

    def chunks(self, horizon: float, t0: float = 0.0):
        rng, k = self.rng, len(self.prob)
        t = t0
        while t < horizon:
            times = t + np.cumsum(rng.exponential(1.0 / self.total, self.chunk))
            idx = rng.integers(0, k, self.chunk)
            keep = rng.random(self.chunk) < self.prob[idx]
            chan = np.where(keep, idx, self.alias[idx])
            uni = rng.random((self.chunk, 2))
            m = int(np.searchsorted(times, horizon, side="right"))
            if m < self.chunk:
                yield EventChunk(times[:m], chan[:m], uni[:m])
                return
            t = float(times[-1])
            yield EventChunk(times, chan, uni)
