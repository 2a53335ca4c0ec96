"""Pure-Python engine built directly on the protocol merge functions.

Two entry points:

* ``replay`` feeds an explicit event stream through the merges; given the
  chunks the compiled kernel consumed it must reproduce the kernel's metrics.
* ``run_clocks`` keeps one clock per channel in a heap, which also handles
  renewal (non-exponential) inter-arrival distributions.
"""
from __future__ import annotations

import heapq
from dataclasses import replace

import numpy as np

from .. import protocols as P
from ..protocols import NodeState, ProtocolSpec
from ..topology import Network
from .clocks import GOSSIP, SELF_UPDATE, SOURCE, UNRELIABLE_SOURCE, Distribution, EventClock, Exponential
from .events import Channels, channel_table
from .simulate import Metrics, as_seed_sequence


class _Book:
    """Node packets plus exact metric integrals, mirroring the kernel arithmetic."""

    def __init__(self, n: int, proto: ProtocolSpec, warmup: float, moments: int):
        self.proto = proto
        self.warmup = warmup
        self.states = [NodeState() for _ in range(n)]
        self.last = [0.0] * n
        self.acc_v = np.zeros((n, moments))
        self.acc_a = np.zeros((n, moments))
        self.flag_int = 0.0
        self.flag_last = 0.0
        self.flag_count = float(sum(self._flag(s) for s in self.states))

    def _flag(self, s: NodeState) -> int:
        if self.proto.variant == "g_gap":
            return s.reliability
        if self.proto.variant == "mutation":
            return s.truth
        return 0

    def flush(self, i: int, t: float) -> None:
        a = self.last[i]
        if t > self.warmup:
            if a < self.warmup:
                a = self.warmup
            dt = t - a
            if dt > 0.0:
                s = self.states[i]
                x = float(s.version_age)
                p = 1.0
                a0 = a - s.gen_time
                a1 = t - s.gen_time
                p0, p1 = a0, a1
                for m in range(self.acc_v.shape[1]):
                    p *= x
                    self.acc_v[i, m] += p * dt
                    p0 *= a0
                    p1 *= a1
                    self.acc_a[i, m] += (p1 - p0) / (m + 2)
        self.last[i] = t

    def flush_flags(self, t: float) -> None:
        a = self.flag_last
        if t > self.warmup:
            if a < self.warmup:
                a = self.warmup
            if t > a:
                self.flag_int += self.flag_count * (t - a)
        self.flag_last = t

    def self_update(self, t: float) -> None:
        for i in range(len(self.states)):
            self.flush(i, t)
        self.states = list(P.apply_source_update_all(self.states))

    def source(self, t: float, j: int, reliability: int) -> None:
        v = self.proto.variant
        recv = self.states[j]
        pkt = P.fresh_packet(t, reliability)
        if v == "baseline_version":
            new = P.merge_baseline(recv, pkt, "version")
        elif v == "baseline_aoi":
            new = P.merge_baseline(recv, pkt, "aoi")
        elif v == "g_gap":
            new = P.merge_g_gap(recv, pkt, self.proto.gap)
        elif v == "mutation":
            new = P.merge_mutation(recv, pkt)
        else:
            new = P.merge_timestomped(recv, pkt)
        if new is pkt:
            # an adopted source packet always overwrites all fields
            self.flush(j, t)
            f_old, f_new = self._flag(recv), self._flag(pkt)
            if f_old != f_new:
                self.flush_flags(t)
                self.flag_count += f_new - f_old
            self.states[j] = pkt

    def gossip(self, t: float, i: int, j: int, u0: float, u1: float) -> None:
        v = self.proto.variant
        recv, send = self.states[j], self.states[i]
        if v == "baseline_version":
            new = P.merge_baseline(recv, send, "version")
        elif v == "baseline_aoi":
            new = P.merge_baseline(recv, send, "aoi")
        elif v == "g_gap":
            new = P.merge_g_gap(recv, send, self.proto.gap)
        elif v == "mutation":
            new = P.merge_mutation(recv, P.mutate_in_flight(send, 0 if u0 < self.proto.p_mut else 1))
        else:
            claim = send.claimed
            adv = self.proto.adversaries
            if i + 1 in adv:
                claim = P.timestomp_transform(claim, t, "outgoing", self.proto.policy, u0)
            if j + 1 in adv:
                claim = P.timestomp_transform(claim, t, "incoming", self.proto.policy, u1)
            new = P.merge_timestomped(recv, replace(send, claimed=claim))
        if new is not recv:
            self.flush(j, t)
            f_old, f_new = self._flag(recv), self._flag(new)
            if f_old != f_new:
                self.flush_flags(t)
                self.flag_count += f_new - f_old
            self.states[j] = new

    def apply(self, t: float, kind: int, i: int, j: int, u0: float = 0.5, u1: float = 0.5) -> None:
        if kind == SELF_UPDATE:
            self.self_update(t)
        elif kind == SOURCE:
            self.source(t, j, P.RELIABLE)
        elif kind == UNRELIABLE_SOURCE:
            self.source(t, j, P.UNRELIABLE)
        else:
            self.gossip(t, i, j, u0, u1)

    def metrics(self, horizon: float, n: int) -> Metrics:
        for i in range(n):
            self.flush(i, horizon)
        self.flush_flags(horizon)
        span = horizon - self.warmup
        mv, ma = self.acc_v / span, self.acc_a / span
        fraction = None
        if self.proto.variant in ("g_gap", "mutation"):
            fraction = self.flag_int / span / n
        return Metrics(mv[:, 0].copy(), ma[:, 0].copy(), mv, ma, horizon, self.warmup, fraction=fraction)


def _static_only(proto: ProtocolSpec) -> None:
    if proto.variant not in ("baseline_version", "baseline_aoi", "g_gap", "mutation", "timestomp"):
        raise ValueError(f"reference engine does not run {proto.variant!r}")


def replay(net: Network, proto: ProtocolSpec, channels: Channels, chunks, horizon: float, warmup: float,
           moments: int = 2) -> Metrics:
    """Apply an explicit event stream (``EventChunk`` iterable) through the merges."""
    _static_only(proto)
    book = _Book(net.n, proto, warmup, moments)
    for ch in chunks:
        for t, c, (u0, u1) in zip(ch.times.tolist(), ch.channel.tolist(), ch.uniforms.tolist()):
            book.apply(t, int(channels.kind[c]), int(channels.src[c]), int(channels.dst[c]), u0, u1)
    return book.metrics(horizon, net.n)


def make_clocks(net: Network, proto: ProtocolSpec | None = None,
                distributions: dict[tuple[int, int, int], Distribution] | None = None) -> list[EventClock]:
    """One clock per channel.  ``distributions`` maps ``(kind, i, j)`` (1-based,
    0 = source) to a renewal distribution; others are exponential at the channel rate."""
    ch = channel_table(net, proto)
    distributions = distributions or {}
    clocks = []
    for k in range(len(ch)):
        key = (int(ch.kind[k]), int(ch.src[k]) + 1, int(ch.dst[k]) + 1)
        clocks.append(EventClock(*key, distributions.get(key, Exponential(float(ch.rate[k])))))
    return clocks


def run_clocks(net: Network, proto: ProtocolSpec | None = None, horizon: float = 1000.0,
               warmup: float | None = None, seed=0, moments: int = 2,
               distributions: dict[tuple[int, int, int], Distribution] | None = None) -> Metrics:
    """Heap of per-channel clocks; equal times pop in (time, kind, i, j) order."""
    proto = proto or ProtocolSpec()
    _static_only(proto)
    warmup = 0.1 * horizon if warmup is None else float(warmup)
    if not horizon > warmup >= 0:
        raise ValueError("need horizon > warmup >= 0")
    rng = np.random.default_rng(as_seed_sequence(seed))
    clocks = make_clocks(net, proto, distributions)
    heap = []
    for idx, c in enumerate(clocks):
        c.reschedule(0.0, rng)
        heap.append((c.next_fire_time, c.kind, c.i, c.j, idx))
    heapq.heapify(heap)
    book = _Book(net.n, proto, warmup, moments)
    counts = [0] * len(clocks)
    while heap and heap[0][0] <= horizon:
        t, kind, i, j, idx = heapq.heappop(heap)
        counts[idx] += 1
        u0, u1 = rng.random(2)
        book.apply(t, kind, i - 1, j - 1, float(u0), float(u1))
        c = clocks[idx]
        c.reschedule(t, rng)
        heapq.heappush(heap, (c.next_fire_time, c.kind, c.i, c.j, idx))
    m = book.metrics(horizon, net.n)
    m.event_counts = {"per_channel": np.array(counts)}
    return m
