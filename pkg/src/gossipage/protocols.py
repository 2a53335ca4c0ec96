"""Reset maps applied when a source update or a gossip packet arrives.

Every merge takes the receiver's stored packet and the delivered packet and
returns the packet the receiver keeps.  Ties keep the receiver's packet
unless a rule says otherwise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

RELIABLE, UNRELIABLE = 0, 1
TRUE, MISINFORMATION = 1, 0

VARIANTS = (
    "baseline_version",
    "baseline_aoi",
    "g_gap",
    "mutation",
    "timestomp",
    "asuman",
    "semi_distributed",
    "fully_distributed",
)


@dataclass(frozen=True, slots=True)
class NodeState:
    """Packet held by a node.

    ``gen_time`` is the true generation time (AoI is ``now - gen_time``);
    ``claimed`` is the timestamp written on the packet, which only a
    timestomping adversary makes differ from ``gen_time``.
    """

    version_age: int = 0
    gen_time: float = 0.0
    reliability: int = RELIABLE
    truth: int = TRUE
    claimed: float = 0.0

    def aoi(self, now: float) -> float:
        return now - self.gen_time


def fresh_packet(now: float, reliability: int = RELIABLE) -> NodeState:
    """Packet delivered straight from the source at time ``now``."""
    return NodeState(0, now, reliability, TRUE, now)


def merge_baseline(receiver: NodeState, sender: NodeState, mode: str = "version") -> NodeState:
    if mode == "version":
        return sender if sender.version_age < receiver.version_age else receiver
    if mode == "aoi":
        return sender if sender.gen_time > receiver.gen_time else receiver
    raise ValueError(f"unknown metric mode {mode!r}")


def apply_source_update_all(states: Sequence[NodeState]) -> tuple[NodeState, ...]:
    return tuple(replace(s, version_age=s.version_age + 1) for s in states)


def merge_g_gap(receiver: NodeState, sender: NodeState, gap: float) -> NodeState:
    """Reliable/unreliable acceptance rule with tolerance ``gap`` (may be ``math.inf``)."""
    xr, xs = receiver.version_age, sender.version_age
    if receiver.reliability == sender.reliability:
        return sender if xs < xr else receiver
    if sender.reliability == RELIABLE:
        return sender if xs <= xr + gap else receiver
    return receiver if xr <= xs + gap else sender


def mutate_in_flight(sender: NodeState, h: int) -> NodeState:
    """Copy put on the wire; ``h == 0`` corrupts it into misinformation."""
    return sender if h else replace(sender, truth=MISINFORMATION)


def merge_mutation(receiver: NodeState, delivered: NodeState) -> NodeState:
    if delivered.version_age != receiver.version_age:
        return delivered if delivered.version_age < receiver.version_age else receiver
    if delivered.truth == TRUE and receiver.truth != TRUE:
        return delivered
    return receiver


@dataclass(frozen=True)
class TimestompPolicy:
    """Probabilities of rewriting a timestamp to ``now`` (raise) or ``0`` (lower)."""

    raise_out: float = 0.0
    lower_out: float = 0.0
    raise_in: float = 0.0
    lower_in: float = 0.0

    def __post_init__(self):
        for name in ("raise_out", "lower_out", "raise_in", "lower_in"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must be a probability, got {p}")
        if self.raise_out + self.lower_out > 1 or self.raise_in + self.lower_in > 1:
            raise ValueError("raise and lower probabilities of one direction exceed 1")

    @classmethod
    def aggressive(cls) -> "TimestompPolicy":
        return cls(raise_out=1.0, lower_in=1.0)

    def probabilities(self, direction: str) -> tuple[float, float]:
        if direction == "outgoing":
            return self.raise_out, self.lower_out
        if direction == "incoming":
            return self.raise_in, self.lower_in
        raise ValueError(f"direction must be 'incoming' or 'outgoing', got {direction!r}")


def timestomp_transform(stamp: float, now: float, direction: str, policy: TimestompPolicy, u: float = 0.5) -> float:
    """Rewrite a claimed timestamp; ``u`` is a uniform(0, 1) draw."""
    p_raise, p_lower = policy.probabilities(direction)
    if u < p_raise:
        return now
    if u < p_raise + p_lower:
        return 0.0
    return stamp


def merge_timestomped(receiver: NodeState, delivered: NodeState) -> NodeState:
    """Adopt on a strictly later claimed timestamp; the true age may get worse."""
    return delivered if delivered.claimed > receiver.claimed else receiver


def asuman_active_set(version_ages: Sequence[int], capacity: float) -> tuple[frozenset[int], float]:
    """Minimum-age nodes (1-based ids) at a source update epoch and the rate each gets."""
    if len(version_ages) == 0:
        raise ValueError("empty network")
    low = min(version_ages)
    active = frozenset(i + 1 for i, x in enumerate(version_ages) if x == low)
    return active, capacity / len(active)


def minage_leader(leader: int | None, delivered_to: int) -> int:
    """Semi-distributed scheme: the node that just heard the source leads."""
    return delivered_to


def fully_distributed_active(delivery_times: dict[int, float], now: float, duration: float) -> frozenset[int]:
    """Nodes still inside their gossip window ``[delivery, delivery + duration)``."""
    return frozenset(i for i, t in delivery_times.items() if t <= now < t + duration)


@dataclass(frozen=True)
class ProtocolSpec:
    """Protocol variant plus its parameters.

    ``unreliable_rate`` is the total rate of the unreliable source in
    ``g_gap`` mode, split equally over the nodes the reliable source reaches.
    ``adversaries`` are 1-based node ids for ``timestomp``.
    ``duration`` is the gossip window of ``fully_distributed`` (default 1/lam).
    """

    variant: str = "baseline_version"
    gap: float = 0.0
    p_mut: float = 0.0
    unreliable_rate: float = 0.0
    adversaries: tuple[int, ...] = ()
    policy: TimestompPolicy = field(default_factory=TimestompPolicy)
    capacity: float | None = None
    duration: float | None = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown protocol variant {self.variant!r}")
        if not 0.0 <= self.p_mut <= 1.0:
            raise ValueError("p_mut must be a probability")
        if self.gap < 0 or (isinstance(self.gap, float) and math.isnan(self.gap)):
            raise ValueError("G must be >= 0")
        if self.unreliable_rate < 0:
            raise ValueError("unreliable source rate must be >= 0")

    @property
    def metric(self) -> str:
        return "aoi" if self.variant in ("baseline_aoi", "timestomp") else "version"
