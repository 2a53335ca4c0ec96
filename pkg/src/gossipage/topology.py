"""Rate graphs for gossip networks.

Nodes are numbered ``1..n``; index ``0`` is the source.  A :class:`Network`
stores the directed gossip rates ``rate(i, j)``, the per-node source rates
``rate(0, j)`` and the source self-update rate ``rate(0, 0)``.
"""
from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

KINDS = (
    "fully_connected",
    "ring_bidirectional",
    "ring_unidirectional",
    "line",
    "grid",
    "generalized_ring",
    "clustered",
    "arbitrary",
)
_ALIASES = {"fc": "fully_connected", "ring": "ring_bidirectional", "uniring": "ring_unidirectional"}


class TopologyError(ValueError):
    pass


@dataclass(frozen=True)
class Network:
    n: int
    gossip_rates: dict[tuple[int, int], float]
    source_rates: dict[int, float]
    self_update_rate: float
    label: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.n < 1:
            raise TopologyError("network needs at least one node")
        if not (math.isfinite(self.self_update_rate) and self.self_update_rate >= 0):
            raise TopologyError(f"bad self-update rate {self.self_update_rate}")
        for (i, j), r in self.gossip_rates.items():
            if i == j:
                raise TopologyError(f"self-loop on node {i}")
            if not (1 <= i <= self.n and 1 <= j <= self.n):
                raise TopologyError(f"edge ({i}, {j}) outside 1..{self.n}")
            if not (math.isfinite(r) and r >= 0):
                raise TopologyError(f"bad rate {r} on edge ({i}, {j})")
        for j, r in self.source_rates.items():
            if not 1 <= j <= self.n:
                raise TopologyError(f"source edge to {j} outside 1..{self.n}")
            if not (math.isfinite(r) and r >= 0):
                raise TopologyError(f"bad source rate {r} to node {j}")

    @property
    def kind(self) -> str:
        return self.label.get("kind", "arbitrary")

    def rate(self, i: int, j: int) -> float:
        if i == 0 and j == 0:
            return self.self_update_rate
        if i == 0:
            return self.source_rates.get(j, 0.0)
        return self.gossip_rates.get((i, j), 0.0)

    def gossip_matrix(self) -> np.ndarray:
        """Dense ``(n, n)`` array, entry ``[i-1, j-1]`` is the rate from i to j."""
        w = np.zeros((self.n, self.n))
        for (i, j), r in self.gossip_rates.items():
            w[i - 1, j - 1] = r
        return w

    def source_vector(self) -> np.ndarray:
        s = np.zeros(self.n)
        for j, r in self.source_rates.items():
            s[j - 1] = r
        return s

    def out_neighbors(self, i: int) -> list[int]:
        return sorted(j for (a, j), r in self.gossip_rates.items() if a == i and r > 0)

    def undirected_links(self) -> list[tuple[int, int]]:
        return sorted({(min(i, j), max(i, j)) for (i, j), r in self.gossip_rates.items() if r > 0})

    def with_source_rates(self, rates: Iterable[float]) -> "Network":
        rates = list(rates)
        if len(rates) != self.n:
            raise TopologyError(f"expected {self.n} source rates, got {len(rates)}")
        src = {j + 1: float(r) for j, r in enumerate(rates) if r > 0}
        return Network(self.n, dict(self.gossip_rates), src, self.self_update_rate, dict(self.label))

    def with_self_update_rate(self, rate: float) -> "Network":
        return Network(self.n, dict(self.gossip_rates), dict(self.source_rates), float(rate), dict(self.label))

    # plain-text edge list --------------------------------------------------

    def to_text(self) -> str:
        lines = [f"# label {json.dumps(self.label, sort_keys=True)}", f"{self.n} {self.self_update_rate!r}"]
        for j in sorted(self.source_rates):
            lines.append(f"src {j} {self.source_rates[j]!r}")
        for i, j in sorted(self.gossip_rates):
            lines.append(f"edge {i} {j} {self.gossip_rates[(i, j)]!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Network":
        label: dict = {}
        header = None
        src: dict[int, float] = {}
        edges: dict[tuple[int, int], float] = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                if line.startswith("# label "):
                    label = json.loads(line[len("# label "):])
                continue
            parts = line.split()
            try:
                if header is None:
                    header = (int(parts[0]), float(parts[1]))
                elif parts[0] == "src" and len(parts) == 3:
                    src[int(parts[1])] = float(parts[2])
                elif parts[0] == "edge" and len(parts) == 4:
                    edges[(int(parts[1]), int(parts[2]))] = float(parts[3])
                else:
                    raise ValueError(parts[0])
            except (ValueError, IndexError) as exc:
                raise TopologyError(f"line {lineno}: cannot parse {raw!r}") from exc
        if header is None:
            raise TopologyError("missing header line 'n lambda_e'")
        return cls(header[0], edges, src, header[1], label)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path: str | Path) -> "Network":
        return cls.from_text(Path(path).read_text())


@dataclass(frozen=True)
class JammerPlan:
    """``count`` jammed undirected links placed ``equidistant``, ``adjacent``,
    ``greedy`` (fully connected only) or from an ``explicit`` list."""

    count: int
    placement: str = "equidistant"
    edges: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        if self.placement not in ("equidistant", "adjacent", "greedy", "explicit"):
            raise TopologyError(f"unknown jammer placement {self.placement!r}")
        if self.placement == "explicit" and self.count != len(self.edges):
            object.__setattr__(self, "count", len(self.edges))
        if self.count < 0:
            raise TopologyError("jammer count must be non-negative")


# builders ------------------------------------------------------------------


def _split(neighbors: dict[int, list[int]], lam: float) -> dict[tuple[int, int], float]:
    edges = {}
    for i, nbrs in neighbors.items():
        if not nbrs:
            raise TopologyError(f"node {i} has no neighbors")
        r = lam / len(nbrs)
        for j in nbrs:
            edges[(i, j)] = r
    return edges


def _flat_source(n: int, lam_source: float) -> dict[int, float]:
    return {j: lam_source / n for j in range(1, n + 1)} if lam_source > 0 else {}


def _ring_neighbors(n: int, f: int = 1, directed: bool = False) -> dict[int, list[int]]:
    nbrs = {}
    for i in range(n):
        if directed:
            out = [(i + 1) % n]
        else:
            out = sorted({(i + d) % n for d in range(1, f + 1)} | {(i - d) % n for d in range(1, f + 1)})
        nbrs[i + 1] = [j + 1 for j in out if j != i]
    return nbrs


def grid_side(n: int) -> int:
    k = math.isqrt(n)
    if k * k != n:
        raise TopologyError(f"grid needs a perfect square node count, got {n}")
    return k


def _grid_neighbors(k: int) -> dict[int, list[int]]:
    nbrs = {}
    for r in range(k):
        for c in range(k):
            out = []
            for dr, dc in ((-1, 0), (0, -1), (0, 1), (1, 0)):
                rr, cc = r + dr, c + dc
                if 0 <= rr < k and 0 <= cc < k:
                    out.append(rr * k + cc + 1)
            nbrs[r * k + c + 1] = out
    return nbrs


def build(
    kind: str,
    n: int,
    lam: float = 1.0,
    lam_source: float = 1.0,
    lam_e: float = 1.0,
    **params,
) -> Network:
    """Build a standard topology where every node gossips at total rate ``lam``
    split equally over its out-neighbors.

    Kind-specific parameters: ``f`` for ``generalized_ring``; ``k``,
    ``intra_kind`` (fully_connected/ring/disconnected), ``head_kind``
    (none/ring), ``lam_c`` and ``lam_h`` for ``clustered``; ``edges`` and
    ``source`` mappings for ``arbitrary``.
    """
    kind = _ALIASES.get(kind, kind)
    if kind not in KINDS:
        raise TopologyError(f"unknown topology kind {kind!r}")
    if n < 1:
        raise TopologyError("n must be >= 1")
    if min(lam, lam_source, lam_e) < 0:
        raise TopologyError("rates must be non-negative")
    label = {"kind": kind, "n": n, "lam": lam, "lam_source": lam_source}

    if kind == "arbitrary":
        edges = {tuple(map(int, e)): float(r) for e, r in dict(params.get("edges", {})).items()}
        src = {int(j): float(r) for j, r in dict(params.get("source", {})).items()}
        return Network(n, edges, src, lam_e, label)

    if kind == "clustered":
        return _build_clustered(n, lam, lam_source, lam_e, label, **params)

    if n == 1:
        return Network(1, {}, _flat_source(1, lam_source), lam_e, label)

    if kind == "fully_connected":
        nbrs = {i: [j for j in range(1, n + 1) if j != i] for i in range(1, n + 1)}
    elif kind == "ring_bidirectional":
        nbrs = _ring_neighbors(n)
    elif kind == "ring_unidirectional":
        nbrs = _ring_neighbors(n, directed=True)
    elif kind == "line":
        nbrs = {i: [j for j in (i - 1, i + 1) if 1 <= j <= n] for i in range(1, n + 1)}
    elif kind == "grid":
        k = grid_side(n)
        label["side"] = k
        nbrs = _grid_neighbors(k)
    else:  # generalized_ring
        f = params.get("f")
        if f is None:
            raise TopologyError("generalized_ring needs parameter f")
        f = int(f)
        if f < 1 or f >= n / 2:
            raise TopologyError(f"generalized ring needs 1 <= f < n/2, got f={f}, n={n}")
        label["f"] = f
        nbrs = _ring_neighbors(n, f)
    return Network(n, _split(nbrs, lam), _flat_source(n, lam_source), lam_e, label)


def _build_clustered(n, lam, lam_source, lam_e, label, k=None, intra_kind="fully_connected",
                     head_kind="none", lam_c=None, lam_h=None, **_):
    """``n`` member nodes in ``k`` equal clusters plus ``k`` heads (nodes
    ``n+1..n+k``).  Only the heads hear the source."""
    if k is None or k < 1 or n % k:
        raise TopologyError(f"clustered needs k dividing n, got n={n}, k={k}")
    m = n // k
    lam_c = lam if lam_c is None else lam_c
    lam_h = lam if lam_h is None else lam_h
    edges: dict[tuple[int, int], float] = {}
    heads = list(range(n + 1, n + k + 1))
    for c in range(k):
        members = list(range(c * m + 1, c * m + m + 1))
        head = heads[c]
        for j in members:
            edges[(head, j)] = lam_c / m
        if m > 1 and intra_kind != "disconnected":
            if intra_kind == "fully_connected":
                local = {a: [b for b in members if b != a] for a in members}
            elif intra_kind in ("ring", "ring_bidirectional"):
                local = {members[i]: [members[j - 1] for j in _ring_neighbors(m)[i + 1]] for i in range(m)}
            else:
                raise TopologyError(f"unknown intra-cluster kind {intra_kind!r}")
            edges.update(_split(local, lam))
    if head_kind in ("ring", "ring_bidirectional") and k > 1:
        for c in range(k):
            for d in ((c + 1) % k, (c - 1) % k):
                if d != c:
                    edges[(heads[c], heads[d])] = edges.get((heads[c], heads[d]), 0.0) + lam_h / 2
    elif head_kind not in ("none", None, "ring", "ring_bidirectional"):
        raise TopologyError(f"unknown head kind {head_kind!r}")
    src = {h: lam_source / k for h in heads} if lam_source > 0 else {}
    label.update(k=k, m=m, intra_kind=intra_kind, head_kind=head_kind, lam_c=lam_c, lam_h=lam_h, heads=heads)
    return Network(n + k, edges, src, lam_e, label)


# jamming -------------------------------------------------------------------


def ring_link(index: int, n: int) -> tuple[int, int]:
    """Undirected ring link number ``index`` joins nodes ``index+1`` and ``index+2`` (mod n)."""
    a, b = index % n + 1, (index + 1) % n + 1
    return (min(a, b), max(a, b))


def _greedy_fc_links(n: int, count: int) -> list[tuple[int, int]]:
    total = n * (n - 1) // 2
    remaining = total - count
    m = 0
    while m * (m - 1) // 2 < remaining:
        m += 1
    keep_pool = list(combinations(range(1, m + 1), 2))
    surplus = len(keep_pool) - remaining
    dropped_in_ball = keep_pool[:surplus]
    outside = [e for e in combinations(range(1, n + 1), 2) if e[1] > m]
    return dropped_in_ball + outside


def apply_jammers(net: Network, plan: JammerPlan) -> Network:
    """Remove the jammed undirected links in both directions; returns a new network."""
    links = net.undirected_links()
    jammed_before = [tuple(e) for e in net.label.get("jammed", [])]
    if plan.placement == "explicit":
        cut = []
        for a, b in plan.edges:
            e = (min(a, b), max(a, b))
            if e in jammed_before:
                continue
            if e not in links:
                raise TopologyError(f"explicit jammer on missing link {e}")
            cut.append(e)
    else:
        if plan.count > len(links):
            raise TopologyError(f"{plan.count} jammers exceed {len(links)} links")
        kind = net.kind
        if kind in ("ring_bidirectional", "ring_unidirectional"):
            n = net.n
            if plan.placement == "equidistant":
                idx = sorted({(k * n) // plan.count for k in range(plan.count)}) if plan.count else []
            elif plan.placement == "adjacent":
                idx = list(range(plan.count))
            else:
                raise TopologyError("greedy placement applies to fully connected networks")
            cut = [ring_link(i, n) for i in idx]
        elif kind == "fully_connected":
            if plan.placement != "greedy":
                raise TopologyError("fully connected networks use greedy jammer placement")
            cut = _greedy_fc_links(net.n, plan.count)
        else:
            raise TopologyError(f"placement {plan.placement!r} unsupported for {kind}; use explicit edges")
    cut_set = set(cut)
    edges = {(i, j): r for (i, j), r in net.gossip_rates.items() if (min(i, j), max(i, j)) not in cut_set}
    label = dict(net.label)
    label["jammed"] = sorted(set(jammed_before) | cut_set)
    return Network(net.n, edges, dict(net.source_rates), net.self_update_rate, label)


def components(net: Network) -> list[list[int]]:
    """Connected components of the undirected gossip graph (isolated nodes included)."""
    adj = {i: set() for i in range(1, net.n + 1)}
    for a, b in net.undirected_links():
        adj[a].add(b)
        adj[b].add(a)
    seen, comps = set(), []
    for s in range(1, net.n + 1):
        if s in seen:
            continue
        comp, stack = [], [s]
        seen.add(s)
        while stack:
            u = stack.pop()
            comp.append(u)
            for v in adj[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        comps.append(sorted(comp))
    return comps


def line_order(net: Network, comp: Sequence[int]) -> list[int]:
    """Nodes of a path-shaped component listed from one end to the other."""
    nodes = set(comp)
    adj = {i: [] for i in comp}
    for a, b in net.undirected_links():
        if a in nodes and b in nodes:
            adj[a].append(b)
            adj[b].append(a)
    if any(len(v) > 2 for v in adj.values()):
        raise TopologyError("component is not a path")
    ends = sorted(i for i in comp if len(adj[i]) <= 1)
    if not ends:
        raise TopologyError("component is a cycle")
    order, prev = [ends[0]], None
    while len(order) < len(comp):
        nxt = [v for v in adj[order[-1]] if v != prev]
        prev = order[-1]
        order.append(nxt[0])
    return order


# validation ----------------------------------------------------------------


@dataclass
class ValidationReport:
    ok: bool
    unreachable: list[int]
    zero_rate: list[int]
    isolated: list[int]
    out_rate: dict[int, float]
    messages: list[str]


def validate(net: Network) -> ValidationReport:
    out_rate = {i: 0.0 for i in range(1, net.n + 1)}
    in_nbrs = {i: 0 for i in range(1, net.n + 1)}
    adj: dict[int, list[int]] = {i: [] for i in range(1, net.n + 1)}
    for (i, j), r in net.gossip_rates.items():
        out_rate[i] += r
        if r > 0:
            adj[i].append(j)
            in_nbrs[j] += 1
    seen = {j for j, r in net.source_rates.items() if r > 0}
    queue = deque(seen)
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                queue.append(v)
    unreachable = [i for i in range(1, net.n + 1) if i not in seen]
    zero_rate = [i for i, r in out_rate.items() if r == 0]
    isolated = [i for i in range(1, net.n + 1) if out_rate[i] == 0 and in_nbrs[i] == 0]
    msgs = []
    if unreachable:
        msgs.append(f"nodes unreachable from the source (age diverges): {unreachable}")
    if net.self_update_rate <= 0:
        msgs.append("source self-update rate is zero: version ages stay at 0")
    return ValidationReport(not unreachable, unreachable, zero_rate, isolated, out_rate, msgs)
