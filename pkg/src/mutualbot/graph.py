"""Contact bookkeeping and the weighted mutual-contacts graph.

A contact is recorded in both directions for every flow. The weight between
two hosts is the number of third hosts both of them have contacted; a direct
contact between the pair is not a mutual contact.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from types import MappingProxyType
from typing import Iterable, Mapping

from .hosts import MalformedFlowError, canonical_pair, check_flows, host_key, sorted_hosts

Pair = tuple[str, str]


class GraphDesyncError(RuntimeError):
    """The graph and the contact data it was derived from disagree."""


class ContactMap:
    """Symmetric host -> {contact: last_seen_round} relation.

    Treated as immutable: the module functions return new instances.
    """

    __slots__ = ("_entries",)

    def __init__(self, entries: Mapping[str, Mapping[str, int]] | None = None):
        self._entries: dict[str, dict[str, int]] = {
            h: dict(c) for h, c in (entries or {}).items() if c
        }

    def hosts(self) -> list[str]:
        return sorted_hosts(self._entries)

    def contacts(self, host: str) -> frozenset[str]:
        return frozenset(self._entries.get(host, ()))

    def last_seen(self, a: str, b: str) -> int | None:
        return self._entries.get(a, {}).get(b)

    def items(self):
        return self._entries.items()

    def __contains__(self, host: str) -> bool:
        return host in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, ContactMap) and self._entries == other._entries

    def __repr__(self) -> str:
        return f"ContactMap({len(self._entries)} hosts)"

    def check(self) -> None:
        for h, cs in self._entries.items():
            if h in cs:
                raise AssertionError(f"{h} lists itself as a contact")
            for c, seen in cs.items():
                if self._entries.get(c, {}).get(h) != seen:
                    raise AssertionError(f"asymmetric contact {h} <-> {c}")


@dataclass(frozen=True)
class GraphDelta:
    vertex_additions: frozenset[str] = frozenset()
    vertex_removals: frozenset[str] = frozenset()
    weight_updates: Mapping[Pair, int] = field(default_factory=dict)

    def __post_init__(self):
        if self.vertex_additions & self.vertex_removals:
            raise ValueError("vertex additions and removals overlap")
        for u, v in self.weight_updates:
            if host_key(u) >= host_key(v):
                raise ValueError(f"weight update key not canonical: {(u, v)}")

    def is_empty(self) -> bool:
        return not (self.vertex_additions or self.vertex_removals or self.weight_updates)


class MutualContactsGraph:
    """Sparse symmetric weighted graph keyed by canonically ordered pairs."""

    __slots__ = ("vertices", "weights", "_adj")

    def __init__(self, vertices: Iterable[str] = (), weights: Mapping[Pair, int] | None = None):
        self.vertices = frozenset(vertices)
        self.weights = MappingProxyType(dict(weights or {}))
        self._adj: dict[str, dict[str, int]] | None = None

    @property
    def adjacency(self) -> dict[str, dict[str, int]]:
        if self._adj is None:
            adj: dict[str, dict[str, int]] = {v: {} for v in self.vertices}
            for (u, v), w in self.weights.items():
                adj[u][v] = w
                adj[v][u] = w
            self._adj = adj
        return self._adj

    def weight(self, a: str, b: str) -> int:
        if a == b:
            return 0
        return self.weights.get(canonical_pair(a, b), 0)

    def row_sum(self, host: str) -> int:
        return sum(self.adjacency.get(host, {}).values())

    def total_weight(self) -> int:
        return sum(self.weights.values())

    def sorted_vertices(self) -> list[str]:
        return sorted_hosts(self.vertices)

    def edge_triples(self) -> list[tuple[str, str, int]]:
        return sorted(
            ((u, v, w) for (u, v), w in self.weights.items()),
            key=lambda t: (host_key(t[0]), host_key(t[1])),
        )

    def check(self) -> None:
        for (u, v), w in self.weights.items():
            if u == v:
                raise AssertionError(f"diagonal entry at {u}")
            if host_key(u) >= host_key(v):
                raise AssertionError(f"non-canonical key {(u, v)}")
            if w < 1 or int(w) != w:
                raise AssertionError(f"bad weight {w} on {(u, v)}")
            if u not in self.vertices or v not in self.vertices:
                raise AssertionError(f"edge {(u, v)} references unknown vertex")

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, MutualContactsGraph)
            and self.vertices == other.vertices
            and dict(self.weights) == dict(other.weights)
        )

    def __repr__(self) -> str:
        return f"MutualContactsGraph({len(self.vertices)} vertices, {len(self.weights)} edges)"


def record_contacts(cmap: ContactMap, flows: Iterable[tuple[str, str]], round_idx: int) -> ContactMap:
    flows = check_flows(flows)
    if not flows:
        return cmap
    entries = {h: dict(c) for h, c in cmap.items()}
    for src, dst in flows:
        for a, b in ((src, dst), (dst, src)):
            row = entries.setdefault(a, {})
            prev = row.get(b)
            row[b] = round_idx if prev is None else max(prev, round_idx)
    return ContactMap(entries)


def expire_contacts(cmap: ContactMap, round_idx: int, window: int) -> tuple[ContactMap, GraphDelta]:
    """Drop contacts last seen before ``round_idx - window``.

    The returned delta only carries ``vertex_removals``: hosts that lost their
    last contact.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    cutoff = round_idx - window
    entries: dict[str, dict[str, int]] = {}
    emptied = set()
    changed = False
    for h, cs in cmap.items():
        kept = {c: seen for c, seen in cs.items() if seen >= cutoff}
        if len(kept) != len(cs):
            changed = True
        if kept:
            entries[h] = kept
        else:
            emptied.add(h)
    if not changed:
        return cmap, GraphDelta()
    return ContactMap(entries), GraphDelta(vertex_removals=frozenset(emptied))


def mutual_contacts(cmap: ContactMap, i: str, j: str) -> int:
    if i == j:
        raise ValueError("mutual contacts of a host with itself are undefined")
    return len((cmap.contacts(i) & cmap.contacts(j)) - {i, j})


def build_mcm(cmap: ContactMap) -> MutualContactsGraph:
    # every contact c of a host contributes one mutual contact to each pair of its neighbours
    weights: dict[Pair, int] = {}
    for _, cs in cmap.items():
        if len(cs) < 2:
            continue
        for a, b in combinations(sorted_hosts(cs), 2):
            weights[(a, b)] = weights.get((a, b), 0) + 1
    return MutualContactsGraph(cmap.hosts(), weights)


def contact_delta(old: ContactMap, new: ContactMap) -> GraphDelta:
    """Graph delta turning ``build_mcm(old)`` into ``build_mcm(new)``.

    Only pairs adjacent to a changed contact are recomputed.
    """
    old_hosts = {h for h, _ in old.items()}
    new_hosts = {h for h, _ in new.items()}
    changed: set[Pair] = set()
    for h in old_hosts | new_hosts:
        before, after = old.contacts(h), new.contacts(h)
        if before != after:
            for c in before ^ after:
                if host_key(h) < host_key(c):
                    changed.add((h, c))
    affected: set[Pair] = set()
    for a, b in changed:
        for x, y in ((a, b), (b, a)):
            # y is (or was) a mutual contact of x and every other neighbour of y
            for z in old.contacts(y) | new.contacts(y):
                if z != x:
                    affected.add(canonical_pair(x, z))
    updates = {}
    for u, v in affected:
        w_new = mutual_contacts(new, u, v) if (u in new and v in new) else 0
        w_old = mutual_contacts(old, u, v) if (u in old and v in old) else 0
        if w_new != w_old:
            updates[(u, v)] = w_new
    removals = old_hosts - new_hosts
    updates = {k: w for k, w in updates.items() if not (w == 0 and (k[0] in removals or k[1] in removals))}
    return GraphDelta(
        vertex_additions=frozenset(new_hosts - old_hosts),
        vertex_removals=frozenset(removals),
        weight_updates=updates,
    )


def apply_graph_delta(graph: MutualContactsGraph, delta: GraphDelta) -> MutualContactsGraph:
    if delta.is_empty():
        return graph
    unknown = delta.vertex_removals - graph.vertices
    if unknown:
        raise GraphDesyncError(f"cannot remove unknown vertices {sorted_hosts(unknown)}")
    vertices = (graph.vertices - delta.vertex_removals) | delta.vertex_additions
    weights = {
        k: w for k, w in graph.weights.items()
        if k[0] not in delta.vertex_removals and k[1] not in delta.vertex_removals
    }
    for (u, v), w in delta.weight_updates.items():
        if w < 0:
            raise ValueError(f"negative weight for {(u, v)}")
        if w == 0:
            weights.pop((u, v), None)
            continue
        if u not in vertices or v not in vertices:
            raise GraphDesyncError(f"weight update {(u, v)} references a missing vertex")
        weights[(u, v)] = w
    return MutualContactsGraph(vertices, weights)


__all__ = [
    "ContactMap",
    "GraphDelta",
    "GraphDesyncError",
    "MalformedFlowError",
    "MutualContactsGraph",
    "apply_graph_delta",
    "build_mcm",
    "contact_delta",
    "expire_contacts",
    "mutual_contacts",
    "record_contacts",
]
