"""Deterministic weighted Louvain community detection.

Vertices are visited in canonical host order and ties between candidate
communities go to the smallest community id, so every replica computes the
same partition. Gains are compared in the scaled form
``2m * k_i,in - tot_C * k_i``, which stays exact for integer weights.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

from .graph import MutualContactsGraph
from .hosts import sorted_hosts

Partition = dict[str, int]


class UndefinedModularityError(ValueError):
    """Modularity is undefined for a graph without edges."""


@dataclass
class CondensedGraph:
    """One node per community; intra-community weight is kept as a self-loop."""

    nodes: list[int]
    weights: dict[tuple[int, int], float] = field(default_factory=dict)
    self_loops: dict[int, float] = field(default_factory=dict)

    def total_weight(self) -> float:
        return sum(self.weights.values()) + sum(self.self_loops.values())


class _WorkGraph:
    # adj holds off-diagonal weights only; loops[i] is the internal weight (each edge once)
    __slots__ = ("n", "adj", "loops", "degree", "two_m")

    def __init__(self, n: int, adj: list[dict[int, float]], loops: list[float]):
        self.n = n
        self.adj = adj
        self.loops = loops
        self.degree = [sum(adj[i].values()) + 2 * loops[i] for i in range(n)]
        self.two_m = sum(self.degree)

    @classmethod
    def from_graph(cls, graph: MutualContactsGraph, order: list[str]) -> "_WorkGraph":
        index = {v: i for i, v in enumerate(order)}
        adj: list[dict[int, float]] = [{} for _ in order]
        for (u, v), w in graph.weights.items():
            if w:
                a, b = index[u], index[v]
                adj[a][b] = w
                adj[b][a] = w
        return cls(len(order), adj, [0] * len(order))


def _normalize(labels: list[int]) -> list[int]:
    """Renumber communities 0..k-1 by first appearance."""
    remap: dict[int, int] = {}
    return [remap.setdefault(c, len(remap)) for c in labels]


def _modularity(wg: _WorkGraph, labels: list[int]) -> float:
    if wg.two_m == 0:
        raise UndefinedModularityError("modularity is undefined when total edge weight is 0")
    inner: dict[int, float] = {}
    tot: dict[int, float] = {}
    for i in range(wg.n):
        c = labels[i]
        tot[c] = tot.get(c, 0) + wg.degree[i]
        acc = 2 * wg.loops[i]
        for j, w in wg.adj[i].items():
            if labels[j] == c:
                acc += w
        inner[c] = inner.get(c, 0) + acc
    two_m = wg.two_m
    return sum(inner[c] / two_m - (tot[c] / two_m) ** 2 for c in tot)


def _local_moves(wg: _WorkGraph, labels: list[int]) -> tuple[list[int], bool]:
    labels = list(labels)
    tot: dict[int, float] = {}
    for i in range(wg.n):
        tot[labels[i]] = tot.get(labels[i], 0) + wg.degree[i]
    two_m = wg.two_m
    improved = False
    moved = True
    while moved:
        moved = False
        for i in range(wg.n):
            k_i = wg.degree[i]
            if k_i == 0:
                continue
            own = labels[i]
            links: dict[int, float] = {}
            for j, w in wg.adj[i].items():
                c = labels[j]
                links[c] = links.get(c, 0) + w
            tot[own] -= k_i
            stay = two_m * links.get(own, 0) - tot[own] * k_i
            best, best_score = own, stay
            for c in sorted(links):
                if c == own:
                    continue
                score = two_m * links[c] - tot[c] * k_i
                # ascending scan with strict > keeps the smallest id on ties
                if score > best_score:
                    best, best_score = c, score
            tot[best] = tot.get(best, 0) + k_i
            if best != own:
                labels[i] = best
                moved = improved = True
    return labels, improved


def _aggregate(wg: _WorkGraph, labels: list[int]) -> tuple[_WorkGraph, list[int]]:
    """Condense ``wg`` by ``labels``; returns the new graph and node -> new node."""
    node_map = _normalize(labels)
    k = max(node_map) + 1 if node_map else 0
    adj: list[dict[int, float]] = [{} for _ in range(k)]
    loops = [0] * k
    for i in range(wg.n):
        a = node_map[i]
        loops[a] += wg.loops[i]
        for j, w in wg.adj[i].items():
            b = node_map[j]
            if a == b:
                if i < j:
                    loops[a] += w
            else:
                adj[a][b] = adj[a].get(b, 0) + w
    return _WorkGraph(k, adj, loops), node_map


def _labels_for(order: list[str], p: Mapping[str, int]) -> list[int]:
    missing = [v for v in order if v not in p]
    if missing:
        raise ValueError(f"partition does not cover vertices {missing[:5]}")
    return [p[v] for v in order]


def normalize_partition(p: Mapping[str, int]) -> Partition:
    """Renumber community ids 0..k-1 in order of their smallest member."""
    order = sorted_hosts(p)
    return dict(zip(order, _normalize([p[v] for v in order])))


def modularity(graph: MutualContactsGraph, p: Mapping[str, int]) -> float:
    order = graph.sorted_vertices()
    return _modularity(_WorkGraph.from_graph(graph, order), _labels_for(order, p))


def local_move_pass(graph: MutualContactsGraph, p: Mapping[str, int]) -> tuple[Partition, bool]:
    order = graph.sorted_vertices()
    labels, improved = _local_moves(_WorkGraph.from_graph(graph, order), _labels_for(order, p))
    return dict(zip(order, labels)), improved


def aggregate(graph: MutualContactsGraph, p: Mapping[str, int]) -> CondensedGraph:
    order = graph.sorted_vertices()
    labels = _labels_for(order, p)
    wg, node_map = _aggregate(_WorkGraph.from_graph(graph, order), labels)
    # report nodes under the caller's community ids
    ids: dict[int, int] = {}
    for orig, new in zip(labels, node_map):
        ids.setdefault(new, orig)
    cg = CondensedGraph(nodes=[ids[a] for a in range(wg.n)])
    for a in range(wg.n):
        if wg.loops[a]:
            cg.self_loops[ids[a]] = wg.loops[a]
        for b, w in wg.adj[a].items():
            if a < b:
                x, y = sorted((ids[a], ids[b]))
                cg.weights[(x, y)] = w
    return cg


def seed_labels(order: list[str], seed: Mapping[str, int] | None) -> list[int]:
    """Starting labels: seeded vertices keep their community, new ones are singletons."""
    if not seed:
        return list(range(len(order)))
    kept = _normalize([seed[v] for v in order if v in seed])
    labels = []
    it = iter(kept)
    fresh = max(kept) + 1 if kept else 0
    for v in order:
        if v in seed:
            labels.append(next(it))
        else:
            labels.append(fresh)
            fresh += 1
    return labels


def louvain(
    graph: MutualContactsGraph,
    seed: Mapping[str, int] | None = None,
    trace: list[float] | None = None,
) -> Partition:
    """Run Louvain on ``graph``, optionally starting from ``seed``.

    If ``trace`` is given, the vertex-level modularity of the starting
    partition and after every local-move pass is appended to it.
    """
    order = graph.sorted_vertices()
    if not graph.weights:
        return {v: i for i, v in enumerate(order)}
    base = _WorkGraph.from_graph(graph, order)
    wg = base
    labels = seed_labels(order, seed)
    # vertex -> node of the current level
    membership = list(range(base.n))
    if trace is not None:
        trace.append(_modularity(base, labels))
    level = 0
    while True:
        labels, improved = _local_moves(wg, labels)
        flat = [labels[membership[v]] for v in range(base.n)]
        if trace is not None:
            trace.append(_modularity(base, flat))
        if level > 0 and not improved:
            break
        wg, node_map = _aggregate(wg, labels)
        membership = [node_map[membership[v]] for v in range(base.n)]
        labels = list(range(wg.n))
        level += 1
    return dict(zip(order, _normalize(flat)))


def communities(p: Mapping[str, int]) -> dict[int, frozenset[str]]:
    groups: dict[int, set[str]] = {}
    for v, c in p.items():
        groups.setdefault(c, set()).add(v)
    return {c: frozenset(m) for c, m in sorted(groups.items())}


__all__ = [
    "CondensedGraph",
    "Partition",
    "UndefinedModularityError",
    "aggregate",
    "communities",
    "local_move_pass",
    "louvain",
    "modularity",
    "normalize_partition",
    "seed_labels",
]
