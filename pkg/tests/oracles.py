"""Independent reference implementations used as test oracles.

These deliberately avoid the package's own algorithms: mutual contacts are
computed by explicit pairwise set intersection, modularity by the double sum
over all vertex pairs, and the best partition by exhaustive enumeration.
"""
from __future__ import annotations

import itertools
import random

from mutualbot.graph import ContactMap, MutualContactsGraph
from mutualbot.hosts import host_from_int

BASE = int.from_bytes(bytes([10, 0, 0, 1]), "big")


def ip(i: int) -> str:
    return host_from_int(BASE + i)


def mcm_oracle(contacts: dict[str, set[str]]) -> dict[tuple[str, str], int]:
    """Nonzero mutual-contact counts for every unordered host pair."""
    hosts = sorted(contacts, key=lambda h: tuple(int(x) for x in h.split(".")))
    out = {}
    for a, b in itertools.combinations(hosts, 2):
        n = len((contacts[a] & contacts[b]) - {a, b})
        if n:
            out[(a, b)] = n
    return out


def random_contacts(rng: random.Random, n_hosts: int, density: float) -> dict[str, set[str]]:
    hosts = [ip(i) for i in range(n_hosts)]
    contacts: dict[str, set[str]] = {h: set() for h in hosts}
    for a, b in itertools.combinations(hosts, 2):
        if rng.random() < density:
            contacts[a].add(b)
            contacts[b].add(a)
    return {h: c for h, c in contacts.items() if c}


def contact_map(contacts: dict[str, set[str]], seen: int = 0) -> ContactMap:
    return ContactMap({h: {c: seen for c in cs} for h, cs in contacts.items()})


def modularity_oracle(graph: MutualContactsGraph, partition: dict[str, int]) -> float:
    """Q = 1/2m * sum_ij (A_ij - k_i k_j / 2m) [c_i == c_j] over all ordered pairs."""
    vs = sorted(graph.vertices)
    A = {(u, v): 0.0 for u in vs for v in vs}
    for (u, v), w in graph.weights.items():
        A[(u, v)] = A[(v, u)] = float(w)
    k = {u: sum(A[(u, v)] for v in vs) for u in vs}
    two_m = sum(k.values())
    q = 0.0
    for u in vs:
        for v in vs:
            if partition[u] == partition[v]:
                q += A[(u, v)] - k[u] * k[v] / two_m
    return q / two_m


def set_partitions(n: int):
    """All set partitions of range(n) as restricted growth strings."""
    def rec(prefix, top):
        if len(prefix) == n:
            yield list(prefix)
            return
        for c in range(top + 2):
            prefix.append(c)
            yield from rec(prefix, max(top, c))
            prefix.pop()
    if n == 0:
        yield []
        return
    yield from rec([0], 0)


def best_modularity(graph: MutualContactsGraph) -> float:
    vs = sorted(graph.vertices)
    return max(modularity_oracle(graph, dict(zip(vs, p))) for p in set_partitions(len(vs)))


def random_small_graph(rng: random.Random, n: int, p: float = 0.45, max_w: int = 4) -> MutualContactsGraph:
    hosts = [ip(i) for i in range(n)]
    while True:
        weights = {}
        for a, b in itertools.combinations(hosts, 2):
            if rng.random() < p:
                weights[(a, b)] = rng.randint(1, max_w)
        if weights:
            return MutualContactsGraph(hosts, weights)


def clique_ring(n_cliques: int = 8, size: int = 6, labels: list[str] | None = None,
                rng: random.Random | None = None):
    """Ring of unit-weight cliques joined by one bridge edge between neighbours.

    Returns the graph and the planted partition. ``labels`` maps vertex index
    to host; ``rng`` shuffles the edge insertion order.
    """
    n = n_cliques * size
    labels = labels or [ip(i) for i in range(n)]
    edges = []
    for c in range(n_cliques):
        members = range(c * size, (c + 1) * size)
        edges += list(itertools.combinations(members, 2))
        nxt = (c + 1) % n_cliques
        edges.append((c * size + size - 1, nxt * size))
    if rng is not None:
        rng.shuffle(edges)
    weights = {}
    for a, b in edges:
        u, v = labels[a], labels[b]
        key = (u, v) if tuple(map(int, u.split("."))) < tuple(map(int, v.split("."))) else (v, u)
        weights[key] = 1
    planted = {labels[i]: i // size for i in range(n)}
    return MutualContactsGraph(labels, weights), planted


def as_blocks(partition: dict[str, int]) -> set[frozenset[str]]:
    groups: dict[int, set[str]] = {}
    for v, c in partition.items():
        groups.setdefault(c, set()).add(v)
    return {frozenset(g) for g in groups.values()}
