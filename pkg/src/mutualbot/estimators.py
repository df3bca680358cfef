"""scikit-learn style wrappers around the graph, community and detection steps."""
from __future__ import annotations

from typing import Iterable, Mapping

import numpy as np
from scipy import sparse
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.utils.validation import check_is_fitted

from .detector import DetectorConfig, candidate_score, classify_community, resolve_rho
from .graph import (
    ContactMap,
    MutualContactsGraph,
    apply_graph_delta,
    contact_delta,
    expire_contacts,
    record_contacts,
)
from .louvain import louvain, modularity


def _check_graph(X) -> MutualContactsGraph:
    if not isinstance(X, MutualContactsGraph):
        raise TypeError(f"expected a MutualContactsGraph, got {type(X).__name__}")
    return X


def _rounds(X) -> dict[int, list[tuple[str, str]]]:
    grouped: dict[int, list[tuple[str, str]]] = {}
    for row in X:
        if len(row) != 3:
            raise ValueError(f"expected (round, src, dst) rows, got {row!r}")
        r, src, dst = row
        if int(r) < 0:
            raise ValueError("round indices must be non-negative")
        grouped.setdefault(int(r), []).append((src, dst))
    return grouped


class MutualContacts(BaseEstimator):
    """Sliding-window mutual-contacts matrix built from ``(round, src, dst)`` rows.

    Rounds are consumed in ascending order. ``partial_fit`` continues from the
    current state and requires rounds newer than the last one seen.
    """

    def __init__(self, window: int = 4):
        self.window = window

    def _reset(self):
        self.contacts_ = ContactMap()
        self.graph_ = MutualContactsGraph()
        self.last_round_ = -1

    def fit(self, X, y=None):
        self._reset()
        return self.partial_fit(X)

    def partial_fit(self, X, y=None):
        if not isinstance(self.window, int) or self.window < 1:
            raise ValueError("window must be a positive integer")
        if not hasattr(self, "graph_"):
            self._reset()
        grouped = _rounds(X)
        if grouped and min(grouped) <= self.last_round_:
            raise ValueError(f"round {min(grouped)} is not newer than {self.last_round_}")
        for r in sorted(grouped):
            recorded = record_contacts(self.contacts_, grouped[r], r)
            kept, _ = expire_contacts(recorded, r, self.window)
            self.graph_ = apply_graph_delta(self.graph_, contact_delta(self.contacts_, kept))
            self.contacts_ = kept
            self.last_round_ = r
        self.hosts_ = self.graph_.sorted_vertices()
        return self

    def transform(self, X=None) -> sparse.csr_matrix:
        """Symmetric sparse matrix of the fitted graph, rows ordered as ``hosts_``."""
        check_is_fitted(self, "graph_")
        index = {h: i for i, h in enumerate(self.hosts_)}
        rows, cols, vals = [], [], []
        for u, v, w in self.graph_.edge_triples():
            rows += [index[u], index[v]]
            cols += [index[v], index[u]]
            vals += [w, w]
        n = len(self.hosts_)
        return sparse.csr_matrix((np.asarray(vals, dtype=np.int64), (rows, cols)), shape=(n, n))

    def fit_transform(self, X, y=None) -> sparse.csr_matrix:
        return self.fit(X).transform()


class LouvainCommunities(ClusterMixin, BaseEstimator):
    """Deterministic Louvain partition of a :class:`MutualContactsGraph`."""

    def fit(self, X, y=None, seed: Mapping[str, int] | None = None):
        graph = _check_graph(X)
        self.vertices_ = graph.sorted_vertices()
        self.partition_ = louvain(graph, seed=seed)
        self.labels_ = np.array([self.partition_[v] for v in self.vertices_], dtype=np.int64)
        self.modularity_ = modularity(graph, self.partition_) if graph.weights else None
        return self


class BotnetDetector(BaseEstimator):
    """Labels communities of a fitted matrix as ``"benign"`` or ``"botnet"``.

    ``fit`` resolves the pivotal-node threshold ``rho_`` for the matrix;
    ``predict`` classifies member sets against it.
    """

    def __init__(self, theta: float = 5.0, phi: float = 0.5, rho="auto", rho_sigmas: float = 2.5):
        self.theta = theta
        self.phi = phi
        self.rho = rho
        self.rho_sigmas = rho_sigmas

    def fit(self, X, y=None):
        self.graph_ = _check_graph(X)
        self.config_ = DetectorConfig(self.theta, self.phi, self.rho, self.rho_sigmas)
        self.rho_ = resolve_rho(self.config_, self.graph_)
        return self

    def _members(self, communities: Iterable[Iterable[str]]) -> list[frozenset[str]]:
        check_is_fitted(self, "rho_")
        out = [frozenset(c) for c in communities]
        for m in out:
            if not m:
                raise ValueError("empty community")
            missing = m - self.graph_.vertices
            if missing:
                raise ValueError(f"hosts not in the fitted graph: {sorted(missing)}")
        return out

    def decision_function(self, communities: Iterable[Iterable[str]]) -> np.ndarray:
        """Average intra-community mutual contacts per member."""
        return np.array([candidate_score(m, self.graph_) for m in self._members(communities)])

    def predict(self, communities: Iterable[Iterable[str]]) -> np.ndarray:
        return np.array([
            classify_community(m, self.graph_, self.config_, self.rho_).value
            for m in self._members(communities)
        ], dtype=object)
