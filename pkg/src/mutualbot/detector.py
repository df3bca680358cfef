"""Perturbation check, botnet check and blacklist diffing."""
from __future__ import annotations

import math
import statistics
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Union

from .graph import MutualContactsGraph
from .hosts import host_key, sorted_hosts
from .louvain import communities

RHO_FLOOR = 10.0


class Label(str, Enum):
    BENIGN = "benign"
    BOTNET = "botnet"


@dataclass(frozen=True)
class CommunityRecord:
    id: int
    members: frozenset[str]
    label: Label

    def __post_init__(self):
        if not self.members:
            raise ValueError("community must have at least one member")


CommunitySet = tuple[CommunityRecord, ...]


@dataclass(frozen=True)
class DetectorConfig:
    """Detection thresholds.

    ``rho="auto"`` derives the pivotal-node threshold from the current matrix,
    see :func:`resolve_rho`. The defaults were picked for the bundled traffic
    generator and are not calibrated against real traffic.
    """

    theta: float = 5.0
    phi: float = 0.5
    rho: Union[float, str] = "auto"
    rho_sigmas: float = 2.5

    def __post_init__(self):
        for name in ("theta", "phi", "rho_sigmas"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or not math.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be a finite non-negative number, got {v!r}")
        if self.phi > 1:
            raise ValueError("phi must lie in [0, 1]")
        if self.rho != "auto":
            if not isinstance(self.rho, (int, float)) or not math.isfinite(self.rho) or self.rho < 0:
                raise ValueError(f"rho must be 'auto' or a finite non-negative number, got {self.rho!r}")


@dataclass(frozen=True)
class BlacklistDelta:
    additions: frozenset[str] = frozenset()
    removals: frozenset[str] = frozenset()

    def __post_init__(self):
        if self.additions & self.removals:
            raise ValueError("blacklist additions and removals overlap")

    def is_empty(self) -> bool:
        return not (self.additions or self.removals)


def resolve_rho(cfg: DetectorConfig, mcm: MutualContactsGraph) -> float:
    """Pivotal threshold: fixed value, or mean + ``rho_sigmas`` std of all row sums.

    The automatic value never drops below 10.
    """
    if cfg.rho != "auto":
        return float(cfg.rho)
    rows = [mcm.row_sum(v) for v in mcm.sorted_vertices()]
    if not rows:
        return RHO_FLOOR
    return max(RHO_FLOOR, statistics.fmean(rows) + cfg.rho_sigmas * statistics.pstdev(rows))


def match_communities(prev: Iterable[CommunityRecord], new_partition: Mapping[str, int]) -> dict[int, int | None]:
    """Greedy max-overlap matching of new community ids to previous ones."""
    new = communities(new_partition)
    owner = {h: rec.id for rec in prev for h in rec.members}
    overlaps = []
    for cid, members in new.items():
        counts: dict[int, int] = {}
        for h in members:
            if h in owner:
                counts[owner[h]] = counts.get(owner[h], 0) + 1
        overlaps.extend((n, cid, pid) for pid, n in counts.items())
    # descending overlap, then smaller prev id, then smaller new id
    overlaps.sort(key=lambda t: (-t[0], t[2], t[1]))
    result: dict[int, int | None] = {cid: None for cid in new}
    claimed: set[int] = set()
    for _, cid, pid in overlaps:
        if result[cid] is None and pid not in claimed:
            result[cid] = pid
            claimed.add(pid)
    return result


def _intra_edges(members: frozenset[str], graph: MutualContactsGraph) -> dict[tuple[str, str], int]:
    adj = graph.adjacency
    out = {}
    for u in members:
        for v, w in adj.get(u, {}).items():
            if v in members and host_key(u) < host_key(v):
                out[(u, v)] = w
    return out


def perturbation_ratio(
    prev: CommunityRecord,
    members_new: Iterable[str],
    graph_prev: MutualContactsGraph,
    graph_new: MutualContactsGraph,
) -> float:
    members_new = frozenset(members_new)
    e_prev = _intra_edges(prev.members, graph_prev)
    e_new = _intra_edges(members_new, graph_new)
    changes = (
        len(members_new - prev.members)
        + len(prev.members - members_new)
        + len(e_new.keys() - e_prev.keys())
        + len(e_prev.keys() - e_new.keys())
        + sum(1 for k in e_prev.keys() & e_new.keys() if e_prev[k] != e_new[k])
    )
    return changes / max(1, len(prev.members) + len(e_prev))


def candidate_score(members: Iterable[str], mcm: MutualContactsGraph) -> float:
    """Average intra-community mutual contacts per member (ordered-pair sum)."""
    members = frozenset(members)
    adj = mcm.adjacency
    total = sum(w for u in members for v, w in adj.get(u, {}).items() if v in members)
    return total / len(members)


def classify_community(
    members: Iterable[str],
    mcm: MutualContactsGraph,
    cfg: DetectorConfig,
    rho: float | None = None,
) -> Label:
    """Candidate if the intra average exceeds theta; botnet if a member's full row sum reaches rho.

    ``rho`` may be passed pre-resolved to avoid recomputing the automatic
    threshold for every community of the same matrix.
    """
    members = frozenset(members)
    if not members:
        raise ValueError("cannot classify an empty community")
    if candidate_score(members, mcm) <= cfg.theta:
        return Label.BENIGN
    if rho is None:
        rho = resolve_rho(cfg, mcm)
    if any(mcm.row_sum(h) >= rho for h in members):
        return Label.BOTNET
    return Label.BENIGN


def blacklisted(commset: Iterable[CommunityRecord]) -> frozenset[str]:
    return frozenset(h for rec in commset if rec.label is Label.BOTNET for h in rec.members)


def diff_blacklists(prev: Iterable[CommunityRecord], new: Iterable[CommunityRecord]) -> BlacklistDelta:
    before, after = blacklisted(prev), blacklisted(new)
    return BlacklistDelta(additions=after - before, removals=before - after)


def detect(
    prev_commset: CommunitySet,
    partition: Mapping[str, int],
    graph_prev: MutualContactsGraph,
    graph_new: MutualContactsGraph,
    cfg: DetectorConfig,
) -> CommunitySet:
    """Label every community of ``partition``.

    Matched communities whose perturbation ratio stays within phi keep their
    previous label; everything else is classified from scratch.
    """
    matching = match_communities(prev_commset, partition)
    by_id = {rec.id: rec for rec in prev_commset}
    rho = resolve_rho(cfg, graph_new)
    out = []
    for cid, members in communities(partition).items():
        pid = matching[cid]
        if pid is not None:
            prev = by_id[pid]
            if perturbation_ratio(prev, members, graph_prev, graph_new) <= cfg.phi:
                out.append(CommunityRecord(cid, members, prev.label))
                continue
        out.append(CommunityRecord(cid, members, classify_community(members, graph_new, cfg, rho)))
    return tuple(out)


def commset_triples(commset: Iterable[CommunityRecord]) -> list[tuple[str, int, str]]:
    rows = [(h, rec.id, rec.label.value) for rec in commset for h in rec.members]
    return sorted(rows, key=lambda t: host_key(t[0]))


def commset_partition(commset: Iterable[CommunityRecord]) -> dict[str, int]:
    return {h: rec.id for rec in commset for h in sorted_hosts(rec.members)}
