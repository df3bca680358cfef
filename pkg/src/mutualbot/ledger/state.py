"""Chain state and the per-round state transition."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from ..detector import (
    BlacklistDelta,
    CommunitySet,
    DetectorConfig,
    blacklisted,
    commset_partition,
    commset_triples,
    detect,
    diff_blacklists,
)
from ..graph import (
    ContactMap,
    MutualContactsGraph,
    apply_graph_delta,
    contact_delta,
    expire_contacts,
    record_contacts,
)
from ..hosts import sorted_hosts
from ..louvain import louvain
from .chain import Block, LedgerConfig
from .encoding import ZERO_HASH, encode, merkle_root


class DesyncError(RuntimeError):
    """Blocks handed to the state transition do not extend the state's chain."""


@dataclass(frozen=True)
class ChainState:
    round_index: int
    graph: MutualContactsGraph
    contact_map: ContactMap
    commset: CommunitySet
    blocks: tuple[Block, ...]
    blacklist: frozenset[str]
    state_root: bytes
    # not part of the committed state; kept for reporting
    delta: BlacklistDelta = field(default=BlacklistDelta(), compare=False)

    @property
    def last_block_hash(self) -> bytes:
        return self.blocks[-1].block_hash if self.blocks else ZERO_HASH


def state_leaves(round_index: int, graph: MutualContactsGraph, commset: CommunitySet,
                 blacklist: frozenset[str], last_block_hash: bytes) -> list[bytes]:
    leaves = [encode(("R", round_index))]
    leaves += [encode(("E", u, v, w)) for u, v, w in graph.edge_triples()]
    leaves += [encode(("C", h, c, label)) for h, c, label in commset_triples(commset)]
    leaves += [encode(("B", h)) for h in sorted_hosts(blacklist)]
    leaves.append(encode(("H", last_block_hash)))
    return leaves


def state_root(state: ChainState) -> bytes:
    return merkle_root(state_leaves(state.round_index, state.graph, state.commset,
                                    state.blacklist, state.last_block_hash))


def genesis_state() -> ChainState:
    graph = MutualContactsGraph()
    root = merkle_root(state_leaves(0, graph, (), frozenset(), ZERO_HASH))
    return ChainState(0, graph, ContactMap(), (), (), frozenset(), root)


def execute_round(state: ChainState, new_blocks: Sequence[Block], cfg: LedgerConfig,
                  det_cfg: DetectorConfig) -> ChainState:
    """Apply one round of committed blocks to ``state``."""
    if len(new_blocks) != cfg.blocks_per_round:
        raise DesyncError(f"expected {cfg.blocks_per_round} blocks per round, got {len(new_blocks)}")
    prev_hash, height = state.last_block_hash, len(state.blocks)
    for b in new_blocks:
        if b.height != height or b.prev_hash != prev_hash:
            raise DesyncError(f"block at height {b.height} does not extend height {height - 1}")
        prev_hash, height = b.block_hash, height + 1

    round_idx = state.round_index + 1
    flows = [(nt.ip_src, nt.ip_dest) for b in new_blocks for nt in b.txs]
    cmap = record_contacts(state.contact_map, flows, round_idx)
    cmap, _ = expire_contacts(cmap, round_idx, cfg.contact_window)
    graph = apply_graph_delta(state.graph, contact_delta(state.contact_map, cmap))

    partition = louvain(graph, seed=commset_partition(state.commset))
    commset = detect(state.commset, partition, state.graph, graph, det_cfg)
    blacklist = blacklisted(commset)
    blocks = state.blocks + tuple(new_blocks)
    root = merkle_root(state_leaves(round_idx, graph, commset, blacklist, blocks[-1].block_hash))
    return ChainState(round_idx, graph, cmap, commset, blocks, blacklist, root,
                      diff_blacklists(state.commset, commset))
