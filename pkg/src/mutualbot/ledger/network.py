"""In-process replica cluster: proposal, vote and commit over a message bus.

Only crash-silent replicas and invalid proposals are simulated. A failed
height is retried with the next generator in round-robin order.
"""
from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass
from typing import Any, Callable

from ..detector import DetectorConfig
from .chain import (
    Block,
    InvalidBlockError,
    LedgerConfig,
    NetworkDataTransaction,
    TxPool,
    leader_for,
    propose_block,
    quorum_size,
    validate_block,
    vote_and_commit,
)
from .encoding import ZERO_HASH
from .state import ChainState, execute_round, genesis_state

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TxMsg:
    nt: NetworkDataTransaction
    tick: int


@dataclass(frozen=True)
class Proposal:
    block: Block
    view: int


@dataclass(frozen=True)
class Vote:
    voter: int
    height: int
    block_hash: bytes


@dataclass(frozen=True)
class Commit:
    block: Block
    votes: frozenset[int]
    view: int


class Bus:
    """Reliable delivery with per-sender FIFO order.

    ``drain`` interleaves senders round-robin in sender order, which is one
    admissible schedule; replica state must not depend on it.
    """

    def __init__(self):
        self._queues: dict[Any, deque] = {}

    def send(self, sender, recipient, msg) -> None:
        self._queues.setdefault(sender, deque()).append((recipient, msg))

    def pending(self) -> int:
        return sum(len(q) for q in self._queues.values())

    def drain(self, deliver: Callable[[Any, Any, Any], None]) -> None:
        while self.pending():
            for sender in sorted(self._queues, key=str):
                q = self._queues[sender]
                if q:
                    recipient, msg = q.popleft()
                    deliver(sender, recipient, msg)


class Replica:
    def __init__(self, gen_id: int, cfg: LedgerConfig, det_cfg: DetectorConfig):
        self.id = gen_id
        self.cfg = cfg
        self.det_cfg = det_cfg
        self.pool = TxPool()
        self.chain: list[Block] = []
        self.committed_txids: set[bytes] = set()
        self.state: ChainState = genesis_state()
        self.crashed = False
        self.bad_proposer = False
        self.votes: dict[bytes, set[int]] = {}
        self.proposals: dict[bytes, tuple[Block, int]] = {}

    @property
    def pool_addr(self) -> str:
        return f"pool-{self.id}"

    @property
    def tip(self) -> tuple[int, bytes]:
        if not self.chain:
            return -1, ZERO_HASH
        return self.chain[-1].height, self.chain[-1].block_hash

    def receive_tx(self, nt: NetworkDataTransaction, tick: int) -> bool:
        if nt.txid in self.committed_txids:
            return False
        return self.pool.submit(nt, tick)

    def propose(self, height: int, tick: int, view: int) -> Block:
        _, tip_hash = self.tip
        block = propose_block(self.id, self.pool, height, tip_hash, tick, self.cfg, view)
        if self.bad_proposer:
            # corrupt the block so honest validators reject it
            block = Block(block.height, block.prev_hash, block.timestamp, block.txs,
                          block.proposer, bytes(32))
        return block

    def validate(self, block: Block, view: int) -> bool:
        tip_height, tip_hash = self.tip
        try:
            validate_block(block, tip_height, tip_hash, self.cfg, self.committed_txids, view)
        except InvalidBlockError as exc:
            log.debug("replica %d rejects block %d: %s", self.id, block.height, exc)
            return False
        return True

    def commit(self, block: Block, votes: frozenset[int], view: int) -> bool:
        if not self.validate(block, view):
            return False
        if not vote_and_commit(block, votes, self.cfg.n_generators, self.chain, self.pool):
            return False
        self.committed_txids.update(tx.txid for tx in block.txs)
        return True

    def execute_round(self) -> ChainState:
        k = self.cfg.blocks_per_round
        start = len(self.state.blocks)
        blocks = self.chain[start:start + k]
        self.state = execute_round(self.state, blocks, self.cfg, self.det_cfg)
        return self.state


class Cluster:
    """A set of replicas driven height by height."""

    def __init__(self, cfg: LedgerConfig, det_cfg: DetectorConfig):
        self.cfg = cfg
        self.replicas = [Replica(i, cfg, det_cfg) for i in range(cfg.n_generators)]
        self.bus = Bus()
        self.failed_attempts = 0

    @property
    def live(self) -> list[Replica]:
        return [r for r in self.replicas if not r.crashed]

    def crash(self, gen_id: int) -> None:
        self.replicas[gen_id].crashed = True

    def _deliver(self, sender, recipient: int, msg) -> None:
        replica = self.replicas[recipient]
        if replica.crashed:
            return
        if isinstance(msg, TxMsg):
            if replica.receive_tx(msg.nt, msg.tick) and sender == ("agent", recipient):
                # the receiving generator disseminates to every other generator
                for other in self.replicas:
                    if other.id != recipient:
                        self.bus.send(("gen", recipient), other.id, msg)
        elif isinstance(msg, Proposal):
            if replica.validate(msg.block, msg.view):
                self.bus.send(("gen", recipient), msg.block.proposer,
                              Vote(recipient, msg.block.height, msg.block.block_hash))
        elif isinstance(msg, Vote):
            replica.votes.setdefault(msg.block_hash, set()).add(msg.voter)
        elif isinstance(msg, Commit):
            replica.commit(msg.block, msg.votes, msg.view)

    def submit(self, gen_id: int, nt: NetworkDataTransaction, tick: int) -> int:
        """Hand ``nt`` to generator ``gen_id``, failing over to the next live one."""
        n = self.cfg.n_generators
        for k in range(n):
            target = (gen_id + k) % n
            if not self.replicas[target].crashed:
                self.bus.send(("agent", target), target, TxMsg(nt, tick))
                return target
        raise RuntimeError("no live generator")

    def flush(self) -> None:
        self.bus.drain(self._deliver)

    def commit_height(self, tick: int) -> Block:
        """Run proposal/vote/commit for the next height until a block commits."""
        self.flush()
        n = self.cfg.n_generators
        height = max(len(r.chain) for r in self.live)
        for view in range(n + 1):
            leader = self.replicas[leader_for(height, n, view)]
            if leader.crashed:
                self.failed_attempts += 1
                continue
            block = leader.propose(height, tick, view)
            leader.votes = {}
            for r in self.replicas:
                self.bus.send(("gen", leader.id), r.id, Proposal(block, view))
            self.flush()
            votes = frozenset(leader.votes.get(block.block_hash, ()))
            if len(votes) >= quorum_size(n):
                for r in self.replicas:
                    self.bus.send(("gen", leader.id), r.id, Commit(block, votes, view))
                self.flush()
                return block
            log.info("height %d view %d: %d/%d votes, retrying", height, view, len(votes), quorum_size(n))
            self.failed_attempts += 1
        raise RuntimeError(f"no quorum reachable for height {height}")

    def execute_round(self) -> list[ChainState]:
        return [r.execute_round() for r in self.live]

