"""Network-data transactions, blocks, the transaction pool and quorum rules."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Collection, Iterable

from ..hosts import MalformedFlowError
from .encoding import ZERO_HASH, encode, merkle_root_of_hashes, sha256


class InvalidBlockError(ValueError):
    """A proposal failed validation; validators withhold their vote."""


class WrongLeaderError(InvalidBlockError):
    pass


@dataclass(frozen=True)
class LedgerConfig:
    n_generators: int = 4
    blocks_per_round: int = 3
    tau_ticks: int = 5
    max_block_txs: int = 1024
    contact_window: int = 4

    def __post_init__(self):
        for name in ("n_generators", "blocks_per_round", "tau_ticks", "max_block_txs", "contact_window"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 1:
                raise ValueError(f"{name} must be an integer >= 1, got {v!r}")


@dataclass(frozen=True)
class NetworkDataTransaction:
    """One observed flow as reported by an agent.

    ``nonce`` is the emitting agent's sequence number; without it a flow seen
    again in a later round would collide with its earlier txid.
    """

    device_addr: str
    ip_src: str
    ip_dest: str
    tx_pool_addr: str
    nonce: int = 0
    txid: bytes = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.ip_src == self.ip_dest:
            raise MalformedFlowError(f"transaction with ip_src == ip_dest ({self.ip_src})")
        object.__setattr__(self, "txid", sha256(encode(self.fields())))

    def fields(self) -> tuple:
        return ("NT", self.device_addr, self.ip_src, self.ip_dest, self.tx_pool_addr, self.nonce)

    @classmethod
    def from_fields(cls, fields: tuple) -> "NetworkDataTransaction":
        tag, device, src, dst, pool, nonce = fields
        if tag != "NT":
            raise ValueError(f"not a transaction record: {tag!r}")
        return cls(device, src, dst, pool, nonce)


@dataclass(frozen=True)
class Block:
    height: int
    prev_hash: bytes
    timestamp: int
    txs: tuple[NetworkDataTransaction, ...]
    proposer: int
    block_hash: bytes = b""

    def header(self) -> tuple:
        tx_root = merkle_root_of_hashes(tx.txid for tx in self.txs)
        return ("BLOCK", self.height, self.prev_hash, self.timestamp, tx_root, self.proposer)

    def compute_hash(self) -> bytes:
        return sha256(encode(self.header()))

    def fields(self) -> tuple:
        return (
            "BLOCK", self.height, self.prev_hash, self.timestamp, self.proposer,
            self.block_hash, tuple(tx.fields() for tx in self.txs),
        )

    @classmethod
    def from_fields(cls, fields: tuple) -> "Block":
        tag, height, prev_hash, timestamp, proposer, block_hash, txs = fields
        if tag != "BLOCK":
            raise ValueError(f"not a block record: {tag!r}")
        block = cls(height, prev_hash, timestamp,
                    tuple(NetworkDataTransaction.from_fields(t) for t in txs), proposer, block_hash)
        if block.compute_hash() != block_hash:
            raise InvalidBlockError(f"block {height}: stored hash does not match contents")
        return block


def make_block(height: int, prev_hash: bytes, timestamp: int,
               txs: Iterable[NetworkDataTransaction], proposer: int) -> Block:
    b = Block(height, prev_hash, timestamp, tuple(txs), proposer)
    return Block(height, prev_hash, timestamp, b.txs, proposer, b.compute_hash())


class TxPool:
    """Unprocessed transactions ordered by (arrival tick, txid)."""

    def __init__(self):
        self._entries: dict[bytes, tuple[int, NetworkDataTransaction]] = {}

    def submit(self, nt: NetworkDataTransaction, tick: int = 0) -> bool:
        if nt.ip_src == nt.ip_dest:
            raise MalformedFlowError("transaction with ip_src == ip_dest")
        if nt.txid in self._entries:
            return False
        self._entries[nt.txid] = (tick, nt)
        return True

    def ordered(self) -> list[NetworkDataTransaction]:
        return [nt for _, nt in sorted(self._entries.values(), key=lambda e: (e[0], e[1].txid))]

    def take(self, limit: int) -> list[NetworkDataTransaction]:
        return self.ordered()[:limit]

    def remove(self, txids: Iterable[bytes]) -> None:
        for txid in txids:
            self._entries.pop(txid, None)

    def __contains__(self, txid: bytes) -> bool:
        return txid in self._entries

    def __len__(self) -> int:
        return len(self._entries)


def submit_nt(pool: TxPool, nt: NetworkDataTransaction, tick: int = 0) -> bool:
    return pool.submit(nt, tick)


def quorum_size(n: int) -> int:
    if n < 1:
        raise ValueError("need at least one generator")
    return math.ceil(2 * n / 3)


def leader_for(height: int, n: int, view: int = 0) -> int:
    """Round-robin leader; each failed attempt at a height moves to the next generator."""
    return (height + view) % n


def propose_block(leader: int, pool: TxPool, height: int, prev_hash: bytes, tick: int,
                  cfg: LedgerConfig, view: int = 0) -> Block:
    expected = leader_for(height, cfg.n_generators, view)
    if leader != expected:
        raise WrongLeaderError(f"generator {leader} is not the leader for height {height} (expected {expected})")
    return make_block(height, prev_hash, tick, pool.take(cfg.max_block_txs), leader)


def validate_block(block: Block, tip_height: int, tip_hash: bytes, cfg: LedgerConfig,
                   committed_txids: Collection[bytes], view: int = 0) -> None:
    """Raise :class:`InvalidBlockError` unless ``block`` extends the tip correctly."""
    if block.height != tip_height + 1:
        raise InvalidBlockError(f"height {block.height} does not follow {tip_height}")
    if block.prev_hash != tip_hash:
        raise InvalidBlockError("prev_hash does not match the chain tip")
    if block.proposer != leader_for(block.height, cfg.n_generators, view):
        raise WrongLeaderError(f"proposer {block.proposer} is not the leader for height {block.height}")
    if len(block.txs) > cfg.max_block_txs:
        raise InvalidBlockError("too many transactions")
    if block.compute_hash() != block.block_hash:
        raise InvalidBlockError("block hash does not match contents")
    seen = set()
    for tx in block.txs:
        if tx.ip_src == tx.ip_dest:
            raise InvalidBlockError("malformed transaction")
        if tx.txid in seen or tx.txid in committed_txids:
            raise InvalidBlockError("duplicate transaction")
        seen.add(tx.txid)


def vote_and_commit(block: Block, votes: Collection[int], n: int,
                    chain: list[Block] | None = None, pool: TxPool | None = None) -> bool:
    """Commit ``block`` if ``votes`` reach quorum, appending it to ``chain`` and pruning ``pool``."""
    if len(set(votes)) < quorum_size(n):
        return False
    if chain is not None:
        chain.append(block)
    if pool is not None:
        pool.remove(tx.txid for tx in block.txs)
    return True


def check_chain(blocks: Iterable[Block]) -> None:
    prev_hash, expected = ZERO_HASH, 0
    for b in blocks:
        if b.height != expected or b.prev_hash != prev_hash or b.compute_hash() != b.block_hash:
            raise InvalidBlockError(f"chain broken at height {b.height}")
        prev_hash, expected = b.block_hash, expected + 1
