"""Permissioned ledger: transactions, blocks, consensus and state transition."""
from .chain import (
    Block,
    InvalidBlockError,
    LedgerConfig,
    NetworkDataTransaction,
    TxPool,
    WrongLeaderError,
    leader_for,
    make_block,
    propose_block,
    quorum_size,
    submit_nt,
    validate_block,
    vote_and_commit,
)
from .network import Bus, Cluster, Replica
from .state import ChainState, DesyncError, execute_round, genesis_state, state_root

__all__ = [
    "Block",
    "Bus",
    "ChainState",
    "Cluster",
    "DesyncError",
    "InvalidBlockError",
    "LedgerConfig",
    "NetworkDataTransaction",
    "Replica",
    "TxPool",
    "WrongLeaderError",
    "execute_round",
    "genesis_state",
    "leader_for",
    "make_block",
    "propose_block",
    "quorum_size",
    "state_root",
    "submit_nt",
    "validate_block",
    "vote_and_commit",
]
