"""Synthetic IoT traffic with planted P2P botnets.

All randomness comes from numpy's PCG64 bit generator. World structure is
drawn from ``SeedSequence(rng_seed)``; the flows of tick ``t`` are drawn from
``SeedSequence([rng_seed, t])`` so any tick can be regenerated on its own.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Iterable

import numpy as np

from .hosts import host_from_int

# address blocks; devices are numbered consecutively from DEVICE_BASE
DEVICE_BASE = int.from_bytes(bytes([10, 0, 0, 1]), "big")
SERVER_BASE = int.from_bytes(bytes([203, 0, 113, 1]), "big")
CNC_BASE = int.from_bytes(bytes([198, 51, 100, 1]), "big")


class WorldConfigError(ValueError):
    pass


@dataclass(frozen=True)
class WorldConfig:
    n_benign: int = 100
    n_bots: int = 20
    n_servers: int = 5
    n_cnc: int = 3
    bot_degree: int = 6
    flows_per_tick: int = 40
    rng_seed: int = 1
    n_agents: int = 4
    peer_prob: float = 0.02
    cnc_prob: float = 0.5
    zipf_s: float = 1.1
    max_servers_per_device: int = 1

    def __post_init__(self):
        for name in ("n_benign", "n_bots", "n_servers", "n_cnc", "bot_degree", "flows_per_tick", "n_agents"):
            if getattr(self, name) < 0:
                raise WorldConfigError(f"{name} must be >= 0")
        if self.n_bots > 0 and not self.bot_degree < self.n_bots:
            raise WorldConfigError("bot_degree must be smaller than n_bots")
        if self.n_benign + self.n_bots > 0 and self.n_agents < 1:
            raise WorldConfigError("at least one agent is needed to monitor devices")
        if self.n_benign > 0 and self.n_servers < 1 and self.peer_prob < 1:
            raise WorldConfigError("benign devices need at least one server")
        if self.n_bots > 0 and self.n_cnc < 1 and self.bot_degree < 1:
            raise WorldConfigError("bots need C&C hosts or overlay peers")
        if not (0 <= self.peer_prob <= 1 and 0 <= self.cnc_prob <= 1):
            raise WorldConfigError("probabilities must lie in [0, 1]")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class World:
    cfg: WorldConfig
    benign: tuple[str, ...]
    bots: tuple[str, ...]
    servers: tuple[str, ...]
    cnc: tuple[str, ...]
    preferences: dict[str, tuple[str, ...]]
    overlay: dict[str, tuple[str, ...]]
    subnets: tuple[frozenset[str], ...]

    @property
    def devices(self) -> tuple[str, ...]:
        return self.benign + self.bots

    @property
    def malicious(self) -> frozenset[str]:
        return frozenset(self.bots) | frozenset(self.cnc)

    def agent_of(self) -> dict[str, int]:
        return {h: a for a, subnet in enumerate(self.subnets) for h in subnet}


def zipf_weights(n: int, s: float) -> np.ndarray:
    w = 1.0 / np.arange(1, n + 1) ** s
    return w / w.sum()


def _overlay(bots: list[str], degree: int, rng: np.random.Generator) -> dict[str, tuple[str, ...]]:
    """Near-regular random overlay: every bot gets up to ``degree`` peers."""
    peers: dict[str, set[str]] = {b: set() for b in bots}
    for b in (bots[i] for i in rng.permutation(len(bots))):
        while len(peers[b]) < degree:
            options = [c for c in bots if c != b and c not in peers[b] and len(peers[c]) < degree]
            if not options:
                break
            c = options[rng.integers(len(options))]
            peers[b].add(c)
            peers[c].add(b)
    if bots and degree and min(len(p) for p in peers.values()) == 0:
        raise WorldConfigError("overlay construction left a bot without peers")
    return {b: tuple(sorted(p, key=bots.index)) for b, p in peers.items()}


def build_world(cfg: WorldConfig) -> World:
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(cfg.rng_seed)))
    n_dev = cfg.n_benign + cfg.n_bots
    devices = [host_from_int(DEVICE_BASE + i) for i in range(n_dev)]
    # bots are scattered over the device address range
    bot_idx = set(rng.choice(n_dev, size=cfg.n_bots, replace=False).tolist()) if cfg.n_bots else set()
    bots = [d for i, d in enumerate(devices) if i in bot_idx]
    benign = [d for i, d in enumerate(devices) if i not in bot_idx]
    servers = [host_from_int(SERVER_BASE + i) for i in range(cfg.n_servers)]
    cnc = [host_from_int(CNC_BASE + i) for i in range(cfg.n_cnc)]

    prefs = {}
    if servers:
        weights = zipf_weights(len(servers), cfg.zipf_s)
        cap = max(1, min(cfg.max_servers_per_device, len(servers)))
        for d in benign:
            k = int(rng.integers(1, cap + 1))
            picks = rng.choice(len(servers), size=k, replace=False, p=weights)
            prefs[d] = tuple(servers[i] for i in sorted(picks.tolist()))
    overlay = _overlay(bots, cfg.bot_degree, rng) if bots else {}

    subnets: list[set[str]] = [set() for _ in range(max(cfg.n_agents, 1))]
    for pos, i in enumerate(rng.permutation(n_dev).tolist()):
        subnets[pos % len(subnets)].add(devices[i])
    return World(cfg, tuple(benign), tuple(bots), tuple(servers), tuple(cnc), prefs, overlay,
                 tuple(frozenset(s) for s in subnets[:cfg.n_agents]))


def step(world: World, tick: int) -> list[tuple[str, str]]:
    """Flows initiated by devices during ``tick``; a pure function of (seed, tick)."""
    cfg = world.cfg
    devices = world.devices
    if cfg.flows_per_tick == 0 or not devices:
        return []
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([cfg.rng_seed, tick])))
    n_benign = len(world.benign)
    initiators = rng.integers(len(devices), size=cfg.flows_per_tick)
    coins = rng.random(cfg.flows_per_tick)
    picks = rng.random(cfg.flows_per_tick)
    flows = []
    for i, coin, pick in zip(initiators.tolist(), coins.tolist(), picks.tolist()):
        src = devices[i]
        if i < n_benign:
            prefs = world.preferences.get(src, ())
            if (coin < cfg.peer_prob or not prefs) and n_benign > 1:
                j = int(pick * (n_benign - 1))
                dst = world.benign[j + 1 if j >= i else j]
            elif prefs:
                dst = prefs[int(pick * len(prefs))]
            else:
                continue
        else:
            peers = world.overlay[src]
            if (coin < cfg.cnc_prob and world.cnc) or not peers:
                dst = world.cnc[int(pick * len(world.cnc))]
            else:
                dst = peers[int(pick * len(peers))]
        flows.append((src, dst))
    return flows


def generate(world: World, ticks: Iterable[int]) -> list[tuple[int, str, str]]:
    return [(t, s, d) for t in ticks for s, d in step(world, t)]
