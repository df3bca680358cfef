"""End-to-end experiment driver, offline flow-log analysis and chain replay."""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Sequence

from .agent import AgentState, apply_blacklist_update, process_flow
from .detector import DetectorConfig, Label
from .hosts import sorted_hosts
from .ledger.chain import LedgerConfig
from .ledger.network import Cluster
from .ledger.state import ChainState, execute_round, genesis_state
from .ledger.storage import iter_rounds, read_chain, write_segment
from .traffic import World, WorldConfig, build_world, step

log = logging.getLogger(__name__)

MANIFEST = "manifest.json"


class ConfigError(ValueError):
    pass


class ReplicaDivergence(RuntimeError):
    def __init__(self, round_index: int, details: dict):
        super().__init__(f"replica state roots diverged in round {round_index}")
        self.round_index = round_index
        self.details = details


@dataclass(frozen=True)
class ExperimentConfig:
    world: WorldConfig = field(default_factory=WorldConfig)
    ledger: LedgerConfig = field(default_factory=LedgerConfig)
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    rounds: int = 10
    output_dir: str | None = None
    crashed_generators: tuple[int, ...] = ()

    def __post_init__(self):
        if not isinstance(self.rounds, int) or self.rounds < 1:
            raise ConfigError("rounds must be an integer >= 1")
        n = self.ledger.n_generators
        if any(not 0 <= g < n for g in self.crashed_generators):
            raise ConfigError("crashed generator id out of range")
        if n - len(set(self.crashed_generators)) < -(-2 * n // 3):
            raise ConfigError("too many crashed generators to ever reach quorum")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["crashed_generators"] = list(self.crashed_generators)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {"world", "ledger", "detector", "rounds", "output_dir", "crashed_generators"}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(
                world=WorldConfig(**data.get("world", {})),
                ledger=LedgerConfig(**data.get("ledger", {})),
                detector=DetectorConfig(**data.get("detector", {})),
                rounds=data.get("rounds", 10),
                output_dir=data.get("output_dir"),
                crashed_generators=tuple(data.get("crashed_generators", ())),
            )
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc


@dataclass
class Report:
    config: dict
    rounds: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"config": self.config, "rounds": self.rounds}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_table(self) -> str:
        head = f"{'round':>5} {'blocks':>6} {'NTs':>6} {'comms':>5} {'botnet':>6} {'+bl':>4} {'-bl':>4} {'prec':>6} {'recall':>6}  root"
        lines = [head, "-" * len(head)]
        for r in self.rounds:
            lines.append(
                f"{r['round']:>5} {r['blocks']:>6} {r['nts']:>6} {r['communities']:>5} "
                f"{r['botnet_communities']:>6} {len(r['blacklist_additions']):>4} "
                f"{len(r['blacklist_removals']):>4} {_fmt(r.get('precision')):>6} "
                f"{_fmt(r.get('recall')):>6}  {r['state_root'][:16]}"
            )
        return "\n".join(lines) + "\n"


def _fmt(x: float | None) -> str:
    return "-" if x is None else f"{x:.3f}"


def detection_metrics(flagged: frozenset[str], world: World) -> tuple[float, float | None]:
    """Precision against bots plus C&C hosts; recall over bots only.

    Precision is 1.0 when nothing is flagged; recall is None without bots.
    """
    precision = len(flagged & world.malicious) / len(flagged) if flagged else 1.0
    recall = len(flagged & set(world.bots)) / len(world.bots) if world.bots else None
    return precision, recall


def _round_row(state: ChainState, blocks: Sequence, roots: dict[str, str]) -> dict:
    botnets = [c for c in state.commset if c.label is Label.BOTNET]
    return {
        "round": state.round_index,
        "blocks": len(blocks),
        "nts": sum(len(b.txs) for b in blocks),
        "communities": len(state.commset),
        "botnet_communities": len(botnets),
        "botnet_members": [sorted_hosts(c.members) for c in botnets],
        "blacklist_additions": sorted_hosts(state.delta.additions),
        "blacklist_removals": sorted_hosts(state.delta.removals),
        "blacklist_size": len(state.blacklist),
        "state_root": state.state_root.hex(),
        "replica_roots": roots,
    }


def _state_summary(state: ChainState) -> dict:
    return {
        "round_index": state.round_index,
        "state_root": state.state_root.hex(),
        "blocks": len(state.blocks),
        "last_block": state.last_block_hash.hex(),
        "vertices": len(state.graph.vertices),
        "edges": len(state.graph.weights),
        "communities": [[c.id, c.label.value, sorted_hosts(c.members)] for c in state.commset],
        "blacklist": sorted_hosts(state.blacklist),
    }


def _write_manifest(chain_dir: Path, cfg: LedgerConfig, det: DetectorConfig, roots: list[str]) -> None:
    chain_dir.mkdir(parents=True, exist_ok=True)
    manifest = {"ledger": asdict(cfg), "detector": asdict(det), "state_roots": roots}
    (chain_dir / MANIFEST).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _check_roots(cluster: Cluster, states: list[ChainState], out: Path | None) -> dict[str, str]:
    roots = {str(r.id): s.state_root.hex() for r, s in zip(cluster.live, states)}
    if len(set(roots.values())) > 1:
        first = states[0]
        other = next(s for s in states if s.state_root != first.state_root)
        details = {"roots": roots, "a": _state_summary(first), "b": _state_summary(other)}
        if out is not None:
            out.mkdir(parents=True, exist_ok=True)
            (out / "divergence.json").write_text(json.dumps(details, indent=2, sort_keys=True))
        raise ReplicaDivergence(first.round_index, details)
    return roots


def run_experiment(cfg: ExperimentConfig) -> Report:
    """Simulate traffic, agents and replicas for ``cfg.rounds`` rounds."""
    world = build_world(cfg.world)
    lcfg = cfg.ledger
    cluster = Cluster(lcfg, cfg.detector)
    for g in cfg.crashed_generators:
        cluster.crash(g)
    n = lcfg.n_generators
    agents = [
        AgentState(f"agent-{a}", subnet, f"pool-{a % n}")
        for a, subnet in enumerate(world.subnets)
    ]
    agent_of = world.agent_of()
    out = Path(cfg.output_dir) if cfg.output_dir else None
    report = Report(config=cfg.to_dict())
    seen: set[str] = set()
    roots_history: list[str] = []
    tick = 0
    for _ in range(cfg.rounds):
        round_blocks = []
        for _ in range(lcfg.blocks_per_round):
            for _ in range(lcfg.tau_ticks):
                for src, dst in step(world, tick):
                    a = agent_of[src]
                    agents[a], action = process_flow(agents[a], (src, dst))
                    if action.nt is not None:
                        cluster.submit(a % n, action.nt, tick)
                tick += 1
            round_blocks.append(cluster.commit_height(tick))
        states = cluster.execute_round()
        roots = _check_roots(cluster, states, out)
        state = states[0]
        for a in range(len(agents)):
            agents[a] = apply_blacklist_update(agents[a], state.delta)
        for b in round_blocks:
            for nt in b.txs:
                seen.update((nt.ip_src, nt.ip_dest))
        row = _round_row(state, round_blocks, roots)
        row["precision"], row["recall"] = detection_metrics(state.blacklist, world)
        row["all_bots_seen"] = set(world.bots) <= seen
        row["quarantined"] = sum(len(ag.quarantined) for ag in agents)
        report.rounds.append(row)
        roots_history.append(state.state_root.hex())
        if out is not None:
            write_segment(out / "chain", round_blocks)
        log.info("round %d: %d NTs, %d communities, blacklist %d", state.round_index,
                 row["nts"], row["communities"], row["blacklist_size"])
    if out is not None:
        _write_manifest(out / "chain", lcfg, cfg.detector, roots_history)
        (out / "report.json").write_text(report.to_json())
        (out / "report.txt").write_text(report.to_table())
    return report


@dataclass
class ReplayResult:
    round_index: int
    expected: str | None
    actual: str

    @property
    def ok(self) -> bool:
        return self.expected == self.actual


def replay(chain_dir: Path | str) -> list[ReplayResult]:
    """Re-execute every persisted round and compare against the recorded roots."""
    chain_dir = Path(chain_dir)
    try:
        manifest = json.loads((chain_dir / MANIFEST).read_text())
        lcfg = LedgerConfig(**manifest["ledger"])
        det = DetectorConfig(**manifest["detector"])
    except (OSError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"cannot read chain manifest: {exc}") from exc
    expected = manifest.get("state_roots", [])
    state = genesis_state()
    results = []
    for k, blocks in enumerate(iter_rounds(read_chain(chain_dir), lcfg.blocks_per_round)):
        state = execute_round(state, blocks, lcfg, det)
        results.append(ReplayResult(state.round_index, expected[k] if k < len(expected) else None,
                                    state.state_root.hex()))
    return results


def analyze_flows(
    flows: Sequence[tuple[int, str, str]],
    lcfg: LedgerConfig,
    det: DetectorConfig,
    whitelist: frozenset[str] = frozenset(),
    blacklist: frozenset[str] = frozenset(),
    output_dir: Path | str | None = None,
) -> Report:
    """Run a flow log through one virtual agent and a single generator.

    The agent monitors every host that initiates a flow. Ticks are grouped
    into blocks of ``tau_ticks`` and blocks into rounds; a trailing partial
    round is padded with empty blocks.
    """
    lcfg = LedgerConfig(**{**asdict(lcfg), "n_generators": 1})
    subnet = frozenset(src for _, src, _ in flows)
    agent = AgentState("agent-0", subnet, "pool-0", whitelist=whitelist - blacklist, blacklist=blacklist)
    cluster = Cluster(lcfg, det)
    report = Report(config={"ledger": asdict(lcfg), "detector": asdict(det), "flows": len(flows)})
    out = Path(output_dir) if output_dir else None
    if not flows:
        return report
    start = min(t for t, _, _ in flows)
    by_block: dict[int, list[tuple[int, str, str]]] = {}
    for t, s, d in flows:
        by_block.setdefault((t - start) // lcfg.tau_ticks, []).append((t, s, d))
    n_blocks = max(by_block) + 1
    n_rounds = -(-n_blocks // lcfg.blocks_per_round)
    roots: list[str] = []
    for r in range(n_rounds):
        round_blocks = []
        for k in range(r * lcfg.blocks_per_round, (r + 1) * lcfg.blocks_per_round):
            for t, s, d in sorted(by_block.get(k, ()), key=lambda f: f[0]):
                agent, action = process_flow(agent, (s, d))
                if action.nt is not None:
                    cluster.submit(0, action.nt, t)
            round_blocks.append(cluster.commit_height(start + (k + 1) * lcfg.tau_ticks))
        (state,) = cluster.execute_round()
        agent = apply_blacklist_update(agent, state.delta)
        row = _round_row(state, round_blocks, {"0": state.state_root.hex()})
        row["quarantined"] = len(agent.quarantined)
        report.rounds.append(row)
        roots.append(state.state_root.hex())
        if out is not None:
            write_segment(out / "chain", round_blocks)
    if out is not None:
        _write_manifest(out / "chain", lcfg, det, roots)
        (out / "report.json").write_text(report.to_json())
        (out / "report.txt").write_text(report.to_table())
    return report


def load_config(path: Path | str | None, overrides: dict[str, Any] | None = None) -> ExperimentConfig:
    data: dict = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
    for dotted, value in (overrides or {}).items():
        if value is None:
            continue
        node = data
        *parents, leaf = dotted.split(".")
        for p in parents:
            node = node.setdefault(p, {})
        node[leaf] = value
    try:
        return ExperimentConfig.from_dict(data)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
