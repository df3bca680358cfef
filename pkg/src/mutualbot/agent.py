"""Gateway agents: flow filtering, transaction emission and quarantine."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator

from .detector import BlacklistDelta
from .hosts import check_host
from .ledger.chain import NetworkDataTransaction

log = logging.getLogger(__name__)


class RoutingError(ValueError):
    """A flow was handed to an agent that does not monitor either endpoint."""


class ActionKind(str, Enum):
    SKIP = "skip"
    EMIT_NT = "emit_nt"
    QUARANTINE_AND_EMIT_NT = "quarantine_and_emit_nt"


@dataclass(frozen=True)
class FlowAction:
    kind: ActionKind
    nt: NetworkDataTransaction | None = None
    quarantined_host: str | None = None


SKIP = FlowAction(ActionKind.SKIP)


@dataclass(frozen=True)
class AgentState:
    agent_id: str
    subnet: frozenset[str]
    pool_addr: str
    whitelist: frozenset[str] = frozenset()
    blacklist: frozenset[str] = frozenset()
    quarantined: frozenset[str] = frozenset()
    # number of transactions emitted so far, used as the nonce of the next one
    emitted: int = field(default=0)

    def __post_init__(self):
        if self.whitelist & self.blacklist:
            raise ValueError("whitelist and blacklist overlap")
        if not self.quarantined <= self.subnet:
            raise ValueError("quarantined hosts must belong to the subnet")


def process_flow(agent: AgentState, flow: tuple[str, str]) -> tuple[AgentState, FlowAction]:
    src, dst = flow
    src_in, dst_in = src in agent.subnet, dst in agent.subnet
    if not (src_in or dst_in):
        raise RoutingError(f"agent {agent.agent_id} does not monitor {src} or {dst}")
    device = src if src_in else dst
    if src in agent.quarantined or dst in agent.quarantined:
        return agent, SKIP
    external = [h for h, inside in ((src, src_in), (dst, dst_in)) if not inside]
    if any(h in agent.whitelist for h in external):
        return agent, SKIP
    nt = NetworkDataTransaction(agent.agent_id, src, dst, agent.pool_addr, agent.emitted)
    agent = replace(agent, emitted=agent.emitted + 1)
    if src in agent.blacklist or dst in agent.blacklist:
        agent = replace(agent, quarantined=agent.quarantined | {device})
        return agent, FlowAction(ActionKind.QUARANTINE_AND_EMIT_NT, nt, device)
    return agent, FlowAction(ActionKind.EMIT_NT, nt)


def apply_blacklist_update(agent: AgentState, delta: BlacklistDelta) -> AgentState:
    if delta.is_empty():
        return agent
    blacklist = (agent.blacklist | delta.additions) - delta.removals
    conflicts = agent.whitelist & blacklist
    if conflicts:
        log.warning("agent %s: dropping blacklisted hosts %s from whitelist",
                    agent.agent_id, sorted(conflicts))
    return replace(
        agent,
        blacklist=blacklist,
        whitelist=agent.whitelist - conflicts,
        quarantined=agent.quarantined - delta.removals,
    )


@dataclass
class FlowLog:
    flows: list[tuple[int, str, str]]
    malformed: int = 0


def parse_flow_lines(lines: Iterable[str]) -> FlowLog:
    """Parse ``tick,src_ip,dst_ip`` lines; bad lines are counted and skipped."""
    out = FlowLog([])
    for line in lines:
        line = line.strip()
        if not line:
            continue
        parts = line.split(",")
        try:
            if len(parts) != 3:
                raise ValueError(line)
            tick = int(parts[0])
            src, dst = check_host(parts[1].strip()), check_host(parts[2].strip())
            if src == dst or tick < 0:
                raise ValueError(line)
        except ValueError:
            out.malformed += 1
            continue
        out.flows.append((tick, src, dst))
    return out


def read_flow_log(path: Path | str) -> FlowLog:
    with open(path, encoding="utf-8") as fh:
        return parse_flow_lines(fh)


def format_flow_lines(flows: Iterable[tuple[int, str, str]]) -> Iterator[str]:
    for tick, src, dst in flows:
        yield f"{tick},{src},{dst}\n"


def read_host_list(path: Path | str) -> frozenset[str]:
    hosts = set()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line and not line.startswith("#"):
                hosts.add(check_host(line))
    return frozenset(hosts)
