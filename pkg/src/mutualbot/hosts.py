"""Host identifiers and input validation helpers.

Hosts are plain dotted-quad strings. Ordering everywhere in the package is
numeric octet order, which is what ``host_key`` provides.
"""
from __future__ import annotations

import ipaddress
from functools import lru_cache
from typing import Iterable, Sequence

Flow = tuple[str, str]


class MalformedFlowError(ValueError):
    """A flow that cannot be turned into a contact (e.g. src == dst)."""


@lru_cache(maxsize=65536)
def host_key(host: str) -> int:
    """Sort key giving numeric octet order."""
    return int(ipaddress.IPv4Address(host))


def check_host(host: str) -> str:
    """Validate that ``host`` is a canonical dotted-quad and return it."""
    if not isinstance(host, str) or not host:
        raise ValueError(f"host id must be a non-empty string, got {host!r}")
    try:
        addr = ipaddress.IPv4Address(host)
    except ipaddress.AddressValueError as exc:
        raise ValueError(f"not an IPv4 address: {host!r}") from exc
    if str(addr) != host:
        raise ValueError(f"host id not in canonical form: {host!r}")
    return host


def host_from_int(value: int) -> str:
    return str(ipaddress.IPv4Address(value))


def sorted_hosts(hosts: Iterable[str]) -> list[str]:
    return sorted(hosts, key=host_key)


def canonical_pair(a: str, b: str) -> tuple[str, str]:
    return (a, b) if host_key(a) <= host_key(b) else (b, a)


def check_flows(flows: Iterable[Sequence[str]], validate_hosts: bool = False) -> list[Flow]:
    """Normalise an iterable of (src, dst) pairs, rejecting self-flows."""
    out = []
    for flow in flows:
        if len(flow) != 2:
            raise MalformedFlowError(f"flow must be a (src, dst) pair: {flow!r}")
        src, dst = flow
        if validate_hosts:
            check_host(src)
            check_host(dst)
        if src == dst:
            raise MalformedFlowError(f"self-flow {src} -> {dst}")
        out.append((src, dst))
    return out
