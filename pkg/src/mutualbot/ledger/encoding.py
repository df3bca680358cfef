"""Canonical binary encoding and Merkle roots.

Every value is a one-byte tag followed by a big-endian payload:

    i  int      8-byte signed
    b  bytes    4-byte length + raw bytes
    s  str      4-byte length + UTF-8
    l  sequence 4-byte item count + encoded items
    n  None

Callers are responsible for putting sets and maps in canonical order
before encoding; this module never sorts.
"""
from __future__ import annotations

import hashlib
import struct
from typing import Any, Iterable, Sequence

HASH_SIZE = 32
ZERO_HASH = bytes(HASH_SIZE)

_LEAF = b"\x00"
_NODE = b"\x01"


class DecodeError(ValueError):
    pass


def sha256(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def encode(value: Any) -> bytes:
    out = bytearray()
    _encode_into(value, out)
    return bytes(out)


def _encode_into(value: Any, out: bytearray) -> None:
    if value is None:
        out += b"n"
    elif isinstance(value, bool):
        raise TypeError("booleans have no canonical encoding; use 0/1")
    elif isinstance(value, int):
        out += b"i" + struct.pack(">q", value)
    elif isinstance(value, (bytes, bytearray)):
        out += b"b" + struct.pack(">I", len(value)) + bytes(value)
    elif isinstance(value, str):
        raw = value.encode("utf-8")
        out += b"s" + struct.pack(">I", len(raw)) + raw
    elif isinstance(value, (list, tuple)):
        out += b"l" + struct.pack(">I", len(value))
        for item in value:
            _encode_into(item, out)
    else:
        raise TypeError(f"cannot canonically encode {type(value).__name__}")


def decode(data: bytes) -> Any:
    value, pos = _decode_at(data, 0)
    if pos != len(data):
        raise DecodeError(f"{len(data) - pos} trailing bytes")
    return value


def _take(data: bytes, pos: int, n: int) -> bytes:
    if pos + n > len(data):
        raise DecodeError("truncated input")
    return data[pos:pos + n]


def _decode_at(data: bytes, pos: int) -> tuple[Any, int]:
    tag = _take(data, pos, 1)
    pos += 1
    if tag == b"n":
        return None, pos
    if tag == b"i":
        return struct.unpack(">q", _take(data, pos, 8))[0], pos + 8
    if tag in (b"b", b"s"):
        (n,) = struct.unpack(">I", _take(data, pos, 4))
        raw = _take(data, pos + 4, n)
        return (raw if tag == b"b" else raw.decode("utf-8")), pos + 4 + n
    if tag == b"l":
        (n,) = struct.unpack(">I", _take(data, pos, 4))
        pos += 4
        items = []
        for _ in range(n):
            item, pos = _decode_at(data, pos)
            items.append(item)
        return tuple(items), pos
    raise DecodeError(f"unknown tag {tag!r} at offset {pos - 1}")


def leaf_hash(leaf: bytes) -> bytes:
    return sha256(_LEAF + leaf)


def merkle_root(leaves: Sequence[bytes]) -> bytes:
    """Binary Merkle root over encoded leaves.

    An odd level duplicates its last node; a single leaf's root is its leaf
    hash; an empty sequence has the all-zero root.
    """
    if not leaves:
        return ZERO_HASH
    level = [leaf_hash(leaf) for leaf in leaves]
    while len(level) > 1:
        if len(level) % 2:
            level.append(level[-1])
        level = [sha256(_NODE + level[k] + level[k + 1]) for k in range(0, len(level), 2)]
    return level[0]


def merkle_root_of_hashes(hashes: Iterable[bytes]) -> bytes:
    return merkle_root([bytes(h) for h in hashes])
