"""Append-only chain segment files (``blocks_<first>_<last>.bin``).

Each record is a 4-byte big-endian length followed by the canonical encoding
of one block.
"""
from __future__ import annotations

import re
import struct
from pathlib import Path
from typing import Iterable, Sequence

from .chain import Block, check_chain
from .encoding import DecodeError, decode, encode

SEGMENT_RE = re.compile(r"^blocks_(\d+)_(\d+)\.bin$")


def segment_name(first: int, last: int) -> str:
    return f"blocks_{first}_{last}.bin"


def write_segment(directory: Path | str, blocks: Sequence[Block]) -> Path:
    if not blocks:
        raise ValueError("refusing to write an empty segment")
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / segment_name(blocks[0].height, blocks[-1].height)
    if path.exists():
        raise FileExistsError(f"segment {path.name} already written")
    with open(path, "ab") as fh:
        for b in blocks:
            raw = encode(b.fields())
            fh.write(struct.pack(">I", len(raw)) + raw)
    return path


def read_segment(path: Path | str) -> list[Block]:
    data = Path(path).read_bytes()
    blocks, pos = [], 0
    while pos < len(data):
        if pos + 4 > len(data):
            raise DecodeError(f"{Path(path).name}: truncated record header at offset {pos}")
        (n,) = struct.unpack(">I", data[pos:pos + 4])
        if pos + 4 + n > len(data):
            raise DecodeError(f"{Path(path).name}: truncated record at offset {pos}")
        blocks.append(Block.from_fields(decode(data[pos + 4:pos + 4 + n])))
        pos += 4 + n
    return blocks


def segment_paths(directory: Path | str) -> list[Path]:
    found = []
    for p in Path(directory).iterdir():
        m = SEGMENT_RE.match(p.name)
        if m:
            found.append((int(m.group(1)), p))
    return [p for _, p in sorted(found)]


def read_chain(directory: Path | str) -> list[Block]:
    blocks: list[Block] = []
    for p in segment_paths(directory):
        blocks.extend(read_segment(p))
    check_chain(blocks)
    return blocks


def iter_rounds(blocks: Sequence[Block], per_round: int) -> Iterable[Sequence[Block]]:
    for k in range(0, len(blocks) - len(blocks) % per_round, per_round):
        yield blocks[k:k + per_round]
