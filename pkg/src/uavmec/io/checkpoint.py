"""Binary tensor container.

Layout (all integers little-endian)::

    b"AMEC" | u32 version | u32 entry_count | entries...
    entry = u32 name_len | name (UTF-8) | u32 rank | u64 dim x rank | f64 x prod(dims)

Model configuration lives in a JSON sidecar next to the file (``<path>.json``).
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..tensorcore import ContractError

MAGIC = b"AMEC"
CHECKPOINT_VERSION = 1


class CheckpointIntegrityError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class CheckpointVersionError(ValueError):
    pass


def encode_checkpoint(tensors: dict) -> bytes:
    parts = [MAGIC, struct.pack("<II", CHECKPOINT_VERSION, len(tensors))]
    for name, value in tensors.items():
        arr = np.asarray(value, dtype="<f8", order="C")
        raw = name.encode("utf-8")
        parts.append(struct.pack("<I", len(raw)))
        parts.append(raw)
        parts.append(struct.pack("<I", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        parts.append(arr.tobytes())
    return b"".join(parts)


def decode_checkpoint(buf: bytes) -> dict:
    pos = 0

    def take(n: int, what: str) -> bytes:
        nonlocal pos
        if pos + n > len(buf):
            raise CheckpointIntegrityError(f"truncated while reading {what}: need {n} bytes, "
                                           f"{len(buf) - pos} left", pos)
        chunk = buf[pos:pos + n]
        pos += n
        return chunk

    if take(4, "magic") != MAGIC:
        raise CheckpointIntegrityError("bad magic, not an AMEC checkpoint", 0)
    (version,) = struct.unpack("<I", take(4, "version"))
    if version != CHECKPOINT_VERSION:
        raise CheckpointVersionError(f"unsupported checkpoint version {version}; "
                                     f"this build reads version {CHECKPOINT_VERSION}")
    (count,) = struct.unpack("<I", take(4, "entry count"))
    out: dict = {}
    for _ in range(count):
        start = pos
        (name_len,) = struct.unpack("<I", take(4, "name length"))
        try:
            name = take(name_len, "name").decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CheckpointIntegrityError("entry name is not valid UTF-8", start + 4) from exc
        if name in out:
            raise CheckpointIntegrityError(f"duplicate entry {name!r}", start)
        (rank,) = struct.unpack("<I", take(4, "rank"))
        dims = struct.unpack(f"<{rank}Q", take(8 * rank, "dims"))
        count_values = int(np.prod(dims, dtype=np.uint64)) if rank else 1
        payload = take(8 * count_values, f"payload of {name!r}")
        out[name] = np.frombuffer(payload, dtype="<f8").reshape(dims).astype(np.float64)
    if pos != len(buf):
        raise CheckpointIntegrityError(f"{len(buf) - pos} trailing bytes after last entry", pos)
    return out


def save_checkpoint(tensors: dict, path: str | Path, config: dict | None = None) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_checkpoint(tensors))
    if config is not None:
        Path(str(path) + ".json").write_text(json.dumps(config, indent=2, sort_keys=True) + "\n")


def load_checkpoint(path: str | Path) -> dict:
    return decode_checkpoint(Path(path).read_bytes())


def read_sidecar(path: str | Path) -> dict:
    side = Path(str(path) + ".json")
    if not side.exists():
        raise ContractError(f"checkpoint config {side} is missing")
    return json.loads(side.read_text())
