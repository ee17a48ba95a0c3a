"""Self-describing binary checkpoints.

Layout (little-endian)::

    magic  b"GALLACK1"
    u32    metadata length, then that many bytes of UTF-8 JSON
    u32    record count
    per record:
        u16 name length, name bytes (UTF-8)
        u8  ndim, then ndim x u32 dims
        prod(dims) x f32 payload
"""
from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path
from typing import Mapping

import numpy as np

MAGIC = b"GALLACK1"


class CheckpointError(ValueError):
    pass


def save(path: str | Path, arrays: Mapping[str, np.ndarray], meta: dict | None = None) -> None:
    chunks = [MAGIC]
    blob = json.dumps(meta or {}, sort_keys=True).encode("utf-8")
    chunks.append(struct.pack("<I", len(blob)))
    chunks.append(blob)
    chunks.append(struct.pack("<I", len(arrays)))
    for name, arr in arrays.items():
        raw = name.encode("utf-8")
        a = np.asarray(arr, dtype="<f4", order="C")
        chunks.append(struct.pack("<H", len(raw)))
        chunks.append(raw)
        chunks.append(struct.pack("<B", a.ndim))
        chunks.append(struct.pack(f"<{a.ndim}I", *a.shape))
        chunks.append(a.tobytes())
    Path(path).write_bytes(b"".join(chunks))


def load(path: str | Path) -> tuple[dict[str, np.ndarray], dict]:
    """Returns (arrays in file order, metadata)."""
    buf = Path(path).read_bytes()
    if buf[: len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file")
    pos = len(MAGIC)

    def take(fmt):
        nonlocal pos
        vals = struct.unpack_from(fmt, buf, pos)
        pos += struct.calcsize(fmt)
        return vals

    (mlen,) = take("<I")
    meta = json.loads(buf[pos : pos + mlen].decode("utf-8"))
    pos += mlen
    (count,) = take("<I")
    arrays: dict[str, np.ndarray] = {}
    for _ in range(count):
        (nlen,) = take("<H")
        name = buf[pos : pos + nlen].decode("utf-8")
        pos += nlen
        (ndim,) = take("<B")
        shape = take(f"<{ndim}I")
        size = int(np.prod(shape, dtype=np.int64))
        arrays[name] = np.frombuffer(buf, dtype="<f4", count=size, offset=pos).reshape(shape).astype(np.float32)
        pos += 4 * size
    if pos != len(buf):
        raise CheckpointError(f"{path}: {len(buf) - pos} trailing bytes")
    return arrays, meta


def checksum(arrays: Mapping[str, np.ndarray]) -> str:
    """sha256 over names, shapes and raw bytes, in sorted name order."""
    h = hashlib.sha256()
    for name in sorted(arrays):
        a = np.asarray(arrays[name], order="C")
        h.update(name.encode("utf-8"))
        h.update(str(a.shape).encode())
        h.update(str(a.dtype).encode())
        h.update(a.tobytes())
    return h.hexdigest()
