"""Binary checkpoint format.

Layout (all integers little-endian)::

    b"MGRL0001"
    u32 record count
    per record: u32 name length, UTF-8 name, u32 rank, rank × u64 extents,
                prod(extents) × f64 values (row-major)
    u64 checksum = first 8 bytes of BLAKE2b over everything after the magic
"""
from __future__ import annotations

import hashlib
import struct
from pathlib import Path
from typing import Mapping

import numpy as np

from ..errors import IntegrityError

MAGIC = b"MGRL0001"


def _checksum(payload: bytes) -> bytes:
    return hashlib.blake2b(payload, digest_size=8).digest()


def encode_arrays(arrays: Mapping[str, np.ndarray]) -> bytes:
    parts = [struct.pack("<I", len(arrays))]
    for name, arr in arrays.items():
        # np.require keeps rank-0 arrays rank-0 (ascontiguousarray would not)
        arr = np.require(np.asarray(arr, dtype="<f8"), requirements="C")
        raw = name.encode("utf-8")
        parts.append(struct.pack("<I", len(raw)) + raw)
        parts.append(struct.pack("<I", arr.ndim) + b"".join(struct.pack("<Q", e) for e in arr.shape))
        parts.append(arr.tobytes(order="C"))
    payload = b"".join(parts)
    return MAGIC + payload + _checksum(payload)


def decode_arrays(blob: bytes) -> dict[str, np.ndarray]:
    if len(blob) < len(MAGIC) + 12 or blob[: len(MAGIC)] != MAGIC:
        raise IntegrityError("checkpoint has a bad magic header")
    payload, checksum = blob[len(MAGIC):-8], blob[-8:]
    if _checksum(payload) != checksum:
        raise IntegrityError("checkpoint checksum mismatch")
    try:
        pos = 0
        (count,) = struct.unpack_from("<I", payload, pos)
        pos += 4
        arrays: dict[str, np.ndarray] = {}
        for _ in range(count):
            (nlen,) = struct.unpack_from("<I", payload, pos)
            pos += 4
            name = payload[pos:pos + nlen].decode("utf-8")
            pos += nlen
            (rank,) = struct.unpack_from("<I", payload, pos)
            pos += 4
            shape = struct.unpack_from(f"<{rank}Q", payload, pos)
            pos += 8 * rank
            size = int(np.prod(shape)) if rank else 1
            arrays[name] = np.frombuffer(payload, dtype="<f8", count=size, offset=pos).reshape(shape).copy()
            pos += 8 * size
    except (struct.error, ValueError, UnicodeDecodeError) as exc:
        raise IntegrityError(f"checkpoint payload is malformed: {exc}") from exc
    if pos != len(payload):
        raise IntegrityError("checkpoint has trailing bytes")
    return arrays


def save_checkpoint(path, arrays: Mapping[str, np.ndarray]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_arrays(arrays))
    return path


def load_checkpoint(path) -> dict[str, np.ndarray]:
    return decode_arrays(Path(path).read_bytes())
