"""Shared checkpoint format.

Layout: 8-byte magic ``IASTCKPT``, an 8-byte little-endian length prefix,
a UTF-8 JSON header mapping parameter names to {shape, offset}, then a raw
little-endian float64 payload. Offsets are byte offsets into the payload.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"IASTCKPT"


class CheckpointError(IOError):
    pass


def save_checkpoint(params: dict[str, np.ndarray], path: str | Path) -> None:
    names = sorted(params)
    header: dict[str, dict] = {}
    offset = 0
    chunks = []
    for name in names:
        arr = np.ascontiguousarray(np.asarray(params[name], dtype=np.float64))
        header[name] = {"shape": list(arr.shape), "offset": offset}
        raw = arr.astype("<f8").tobytes()
        chunks.append(raw)
        offset += len(raw)
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<Q", len(head)))
        f.write(head)
        for raw in chunks:
            f.write(raw)


def load_checkpoint(path: str | Path) -> dict[str, np.ndarray]:
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:8] != MAGIC:
        raise CheckpointError(f"{path}: bad magic {blob[:8]!r}")
    (hlen,) = struct.unpack("<Q", blob[8:16])
    try:
        header = json.loads(blob[16:16 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"{path}: corrupt header: {e}") from None
    payload = blob[16 + hlen:]
    out: dict[str, np.ndarray] = {}
    for name, meta in header.items():
        shape = tuple(meta["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = meta["offset"]
        end = start + count * 8
        if end > len(payload):
            raise CheckpointError(f"{path}: payload truncated for {name!r}")
        out[name] = np.frombuffer(payload[start:end], dtype="<f8").reshape(shape).copy()
    return out
