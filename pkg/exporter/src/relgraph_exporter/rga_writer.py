"""Standalone writer for the ``.rga`` tensor-archive format.

Kept independent of the analysis package on purpose: the file format is
the only contract between the two.  Layout: 8-byte magic "RELGRAPH",
u64-LE manifest length, UTF-8 JSON manifest (format_version, meta,
tensor table), contiguous little-endian payload.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"RELGRAPH"
FORMAT_VERSION = 1


def write_rga(path, meta: dict, tensors: dict) -> None:
    """Write tensors (name -> float array) deterministically, sorted by
    name, as float32."""
    entries = []
    payload = bytearray()
    for name in sorted(tensors):
        data = np.ascontiguousarray(np.asarray(tensors[name], dtype="<f4"))
        raw = data.tobytes(order="C")
        entries.append({
            "name": name,
            "dtype": "float32",
            "shape": list(data.shape),
            "byte_offset": len(payload),
            "byte_length": len(raw),
        })
        payload.extend(raw)
    manifest = json.dumps(
        {"format_version": FORMAT_VERSION, "meta": meta, "tensors": entries},
        sort_keys=True, separators=(",", ":")).encode("utf-8")
    tmp = Path(path).with_name(Path(path).name + ".tmp")
    with open(tmp, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<Q", len(manifest)))
        f.write(manifest)
        f.write(bytes(payload))
    tmp.replace(path)
