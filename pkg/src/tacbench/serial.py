"""Versioned binary container: JSON header + raw parameter blob.

Layout: magic ``TACB``, u32 format version, u32 header length, UTF-8 JSON
header, then the arrays' raw bytes concatenated in the header's order.
Used for translator files and policy checkpoints.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"TACB"
FORMAT_VERSION = 1


class BlobFormatError(ValueError):
    pass


def write_blob(path, header: dict, arrays: dict) -> None:
    meta = dict(header)
    meta["arrays"] = [
        {"name": k, "dtype": str(np.asarray(v).dtype), "shape": list(np.asarray(v).shape)}
        for k, v in arrays.items()
    ]
    raw = json.dumps(meta, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<II", FORMAT_VERSION, len(raw)))
        f.write(raw)
        for v in arrays.values():
            f.write(np.ascontiguousarray(v).tobytes())


def read_blob(path):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    data = path.read_bytes()
    if data[:4] != MAGIC:
        raise BlobFormatError(f"{path}: bad magic, not a tacbench blob file")
    version, hlen = struct.unpack_from("<II", data, 4)
    if version != FORMAT_VERSION:
        raise BlobFormatError(f"{path}: unsupported format version {version}")
    try:
        header = json.loads(data[12:12 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise BlobFormatError(f"{path}: corrupt header: {e}") from e
    arrays = {}
    off = 12 + hlen
    for spec in header.pop("arrays", []):
        n = int(np.prod(spec["shape"], dtype=np.int64)) if spec["shape"] else 1
        dt = np.dtype(spec["dtype"])
        end = off + n * dt.itemsize
        if end > len(data):
            raise BlobFormatError(f"{path}: truncated blob at array {spec['name']!r}")
        arrays[spec["name"]] = np.frombuffer(
            data[off:end], dtype=dt).reshape(spec["shape"]).copy()
        off = end
    return header, arrays
