"""Versioned binary checkpoint container.

Layout (little-endian):
    bytes 0..7    magic b"NKCHKPT1"
    bytes 8..11   uint32 header length L
    bytes 12..12+L  UTF-8 JSON header: {"version": 1, "meta": {...},
                    "arrays": [{"name", "shape", "dtype"}, ...]}
    remainder     raw float64 array bytes, concatenated in header order

Saving then loading is byte-exact: arrays round-trip bit for bit.
"""

import json
import struct

import numpy as np

MAGIC = b"NKCHKPT1"
VERSION = 1


def save_checkpoint(path, meta: dict, arrays) -> None:
    """Write meta plus named float64 arrays; order is preserved."""
    entries = []
    blobs = []
    for name, arr in arrays:
        arr = np.ascontiguousarray(arr, dtype=np.float64)
        entries.append({"name": name, "shape": list(arr.shape), "dtype": "float64"})
        blobs.append(arr.tobytes())
    header = json.dumps({"version": VERSION, "meta": meta, "arrays": entries}, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        for blob in blobs:
            fh.write(blob)


def load_checkpoint(path):
    """Read a checkpoint; returns (meta, {name: array}) in saved order."""
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != MAGIC:
            raise ValueError(f"{path}: not a checkpoint file (bad magic {magic!r})")
        (header_len,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(header_len).decode("utf-8"))
        if header.get("version") != VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {header.get('version')}")
        arrays = {}
        for entry in header["arrays"]:
            shape = tuple(entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            raw = fh.read(count * 8)
            if len(raw) != count * 8:
                raise ValueError(f"{path}: truncated array {entry['name']!r}")
            arrays[entry["name"]] = np.frombuffer(raw, dtype="<f8").reshape(shape).copy()
    return header["meta"], arrays
