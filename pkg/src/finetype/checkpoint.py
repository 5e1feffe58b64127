"""Single-file checkpoint container.

Layout (documented here as the authoritative byte spec):

    bytes 0..7    ASCII magic ``FTCHKPT\\n``
    bytes 8..15   little-endian uint64: manifest length L in bytes
    bytes 16..16+L UTF-8 JSON manifest
    remainder     parameter arrays, little-endian IEEE-754, concatenated
                  in manifest entry order

The manifest is ``{"format_version": 1, "meta": {...}, "entries": [...]}``
where each entry carries ``name``, ``shape``, ``dtype`` ("<f8" or "<f4")
and ``offset`` (bytes from the start of the array region). ``meta`` is an
arbitrary JSON object for model-level bookkeeping (model kind, label
vocabulary, embedding config). Round-trips are value-exact at the stored
precision.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .errors import DataError

MAGIC = b"FTCHKPT\n"
FORMAT_VERSION = 1


def save_checkpoint(path, arrays: dict[str, np.ndarray], meta: dict | None = None,
                    dtype: str = "<f8"):
    """Write named arrays plus a JSON meta blob to ``path``."""
    if dtype not in ("<f8", "<f4"):
        raise DataError(f"unsupported checkpoint dtype {dtype!r}")
    entries = []
    blobs = []
    offset = 0
    for name, arr in arrays.items():
        data = np.ascontiguousarray(arr, dtype=np.dtype(dtype)).tobytes()
        entries.append(
            {"name": name, "shape": list(arr.shape), "dtype": dtype, "offset": offset}
        )
        blobs.append(data)
        offset += len(data)
    manifest = json.dumps(
        {"format_version": FORMAT_VERSION, "meta": meta or {}, "entries": entries}
    ).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<Q", len(manifest)))
        f.write(manifest)
        for blob in blobs:
            f.write(blob)


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict]:
    """Read a checkpoint; returns (arrays, meta)."""
    with open(path, "rb") as f:
        magic = f.read(8)
        if magic != MAGIC:
            raise DataError(f"{path}: not a checkpoint file (bad magic {magic!r})")
        (length,) = struct.unpack("<Q", f.read(8))
        manifest = json.loads(f.read(length).decode("utf-8"))
        if manifest.get("format_version") != FORMAT_VERSION:
            raise DataError(
                f"{path}: unsupported format_version {manifest.get('format_version')!r}"
            )
        body = f.read()
    arrays = {}
    for entry in manifest["entries"]:
        dt = np.dtype(entry["dtype"])
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = entry["offset"]
        end = start + count * dt.itemsize
        if end > len(body):
            raise DataError(f"{path}: truncated array region for {entry['name']!r}")
        arrays[entry["name"]] = np.frombuffer(
            body[start:end], dtype=dt
        ).reshape(shape).astype(np.float64)
    return arrays, manifest.get("meta", {})
