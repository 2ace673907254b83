"""Content-addressed artifact cache with a checksummed binary array format.

Entries are keyed by a hash of their canonical JSON payload and stored as a
versioned header plus dense little-endian arrays; corrupted entries fail
their checksum and are recomputed by callers.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from pathlib import Path

import numpy as np

MAGIC = b"CSPC"
VERSION = 1

_DTYPES = {"f8": "<f8", "i8": "<i8", "u1": "|u1"}


class CacheCorrupt(Exception):
    """A cache entry failed its checksum or structural validation."""


def content_key(payload) -> str:
    """Stable hex key for a JSON-serializable payload."""
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def _canonical(arr: np.ndarray) -> tuple[str, bytes]:
    if arr.dtype.kind == "f":
        return "f8", np.ascontiguousarray(arr, dtype="<f8").tobytes()
    if arr.dtype.kind in "iu" and arr.dtype.itemsize == 1:
        return "u1", np.ascontiguousarray(arr, dtype="|u1").tobytes()
    if arr.dtype.kind in "ib":
        return "i8", np.ascontiguousarray(arr, dtype="<i8").tobytes()
    raise TypeError(f"unsupported dtype {arr.dtype}")


def save_arrays(path, arrays: dict, meta: dict | None = None) -> None:
    """Atomically write named arrays (sorted by name, so output is canonical)."""
    names = sorted(arrays)
    specs = []
    payload = b""
    for name in names:
        code, blob = _canonical(np.asarray(arrays[name]))
        specs.append({"name": name, "dtype": code, "shape": list(np.asarray(arrays[name]).shape)})
        payload += blob
    header = json.dumps(
        {
            "version": VERSION,
            "meta": meta or {},
            "arrays": specs,
            "checksum": hashlib.sha256(payload).hexdigest(),
        },
        sort_keys=True,
        separators=(",", ":"),
    ).encode()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(MAGIC)
            fh.write(len(header).to_bytes(8, "little"))
            fh.write(header)
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_arrays(path):
    """Read back (arrays, meta); raises CacheCorrupt on any damage."""
    try:
        with open(path, "rb") as fh:
            if fh.read(4) != MAGIC:
                raise CacheCorrupt(f"{path}: bad magic")
            hlen = int.from_bytes(fh.read(8), "little")
            header = json.loads(fh.read(hlen))
            payload = fh.read()
    except (OSError, ValueError) as exc:
        raise CacheCorrupt(f"{path}: {exc}") from exc
    if header.get("version") != VERSION:
        raise CacheCorrupt(f"{path}: unsupported version {header.get('version')}")
    if hashlib.sha256(payload).hexdigest() != header.get("checksum"):
        raise CacheCorrupt(f"{path}: checksum mismatch")
    arrays = {}
    offset = 0
    for spec in header["arrays"]:
        dtype = np.dtype(_DTYPES[spec["dtype"]])
        count = int(np.prod(spec["shape"])) if spec["shape"] else 1
        nbytes = count * dtype.itemsize
        arrays[spec["name"]] = np.frombuffer(
            payload[offset:offset + nbytes], dtype=dtype
        ).reshape(spec["shape"]).copy()
        offset += nbytes
    if offset != len(payload):
        raise CacheCorrupt(f"{path}: trailing payload bytes")
    return arrays, header["meta"]


class PipelineCache:
    """Directory of cache entries addressed by (stage, content key)."""

    def __init__(self, root):
        self.root = Path(root)

    def path_for(self, stage: str, key: str) -> Path:
        return self.root / f"{stage}-{key}.cspc"

    def has(self, stage: str, key: str) -> bool:
        return self.path_for(stage, key).exists()

    def store(self, stage: str, key: str, arrays: dict, meta: dict | None = None) -> Path:
        path = self.path_for(stage, key)
        save_arrays(path, arrays, meta)
        return path

    def load(self, stage: str, key: str):
        return load_arrays(self.path_for(stage, key))
