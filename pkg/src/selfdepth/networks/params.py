"""Named parameter container and the binary checkpoint format."""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..autodiff import Tensor

_MAGIC = b"SDCKPT1\n"


class ModelParameters:
    """Ordered map from layer identifiers to weight/bias tensors.

    Insertion order is the creation order of the layers and is what the
    optimizer iterates over, so runs are reproducible.
    """

    def __init__(self):
        self._entries: dict[str, Tensor] = {}

    def add(self, name: str, values: np.ndarray) -> Tensor:
        if name in self._entries:
            raise ValueError(f"duplicate parameter name {name!r}")
        t = Tensor(values, requires_grad=True)
        self._entries[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._entries[name]

    def __contains__(self, name: str) -> bool:
        return name in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def names(self) -> list[str]:
        return list(self._entries)

    def items(self):
        return self._entries.items()

    def tensors(self) -> list[Tensor]:
        return list(self._entries.values())

    def zero_grads(self) -> None:
        for t in self._entries.values():
            t.zero_grad()

    def astype(self, dtype) -> "ModelParameters":
        out = ModelParameters()
        for name, t in self._entries.items():
            out.add(name, t.data.astype(dtype))
        return out

    def load_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        """Overwrite values in place; names and shapes must match exactly."""
        missing = set(self._entries) - set(arrays)
        extra = set(arrays) - set(self._entries)
        if missing or extra:
            raise ValueError(f"parameter names do not match checkpoint "
                             f"(missing {sorted(missing)[:3]}, extra {sorted(extra)[:3]})")
        for name, t in self._entries.items():
            arr = np.asarray(arrays[name])
            if arr.shape != t.shape:
                raise ValueError(f"parameter {name!r}: checkpoint shape {arr.shape} "
                                 f"does not match model shape {t.shape}")
            t.data = arr.astype(t.dtype)


def count_parameters(params) -> int:
    """Total number of scalar parameters."""
    if isinstance(params, ModelParameters):
        return sum(t.size for t in params.tensors())
    return sum(np.asarray(v).size for v in dict(params).values())


def save_checkpoint(path, arrays: dict[str, np.ndarray],
                    meta: dict | None = None) -> None:
    """Write a self-describing checkpoint.

    Layout: magic, 8-byte little-endian header length, JSON header with a
    version tag and per-entry name/shape (entries sorted by name), then the
    raw little-endian float32 payloads in header order. Identical inputs
    produce identical bytes.
    """
    names = sorted(arrays)
    header = {
        "version": 1,
        "meta": meta or {},
        "entries": [{"name": n, "shape": list(np.asarray(arrays[n]).shape)} for n in names],
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for n in names:
            fh.write(np.ascontiguousarray(arrays[n], dtype="<f4").tobytes())


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict]:
    """Read a checkpoint back into float32 arrays plus its metadata."""
    raw = Path(path).read_bytes()
    if not raw.startswith(_MAGIC):
        raise ValueError(f"{path}: not a checkpoint file (bad magic)")
    offset = len(_MAGIC)
    (hlen,) = struct.unpack_from("<Q", raw, offset)
    offset += 8
    header = json.loads(raw[offset:offset + hlen].decode("utf-8"))
    if header.get("version") != 1:
        raise ValueError(f"{path}: unsupported checkpoint version {header.get('version')}")
    offset += hlen
    arrays: dict[str, np.ndarray] = {}
    for entry in header["entries"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(raw, dtype="<f4", count=count, offset=offset).reshape(shape)
        arrays[entry["name"]] = arr.copy()
        offset += 4 * count
    if offset != len(raw):
        raise ValueError(f"{path}: trailing bytes after payload")
    return arrays, header["meta"]
