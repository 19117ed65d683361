"""Checkpoint files: one JSON header line, then raw array bytes.

The header records format tag, free-form metadata, and an ordered manifest of
(name, dtype, shape) entries; the payload is each array's C-order bytes
concatenated in manifest order. Loading validates the format tag and payload
length and reconstructs arrays exactly.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .nn import Mlp

FORMAT_TAG = "cavernrl-ckpt-v1"


class CheckpointError(ValueError):
    pass


def save_checkpoint(path: str | Path, arrays: dict[str, np.ndarray],
                    meta: dict | None = None) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    manifest = [{"name": name, "dtype": str(a.dtype), "shape": list(a.shape)}
                for name, a in arrays.items()]
    header = {"format": FORMAT_TAG, "meta": meta or {}, "arrays": manifest}
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")
        for a in arrays.values():
            fh.write(np.ascontiguousarray(a).tobytes())


def load_checkpoint(path: str | Path) -> tuple[dict, dict[str, np.ndarray]]:
    path = Path(path)
    with open(path, "rb") as fh:
        try:
            header = json.loads(fh.readline().decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise CheckpointError(f"{path}: bad checkpoint header: {exc}") from None
        if header.get("format") != FORMAT_TAG:
            raise CheckpointError(
                f"{path}: unrecognized checkpoint format: {header.get('format')!r}")
        payload = fh.read()
    arrays: dict[str, np.ndarray] = {}
    offset = 0
    for entry in header["arrays"]:
        dtype = np.dtype(entry["dtype"])
        shape = tuple(entry["shape"])
        nbytes = dtype.itemsize * int(np.prod(shape, dtype=np.int64))
        chunk = payload[offset:offset + nbytes]
        if len(chunk) != nbytes:
            raise CheckpointError(f"{path}: truncated payload for {entry['name']!r}")
        arrays[entry["name"]] = np.frombuffer(chunk, dtype=dtype).reshape(shape).copy()
        offset += nbytes
    if offset != len(payload):
        raise CheckpointError(f"{path}: {len(payload) - offset} trailing bytes")
    return header["meta"], arrays


def pack_mlp(model: Mlp, prefix: str) -> dict[str, np.ndarray]:
    out: dict[str, np.ndarray] = {}
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        out[f"{prefix}/w{i}"] = w
        out[f"{prefix}/b{i}"] = b
    return out


def unpack_mlp(model: Mlp, prefix: str, arrays: dict[str, np.ndarray]) -> None:
    """Copy checkpoint arrays into an existing model in place."""
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        for param, key in ((w, f"{prefix}/w{i}"), (b, f"{prefix}/b{i}")):
            if key not in arrays:
                raise CheckpointError(f"missing checkpoint array {key!r}")
            src = arrays[key]
            if src.shape != param.shape:
                raise CheckpointError(
                    f"shape mismatch for {key!r}: checkpoint {src.shape}, "
                    f"model {param.shape}")
            param[...] = src
