"""Checkpoint file: header line, one JSON line, then raw little-endian float64 arrays.

    CURRICOMP-CKPT-v1
    {"arrays": [...], "meta": {...}, "spec": {...}}
    <bytes>

Nothing time-dependent is written, so identical training runs give
byte-identical files.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import CurricompError
from .nn import ModelSpec, ModelState

HEADER = "CURRICOMP-CKPT-v1"


class CheckpointError(CurricompError):
    pass


@dataclass
class Checkpoint:
    spec: ModelSpec
    state: ModelState
    meta: dict = field(default_factory=dict)
    slots: dict[str, list[np.ndarray]] | None = None


def save_checkpoint(path, ckpt: Checkpoint) -> Path:
    path = Path(path)
    named = [(f"param.{i}", p) for i, p in enumerate(ckpt.state.params())]
    for key in sorted(ckpt.slots or {}):
        named += [(f"slot.{key}.{i}", a) for i, a in enumerate(ckpt.slots[key])]
    index, blobs, offset = [], [], 0
    for name, arr in named:
        raw = np.ascontiguousarray(arr, dtype="<f8").tobytes()
        index.append({"name": name, "shape": list(arr.shape), "offset": offset, "nbytes": len(raw)})
        blobs.append(raw)
        offset += len(raw)
    head = {"spec": ckpt.spec.to_dict(), "meta": ckpt.meta, "arrays": index}
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write((HEADER + "\n").encode())
        fh.write((json.dumps(head, sort_keys=True) + "\n").encode())
        for raw in blobs:
            fh.write(raw)
    tmp.replace(path)
    return path


def load_checkpoint(path) -> Checkpoint:
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f"checkpoint not found: {path}")
    data = path.read_bytes()
    first = data.find(b"\n")
    if first < 0 or data[:first].decode(errors="replace") != HEADER:
        raise CheckpointError(f"{path}: not a {HEADER} file")
    second = data.find(b"\n", first + 1)
    try:
        head = json.loads(data[first + 1:second])
    except (ValueError, UnicodeDecodeError) as exc:
        raise CheckpointError(f"{path}: corrupt header: {exc}") from exc
    body = memoryview(data)[second + 1:]
    params, slots = [], {}
    for entry in head["arrays"]:
        lo = entry["offset"]
        raw = body[lo:lo + entry["nbytes"]]
        if len(raw) != entry["nbytes"]:
            raise CheckpointError(f"{path}: truncated array {entry['name']}")
        arr = np.frombuffer(raw, dtype="<f8").reshape(entry["shape"]).astype(np.float64)
        parts = entry["name"].split(".")
        if parts[0] == "param":
            params.append(arr)
        else:
            slots.setdefault(parts[1], []).append(arr)
    spec = ModelSpec.from_dict(head["spec"])
    state = ModelState.from_params(params)
    state.check(spec)
    return Checkpoint(spec, state, head.get("meta", {}), slots or None)
