"""Checkpoint files: magic, JSON manifest, raw tensor payload, CRC32 trailer.

Layout::

    b"HSCK" | u32 manifest length | manifest (UTF-8 JSON) | payload | u32 CRC32

The manifest lists tensors in payload order with name, shape and dtype
(``f32``, ``i8``, ``i32``); quantized tensors also carry scale and zero point.
The CRC covers every preceding byte.
"""

from __future__ import annotations

import hashlib
import json
import struct
import zlib
from pathlib import Path

import numpy as np

from .graph import ModelGraph
from .zoo import ArchSpec, build_model

MAGIC = b"HSCK"
DTYPES = {"f32": "<f4", "i8": "i1", "i32": "<i4", "u8": "u1"}


class CheckpointError(ValueError):
    pass


def arch_digest(arch: dict) -> str:
    return hashlib.sha256(json.dumps(arch, sort_keys=True).encode()).hexdigest()


def config_digest(config) -> str:
    blob = json.dumps(config, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def write_container(path: str | Path, manifest: dict, tensors: list[tuple[dict, np.ndarray]]) -> None:
    entries, chunks = [], []
    for meta, arr in tensors:
        code = meta.get("dtype", "f32")
        data = np.ascontiguousarray(arr, dtype=DTYPES[code])
        entries.append({**meta, "dtype": code, "shape": list(arr.shape)})
        chunks.append(data.tobytes())
    manifest = {**manifest, "tensors": entries}
    head = json.dumps(manifest, sort_keys=True).encode()
    body = MAGIC + struct.pack("<I", len(head)) + head + b"".join(chunks)
    Path(path).write_bytes(body + struct.pack("<I", zlib.crc32(body)))


def read_container(path: str | Path) -> tuple[dict, list[tuple[dict, np.ndarray]]]:
    try:
        blob = Path(path).read_bytes()
    except FileNotFoundError:
        raise CheckpointError(f"checkpoint not found: {path}") from None
    if len(blob) < 12 or blob[:4] != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    (hlen,) = struct.unpack("<I", blob[4:8])
    if 8 + hlen + 4 > len(blob):
        raise CheckpointError("truncated checkpoint: manifest exceeds file length")
    try:
        manifest = json.loads(blob[8:8 + hlen])
    except json.JSONDecodeError:
        raise CheckpointError("corrupt checkpoint manifest") from None
    expected = sum(int(np.prod(e["shape"], dtype=np.int64)) * np.dtype(DTYPES[e["dtype"]]).itemsize
                   for e in manifest["tensors"])
    payload_len = len(blob) - 8 - hlen - 4
    if payload_len != expected:
        raise CheckpointError(f"checkpoint payload length {payload_len} != expected {expected}")
    (crc,) = struct.unpack("<I", blob[-4:])
    if zlib.crc32(blob[:-4]) != crc:
        raise CheckpointError("checkpoint CRC mismatch (corrupt payload)")
    out, off = [], 8 + hlen
    for e in manifest["tensors"]:
        dt = np.dtype(DTYPES[e["dtype"]])
        count = int(np.prod(e["shape"], dtype=np.int64))
        arr = np.frombuffer(blob, dtype=dt, count=count, offset=off).reshape(e["shape"]).copy()
        off += count * dt.itemsize
        out.append((e, arr))
    return manifest, out


def save_checkpoint(model: ModelGraph, path: str | Path, class_names=None, config=None,
                    metrics=None) -> None:
    arch = model.arch.to_dict()
    manifest = {
        "format": "float", "arch": arch, "arch_digest": arch_digest(arch),
        "class_names": list(class_names or []), "config_digest": config_digest(config or {}),
        "metrics": metrics or {},
    }
    tensors = [({"name": name}, arr) for name, arr in model.state_dict().items()]
    write_container(path, manifest, tensors)


def load_checkpoint(path: str | Path, expected_classes: int | None = None) -> ModelGraph:
    manifest, tensors = read_container(path)
    if manifest.get("format") != "float":
        raise CheckpointError(f"expected a float checkpoint, got {manifest.get('format')!r}")
    arch = manifest["arch"]
    if arch_digest(arch) != manifest.get("arch_digest"):
        raise CheckpointError("manifest architecture digest mismatch")
    spec = ArchSpec.from_dict(arch)
    if expected_classes is not None and spec.classes != expected_classes:
        raise CheckpointError(f"checkpoint has {spec.classes} classes but the dataset "
                              f"config expects {expected_classes}")
    model = build_model(spec)
    try:
        model.load_state_dict({e["name"]: arr for e, arr in tensors})
    except ValueError as exc:
        raise CheckpointError(f"checkpoint does not match its architecture: {exc}") from None
    model.eval()
    return model
