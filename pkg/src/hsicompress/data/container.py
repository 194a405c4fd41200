"""Two-file scene container: a JSON header plus raw little-endian payloads.

``<name>.hsij`` holds the header::

    {"magic": "HSIC1", "bands": B, "height": H, "width": W, "classes": C,
     "class_names": [...], "dtype": "f32le", "layout": "bsq",
     "labels_file": "<name>.labels", "mask_file": optional}

``<name>.hsib`` holds exactly ``4*B*H*W`` bytes of f32 samples. Labels are
``H*W`` u16 values and the optional mask is ``H*W`` u8 codes. Payload paths
in the header are relative to the header's directory.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .types import HsiCube, HsiDataset, LabelRaster, SplitMask

MAGIC = "HSIC1"


class ContainerError(ValueError):
    pass


def _read_exact(path: Path, dtype: str, count: int, what: str) -> np.ndarray:
    if not path.exists():
        raise ContainerError(f"{what} file not found: {path}")
    expected = count * np.dtype(dtype).itemsize
    actual = path.stat().st_size
    if actual != expected:
        raise ContainerError(f"{what} payload {path.name}: expected {expected} bytes, "
                             f"found {actual}")
    return np.fromfile(path, dtype=dtype, count=count)


def read_header(header_path: str | Path) -> dict:
    header_path = Path(header_path)
    try:
        header = json.loads(header_path.read_text())
    except FileNotFoundError:
        raise ContainerError(f"header not found: {header_path}") from None
    except json.JSONDecodeError as exc:
        raise ContainerError(f"header is not valid JSON: {exc}") from None
    if header.get("magic") != MAGIC:
        raise ContainerError(f"bad magic {header.get('magic')!r}, expected {MAGIC!r}")
    for key in ("bands", "height", "width", "classes"):
        if not isinstance(header.get(key), int) or header[key] < 1:
            raise ContainerError(f"header field {key!r} must be a positive integer")
    if header.get("dtype", "f32le") != "f32le" or header.get("layout", "bsq") != "bsq":
        raise ContainerError("only dtype f32le and layout bsq are supported")
    if "labels_file" not in header:
        raise ContainerError("header lacks labels_file")
    return header


def load_cube(header_path: str | Path, data_path: str | Path | None = None) -> HsiDataset:
    """Load and validate a scene; dims are cross-checked against payload sizes."""
    header_path = Path(header_path)
    header = read_header(header_path)
    root = header_path.parent
    data_path = Path(data_path) if data_path is not None else header_path.with_suffix(".hsib")
    b, h, w = header["bands"], header["height"], header["width"]

    raw = _read_exact(data_path, "<f4", b * h * w, "cube")
    if not np.isfinite(raw).all():
        raise ContainerError(f"cube payload {data_path.name} contains non-finite samples")
    cube = HsiCube(raw.reshape(b, h, w).astype(np.float32))

    ids = _read_exact(root / header["labels_file"], "<u2", h * w, "labels").reshape(h, w)
    if ids.max() > header["classes"]:
        raise ContainerError(f"label id {int(ids.max())} exceeds classes={header['classes']}")
    labels = LabelRaster(ids, header["classes"])

    mask = None
    if header.get("mask_file"):
        codes = _read_exact(root / header["mask_file"], "u1", h * w, "mask").reshape(h, w)
        mask = SplitMask(codes, kind="file")

    names = list(header.get("class_names") or [f"class_{i}" for i in range(1, labels.classes + 1)])
    try:
        return HsiDataset(header_path.stem, cube, labels, mask, names)
    except ValueError as exc:
        raise ContainerError(str(exc)) from None


def save_container(ds: HsiDataset, directory: str | Path, name: str | None = None) -> Path:
    """Write ``ds`` as ``<name>.hsij`` + payloads; returns the header path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    name = name or ds.name
    cube = ds.cube
    header = {
        "magic": MAGIC, "bands": cube.bands, "height": cube.height, "width": cube.width,
        "classes": ds.classes, "class_names": list(ds.class_names), "dtype": "f32le",
        "layout": "bsq", "labels_file": f"{name}.labels",
    }
    cube.data.astype("<f4").tofile(directory / f"{name}.hsib")
    ds.labels.ids.astype("<u2").tofile(directory / f"{name}.labels")
    if ds.mask is not None:
        header["mask_file"] = f"{name}.mask"
        ds.mask.codes.astype("u1").tofile(directory / f"{name}.mask")
    path = directory / f"{name}.hsij"
    path.write_text(json.dumps(header, indent=1))
    return path
