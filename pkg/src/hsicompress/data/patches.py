"""Pixel-centred patch sets, extracted lazily from a reflect-padded cube."""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .types import HsiCube, LabelRaster


class PatchSet:
    """``N`` patches ``[C, d, d]`` (or spectra ``[C]``) around selected pixels.

    Only the padded cube and pixel coordinates are stored; ``batch`` gathers
    windows on demand. Subsets share the padded cube.
    """

    def __init__(self, padded: np.ndarray, coords: np.ndarray, labels: np.ndarray, d: int,
                 classes: int):
        self.padded = padded
        self.coords = np.asarray(coords, dtype=np.int64).reshape(-1, 2)
        self.labels = np.asarray(labels, dtype=np.int64)
        self.d = d
        self.classes = classes
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= classes):
            raise ValueError("patch labels out of range")
        self._windows = sliding_window_view(padded, (d, d), axis=(1, 2))  # C,H,W,d,d

    def __len__(self) -> int:
        return self.labels.shape[0]

    @property
    def channels(self) -> int:
        return self.padded.shape[0]

    def batch(self, idx=None) -> np.ndarray:
        """``[n, C, d, d]`` patches for positions ``idx`` (all if None)."""
        rc = self.coords if idx is None else self.coords[idx]
        win = self._windows[:, rc[:, 0], rc[:, 1]]  # C,n,d,d
        return np.ascontiguousarray(win.transpose(1, 0, 2, 3))

    def spectra(self, idx=None) -> np.ndarray:
        """``[n, C]`` centre-pixel spectra."""
        rc = self.coords if idx is None else self.coords[idx]
        r = self.d // 2
        return np.ascontiguousarray(self.padded[:, rc[:, 0] + r, rc[:, 1] + r].T)

    def subset(self, idx) -> "PatchSet":
        return PatchSet(self.padded, self.coords[idx], self.labels[idx], self.d, self.classes)

    def inputs(self, idx=None, kind: str = "patch") -> np.ndarray:
        """Model inputs: patches for 2-D models, spectra for 1-D ones."""
        return self.batch(idx) if kind == "patch" else self.spectra(idx)


def extract_patches(cube: HsiCube, labels: LabelRaster, d: int,
                    select: np.ndarray | None = None) -> PatchSet:
    """One patch per labeled pixel (restricted to ``select`` if given), row-major.

    Labels are remapped to 0-based ids ``id - 1``.
    """
    if d < 1 or d % 2 == 0:
        raise ValueError(f"patch size must be odd and positive, got {d}")
    if labels.shape != (cube.height, cube.width):
        raise ValueError(f"label raster {labels.shape} does not match cube "
                         f"{(cube.height, cube.width)}")
    chosen = labels.labeled if select is None else (labels.labeled & np.asarray(select, bool))
    rows, cols = np.nonzero(chosen)
    r = d // 2
    padded = np.pad(cube.data, ((0, 0), (r, r), (r, r)), mode="reflect") if r else cube.data
    ids = labels.ids[rows, cols].astype(np.int64) - 1
    return PatchSet(padded, np.stack([rows, cols], axis=1), ids, d, labels.classes)
