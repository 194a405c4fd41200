"""Band cleaning and per-band standardization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .types import HsiCube

# Water-absorption bands of the Indian Pines scene, 1-based.
INDIAN_PINES_WATER_BANDS = tuple(range(104, 109)) + tuple(range(150, 164)) + (220,)
STD_FLOOR = 1e-8


def indian_pines_removal(bands: int) -> list[int]:
    """0-based bands to drop so the Indian Pines scene ends with 200 bands.

    A 220-band release drops the 20 water bands. The full 224-band sensor
    layout additionally drops its four trailing bands (221..224).
    """
    water = [b - 1 for b in INDIAN_PINES_WATER_BANDS]
    if bands == 220:
        return water
    if bands == 224:
        return water + [220, 221, 222, 223]
    raise ValueError(f"no default Indian Pines removal list for {bands} bands")


def remove_bands(cube: HsiCube, band_indices) -> HsiCube:
    idx = np.asarray(list(band_indices), dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= cube.bands):
        raise ValueError(f"band index out of range [0, {cube.bands})")
    if np.unique(idx).size != idx.size:
        raise ValueError("duplicate band index")
    keep = np.setdiff1d(np.arange(cube.bands), idx)
    if keep.size == 0:
        raise ValueError("cannot remove every band")
    return HsiCube(cube.data[keep])


@dataclass
class Standardizer:
    mean: np.ndarray | None = None
    std: np.ndarray | None = None

    @property
    def fitted(self) -> bool:
        return self.mean is not None

    def apply(self, cube: HsiCube) -> HsiCube:
        if not self.fitted:
            raise RuntimeError("Standardizer.apply called before fit")
        if self.mean.shape[0] != cube.bands:
            raise ValueError(f"standardizer fitted on {self.mean.shape[0]} bands, cube has "
                             f"{cube.bands}")
        mean = self.mean.reshape(-1, 1, 1)
        std = self.std.reshape(-1, 1, 1)
        safe = np.where(std < STD_FLOOR, 1.0, std)
        out = np.where(std < STD_FLOOR, 0.0, (cube.data - mean) / safe)
        return HsiCube(out.astype(cube.data.dtype))


def standardize_fit(cube: HsiCube, mask: np.ndarray | None = None) -> Standardizer:
    """Per-band mean and population std over ``mask`` pixels (all pixels if None)."""
    px = cube.pixels(mask).astype(np.float64)
    if px.shape[0] == 0:
        raise ValueError("no pixels to fit the standardizer on")
    return Standardizer(px.mean(axis=0), px.std(axis=0))


def standardize_apply(cube: HsiCube, s: Standardizer) -> HsiCube:
    return s.apply(cube)
