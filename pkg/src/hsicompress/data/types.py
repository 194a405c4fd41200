"""Validated containers for a hyperspectral scene and its annotations."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

IGNORE, TRAIN, TEST = 0, 1, 2


@dataclass
class HsiCube:
    """Band-sequential ``[B, H, W]`` cube of finite samples."""

    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data)
        if self.data.ndim != 3 or min(self.data.shape) < 1:
            raise ValueError(f"cube must be [B,H,W] with positive dims, got {self.data.shape}")
        if self.data.dtype not in (np.float32, np.float64):
            self.data = self.data.astype(np.float32)
        if not np.isfinite(self.data).all():
            raise ValueError("cube contains non-finite samples")

    @property
    def bands(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    def pixels(self, mask: np.ndarray | None = None) -> np.ndarray:
        """``[N, B]`` pixel spectra, row-major, optionally restricted to ``mask``."""
        flat = self.data.reshape(self.bands, -1).T
        return flat if mask is None else flat[np.asarray(mask).reshape(-1)]


@dataclass
class LabelRaster:
    """``H x W`` class ids; 0 marks unlabeled pixels, 1..classes are classes."""

    ids: np.ndarray
    classes: int

    def __post_init__(self):
        self.ids = np.asarray(self.ids)
        if self.ids.ndim != 2:
            raise ValueError(f"label raster must be 2-D, got {self.ids.shape}")
        if self.ids.size and (self.ids.min() < 0 or self.ids.max() > self.classes):
            raise ValueError(f"label ids must lie in [0, {self.classes}]")
        self.ids = self.ids.astype(np.uint16)
        if not self.ids.any():
            raise ValueError("label raster has no labeled pixels")

    @property
    def shape(self) -> tuple:
        return self.ids.shape

    @property
    def labeled(self) -> np.ndarray:
        return self.ids != 0

    def counts(self) -> np.ndarray:
        """Pixels per class, index 0 = class id 1."""
        return np.bincount(self.ids.reshape(-1), minlength=self.classes + 1)[1:]


@dataclass
class SplitMask:
    """``H x W`` codes: 0 ignore, 1 train, 2 test."""

    codes: np.ndarray
    kind: str = "file"

    def __post_init__(self):
        self.codes = np.asarray(self.codes)
        if self.codes.ndim != 2:
            raise ValueError(f"split mask must be 2-D, got {self.codes.shape}")
        if np.setdiff1d(np.unique(self.codes), [IGNORE, TRAIN, TEST]).size:
            raise ValueError("split mask codes must be 0, 1 or 2")
        self.codes = self.codes.astype(np.uint8)

    @property
    def train(self) -> np.ndarray:
        return self.codes == TRAIN

    @property
    def test(self) -> np.ndarray:
        return self.codes == TEST

    def check_against(self, labels: LabelRaster) -> None:
        if self.codes.shape != labels.shape:
            raise ValueError(f"mask shape {self.codes.shape} != label shape {labels.shape}")
        if np.any((self.codes != IGNORE) & ~labels.labeled):
            raise ValueError("split mask assigns unlabeled pixels")


@dataclass
class HsiDataset:
    name: str
    cube: HsiCube
    labels: LabelRaster
    mask: SplitMask | None = None
    class_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        if self.labels.shape != (self.cube.height, self.cube.width):
            raise ValueError(f"label raster {self.labels.shape} does not match cube "
                             f"{(self.cube.height, self.cube.width)}")
        if self.mask is not None:
            self.mask.check_against(self.labels)

    @property
    def classes(self) -> int:
        return self.labels.classes
