"""Synthetic scenes with the statistics that matter for the pipelines.

Classes occupy several Voronoi regions each. A class's spectrum is a smooth
curve that drifts from region to region, so a spatially disjoint split sees
shifted spectra at test time while a random split does not. Illumination
and noise fields are spatially smooth, plus white sensor noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..autograd.rng import make_rng
from .types import HsiCube, HsiDataset, LabelRaster


@dataclass
class SyntheticConfig:
    bands: int = 48
    height: int = 48
    width: int = 48
    classes: int = 6
    regions_per_class: int = 3
    unlabeled_fraction: float = 0.3
    region_drift: float = 0.15
    noise: float = 0.05
    seed: int = 0


def _smooth_field(rng, h: int, w: int, terms: int = 6) -> np.ndarray:
    yy, xx = np.mgrid[0:h, 0:w] / max(h, w)
    field = np.zeros((h, w))
    for _ in range(terms):
        fy, fx = rng.uniform(0.5, 3.0, 2)
        phase = rng.uniform(0, 2 * np.pi)
        field += np.cos(2 * np.pi * (fy * yy + fx * xx) + phase)
    return field / np.sqrt(terms)


def _smooth_spectrum(rng, bands: int, bumps: int = 4) -> np.ndarray:
    x = np.linspace(0, 1, bands)
    s = 0.3 + 0.2 * x * rng.uniform(-1, 1)
    for _ in range(bumps):
        s += rng.uniform(0.1, 0.6) * np.exp(-0.5 * ((x - rng.uniform()) / rng.uniform(0.04, 0.2)) ** 2)
    return s


def make_synthetic_scene(cfg: SyntheticConfig = SyntheticConfig(), name: str = "synthetic") -> HsiDataset:
    rng = make_rng(cfg.seed)
    h, w, b, c = cfg.height, cfg.width, cfg.bands, cfg.classes
    n_regions = c * cfg.regions_per_class
    centers = rng.uniform(0, 1, size=(n_regions, 2)) * [h, w]
    region_class = np.repeat(np.arange(c), cfg.regions_per_class)
    rng.shuffle(region_class)
    yy, xx = np.mgrid[0:h, 0:w]
    d2 = (yy[..., None] - centers[:, 0]) ** 2 + (xx[..., None] - centers[:, 1]) ** 2
    region = d2.argmin(axis=-1)

    base = np.stack([_smooth_spectrum(rng, b) for _ in range(c)])
    drift = np.stack([_smooth_spectrum(rng, b) for _ in range(n_regions)])
    region_spec = base[region_class] + cfg.region_drift * (drift - drift.mean(axis=1, keepdims=True))

    illum = 1.0 + 0.1 * _smooth_field(rng, h, w)
    cube = region_spec[region].transpose(2, 0, 1) * illum
    for _ in range(3):
        cube += cfg.noise * _smooth_field(rng, h, w)[None] * _smooth_spectrum(rng, b)[:, None, None]
    cube += cfg.noise * rng.normal(size=cube.shape)
    cube = 1000.0 * np.clip(cube, 0.0, None)

    ids = region_class[region].astype(np.int64) + 1
    ids[rng.uniform(size=(h, w)) < cfg.unlabeled_fraction] = 0
    for cls in range(1, c + 1):  # every class keeps at least two pixels
        if (ids == cls).sum() < 2:
            where = np.argwhere(region_class[region] == cls - 1)[:2]
            ids[where[:, 0], where[:, 1]] = cls
    names = [f"class_{i}" for i in range(1, c + 1)]
    return HsiDataset(name, HsiCube(cube.astype(np.float32)), LabelRaster(ids, c), None, names)
