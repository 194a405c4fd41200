"""Stratified train/test splits of the labeled pixels."""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from ..autograd.rng import make_rng
from .types import IGNORE, TEST, TRAIN, LabelRaster, SplitMask


class SplitError(ValueError):
    pass


def train_count(n: int, fraction: float) -> int:
    """Round-half-up of ``fraction * n``, at least 1 and leaving at least 1 for test."""
    k = math.floor(Fraction(str(fraction)) * n + Fraction(1, 2))
    return min(max(k, 1), n - 1)


def _check(labels: LabelRaster, fraction: float) -> None:
    if not 0 < fraction < 1:
        raise SplitError(f"train fraction must be in (0, 1), got {fraction}")
    counts = labels.counts()
    small = [c + 1 for c in np.nonzero((counts > 0) & (counts < 2))[0]]
    if small:
        raise SplitError(f"classes {small} have fewer than 2 pixels; cannot form both splits")


def _class_pixels(labels: LabelRaster):
    flat = labels.ids.reshape(-1)
    for cls in range(1, labels.classes + 1):
        idx = np.flatnonzero(flat == cls)  # row-major order
        if idx.size:
            yield cls, idx


def split_random(labels: LabelRaster, train_fraction: float, seed: int) -> SplitMask:
    _check(labels, train_fraction)
    rng = make_rng(seed)
    codes = np.full(labels.ids.size, IGNORE, dtype=np.uint8)
    for _, idx in _class_pixels(labels):
        idx = idx.copy()
        rng.shuffle(idx)
        k = train_count(idx.size, train_fraction)
        codes[idx[:k]] = TRAIN
        codes[idx[k:]] = TEST
    return SplitMask(codes.reshape(labels.shape), kind="random")


def split_disjoint(labels: LabelRaster, train_fraction: float) -> SplitMask:
    """Per class, the first pixels in row-major order become train.

    This approximates a spatially disjoint split when no benchmark mask is
    available: every class's train pixels form a contiguous image region.
    """
    _check(labels, train_fraction)
    codes = np.full(labels.ids.size, IGNORE, dtype=np.uint8)
    for _, idx in _class_pixels(labels):
        k = train_count(idx.size, train_fraction)
        codes[idx[:k]] = TRAIN
        codes[idx[k:]] = TEST
    return SplitMask(codes.reshape(labels.shape), kind="disjoint-rowmajor")
