"""Scene preprocessing: clean, standardize, project, split, extract patches."""

from __future__ import annotations

from dataclasses import dataclass, field


from .pca import PcaModel, pca_fit, pca_transform
from .patches import PatchSet, extract_patches
from .preprocess import Standardizer, indian_pines_removal, remove_bands, standardize_fit
from .splits import split_disjoint, split_random
from .types import HsiCube, HsiDataset, SplitMask


@dataclass
class DatasetProfile:
    name: str
    train_fraction: float
    lr: float
    remove: str | None = None


PROFILES = {
    "indian_pines": DatasetProfile("indian_pines", 0.55, 1e-3, remove="indian_pines"),
    "pavia_university": DatasetProfile("pavia_university", 0.07, 8e-4),
}


@dataclass
class PreprocessConfig:
    remove_bands: list[int] | str | None = None   # explicit 0-based list or "indian_pines"
    standardize: bool = True
    pca_components: int | None = 40
    fit_on: str = "labeled"                         # "labeled" | "train" | "all"
    patch_size: int = 19
    split: str = "disjoint"                         # "disjoint" | "random"
    train_fraction: float = 0.55
    split_seed: int = 0

    def __post_init__(self):
        if self.fit_on not in ("labeled", "train", "all"):
            raise ValueError(f"fit_on must be labeled/train/all, got {self.fit_on!r}")
        if self.split not in ("disjoint", "random"):
            raise ValueError(f"split must be disjoint/random, got {self.split!r}")


@dataclass
class Prepared:
    cube: HsiCube
    mask: SplitMask
    train: PatchSet
    test: PatchSet
    classes: int
    standardizer: Standardizer | None = None
    pca: PcaModel | None = None
    info: dict = field(default_factory=dict)


def make_split(ds: HsiDataset, cfg: PreprocessConfig) -> SplitMask:
    """Split mask for ``cfg.split``; a disjoint split prefers the container's mask."""
    if cfg.split == "random":
        return split_random(ds.labels, cfg.train_fraction, cfg.split_seed)
    if ds.mask is not None:
        return ds.mask
    return split_disjoint(ds.labels, cfg.train_fraction)


def prepare(ds: HsiDataset, cfg: PreprocessConfig) -> Prepared:
    cube = ds.cube
    if cfg.remove_bands == "indian_pines":
        cube = remove_bands(cube, indian_pines_removal(cube.bands))
    elif cfg.remove_bands:
        cube = remove_bands(cube, cfg.remove_bands)

    mask = make_split(ds, cfg)
    population = {"labeled": ds.labels.labeled, "train": mask.train, "all": None}[cfg.fit_on]

    std = None
    if cfg.standardize:
        std = standardize_fit(cube, population)
        cube = std.apply(cube)
    pca = None
    if cfg.pca_components:
        pca = pca_fit(cube.pixels(population), cfg.pca_components)
        cube = pca_transform(cube, pca, cfg.pca_components)

    train = extract_patches(cube, ds.labels, cfg.patch_size, mask.train)
    test = extract_patches(cube, ds.labels, cfg.patch_size, mask.test)
    info = {"bands_in": ds.cube.bands, "channels": cube.bands, "split_kind": mask.kind,
            "n_train": len(train), "n_test": len(test)}
    return Prepared(cube, mask, train, test, ds.classes, std, pca, info)
