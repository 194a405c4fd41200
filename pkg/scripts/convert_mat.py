"""One-off conversion of the public .mat scene files into .hsij containers.

    python scripts/convert_mat.py indian_pines Indian_pines.mat Indian_pines_gt.mat data/
    python scripts/convert_mat.py pavia_university PaviaU.mat PaviaU_gt.mat data/ \
        --train-mask TRLabel.mat --test-mask TSLabel.mat

Cubes are stored [H, W, B] in the .mat files and written band-sequential.
The optional train/test rasters (any nonzero pixel counts) become the
container's disjoint split mask. Requires scipy (``pip install .[convert]``).
"""

from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np
from scipy.io import loadmat

from hsicompress.data import HsiCube, HsiDataset, LabelRaster, SplitMask, save_container
from hsicompress.data.types import TEST, TRAIN

CLASS_NAMES = {
    "indian_pines": ["Alfalfa", "Corn-notill", "Corn-mintill", "Corn", "Grass-pasture",
                     "Grass-trees", "Grass-pasture-mowed", "Hay-windrowed", "Oats",
                     "Soybean-notill", "Soybean-mintill", "Soybean-clean", "Wheat", "Woods",
                     "Buildings-Grass-Trees-Drives", "Stone-Steel-Towers"],
    "pavia_university": ["Asphalt", "Meadows", "Gravel", "Trees", "Painted metal sheets",
                         "Bare Soil", "Bitumen", "Self-Blocking Bricks", "Shadows"],
}


def load_array(path: str | Path) -> np.ndarray:
    """The single non-metadata array of a .mat file, or a .npy array."""
    path = Path(path)
    if path.suffix == ".npy":
        return np.load(path)
    arrays = {k: v for k, v in loadmat(path).items() if not k.startswith("__")}
    if len(arrays) != 1:
        raise SystemExit(f"{path}: expected one array, found {sorted(arrays)}")
    return next(iter(arrays.values()))


def split_mask(train_path, test_path, labels: LabelRaster) -> SplitMask:
    train = load_array(train_path) != 0
    test = load_array(test_path) != 0
    if train.shape != labels.shape or test.shape != labels.shape:
        raise SystemExit("split rasters do not match the label raster")
    if np.any(train & test):
        raise SystemExit("train and test rasters overlap")
    codes = np.zeros(labels.shape, np.uint8)
    codes[train & labels.labeled] = TRAIN
    codes[test & labels.labeled] = TEST
    return SplitMask(codes, kind="file")


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("name", help="container name, e.g. indian_pines or pavia_university")
    p.add_argument("cube", help=".mat file holding the [H, W, B] cube")
    p.add_argument("labels", help=".mat file holding the [H, W] ground truth")
    p.add_argument("out_dir")
    p.add_argument("--train-mask")
    p.add_argument("--test-mask")
    args = p.parse_args(argv)
    if bool(args.train_mask) != bool(args.test_mask):
        p.error("--train-mask and --test-mask go together")

    cube = HsiCube(np.transpose(load_array(args.cube), (2, 0, 1)).astype(np.float32))
    ids = load_array(args.labels).astype(np.int64)
    names = CLASS_NAMES.get(args.name, [f"class_{i}" for i in range(1, int(ids.max()) + 1)])
    labels = LabelRaster(ids, len(names))
    mask = split_mask(args.train_mask, args.test_mask, labels) if args.train_mask else None
    header = save_container(HsiDataset(args.name, cube, labels, mask, names), args.out_dir,
                            args.name)
    print(f"wrote {header}: {cube.bands} bands, {cube.height}x{cube.width}, "
          f"{int(labels.counts().sum())} labeled pixels")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
