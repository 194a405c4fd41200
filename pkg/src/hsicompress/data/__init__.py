from .container import ContainerError, load_cube, read_header, save_container
from .patches import PatchSet, extract_patches
from .pca import JacobiConvergenceError, PcaModel, jacobi_eigh, pca_fit, pca_transform
from .pipeline import PROFILES, DatasetProfile, PreprocessConfig, Prepared, make_split, prepare
from .preprocess import (INDIAN_PINES_WATER_BANDS, Standardizer, indian_pines_removal,
                         remove_bands, standardize_apply, standardize_fit)
from .splits import SplitError, split_disjoint, split_random, train_count
from .synthetic import SyntheticConfig, make_synthetic_scene
from .types import IGNORE, TEST, TRAIN, HsiCube, HsiDataset, LabelRaster, SplitMask
