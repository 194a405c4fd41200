"""JSON experiment configuration with a schema version and strict keys."""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from ..distill.config import METHODS as KD_METHODS
from ..distill.config import DistillConfig
from ..models import TrainConfig
from ..pruning.pipeline import METHODS as PRUNE_METHODS
from ..pruning.pipeline import STRATEGIES
from ..quantization import MODES as QUANT_MODES

SCHEMA_VERSION = 1
BASE_METHODS = ("baseline", "scratch")
SPLITS = ("random", "disjoint", "mask")


class ConfigError(ValueError):
    """Invalid or unreadable configuration (exit code 2)."""


def all_methods() -> tuple:
    return (BASE_METHODS + tuple(f"prune.{m}" for m in PRUNE_METHODS)
            + tuple(f"quant.{m}" for m in QUANT_MODES) + tuple(f"kd.{m}" for m in KD_METHODS))


@dataclass
class ExperimentConfig:
    schema_version: int = SCHEMA_VERSION
    dataset: str = "indian_pines"        # header path, dataset name under the data dir, or "synthetic"
    data_dir: str | None = None          # falls back to $HSIB_DATA_DIR
    split: str = "disjoint"
    mask_path: str | None = None         # .npy split codes when split == "mask"
    train_fraction: float | None = None  # None -> dataset profile
    split_seed: int = 0
    remove_bands: str | list | None = "auto"
    pca_components: int = 40
    patch_size: int = 19
    fit_on: str = "labeled"
    model: str = "cnn2d"
    method: str = "baseline"
    ratio: int = 90
    strategy: str = "I"
    seed: int = 0
    train: dict = field(default_factory=dict)     # TrainConfig overrides for base training
    finetune: dict = field(default_factory=dict)  # TrainConfig overrides for fine-tuning / QAT / KD
    prune: dict = field(default_factory=dict)     # extra PruneConfig fields
    distill: dict = field(default_factory=dict)   # extra DistillConfig fields
    base_checkpoint: str | None = None   # trained source network for prune/quant/offline KD
    teacher_checkpoints: list = field(default_factory=list)  # CA-MKD teachers
    train_teacher: bool = False          # train the source network in-run when no checkpoint
    calib_samples: int = 512
    latency_reps: int = 30
    latency_probe: int = 100
    out_dir: str = "runs/default"
    synthetic: dict = field(default_factory=dict)  # SyntheticConfig overrides

    @property
    def family(self) -> str:
        return self.method.split(".", 1)[0] if "." in self.method else self.method

    @property
    def variant(self) -> str:
        return self.method.split(".", 1)[1] if "." in self.method else self.method

    def train_config(self) -> TrainConfig:
        return _train_cfg(self.train, "train")

    def finetune_config(self) -> TrainConfig:
        base = {"epochs": 50, "patience": 0}
        return _train_cfg({**base, **self.finetune}, "finetune")

    def distill_config(self) -> DistillConfig:
        try:
            return DistillConfig(method=self.variant, ratio=self.ratio,
                                 train=self.finetune_config(), **self.distill)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"distill: {exc}") from None

    def validate(self) -> None:
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigError(f"schema_version: expected {SCHEMA_VERSION}, got {self.schema_version}")
        if self.method not in all_methods():
            raise ConfigError(f"method: unknown {self.method!r}")
        if self.split not in SPLITS:
            raise ConfigError(f"split: expected one of {SPLITS}, got {self.split!r}")
        if self.split == "mask" and not self.mask_path:
            raise ConfigError("mask_path: required when split is 'mask'")
        if self.train_fraction is not None and not 0 < self.train_fraction < 1:
            raise ConfigError(f"train_fraction: must lie in (0, 1), got {self.train_fraction}")
        if self.model not in ("mlp", "cnn1d", "cnn2d"):
            raise ConfigError(f"model: unknown {self.model!r}")
        if self.family in ("prune", "scratch", "kd") and self.model != "cnn2d":
            raise ConfigError(f"model: {self.method} needs cnn2d")
        if self.ratio not in (90, 95, 98):
            raise ConfigError(f"ratio: expected 90, 95 or 98, got {self.ratio}")
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"strategy: expected one of {STRATEGIES}, got {self.strategy!r}")
        if self.latency_reps and self.latency_reps < 30:
            raise ConfigError("latency_reps: need at least 30 (or 0 to skip)")
        if self.latency_reps and self.latency_probe < 100:
            raise ConfigError("latency_probe: need at least 100 samples")
        if self.family == "kd" and self.variant in ("soft", "fitnets", "at", "cc", "simkd", "camkd"):
            if self.variant == "camkd":
                if len(self.teacher_checkpoints) < 2 and not self.train_teacher:
                    raise ConfigError("teacher_checkpoints: camkd needs >= 2 teachers or "
                                      "train_teacher: true")
            elif not self.base_checkpoint and not self.train_teacher:
                raise ConfigError(f"base_checkpoint: offline method {self.method} needs a teacher "
                                  "checkpoint (or train_teacher: true)")
        if self.family in ("prune", "quant") and not self.base_checkpoint and not self.train_teacher:
            raise ConfigError(f"base_checkpoint: {self.method} needs a trained network "
                              "(or train_teacher: true)")
        self.train_config()
        self.finetune_config()
        if self.family == "kd":
            self.distill_config()
        if self.family == "prune":
            from ..pruning.pipeline import PruneConfig
            known = {f.name for f in fields(PruneConfig)} - {"method", "ratio", "strategy",
                                                             "finetune"}
            bad = set(self.prune) - known
            if bad:
                raise ConfigError(f"prune: unknown keys {sorted(bad)}")

    def resolved_data_dir(self) -> Path | None:
        d = self.data_dir or os.environ.get("HSIB_DATA_DIR")
        return Path(d) if d else None

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
        if "schema_version" not in d:
            raise ConfigError("schema_version: missing")
        cfg = cls(**d)
        cfg.validate()
        return cfg


def _train_cfg(d: dict, where: str) -> TrainConfig:
    try:
        return TrainConfig(**d)
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return ExperimentConfig.from_dict(data)
