"""Distillation settings and their JSON sidecar."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from ..models import TrainConfig

OFFLINE = ("soft", "fitnets", "at", "cc", "simkd", "camkd")
ONLINE = ("dml", "one", "clilr", "okddip")
SELF = ("tfkd", "cskd", "pskd", "ddgsd")
METHODS = OFFLINE + ONLINE + SELF


@dataclass
class DistillConfig:
    method: str = "soft"
    ratio: int = 90                  # student widths follow this pruning label
    T: float = 4.0
    alpha: float = 0.9               # weight of the label term in the soft-target loss
    lambda_at: float = 1.0
    lambda_cc: float | None = None   # None -> 0.02 * batch_size^2
    delta: float = 1.0               # RBF bandwidth (on L2-normalised embeddings)
    lambda_f: float = 1.0            # feature terms of CA-MKD and DDGSD
    lambda_p: float = 1.0            # DDGSD probability consistency
    lambda_cs: float = 1.0           # CS-KD regulariser
    tfkd_a: float = 0.9
    tfkd_beta: float = 0.1
    tfkd_T: float = 20.0
    pskd_alpha: float = 0.8
    peers: int = 3                   # DML peers / ONE, CL-ILR branches / OKDDip heads incl. leader
    teachers: int = 3                # CA-MKD
    attention_dim: int = 16          # OKDDip query/key width
    hint_epochs: int = 10            # FitNets stage 1
    train: TrainConfig = field(default_factory=lambda: TrainConfig(epochs=100, patience=0))

    def __post_init__(self):
        if isinstance(self.train, dict):
            self.train = TrainConfig(**self.train)
        self.validate()

    def validate(self) -> None:
        if self.method not in METHODS:
            raise ValueError(f"unknown distillation method {self.method!r}; expected one of {METHODS}")
        if not self.T > 0 or not self.tfkd_T > 0:
            raise ValueError("temperatures must be > 0")
        if not 0 <= self.alpha <= 1:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if not 0 <= self.pskd_alpha <= 1:
            raise ValueError(f"pskd_alpha must lie in [0, 1], got {self.pskd_alpha}")
        if not 0 < self.tfkd_a <= 1:
            raise ValueError(f"tfkd_a must lie in (1/K, 1], got {self.tfkd_a}")
        if self.delta <= 0:
            raise ValueError("delta must be > 0")
        min_peers = 3 if self.method == "okddip" else 2
        if self.method in ONLINE and self.peers < min_peers:
            raise ValueError(f"{self.method} needs at least {min_peers} peers, got {self.peers}")
        if self.method == "camkd" and self.teachers < 2:
            raise ValueError(f"camkd needs at least 2 teachers, got {self.teachers}")

    def cc_weight(self, batch: int) -> float:
        return 0.02 * batch * batch if self.lambda_cc is None else self.lambda_cc

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "DistillConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown DistillConfig keys {sorted(unknown)}")
        return cls(**d)

    def save_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load_json(cls, path: str | Path) -> "DistillConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))
