"""Rank, prune and fine-tune: the three fine-tuning schedules."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..autograd import derive
from ..models import ModelGraph, TrainConfig, count_params, evaluate, train
from .methods import sfp_train, train_slimming
from .ranking import FilterRanking, rank_l1, rank_l2, rank_slimming, rank_thinet
from .surgery import PruneTarget, apply_prune, current_widths, resolve_target

METHODS = ("l1", "thinet", "slimming", "sfp")
STRATEGIES = ("I", "II", "III")
LAYER_ORDER = ("conv1", "conv2", "fc1")


@dataclass
class PruneConfig:
    method: str = "l1"
    ratio: int | PruneTarget = 90
    strategy: str = "I"
    finetune: TrainConfig = field(default_factory=lambda: TrainConfig(epochs=50, patience=0))
    epochs_per_layer: int = 20      # strategy II
    epochs_per_pass: int = 30       # strategy III
    passes: int = 3                 # strategy III
    method_epochs: int = 30         # sparsity training (slimming) / soft pruning (SFP)
    slimming_lambda: float = 1e-4
    calib_patches: int = 256
    calib_positions: int = 16

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown pruning method {self.method!r}; expected one of {METHODS}")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown fine-tuning strategy {self.strategy!r}; "
                             f"expected one of {STRATEGIES}")
        resolve_target(self.ratio)


@dataclass
class PruneReport:
    method: str
    ratio: int
    strategy: str
    params_before: int
    params_after: int
    per_layer_after: dict
    criteria: dict
    top1_before_finetune: float | None = None
    stages: list = field(default_factory=list)  # (stage, widths, top1 or None)

    @property
    def fraction_removed(self) -> float:
        return 1.0 - self.params_after / self.params_before


def rank(model: ModelGraph, method: str, data=None, seed: int = 0, cfg: PruneConfig | None = None
         ) -> FilterRanking:
    cfg = cfg or PruneConfig(method=method)
    if method == "l1":
        return rank_l1(model)
    if method == "thinet":
        if data is None:
            raise ValueError("ThiNet needs calibration data")
        n = min(cfg.calib_patches, len(data))
        idx = np.sort(derive(seed, "calib").choice(len(data), size=n, replace=False))
        return rank_thinet(model, data.inputs(idx, "patch"), cfg.calib_positions, seed,
                           min_patches=cfg.calib_patches)
    if method == "slimming":
        return rank_slimming(model)
    if method == "sfp":
        return rank_l2(model)
    raise ValueError(f"unknown pruning method {method!r}")


def pass_widths(start: dict, target: dict, passes: int) -> list[dict]:
    """Geometric interpolation from ``start`` to ``target`` widths, rounded."""
    out = []
    for p in range(1, passes + 1):
        out.append({k: int(round(start[k] * (target[k] / start[k]) ** (p / passes)))
                    for k in start})
    out[-1] = dict(target)
    return out


def prune_and_finetune(base: ModelGraph, data, cfg: PruneConfig, seed: int = 0, eval_set=None
                       ) -> tuple[ModelGraph, PruneReport]:
    target: PruneTarget = resolve_target(cfg.ratio)
    goal = target.widths()
    before = count_params(base).total

    def score(m):
        return evaluate(m, eval_set).top1 if eval_set is not None else None

    model = base.copy()
    method_cfg = replace(cfg.finetune, epochs=cfg.method_epochs)
    if cfg.method == "slimming" and cfg.method_epochs:
        train_slimming(model, data, method_cfg, cfg.slimming_lambda, seed=seed)
    elif cfg.method == "sfp" and cfg.method_epochs:
        sfp_train(model, data, method_cfg, goal, seed=seed)

    stages = []
    top1_before = None
    criteria = {}

    def step(m, widths, epochs, stage, k):
        nonlocal top1_before
        ranking = rank(m, cfg.method, data, derive_seed(seed, stage), cfg)
        criteria.update(ranking.criteria)
        m = apply_prune(m, ranking, widths)
        if top1_before is None:
            top1_before = score(m)
        train(m, data, replace(cfg.finetune, epochs=epochs), seed=derive_seed(seed, stage, k))
        stages.append((stage, dict(current_widths(m)), score(m)))
        return m

    if cfg.strategy == "I":
        model = step(model, goal, cfg.finetune.epochs, "I", 0)
    elif cfg.strategy == "II":
        for k, layer in enumerate(LAYER_ORDER):
            widths = current_widths(model)
            widths[layer] = goal[layer]
            model = step(model, widths, cfg.epochs_per_layer, f"II-{layer}", k)
    else:
        for k, widths in enumerate(pass_widths(current_widths(model), goal, cfg.passes)):
            model = step(model, widths, cfg.epochs_per_pass, f"III-{k + 1}", k)

    counts = count_params(model)
    report = PruneReport(cfg.method, target.label, cfg.strategy, before, counts.total,
                         counts.per_layer, criteria, top1_before, stages)
    return model, report


def derive_seed(seed: int, *keys) -> int:
    return int(derive(seed, "prune", *keys).integers(0, 2**31 - 1))
