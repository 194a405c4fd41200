"""Training-time pruning criteria: network slimming and soft filter pruning."""

from __future__ import annotations

import numpy as np

from ..autograd import functional as F
from ..models import ModelGraph, TrainConfig, train
from .ranking import FilterRanking, l1_scores, l2_scores, rank_slimming


def slimming_loss(lam: float):
    """Cross-entropy plus ``lam * sum |gamma|`` over the BN layers.

    ``|.|`` uses a zero subgradient at 0.
    """
    def loss_fn(model: ModelGraph, x, y, epoch):
        loss = F.cross_entropy(model(x), y)
        for name in ("bn1", "bn2"):
            loss = loss + model[name].gamma.abs().sum() * lam
        return loss
    return loss_fn


def train_slimming(model: ModelGraph, data, cfg: TrainConfig, lam: float, seed: int = 0):
    try:
        model["bn1"], model["bn2"]
    except KeyError:
        raise ValueError("slimming needs batch-norm scaling factors after conv1 and conv2") from None
    return train(model, data, cfg, seed=seed, loss_fn=slimming_loss(lam))


def sfp_zero(model: ModelGraph, widths: dict) -> dict:
    """Zero the lowest-L2 conv filters (weights and bias) down to ``widths``.

    Returns the zeroed index set per layer.
    """
    zeroed = {}
    for name in ("conv1", "conv2"):
        layer = model[name]
        n_zero = layer.cout - widths[name]
        scores = l2_scores(model, name)
        idx = np.sort(np.argsort(scores, kind="stable")[:n_zero])
        layer.weight.data[idx] = 0.0
        layer.bias.data[idx] = 0.0
        zeroed[name] = idx
    return zeroed


def sfp_train(model: ModelGraph, data, cfg: TrainConfig, widths: dict, seed: int = 0,
              log: list | None = None) -> FilterRanking:
    """Train while zeroing low-norm filters after every epoch; zeroed filters
    stay trainable. Returns the final L2 ranking (fc1 falls back to L1)."""
    for name in ("conv1", "conv2"):
        if widths[name] >= model[name].cout:
            raise ValueError(f"SFP target for {name} ({widths[name]}) must be below "
                             f"its width {model[name].cout}")

    def after_epoch(m, epoch):
        zeroed = sfp_zero(m, widths)
        if log is not None:
            log.append(zeroed)

    train(model, data, cfg, seed=seed, after_epoch=after_epoch)
    scores = {"conv1": l2_scores(model, "conv1"), "conv2": l2_scores(model, "conv2"),
              "fc1": l1_scores(model, "fc1")}
    return FilterRanking(scores, {"conv1": "l2", "conv2": "l2", "fc1": "l1"})


__all__ = ["rank_slimming", "sfp_train", "sfp_zero", "slimming_loss", "train_slimming"]
