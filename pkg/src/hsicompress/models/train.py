"""Mini-batch training and top-k evaluation."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol

import numpy as np

from ..autograd import NonFiniteError, OptimConfig, Tensor, derive, make_optimizer, no_grad
from ..autograd import functional as F
from .graph import ModelGraph


class Samples(Protocol):
    labels: np.ndarray

    def __len__(self) -> int: ...

    def inputs(self, idx=None, kind: str = "patch") -> np.ndarray: ...


class ArraySet:
    """In-memory inputs + labels with the same interface as ``PatchSet``."""

    def __init__(self, x: np.ndarray, labels: np.ndarray):
        self.x = np.asarray(x, dtype=np.float32)
        self.labels = np.asarray(labels, dtype=np.int64)
        if len(self.x) != len(self.labels):
            raise ValueError("inputs and labels differ in length")

    def __len__(self) -> int:
        return len(self.labels)

    def inputs(self, idx=None, kind: str = "patch") -> np.ndarray:
        return self.x if idx is None else self.x[idx]

    def subset(self, idx) -> "ArraySet":
        return ArraySet(self.x[idx], self.labels[idx])


class TrainingDivergedError(RuntimeError):
    def __init__(self, epoch: int, detail: str = ""):
        super().__init__(f"training diverged at epoch {epoch}" + (f": {detail}" if detail else ""))
        self.epoch = epoch


@dataclass
class TrainConfig:
    epochs: int = 200
    batch_size: int = 128
    lr: float = 1e-3
    optimizer: str = "adam"
    momentum: float = 0.9
    weight_decay: float = 0.0
    patience: int = 20          # epochs without train-loss improvement before stopping; 0 = off
    min_delta: float = 1e-4
    eval_every: int = 0         # evaluate on eval_set every n epochs; 0 = never

    def optim(self) -> OptimConfig:
        return OptimConfig(kind=self.optimizer, lr=self.lr, momentum=self.momentum,
                           weight_decay=self.weight_decay)


@dataclass
class History:
    rows: list = field(default_factory=list)  # (epoch, loss, top1 or None)

    @property
    def losses(self) -> list[float]:
        return [r[1] for r in self.rows]

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epoch", "loss", "top1"])
            for epoch, loss, top1 in self.rows:
                w.writerow([epoch, repr(loss), "" if top1 is None else repr(top1)])


def minibatches(n: int, batch_size: int, rng: np.random.Generator, drop_singleton: bool = True):
    """Shuffled index batches; a trailing batch of one is folded into the previous one
    so batch norm always sees at least two samples."""
    order = rng.permutation(n)
    batches = [order[i:i + batch_size] for i in range(0, n, batch_size)]
    if drop_singleton and len(batches) > 1 and len(batches[-1]) == 1:
        batches[-2] = np.concatenate([batches[-2], batches.pop()])
    return batches


LossFn = Callable[[ModelGraph, np.ndarray, np.ndarray, int], Tensor]


def ce_loss(model: ModelGraph, x: np.ndarray, y: np.ndarray, epoch: int) -> Tensor:
    return F.cross_entropy(model(x), y)


def train(model: ModelGraph, data: Samples, cfg: TrainConfig, seed: int = 0,
          loss_fn: LossFn = ce_loss, eval_set: Samples | None = None,
          after_step: Callable[[ModelGraph], None] | None = None,
          after_epoch: Callable[[ModelGraph, int], None] | None = None,
          params=None) -> History:
    """Minimise ``loss_fn`` with the configured optimizer; returns per-epoch history.

    ``after_step`` runs after every optimizer step and ``after_epoch`` after
    every epoch (used by pruning methods that edit weights during training).
    """
    if len(data) < 2:
        raise ValueError("need at least two training samples")
    opt = make_optimizer(model.parameters() if params is None else params, cfg.optim())
    rng = derive(seed, "batches")
    history = History()
    best, stale = np.inf, 0
    kind = model.input_kind
    for epoch in range(1, cfg.epochs + 1):
        model.train()
        total, seen = 0.0, 0
        for idx in minibatches(len(data), cfg.batch_size, rng):
            x, y = data.inputs(idx, kind), data.labels[idx]
            opt.zero_grad()
            try:
                loss = loss_fn(model, x, y, epoch)
                loss.backward()
            except NonFiniteError as exc:
                raise TrainingDivergedError(epoch, str(exc)) from None
            opt.step()
            if after_step is not None:
                after_step(model)
            total += loss.item() * len(idx)
            seen += len(idx)
        mean_loss = total / seen
        if not np.isfinite(mean_loss):
            raise TrainingDivergedError(epoch, "loss is not finite")
        if after_epoch is not None:
            after_epoch(model, epoch)
        top1 = None
        if eval_set is not None and cfg.eval_every and epoch % cfg.eval_every == 0:
            top1 = evaluate(model, eval_set).top1
        history.rows.append((epoch, mean_loss, top1))
        if mean_loss < best - cfg.min_delta:
            best, stale = mean_loss, 0
        else:
            stale += 1
            if cfg.patience and stale >= cfg.patience:
                break
    model.eval()
    return history


@dataclass
class EvalResult:
    top1: float
    top5: float
    confusion: np.ndarray
    n: int


def predict_logits(model: ModelGraph, data: Samples, batch_size: int = 256) -> np.ndarray:
    was_training = model.training
    model.eval()
    kind = model.input_kind
    out = []
    with no_grad():
        for i in range(0, len(data), batch_size):
            idx = np.arange(i, min(i + batch_size, len(data)))
            out.append(model(data.inputs(idx, kind)).data)
    model.train(was_training)
    return np.concatenate(out)


def topk_metrics(logits: np.ndarray, labels: np.ndarray, classes: int | None = None) -> EvalResult:
    """Top-1/top-5 in percent; ties are ranked by lower class index first."""
    logits = np.asarray(logits)
    labels = np.asarray(labels, dtype=np.int64)
    if len(labels) == 0:
        raise ValueError("cannot evaluate on an empty set")
    k_all = logits.shape[1]
    classes = k_all if classes is None else classes
    ranking = np.argsort(-logits, axis=1, kind="stable")
    hits = ranking == labels[:, None]
    top1 = 100.0 * hits[:, 0].mean()
    top5 = 100.0 * hits[:, :min(5, k_all)].any(axis=1).mean()
    confusion = np.zeros((classes, classes), dtype=np.int64)
    np.add.at(confusion, (labels, ranking[:, 0]), 1)
    return EvalResult(float(top1), float(top5), confusion, len(labels))


def evaluate(model: ModelGraph, data: Samples, batch_size: int = 256) -> EvalResult:
    if len(data) == 0:
        raise ValueError("cannot evaluate on an empty set")
    logits = predict_logits(model, data, batch_size)
    return topk_metrics(logits, data.labels, logits.shape[1])
