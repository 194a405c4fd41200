"""Structural removal of filters/neurons from a CNN2D graph."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..autograd import Tensor
from ..models import ModelGraph, count_params
from .ranking import FilterRanking


@dataclass(frozen=True)
class PruneTarget:
    label: int       # ratio label in percent, or 0 for explicit widths
    f1: int
    f2: int
    hidden: int

    def widths(self) -> dict:
        return {"conv1": self.f1, "conv2": self.f2, "fc1": self.hidden}


TARGETS = {
    90: PruneTarget(90, 15, 30, 30),
    95: PruneTarget(95, 10, 20, 20),
    98: PruneTarget(98, 5, 10, 10),
}


def current_widths(model: ModelGraph) -> dict:
    return {"conv1": model["conv1"].cout, "conv2": model["conv2"].cout, "fc1": model["fc1"].dout}


def resolve_target(target) -> PruneTarget:
    if isinstance(target, PruneTarget):
        return target
    if int(target) in TARGETS:
        return TARGETS[int(target)]
    raise ValueError(f"unknown pruning ratio label {target!r}; expected one of {sorted(TARGETS)}")


def _param(arr: np.ndarray) -> Tensor:
    return Tensor(np.ascontiguousarray(arr), requires_grad=True)


def apply_prune(model: ModelGraph, ranking: FilterRanking, target) -> ModelGraph:
    """Return a pruned copy keeping each layer's best filters in original order.

    Dropping conv2 filter ``c`` removes fc1 input columns ``c*S .. c*S+S-1``
    where ``S`` is the pooled spatial size. The logits layer keeps its outputs.
    """
    if model.arch is None or model.arch.kind != "cnn2d":
        raise ValueError("structured pruning is defined for cnn2d models")
    widths = target.widths() if isinstance(target, PruneTarget) else dict(target)
    have = current_widths(model)
    for name, n in have.items():
        if name not in ranking.scores:
            raise ValueError(f"ranking lacks layer {name}")
        if len(ranking.scores[name]) != n:
            raise ValueError(f"ranking for {name} has {len(ranking.scores[name])} entries, "
                             f"layer has {n}")
        if widths[name] > n:
            raise ValueError(f"{name}: target width {widths[name]} exceeds current {n}")

    k1 = ranking.keep("conv1", widths["conv1"])
    k2 = ranking.keep("conv2", widths["conv2"])
    kh = ranking.keep("fc1", widths["fc1"])
    out = model.copy()
    c1, b1, c2, b2 = out["conv1"], out["bn1"], out["conv2"], out["bn2"]
    fc1, fc2 = out["fc1"], out["fc2"]
    spatial = fc1.din // have["conv2"]
    cols = (k2[:, None] * spatial + np.arange(spatial)).reshape(-1)

    c1.weight, c1.bias = _param(c1.weight.data[k1]), _param(c1.bias.data[k1])
    for bn, keep in ((b1, k1), (b2, k2)):
        bn.gamma, bn.beta = _param(bn.gamma.data[keep]), _param(bn.beta.data[keep])
        bn.running_mean = bn.running_mean[keep].copy()
        bn.running_var = bn.running_var[keep].copy()
    c2.weight = _param(c2.weight.data[k2][:, k1])
    c2.bias = _param(c2.bias.data[k2])
    fc1.weight = _param(fc1.weight.data[kh][:, cols])
    fc1.bias = _param(fc1.bias.data[kh])
    fc2.weight = _param(fc2.weight.data[:, kh])
    fc2.bias = _param(fc2.bias.data.copy())

    out.arch = model.arch.with_widths(len(k1), len(k2), len(kh))
    out.output_shape = out.check_shapes()
    return out


def keep_all(model: ModelGraph) -> dict:
    return current_widths(model)


def param_fraction_removed(before: ModelGraph, after: ModelGraph) -> float:
    return 1.0 - count_params(after).total / count_params(before).total
