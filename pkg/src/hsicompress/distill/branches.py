"""Shared-trunk networks with several classifier heads."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from ..autograd import Tensor
from ..autograd.rng import derive
from ..models import ArchSpec, Linear, ModelGraph, build_model


class BranchOutput(NamedTuple):
    logits: list            # per-head logits
    feats: list             # per-head hidden features (post-ReLU fc1)
    gate: Tensor | None     # gate logits [N, m] when the model has a gate


class MultiBranchModel:
    """Trunk (conv1 .. flatten) shared by reference across ``m`` fc heads."""

    def __init__(self, spec: ArchSpec, m: int, seed: int = 0, gate: bool = False,
                 attention_dim: int = 0):
        if m < 1:
            raise ValueError("need at least one branch")
        self.spec = spec
        base = build_model(spec, seed)
        cut = base.index("flatten") + 1
        self.trunk = ModelGraph(base.layers[:cut], base.input_shape)
        self.heads = []
        for i in range(m):
            layers = base.layers[cut:] if i == 0 else build_model(spec, derive(seed, "branch", i)
                                                                  .integers(2 ** 31)).layers[cut:]
            self.heads.append(ModelGraph(layers, (spec.fc1_in,)))
        rng = derive(seed, "gate")
        self.gate = Linear("gate", spec.fc1_in, m, rng) if gate else None
        self.wq = self.wk = None
        if attention_dim:
            bound = 1.0 / np.sqrt(spec.hidden)
            shape = (spec.hidden, attention_dim)
            self.wq = Tensor(rng.uniform(-bound, bound, shape).astype(np.float32), requires_grad=True)
            self.wk = Tensor(rng.uniform(-bound, bound, shape).astype(np.float32), requires_grad=True)
        self.training = True

    @property
    def m(self) -> int:
        return len(self.heads)

    @property
    def input_kind(self) -> str:
        return self.trunk.input_kind

    def parameters(self) -> list[Tensor]:
        params = list(self.trunk.parameters())
        for h in self.heads:
            params += h.parameters()
        if self.gate is not None:
            params += list(self.gate.params().values())
        if self.wq is not None:
            params += [self.wq, self.wk]
        return params

    def train(self, mode: bool = True) -> "MultiBranchModel":
        self.training = mode
        self.trunk.train(mode)
        for h in self.heads:
            h.train(mode)
        return self

    def eval(self) -> "MultiBranchModel":
        return self.train(False)

    def astype(self, dtype) -> "MultiBranchModel":
        self.trunk.astype(dtype)
        for h in self.heads:
            h.astype(dtype)
        extra = list(self.gate.params().values()) if self.gate is not None else []
        if self.wq is not None:
            extra += [self.wq, self.wk]
        for p in extra:
            p.data = p.data.astype(dtype)
        return self

    def forward(self, x) -> BranchOutput:
        shared = self.trunk(x)
        logits, feats = [], []
        for h in self.heads:
            z, taps = h(shared, taps=["relu3"])
            logits.append(z)
            feats.append(taps["relu3"])
        gate = self.gate.forward(shared, self.training) if self.gate is not None else None
        return BranchOutput(logits, feats, gate)

    __call__ = forward

    def deploy(self, i: int = 0) -> ModelGraph:
        """Standalone network: trunk plus head ``i`` (copied)."""
        model = ModelGraph(self.trunk.layers + self.heads[i].layers, self.trunk.input_shape,
                           arch=self.spec)
        return model.copy().eval()
