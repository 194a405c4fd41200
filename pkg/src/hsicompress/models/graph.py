"""Ordered layer list with named parameters, taps and mode switching."""

from __future__ import annotations

import copy
from typing import Iterable

import numpy as np

from ..autograd import Tensor
from .layers import Layer


class ModelGraph:
    def __init__(self, layers: Iterable[Layer], input_shape: tuple, arch=None):
        self.layers = list(layers)
        self.input_shape = tuple(input_shape)
        self.arch = arch
        self.training = True
        names = [layer.name for layer in self.layers]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate layer names in {names}")
        self.output_shape = self.check_shapes()

    def check_shapes(self) -> tuple:
        shape = self.input_shape
        for layer in self.layers:
            shape = layer.out_shape(shape)
        return shape

    @property
    def input_kind(self) -> str:
        return "patch" if len(self.input_shape) == 3 else "spectrum"

    # -- access -----------------------------------------------------------
    def __getitem__(self, name: str) -> Layer:
        for layer in self.layers:
            if layer.name == name:
                return layer
        raise KeyError(name)

    def index(self, name: str) -> int:
        return [layer.name for layer in self.layers].index(name)

    def layer_names(self) -> list[str]:
        return [layer.name for layer in self.layers]

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        return [(f"{layer.name}.{k}", t) for layer in self.layers for k, t in layer.params().items()]

    def parameters(self) -> list[Tensor]:
        return [t for _, t in self.named_parameters()]

    def named_buffers(self) -> list[tuple[str, np.ndarray]]:
        return [(f"{layer.name}.{k}", b) for layer in self.layers for k, b in layer.buffers().items()]

    def state_dict(self) -> dict[str, np.ndarray]:
        state = {k: t.data.copy() for k, t in self.named_parameters()}
        state.update({k: b.copy() for k, b in self.named_buffers()})
        return state

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        own = dict(self.named_parameters())
        bufs = dict(self.named_buffers())
        missing = (set(own) | set(bufs)) - set(state)
        extra = set(state) - (set(own) | set(bufs))
        if missing or extra:
            raise ValueError(f"state mismatch: missing {sorted(missing)}, unexpected {sorted(extra)}")
        for k, t in own.items():
            if state[k].shape != t.shape:
                raise ValueError(f"{k}: shape {state[k].shape} != {t.shape}")
            t.data = np.array(state[k], dtype=t.dtype)
        for k, b in bufs.items():
            b[...] = state[k]

    # -- modes ------------------------------------------------------------
    def train(self, mode: bool = True) -> "ModelGraph":
        self.training = mode
        return self

    def eval(self) -> "ModelGraph":
        return self.train(False)

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def astype(self, dtype) -> "ModelGraph":
        for p in self.parameters():
            p.data = p.data.astype(dtype)
        for layer in self.layers:
            for k, b in layer.buffers().items():
                setattr(layer, k, b.astype(dtype))
        return self

    def copy(self) -> "ModelGraph":
        return copy.deepcopy(self)

    # -- forward ----------------------------------------------------------
    def forward(self, x, taps: Iterable[str] = (), start: str | None = None,
                stop: str | None = None):
        """Run layers ``start..stop`` (inclusive). With ``taps`` also return a
        dict of the named layers' outputs."""
        if not isinstance(x, Tensor):
            x = Tensor(np.asarray(x, dtype=self.parameters()[0].dtype))
        taps = set(taps)
        out: dict[str, Tensor] = {}
        i0 = 0 if start is None else self.index(start)
        i1 = len(self.layers) - 1 if stop is None else self.index(stop)
        for layer in self.layers[i0:i1 + 1]:
            x = layer.forward(x, self.training)
            if layer.name in taps:
                out[layer.name] = x
        if taps:
            unknown = taps - set(out)
            if unknown:
                raise KeyError(f"unknown tap(s) {sorted(unknown)}")
            return x, out
        return x

    __call__ = forward

    def __repr__(self) -> str:
        body = ", ".join(f"{l.name}:{l.kind}" for l in self.layers)
        return f"ModelGraph([{body}])"
