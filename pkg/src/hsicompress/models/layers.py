"""Layers with named parameter tensors and (for batch norm) running buffers."""

from __future__ import annotations

import numpy as np

from ..autograd import Tensor
from ..autograd import functional as F


class Layer:
    kind = "layer"
    has_weights = False  # counted in the headline parameter total

    def __init__(self, name: str):
        self.name = name

    def params(self) -> dict[str, Tensor]:
        return {}

    def buffers(self) -> dict[str, np.ndarray]:
        return {}

    def forward(self, x: Tensor, training: bool) -> Tensor:
        raise NotImplementedError

    def out_shape(self, shape: tuple) -> tuple:
        """Per-sample output shape for per-sample input ``shape``."""
        return shape

    def describe(self) -> dict:
        return {"kind": self.kind}


def _uniform(rng: np.random.Generator, shape: tuple, fan_in: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(np.float32)


class Conv2d(Layer):
    kind = "conv2d"
    has_weights = True

    def __init__(self, name: str, cin: int, cout: int, k: int, rng: np.random.Generator):
        super().__init__(name)
        fan_in = cin * k * k
        self.weight = Tensor(_uniform(rng, (cout, cin, k, k), fan_in), requires_grad=True)
        self.bias = Tensor(_uniform(rng, (cout,), fan_in), requires_grad=True)

    @property
    def cin(self) -> int:
        return self.weight.shape[1]

    @property
    def cout(self) -> int:
        return self.weight.shape[0]

    @property
    def k(self) -> int:
        return self.weight.shape[-1]

    def params(self):
        return {"weight": self.weight, "bias": self.bias}

    def forward(self, x, training):
        return F.conv2d(x, self.weight, self.bias)

    def out_shape(self, shape):
        c, h, w = shape
        if c != self.cin:
            raise ValueError(f"{self.name}: expects {self.cin} channels, got {c}")
        if h < self.k or w < self.k:
            raise ValueError(f"{self.name}: kernel {self.k} larger than input {h}x{w}")
        return (self.cout, h - self.k + 1, w - self.k + 1)

    def describe(self):
        return {"kind": self.kind, "cin": self.cin, "cout": self.cout, "k": self.k}


class Conv1d(Conv2d):
    kind = "conv1d"

    def __init__(self, name: str, cin: int, cout: int, k: int, rng: np.random.Generator):
        Layer.__init__(self, name)
        fan_in = cin * k
        self.weight = Tensor(_uniform(rng, (cout, cin, k), fan_in), requires_grad=True)
        self.bias = Tensor(_uniform(rng, (cout,), fan_in), requires_grad=True)

    def forward(self, x, training):
        return F.conv1d(x, self.weight, self.bias)

    def out_shape(self, shape):
        c, length = shape
        if c != self.cin:
            raise ValueError(f"{self.name}: expects {self.cin} channels, got {c}")
        if length < self.k:
            raise ValueError(f"{self.name}: kernel {self.k} longer than input {length}")
        return (self.cout, length - self.k + 1)


class BatchNorm(Layer):
    kind = "batchnorm"

    def __init__(self, name: str, c: int):
        super().__init__(name)
        self.gamma = Tensor(np.ones(c, np.float32), requires_grad=True)
        self.beta = Tensor(np.zeros(c, np.float32), requires_grad=True)
        self.running_mean = np.zeros(c, np.float32)
        self.running_var = np.ones(c, np.float32)

    @property
    def channels(self) -> int:
        return self.gamma.shape[0]

    def params(self):
        return {"gamma": self.gamma, "beta": self.beta}

    def buffers(self):
        return {"running_mean": self.running_mean, "running_var": self.running_var}

    def forward(self, x, training):
        return F.batch_norm(x, self.gamma, self.beta, self.running_mean, self.running_var,
                            training)

    def out_shape(self, shape):
        if shape[0] != self.channels:
            raise ValueError(f"{self.name}: expects {self.channels} channels, got {shape[0]}")
        return shape

    def describe(self):
        return {"kind": self.kind, "c": self.channels}


class ReLU(Layer):
    kind = "relu"

    def forward(self, x, training):
        return x.relu()


class MaxPool(Layer):
    kind = "maxpool"

    def __init__(self, name: str, window: int = 2):
        super().__init__(name)
        self.window = window

    def forward(self, x, training):
        return F.max_pool2d(x, self.window) if x.ndim == 4 else F.max_pool1d(x, self.window)

    def out_shape(self, shape):
        if min(shape[1:]) < self.window:
            raise ValueError(f"{self.name}: window {self.window} larger than {shape[1:]}")
        return (shape[0],) + tuple(s // self.window for s in shape[1:])

    def describe(self):
        return {"kind": self.kind, "window": self.window}


class Flatten(Layer):
    kind = "flatten"

    def forward(self, x, training):
        return x.flatten(1)

    def out_shape(self, shape):
        return (int(np.prod(shape)),)


class Unsqueeze(Layer):
    """``[N, L]`` spectra to ``[N, 1, L]`` single-channel sequences."""

    kind = "unsqueeze"

    def forward(self, x, training):
        return x.reshape(x.shape[0], 1, -1)

    def out_shape(self, shape):
        return (1,) + tuple(shape)


class Linear(Layer):
    kind = "linear"
    has_weights = True

    def __init__(self, name: str, din: int, dout: int, rng: np.random.Generator):
        super().__init__(name)
        self.weight = Tensor(_uniform(rng, (dout, din), din), requires_grad=True)
        self.bias = Tensor(_uniform(rng, (dout,), din), requires_grad=True)

    @property
    def din(self) -> int:
        return self.weight.shape[1]

    @property
    def dout(self) -> int:
        return self.weight.shape[0]

    def params(self):
        return {"weight": self.weight, "bias": self.bias}

    def forward(self, x, training):
        return F.linear(x, self.weight, self.bias)

    def out_shape(self, shape):
        if shape != (self.din,):
            raise ValueError(f"{self.name}: expects input ({self.din},), got {shape}")
        return (self.dout,)

    def describe(self):
        return {"kind": self.kind, "din": self.din, "dout": self.dout}
