"""Fold eval-mode batch norm into the preceding convolution."""

from __future__ import annotations

import numpy as np

from ..autograd import Tensor
from ..autograd.functional import BN_EPS
from ..models import BatchNorm, ModelGraph


def fold_batchnorm(model: ModelGraph) -> ModelGraph:
    """Copy of ``model`` without BN layers; each conv absorbs its BN's running
    statistics and affine parameters. Parameter counts are unchanged."""
    src = model.copy()
    layers = []
    for layer in src.layers:
        if isinstance(layer, BatchNorm):
            if not layers or not hasattr(layers[-1], "weight"):
                raise ValueError(f"{layer.name} does not follow a weighted layer")
            conv = layers[-1]
            scale = layer.gamma.data.astype(np.float64) / np.sqrt(
                layer.running_var.astype(np.float64) + BN_EPS)
            w = conv.weight.data.astype(np.float64)
            w = w * scale.reshape((-1,) + (1,) * (w.ndim - 1))
            b = (conv.bias.data - layer.running_mean) * scale + layer.beta.data
            dtype = conv.weight.dtype
            conv.weight = Tensor(w.astype(dtype), requires_grad=True)
            conv.bias = Tensor(b.astype(dtype), requires_grad=True)
            continue
        layers.append(layer)
    folded = ModelGraph(layers, src.input_shape, arch=src.arch)
    folded.eval()
    return folded
