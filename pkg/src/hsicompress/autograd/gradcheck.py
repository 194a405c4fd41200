"""Central finite-difference gradient checks."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor


def numerical_grad(f: Callable[[], Tensor], t: Tensor, eps: float = 1e-6) -> np.ndarray:
    grad = np.zeros_like(t.data, dtype=np.float64)
    flat = t.data.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + eps
        up = float(f().data)
        flat[i] = old - eps
        down = float(f().data)
        flat[i] = old
        grad.reshape(-1)[i] = (up - down) / (2 * eps)
    return grad


def relative_error(a: np.ndarray, b: np.ndarray, floor: float = 1e-6) -> float:
    """``||a - b|| / max(||a||, ||b||, floor)``.

    The floor keeps identically-zero gradients (e.g. a conv bias feeding a
    batch norm) from turning finite-difference noise into a large ratio.
    """
    scale = max(np.linalg.norm(a), np.linalg.norm(b), floor)
    return float(np.linalg.norm(a - b) / scale)


def check_gradients(f: Callable[[], Tensor], tensors: Sequence[Tensor],
                    eps: float = 1e-6) -> list[float]:
    """Relative error between backprop and finite differences for each tensor.

    ``f`` must rebuild the graph from scratch on every call (it is evaluated
    twice per element). All tensors should be float64.
    """
    for t in tensors:
        t.grad = None
    f().backward()
    analytic = [t.grad.copy() if t.grad is not None else np.zeros_like(t.data) for t in tensors]
    return [relative_error(a, numerical_grad(f, t, eps)) for a, t in zip(analytic, tensors)]
