"""Integer GEMM / convolution kernels.

Operands are integer-valued (codes plus zero point). Products of 8-bit codes
and their sums over the reduction sizes used here stay far below 2^53, so a
float64 BLAS product yields the exact integer an int32 accumulator would hold.
``int_matmul_oracle`` computes the same sum in int64 for verification.
"""

from __future__ import annotations

import numpy as np

from ..autograd.functional import im2col

ACC_LIMIT = 2 ** 31 - 1


def int_matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Exact ``a @ b`` for integer-valued inputs, returned as int64 (int32 range checked)."""
    acc = np.asarray(a, dtype=np.float64) @ np.asarray(b, dtype=np.float64)
    if acc.size and np.abs(acc).max() > ACC_LIMIT:
        raise OverflowError("accumulator exceeds the int32 range")
    return acc.astype(np.int64)


def int_matmul_oracle(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.asarray(a, dtype=np.int64) @ np.asarray(b, dtype=np.int64)


def int_linear(xc: np.ndarray, wc: np.ndarray) -> np.ndarray:
    """``[N, Din] x [Dout, Din] -> [N, Dout]`` integer accumulators."""
    return int_matmul(xc, wc.T)


def int_conv2d(xc: np.ndarray, wc: np.ndarray) -> np.ndarray:
    """Valid, stride-1 integer convolution: ``[N,C,H,W] * [O,C,k,k] -> [N,O,Ho,Wo]``."""
    n, _, h, w = xc.shape
    o, _, kh, kw = wc.shape
    cols = im2col(np.asarray(xc, dtype=np.float64), kh, kw)
    acc = int_matmul(cols, wc.reshape(o, -1).T)
    return acc.reshape(n, h - kh + 1, w - kw + 1, o).transpose(0, 3, 1, 2)
