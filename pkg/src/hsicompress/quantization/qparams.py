"""Affine integer quantization.

``S = (beta - alpha) / (2^b - 1)``, ``Z = round(alpha / S) - alpha_q``,
``x_q = clamp(round(x / S) - Z, alpha_q, beta_q)`` and ``x~ = S (x_q + Z)``.
Rounding is half-away-from-zero everywhere. Arithmetic is float64.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..autograd import Tensor, make_op

WIDEN_EPS = 1e-8


def round_half_away(x):
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


@dataclass(frozen=True)
class QParams:
    scale: float
    zero_point: int
    bits: int = 8
    signed: bool = True
    alpha: float = 0.0   # real clipping range the parameters were computed from
    beta: float = 0.0

    @property
    def qmin(self) -> int:
        return -(2 ** (self.bits - 1)) if self.signed else 0

    @property
    def qmax(self) -> int:
        return self.qmin + 2 ** self.bits - 1

    @property
    def storage(self) -> str:
        if self.bits <= 8:
            return "i8" if self.signed else "u8"
        return "i32"

    def to_dict(self) -> dict:
        return {"scale": self.scale, "zero_point": self.zero_point, "bits": self.bits,
                "signed": self.signed, "alpha": self.alpha, "beta": self.beta}

    @classmethod
    def from_dict(cls, d: dict) -> "QParams":
        return cls(float(d["scale"]), int(d["zero_point"]), int(d["bits"]), bool(d["signed"]),
                   float(d["alpha"]), float(d["beta"]))


def compute_qparams(alpha: float, beta: float, bits: int = 8, signed: bool = True) -> QParams:
    alpha, beta = float(alpha), float(beta)
    if not (np.isfinite(alpha) and np.isfinite(beta)):
        raise ValueError("clipping range must be finite")
    if alpha > beta:
        raise ValueError(f"invalid clipping range: alpha={alpha} > beta={beta}")
    if not 2 <= bits <= 16:
        raise ValueError(f"bit width must be in [2, 16], got {bits}")
    if alpha == beta:
        alpha, beta = alpha - WIDEN_EPS, beta + WIDEN_EPS
        if not alpha < beta:
            raise ValueError("clipping range is degenerate even after widening")
    levels = 2 ** bits - 1
    scale = (beta - alpha) / levels
    if not scale > 0:
        raise ValueError("clipping range is degenerate even after widening")
    qmin = -(2 ** (bits - 1)) if signed else 0
    zero_point = int(round_half_away(alpha / scale)) - qmin
    return QParams(scale, zero_point, bits, signed, alpha, beta)


def quantize(x, qp: QParams) -> np.ndarray:
    """Integer codes (int64 array) clamped to ``[qmin, qmax]``."""
    q = round_half_away(np.asarray(x, dtype=np.float64) / qp.scale) - qp.zero_point
    return np.clip(q, qp.qmin, qp.qmax).astype(np.int64)


def dequantize(xq, qp: QParams) -> np.ndarray:
    return qp.scale * (np.asarray(xq, dtype=np.float64) + qp.zero_point)


def fake_quant_array(x, qp: QParams) -> np.ndarray:
    return dequantize(quantize(x, qp), qp)


def fake_quant(x: Tensor, qp: QParams) -> Tensor:
    """Forward ``dequantize(quantize(x))``; straight-through gradient inside
    ``[alpha, beta]`` and zero outside."""
    data = fake_quant_array(x.data, qp).astype(x.dtype)
    inside = (x.data >= qp.alpha) & (x.data <= qp.beta)
    return make_op(data, (x,), lambda g: (g * inside,), "fake_quant")


class Observer:
    """Tracks an activation range.

    ``momentum=None`` keeps the running min/max of every batch seen. With a
    momentum the range follows an exponential moving average of batch
    min/max instead, initialised by the first batch.
    """

    def __init__(self, signed: bool = True, bits: int = 8, momentum: float | None = None):
        self.signed = signed
        self.bits = bits
        self.momentum = momentum
        self.alpha: float | None = None
        self.beta: float | None = None

    def update(self, x: np.ndarray) -> None:
        lo, hi = float(np.min(x)), float(np.max(x))
        if self.alpha is None:
            self.alpha, self.beta = lo, hi
        elif self.momentum is None:
            self.alpha, self.beta = min(self.alpha, lo), max(self.beta, hi)
        else:
            m = self.momentum
            self.alpha = m * self.alpha + (1 - m) * lo
            self.beta = m * self.beta + (1 - m) * hi

    @property
    def ready(self) -> bool:
        return self.alpha is not None

    def qparams(self) -> QParams:
        if not self.ready:
            raise RuntimeError("observer has seen no data")
        alpha, beta = self.alpha, self.beta
        if not self.signed:
            alpha = max(alpha, 0.0)
            beta = max(beta, alpha)
        return compute_qparams(alpha, beta, self.bits, self.signed)


def weight_qparams(w: np.ndarray, bits: int = 8) -> QParams:
    """Per-tensor signed min/max parameters for a weight tensor."""
    return compute_qparams(float(np.min(w)), float(np.max(w)), bits, signed=True)
