"""Layer and loss primitives on top of :mod:`hsicompress.autograd.tensor`.

Convolutions use valid padding and stride 1. Pooling uses non-overlapping
windows with floor semantics; the gradient goes to the first maximal element
of each window in row-major order.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .tensor import Tensor, as_tensor, make_op

BN_EPS = 1e-5
BN_MOMENTUM = 0.1


def im2col(x: np.ndarray, kh: int, kw: int) -> np.ndarray:
    """[N,C,H,W] -> [N*Ho*Wo, C*kh*kw] patch matrix (row-major over N,Ho,Wo)."""
    n, c = x.shape[:2]
    win = sliding_window_view(x, (kh, kw), axis=(2, 3))  # N,C,Ho,Wo,kh,kw
    ho, wo = win.shape[2], win.shape[3]
    return np.ascontiguousarray(win.transpose(0, 2, 3, 1, 4, 5)).reshape(n * ho * wo, c * kh * kw)


def col2im(cols: np.ndarray, shape: tuple, kh: int, kw: int) -> np.ndarray:
    n, c, h, w = shape
    ho, wo = h - kh + 1, w - kw + 1
    cols = np.ascontiguousarray(cols.reshape(n, ho, wo, c, kh, kw).transpose(0, 3, 4, 5, 1, 2))
    out = np.zeros(shape, dtype=cols.dtype)
    for i in range(kh):
        for j in range(kw):
            out[:, :, i:i + ho, j:j + wo] += cols[:, :, i, j]
    return out


def conv2d(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    if x.ndim != 4 or w.ndim != 4:
        raise ValueError(f"conv2d expects x [N,C,H,W] and w [O,C,kh,kw], got {x.shape}, {w.shape}")
    n, c, h, wd = x.shape
    o, ci, kh, kw = w.shape
    if ci != c:
        raise ValueError(f"conv2d channel mismatch: input has {c}, weight expects {ci}")
    ho, wo = h - kh + 1, wd - kw + 1
    if ho < 1 or wo < 1:
        raise ValueError(f"conv2d kernel {kh}x{kw} larger than input {h}x{wd}")
    if b is not None and b.shape != (o,):
        raise ValueError(f"conv2d bias shape {b.shape} != ({o},)")

    cols = im2col(x.data, kh, kw)
    wm = w.data.reshape(o, -1)
    out = cols @ wm.T
    if b is not None:
        out += b.data
    out = out.reshape(n, ho, wo, o).transpose(0, 3, 1, 2)
    x_shape, needs_x = x.shape, x.requires_grad

    def backward(g):
        gm = g.transpose(0, 2, 3, 1).reshape(-1, o)
        gx = col2im(gm @ wm, x_shape, kh, kw) if needs_x else None
        gw = (gm.T @ cols).reshape(o, ci, kh, kw)
        gb = gm.sum(axis=0) if b is not None else None
        return (gx, gw, gb) if b is not None else (gx, gw)

    parents = (x, w, b) if b is not None else (x, w)
    return make_op(np.ascontiguousarray(out), parents, backward, "conv2d")


def conv1d(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    if x.ndim != 3 or w.ndim != 3:
        raise ValueError(f"conv1d expects x [N,C,L] and w [O,C,k], got {x.shape}, {w.shape}")
    n, c, length = x.shape
    o, ci, k = w.shape
    out = conv2d(x.reshape(n, c, 1, length), w.reshape(o, ci, 1, k), b)
    return out.reshape(n, o, length - k + 1)


def _max_pool(x: Tensor, wh: int, ww: int) -> Tensor:
    n, c, h, w = x.shape
    if wh < 1 or ww < 1:
        raise ValueError("pool window must be >= 1")
    if wh > h or ww > w:
        raise ValueError(f"pool window {wh}x{ww} larger than input {h}x{w}")
    ho, wo = h // wh, w // ww
    win = (x.data[:, :, :ho * wh, :wo * ww]
           .reshape(n, c, ho, wh, wo, ww)
           .transpose(0, 1, 2, 4, 3, 5)
           .reshape(n, c, ho, wo, wh * ww))
    idx = win.argmax(axis=-1)[..., None]  # first occurrence wins ties
    out = np.take_along_axis(win, idx, axis=-1)[..., 0]
    x_shape, dtype = x.shape, x.dtype

    def backward(g):
        gwin = np.zeros((n, c, ho, wo, wh * ww), dtype=dtype)
        np.put_along_axis(gwin, idx, g[..., None], axis=-1)
        gx = np.zeros(x_shape, dtype=dtype)
        gx[:, :, :ho * wh, :wo * ww] = (gwin.reshape(n, c, ho, wo, wh, ww)
                                        .transpose(0, 1, 2, 4, 3, 5)
                                        .reshape(n, c, ho * wh, wo * ww))
        return (gx,)

    return make_op(out, (x,), backward, "maxpool")


def max_pool2d(x: Tensor, window: int = 2) -> Tensor:
    return _max_pool(x, window, window)


def max_pool1d(x: Tensor, window: int = 2) -> Tensor:
    n, c, length = x.shape
    return _max_pool(x.reshape(n, c, 1, length), 1, window).reshape(n, c, length // window)


def batch_norm(x: Tensor, gamma: Tensor, beta: Tensor, running_mean: np.ndarray,
               running_var: np.ndarray, training: bool, eps: float = BN_EPS,
               momentum: float = BN_MOMENTUM) -> Tensor:
    """Per-channel normalisation over every axis except 1.

    Training mode normalises with biased batch statistics and updates the
    running buffers in place (unbiased variance, as is conventional).
    """
    c = x.shape[1]
    if gamma.shape != (c,) or beta.shape != (c,):
        raise ValueError(f"batch_norm expects gamma/beta of shape ({c},)")
    axes = (0,) + tuple(range(2, x.ndim))
    bshape = (1, c) + (1,) * (x.ndim - 2)
    count = x.size // c
    if training:
        if x.shape[0] < 2:
            raise ValueError("batch_norm in training mode needs a batch of at least 2")
        mean = x.data.mean(axis=axes)
        var = x.data.var(axis=axes)
        running_mean *= 1 - momentum
        running_mean += momentum * mean
        running_var *= 1 - momentum
        running_var += momentum * var * count / max(count - 1, 1)
    else:
        mean, var = running_mean, running_var
    inv_std = (1.0 / np.sqrt(var + eps)).astype(x.dtype)
    xhat = (x.data - mean.reshape(bshape)) * inv_std.reshape(bshape)
    g_, b_ = gamma.data.reshape(bshape), beta.data.reshape(bshape)
    out = g_ * xhat + b_

    def backward(g):
        dgamma = (g * xhat).sum(axis=axes)
        dbeta = g.sum(axis=axes)
        dxhat = g * g_
        if training:
            dx = (inv_std.reshape(bshape) / count) * (
                count * dxhat
                - dxhat.sum(axis=axes, keepdims=True)
                - xhat * (dxhat * xhat).sum(axis=axes, keepdims=True))
        else:
            dx = dxhat * inv_std.reshape(bshape)
        return dx, dgamma, dbeta

    return make_op(out, (x, gamma, beta), backward, "batchnorm")


def linear(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    if x.ndim != 2 or w.ndim != 2 or x.shape[1] != w.shape[1]:
        raise ValueError(f"linear shape mismatch: x {x.shape}, W {w.shape}")
    if b is not None and b.shape != (w.shape[0],):
        raise ValueError(f"linear bias shape {b.shape} != ({w.shape[0]},)")
    xd, wd = x.data, w.data
    out = xd @ wd.T
    if b is not None:
        out = out + b.data

    def backward(g):
        grads = (g @ wd if x.requires_grad else None, g.T @ xd)
        return grads + (g.sum(axis=0),) if b is not None else grads

    parents = (x, w, b) if b is not None else (x, w)
    return make_op(out, parents, backward, "linear")


def relu(x: Tensor) -> Tensor:
    return x.relu()


def log_softmax(z: Tensor, T: float = 1.0, axis: int = -1) -> Tensor:
    if T <= 0:
        raise ValueError(f"temperature must be > 0, got {T}")
    s = z.data / z.dtype.type(T)
    shifted = s - s.max(axis=axis, keepdims=True)
    out = shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))

    def backward(g):
        p = np.exp(out)
        return ((g - p * g.sum(axis=axis, keepdims=True)) / z.dtype.type(T),)

    return make_op(out, (z,), backward, "log_softmax")


def softmax_t(z, T: float = 1.0, axis: int = -1) -> Tensor:
    """Temperature softmax ``exp(z_i/T) / sum_j exp(z_j/T)``, max-shifted."""
    return log_softmax(as_tensor(z), T, axis).exp()


softmax = softmax_t


def _check_labels(y, n: int, k: int) -> np.ndarray:
    y = np.asarray(y, dtype=np.int64).reshape(-1)
    if y.shape[0] != n:
        raise ValueError(f"got {y.shape[0]} labels for {n} rows")
    if y.size and (y.min() < 0 or y.max() >= k):
        raise ValueError(f"labels must lie in [0, {k}), got range [{y.min()}, {y.max()}]")
    return y


def nll(logp: Tensor, y) -> Tensor:
    """Mean negative log-likelihood of integer labels under row log-probs."""
    n, k = logp.shape
    y = _check_labels(y, n, k)
    rows = np.arange(n)
    value = -logp.data[rows, y].mean()

    def backward(g):
        full = np.zeros_like(logp.data)
        full[rows, y] = -g / n
        return (full,)

    return make_op(np.asarray(value, dtype=logp.dtype), (logp,), backward, "nll")


def cross_entropy(z: Tensor, y) -> Tensor:
    if z.ndim != 2:
        raise ValueError(f"cross_entropy expects logits [N,K], got {z.shape}")
    return nll(log_softmax(z), y)


def cross_entropy_per_sample(z: Tensor, y) -> Tensor:
    n, k = z.shape
    y = _check_labels(y, n, k)
    return -log_softmax(z)[np.arange(n), y]


def soft_cross_entropy(z: Tensor, target) -> Tensor:
    """Mean over rows of ``-sum_k t_k log softmax(z)_k`` for soft targets ``t``."""
    t = target.data if isinstance(target, Tensor) else np.asarray(target, dtype=z.dtype)
    return -(log_softmax(z) * t).sum(axis=-1).mean()


def kl_div(p, q) -> Tensor:
    """``sum_i p_i ln(p_i / q_i)`` for distributions along the last axis.

    Batched inputs are averaged over rows. ``0 ln(0/q)`` is taken as 0; a zero
    ``q_i`` where ``p_i > 0`` is an error rather than an infinite result.
    """
    p, q = as_tensor(p), as_tensor(q)
    if p.shape != q.shape:
        raise ValueError(f"kl_div shape mismatch {p.shape} vs {q.shape}")
    pd, qd = p.data, q.data
    for name, d in (("p", pd), ("q", qd)):
        if (d < 0).any() or not np.allclose(d.sum(axis=-1), 1.0, atol=1e-6):
            raise ValueError(f"kl_div: {name} is not a probability distribution")
    support = pd > 0
    if (support & (qd <= 0)).any():
        raise ValueError("kl_div: q has zero mass where p is positive (divergence is infinite)")
    with np.errstate(divide="ignore", invalid="ignore"):
        logratio = np.where(support, np.log(np.where(support, pd, 1)) - np.log(np.where(support, qd, 1)), 0)
    rows = pd.size // pd.shape[-1]
    value = (pd * logratio).sum() / rows

    def backward(g):
        with np.errstate(divide="ignore", invalid="ignore"):
            dq = np.where(support, -pd / np.where(support, qd, 1), 0)
        dp = np.where(support, logratio + 1, 0)
        return g * dp / rows, g * dq / rows

    return make_op(np.asarray(value, dtype=pd.dtype), (p, q), backward, "kl_div")


def kl_logits(target_logp: Tensor, logq: Tensor) -> Tensor:
    """Row-mean ``KL(p || q)`` given log-probabilities; exactly 0 when inputs match."""
    return (target_logp.exp() * (target_logp - logq)).sum(axis=-1).mean()


def kl_per_sample(target_logp: Tensor, logq: Tensor) -> Tensor:
    return (target_logp.exp() * (target_logp - logq)).sum(axis=-1)


def norm(x: Tensor, axis: int = -1) -> Tensor:
    """Euclidean norm along ``axis`` with a zero subgradient at the origin."""
    xd = x.data
    out = np.sqrt((xd * xd).sum(axis=axis))

    def backward(g):
        safe = np.where(out > 0, out, 1)
        scale = np.where(out > 0, g / safe, 0)
        return (np.expand_dims(scale, axis) * xd,)

    return make_op(out, (x,), backward, "norm")


def l2_normalize(x: Tensor, axis: int = -1) -> Tensor:
    n = norm(x, axis)
    xd = n.data
    if (xd == 0).any():
        raise ValueError("l2_normalize: zero vector")
    return x / n.reshape(n.shape[:axis % x.ndim] + (1,) + n.shape[axis % x.ndim:])


def squared_distance_matrix(f: Tensor) -> Tensor:
    """Pairwise ``||f_i - f_j||^2`` for rows of ``f`` [b, D]; the diagonal is exactly 0."""
    b, d = f.shape
    diff = f.reshape(b, 1, d) - f.reshape(1, b, d)
    return (diff * diff).sum(axis=-1)


def mse(a: Tensor, b) -> Tensor:
    diff = a - b
    return (diff * diff).mean()
