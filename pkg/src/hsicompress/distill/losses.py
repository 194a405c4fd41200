"""Distillation objectives.

Each loss returns ``LossParts(total, kd)`` where ``kd`` is the
teacher-matching (or consistency) part already multiplied by its weight.
Targets built from other networks or peers are detached. Consensus targets
are written as ``own + mean(other - own)`` so identical inputs give a target
bit-identical to the student's own prediction, and the divergence is
exactly zero.
"""

from __future__ import annotations

import warnings
from typing import NamedTuple, Sequence

import numpy as np

from ..autograd import Tensor, as_tensor, make_op, stack
from ..autograd import functional as F


class LossParts(NamedTuple):
    total: Tensor
    kd: Tensor


def _t(x) -> Tensor:
    return as_tensor(x)


def _detached(x) -> Tensor:
    return Tensor(x.data if isinstance(x, Tensor) else np.asarray(x))


def safe_log(p: Tensor) -> Tensor:
    """``log p`` with underflowed zeros clamped to the dtype's smallest normal."""
    tiny = np.finfo(p.dtype).tiny
    d = np.maximum(p.data, tiny)
    return make_op(np.log(d), (p,), lambda g: (np.where(p.data > tiny, g / d, 0.0),), "safe_log")


def kl_probs(target, q: Tensor) -> Tensor:
    """Row-mean ``KL(target || q)`` on probability tensors; ``0 log 0 = 0``."""
    target = _t(target)
    support = target.data > 0
    logt = safe_log(target) * support.astype(target.dtype)
    return (target * (logt - safe_log(q))).sum(axis=-1).mean()


def kl_target_logits(target: np.ndarray, z: Tensor, T: float = 1.0) -> Tensor:
    """Row-mean ``KL(target || softmax(z/T))`` for a constant target distribution."""
    t = np.asarray(target, dtype=z.dtype)
    support = t > 0
    with np.errstate(divide="ignore"):
        logt = np.where(support, np.log(np.where(support, t, 1)), 0)
    return (Tensor(t) * (Tensor(logt) - F.log_softmax(z, T))).sum(axis=-1).mean()


def _check_k(z_s: Tensor, z_t: Tensor) -> None:
    if z_s.shape != z_t.shape:
        raise ValueError(f"student/teacher logits differ: {z_s.shape} vs {z_t.shape}")


def kd_term(z_s: Tensor, z_t, T: float) -> Tensor:
    """``T^2 KL(softmax(z_t/T) || softmax(z_s/T))`` with the teacher detached."""
    z_t = _detached(z_t)
    _check_k(z_s, z_t)
    return F.kl_logits(F.log_softmax(z_t, T), F.log_softmax(z_s, T)) * (T * T)


def soft_target_loss(z_s: Tensor, z_t, y, T: float = 4.0, alpha: float = 0.9) -> LossParts:
    kd = kd_term(z_s, z_t, T) * (1.0 - alpha)
    return LossParts(F.cross_entropy(z_s, y) * alpha + kd, kd)


# -- feature based ---------------------------------------------------------

def hint_loss(regressed: Tensor, hint) -> Tensor:
    """``1/2 ||r(F_s) - F_t||^2`` per sample, averaged over the batch."""
    hint = _detached(hint)
    if regressed.shape != hint.shape:
        raise ValueError(f"guided/hint shapes differ: {regressed.shape} vs {hint.shape}")
    diff = regressed - hint
    return (diff * diff).sum() * (0.5 / regressed.shape[0])


def attention_map(a: Tensor) -> Tensor:
    """Channel energy ``sum_c A_c^2`` flattened to ``[N, H*W]``."""
    q = (a * a).sum(axis=1)
    return q.reshape(q.shape[0], -1)


def attention_transfer_loss(student_maps: Sequence[Tensor], teacher_maps: Sequence) -> Tensor:
    """Sum over taps of the batch-mean ``|| Q_s/|Q_s| - Q_t/|Q_t| ||_2``."""
    total = None
    for i, (a_s, a_t) in enumerate(zip(student_maps, teacher_maps)):
        a_t = _detached(a_t)
        if a_s.shape[0] != a_t.shape[0] or a_s.shape[2:] != a_t.shape[2:]:
            raise ValueError(f"attention tap {i}: spatial shapes differ {a_s.shape} vs {a_t.shape}")
        q_s, q_t = attention_map(a_s), attention_map(a_t)
        n_s, n_t = F.norm(q_s), F.norm(q_t)
        if (n_s.data == 0).any() or (n_t.data == 0).any():
            warnings.warn(f"attention tap {i} has an all-zero map; skipping it", RuntimeWarning)
            continue
        d = q_s / n_s.reshape(-1, 1) - q_t / n_t.reshape(-1, 1)
        term = F.norm(d).mean()
        total = term if total is None else total + term
    if total is None:
        ref = student_maps[0]
        return (ref * 0.0).sum()
    return total


def rbf_kernel(f: Tensor, delta: float = 1.0) -> Tensor:
    """``exp(-||f_i - f_j||^2 / (2 delta^2))`` on L2-normalised rows."""
    sq = (f * f).sum(axis=1, keepdims=True)
    fn = f / (sq + 1e-12) ** 0.5
    return (F.squared_distance_matrix(fn) * (-1.0 / (2 * delta * delta))).exp()


def correlation_congruence_loss(f_s: Tensor, f_t, delta: float = 1.0) -> Tensor:
    f_t = _detached(f_t)
    b = f_s.shape[0]
    if b < 2 or f_t.shape[0] != b:
        raise ValueError(f"correlation congruence needs matching batches of >= 2, got {b}")
    diff = rbf_kernel(f_t, delta) - rbf_kernel(f_s, delta)
    return (diff * diff).sum() * (1.0 / (b * b))


def feature_l2(a: Tensor, b) -> Tensor:
    """Batch mean of per-sample squared distances."""
    b = _detached(b)
    diff = a - b
    return (diff * diff).sum() * (1.0 / a.shape[0])


# -- multi-teacher ----------------------------------------------------------

def camkd_weights(teacher_logits: Sequence, y) -> np.ndarray:
    """Per-sample teacher reliabilities ``softmax_k(-CE(z_t_k, y))``, shape ``[N, m]``."""
    ce = np.stack([-F.log_softmax(_detached(z)).data[np.arange(len(y)), np.asarray(y)]
                   for z in teacher_logits], axis=1)
    return F.softmax_t(Tensor(-ce)).data


def camkd_loss(z_s: Tensor, teacher_logits: Sequence, y, T: float = 4.0,
               f_s: Tensor | None = None, teacher_feats: Sequence | None = None,
               lambda_f: float = 1.0) -> LossParts:
    w = camkd_weights(teacher_logits, y)
    logq = F.log_softmax(z_s, T)
    kd = None
    for k, z_t in enumerate(teacher_logits):
        z_t = _detached(z_t)
        _check_k(z_s, z_t)
        term = (F.kl_per_sample(F.log_softmax(z_t, T), logq) * Tensor(w[:, k].astype(z_s.dtype))).mean()
        kd = term * (T * T) if kd is None else kd + term * (T * T)
    if f_s is not None and teacher_feats is not None:
        for k, f_t in enumerate(teacher_feats):
            f_t = _detached(f_t)
            diff = f_s - f_t
            per = (diff * diff).mean(axis=1)
            kd = kd + (per * Tensor(w[:, k].astype(f_s.dtype))).mean() * lambda_f
    return LossParts(F.cross_entropy(z_s, y) + kd, kd)


# -- online ----------------------------------------------------------------

def consensus(own: np.ndarray, others: Sequence[np.ndarray]) -> np.ndarray:
    """``own + mean_j(other_j - own)``: the mean of ``others`` anchored at ``own``."""
    return own + np.mean([o - own for o in others], axis=0)


def dml_losses(logits: Sequence[Tensor], y, T: float = 1.0) -> list[LossParts]:
    """Per-peer ``CE_i + 1/(m-1) sum_{j!=i} KL(p_j || p_i)`` with peers detached."""
    m = len(logits)
    if m < 2:
        raise ValueError("mutual learning needs at least 2 peers")
    out = []
    for i, z_i in enumerate(logits):
        logq = F.log_softmax(z_i, T)
        kd = None
        for j, z_j in enumerate(logits):
            if j == i:
                continue
            term = F.kl_logits(F.log_softmax(_detached(z_j), T), logq)
            kd = term if kd is None else kd + term
        kd = kd * (T * T / (m - 1))
        out.append(LossParts(F.cross_entropy(z_i, y) + kd, kd))
    return out


def gate_weights(gate_logits: Tensor) -> Tensor:
    return F.softmax_t(gate_logits)


def one_loss(logits: Sequence[Tensor], gate_logits: Tensor, y, T: float = 4.0) -> LossParts:
    """Branch CEs + ensemble CE + ``T^2 KL(p_e || p_i)`` with the ensemble detached."""
    g = gate_weights(gate_logits)
    z0 = logits[0]
    z_e = z0
    for i, z in enumerate(logits[1:], start=1):
        z_e = z_e + (z - z0) * g[:, i:i + 1]
    total = F.cross_entropy(z_e, y)
    target = F.log_softmax(_detached(z_e), T)
    kd = None
    for z in logits:
        total = total + F.cross_entropy(z, y)
        term = F.kl_logits(target, F.log_softmax(z, T)) * (T * T)
        kd = term if kd is None else kd + term
    return LossParts(total + kd, kd)


def clilr_loss(logits: Sequence[Tensor], y, T: float = 4.0) -> LossParts:
    """Each head distils from the detached mean of the other heads."""
    probs = [F.softmax_t(z, T) for z in logits]
    total, kd = None, None
    for i, z in enumerate(logits):
        others = [p.data for j, p in enumerate(probs) if j != i]
        target = consensus(probs[i].data, others) if others else probs[i].data
        term = kl_probs(Tensor(target), probs[i]) * (T * T)
        ce = F.cross_entropy(z, y)
        total = ce if total is None else total + ce
        kd = term if kd is None else kd + term
    return LossParts(total + kd, kd)


def okddip_attention(feats: Sequence[Tensor], wq: Tensor, wk: Tensor) -> Tensor:
    """Row-softmax of scaled query/key products between peers, ``[N, m, m]``."""
    q = stack([f @ wq for f in feats], axis=1)
    k = stack([f @ wk for f in feats], axis=1)
    n, m, d = q.shape
    scores = (q.reshape(n, m, 1, d) * k.reshape(n, 1, m, d)).sum(axis=-1) * (1.0 / np.sqrt(d))
    return F.softmax_t(scores, axis=-1)


def okddip_loss(peer_logits: Sequence[Tensor], peer_feats: Sequence[Tensor], leader_logits: Tensor,
                y, wq: Tensor, wk: Tensor, T: float = 4.0) -> LossParts:
    """Two-tier distillation: attention-weighted peer targets, then the leader
    learns from the detached peer mean."""
    m = len(peer_logits)
    if m < 2:
        raise ValueError("OKDDip needs at least 2 peers besides the leader")
    probs = [F.softmax_t(z, T) for z in peer_logits]
    p = np.stack([pr.data for pr in probs], axis=1)                 # [N, m, K]
    attn = okddip_attention(peer_feats, wq, wk)                     # [N, m, m]
    delta = Tensor(p[:, None, :, :] - p[:, :, None, :])             # [N, i, j, K]
    n, _, k = p.shape
    targets = (attn.reshape(n, m, m, 1) * delta).sum(axis=2) + Tensor(p)
    total, kd = None, None
    for i, z in enumerate(peer_logits):
        term = kl_probs(targets[:, i, :], probs[i]) * (T * T)
        ce = F.cross_entropy(z, y)
        total = ce if total is None else total + ce
        kd = term if kd is None else kd + term
    p_lead = F.softmax_t(leader_logits, T)
    lead_target = consensus(p_lead.data, [p[:, i] for i in range(m)])
    kd = kd + kl_probs(Tensor(lead_target), p_lead) * (T * T)
    total = total + F.cross_entropy(leader_logits, y)
    return LossParts(total + kd, kd)


# -- self distillation -------------------------------------------------------

def tfkd_virtual_teacher(y, K: int, a: float) -> np.ndarray:
    """``a`` on the true class and ``(1 - a)/(K - 1)`` elsewhere."""
    if K < 2:
        raise ValueError("the virtual teacher needs K >= 2 classes")
    if not 1.0 / K < a <= 1.0:
        raise ValueError(f"virtual-teacher probability a must lie in (1/K, 1], got {a} for K={K}")
    y = np.asarray(y, dtype=np.int64)
    out = np.full((len(y), K), (1.0 - a) / (K - 1))
    out[np.arange(len(y)), y] = a
    return out


def tfkd_soft_teacher(y, K: int, a: float, T: float) -> np.ndarray:
    """Log of the virtual teacher softened at temperature ``T``: ``log softmax(p^d / T)``."""
    pd = tfkd_virtual_teacher(y, K, a)
    return F.log_softmax(Tensor(pd), T).data


def tfkd_loss(z: Tensor, y, a: float = 0.9, T: float = 20.0, beta: float = 0.1) -> LossParts:
    """CE + ``beta T^2 KL(softmax(p^d/T) || softmax(z/T))``."""
    log_t = Tensor(tfkd_soft_teacher(y, z.shape[1], a, T).astype(z.dtype))
    kd = F.kl_logits(log_t, F.log_softmax(z, T)) * (beta * T * T)
    return LossParts(F.cross_entropy(z, y) + kd, kd)


def cskd_loss(z_x: Tensor, z_partner, y, has_partner: np.ndarray, T: float = 4.0,
              lam: float = 1.0) -> LossParts:
    """CE plus ``lam T^2 KL(p(x') || p(x))``; samples without a partner add CE only."""
    z_partner = _detached(z_partner)
    _check_k(z_x, z_partner)
    mask = Tensor(np.asarray(has_partner, dtype=z_x.dtype))
    per = F.kl_per_sample(F.log_softmax(z_partner, T), F.log_softmax(z_x, T))
    kd = (per * mask).mean() * (lam * T * T)
    return LossParts(F.cross_entropy(z_x, y) + kd, kd)


def pskd_alpha(alpha_T: float, epoch: int, total_epochs: int) -> float:
    """Linear schedule ``alpha_T * t / T_total``; the first epoch has no snapshot."""
    if epoch <= 1:
        return 0.0
    return alpha_T * epoch / total_epochs


def pskd_target(onehot: np.ndarray, p_prev: np.ndarray, alpha_t: float) -> np.ndarray:
    return (1.0 - alpha_t) * np.asarray(onehot) + alpha_t * np.asarray(p_prev)


def pskd_loss(z: Tensor, y, p_prev: np.ndarray | None, alpha_t: float) -> LossParts:
    """CE against ``(1-a) onehot + a p_prev``, written as ``CE + a (CE_soft(p_prev) - CE)``."""
    ce = F.cross_entropy(z, y)
    if p_prev is None or alpha_t == 0:
        kd = ce * 0.0
    else:
        kd = (F.soft_cross_entropy(z, p_prev) - ce) * alpha_t
    return LossParts(ce + kd, kd)


def global_avg_pool(f: Tensor) -> Tensor:
    return f.mean(axis=tuple(range(2, f.ndim)))


def ddgsd_loss(z1: Tensor, z2: Tensor, f1: Tensor, f2: Tensor, y, lambda_p: float = 1.0,
               lambda_f: float = 1.0, T: float = 1.0) -> LossParts:
    """Two-view consistency: symmetric KL of class probabilities plus the squared
    distance of globally pooled features."""
    l1, l2 = F.log_softmax(z1, T), F.log_softmax(z2, T)
    sym = F.kl_logits(l1, l2) + F.kl_logits(l2, l1)
    d = global_avg_pool(f1) - global_avg_pool(f2)
    feat = (d * d).sum() * (1.0 / z1.shape[0])
    kd = sym * lambda_p + feat * lambda_f
    return LossParts(F.cross_entropy(z1, y) + F.cross_entropy(z2, y) + kd, kd)
