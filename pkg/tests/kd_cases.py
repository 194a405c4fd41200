"""Degenerate-configuration and gradient-check cases for every distillation loss."""

import numpy as np

from hsicompress.autograd import Tensor
from hsicompress.autograd.rng import make_rng
from hsicompress.distill import losses as L
from hsicompress.models import Conv2d, Linear

N, K = 4, 5


def _arr(rng, *shape, scale=1.0):
    return rng.normal(scale=scale, size=shape)


def _identity_conv(c: int) -> Conv2d:
    conv = Conv2d("r", c, c, 1, make_rng(0))
    conv.weight.data = np.eye(c).reshape(c, c, 1, 1)
    conv.bias.data = np.zeros(c)
    return conv


def _identity_linear(d: int) -> Linear:
    lin = Linear("proj", d, d, make_rng(0))
    lin.weight.data = np.eye(d)
    lin.bias.data = np.zeros(d)
    return lin


def zero_cases(seed: int = 0) -> dict:
    """Distillation term of each method in its identity configuration."""
    rng = make_rng(seed)
    y = np.arange(N) % K
    z = Tensor(_arr(rng, N, K))
    feats = Tensor(np.abs(_arr(rng, N, 3, 4, 4)))
    emb = Tensor(np.abs(_arr(rng, N, 6)))
    out = {}
    out["soft"] = L.soft_target_loss(z, z.data.copy(), y, 4.0, 0.9).kd
    out["fitnets"] = L.hint_loss(_identity_conv(3).forward(feats, True), feats.data.copy())
    out["at"] = L.attention_transfer_loss([feats, feats], [feats.data.copy(), feats.data.copy()])
    out["cc"] = L.correlation_congruence_loss(emb, emb.data.copy())
    out["simkd"] = L.feature_l2(_identity_linear(6).forward(emb, True), emb.data.copy())
    out["camkd"] = L.camkd_loss(z, [z.data.copy(), z.data.copy()], y, 4.0, emb,
                                [emb.data.copy(), emb.data.copy()]).kd
    peers = [Tensor(z.data.copy()) for _ in range(3)]
    dml = L.dml_losses(peers, y)
    out["dml"] = dml[0].kd + dml[1].kd + dml[2].kd
    out["one"] = L.one_loss(peers, Tensor(_arr(rng, N, 3)), y).kd
    out["clilr"] = L.clilr_loss(peers, y).kd
    wq, wk = Tensor(_arr(rng, 6, 2)), Tensor(_arr(rng, 6, 2))
    out["okddip"] = L.okddip_loss(peers[1:], [emb, Tensor(emb.data.copy())], peers[0], y, wq, wk).kd
    virtual = L.tfkd_virtual_teacher(y, K, 0.9)
    out["tfkd"] = L.tfkd_loss(Tensor(virtual), y, 0.9, 20.0, 0.1).kd
    out["cskd"] = L.cskd_loss(z, z.data.copy(), y, np.ones(N, bool)).kd
    out["pskd"] = L.pskd_loss(z, y, np.full((N, K), 1.0 / K), 0.0).kd
    out["ddgsd"] = L.ddgsd_loss(z, Tensor(z.data.copy()), feats, Tensor(feats.data.copy()), y).kd
    return {k: float(v.data) for k, v in out.items()}


def _frozen_online(peers, gate, pfeats, wq, wk, y, T=4.0):
    """Reference objectives of the online losses with their detached targets
    precomputed as constants, so finite differences see only the live paths."""
    F = L.F
    P = [F.softmax_t(Tensor(z.data.copy()), T).data for z in peers]
    P1 = [F.softmax_t(Tensor(z.data.copy())).data for z in peers]
    m = len(peers)

    def dml():
        total = None
        for i, z in enumerate(peers):
            others = [j for j in range(m) if j != i]
            term = F.cross_entropy(z, y)
            for j in others:
                term = term + L.kl_target_logits(P1[j], z) * (1.0 / (m - 1))
            total = term if total is None else total + term
        return total

    g0 = F.softmax_t(Tensor(gate.data.copy())).data
    ze = sum(g0[:, i:i + 1] * peers[i].data for i in range(m))
    pe = F.softmax_t(Tensor(ze), T).data

    def one():
        g = F.softmax_t(gate)
        z_e = peers[0] * g[:, 0:1]
        for i in range(1, m):
            z_e = z_e + peers[i] * g[:, i:i + 1]
        total = F.cross_entropy(z_e, y)
        for z in peers:
            total = total + F.cross_entropy(z, y) + L.kl_target_logits(pe, z, T) * (T * T)
        return total

    def clilr():
        total = None
        for i, z in enumerate(peers):
            target = np.mean([P[j] for j in range(m) if j != i], axis=0)
            term = F.cross_entropy(z, y) + L.kl_target_logits(target, z, T) * (T * T)
            total = term if total is None else total + term
        return total

    def okddip():
        sub = peers[1:]
        Ps = np.stack(P[1:], axis=1)
        attn = L.okddip_attention(pfeats, wq, wk)
        n = Ps.shape[0]
        targets = (attn.reshape(n, m - 1, m - 1, 1) * Tensor(Ps[:, None, :, :])).sum(axis=2)
        total = F.cross_entropy(peers[0], y)
        for i, z in enumerate(sub):
            q = F.log_softmax(z, T)
            t = targets[:, i, :]
            total = total + F.cross_entropy(z, y) + (t * (L.safe_log(t) - q)).sum(axis=-1).mean() * (T * T)
        total = total + L.kl_target_logits(Ps.mean(axis=1), peers[0], T) * (T * T)
        return total

    return {"dml": dml, "one": one, "clilr": clilr, "okddip": okddip}


def grad_errors(case) -> list:
    """Relative error of backprop through the library loss against central
    differences of the reference objective (the loss itself unless given)."""
    from hsicompress.autograd.gradcheck import numerical_grad, relative_error
    f, tensors = case[0], case[1]
    ref = case[2] if len(case) > 2 else f
    for t in tensors:
        t.grad = None
    f().backward()
    analytic = [t.grad.copy() if t.grad is not None else np.zeros_like(t.data) for t in tensors]
    return [relative_error(a, numerical_grad(ref, t)) for a, t in zip(analytic, tensors)]


def grad_cases(seed: int = 0) -> dict:
    """method -> (loss closure, leaf tensors[, reference closure for finite differences])."""
    rng = make_rng(seed)
    y = np.array([0, 2, 2, 4])
    leaf = lambda *shape: Tensor(_arr(rng, *shape), requires_grad=True)  # noqa: E731
    zs, zt = leaf(N, K), _arr(rng, N, K)
    fs = Tensor(np.abs(_arr(rng, N, 3, 4, 4)) + 0.1, requires_grad=True)
    ft = np.abs(_arr(rng, N, 3, 4, 4)) + 0.1
    es, et = leaf(N, 6), _arr(rng, N, 8)
    peers = [leaf(N, K) for _ in range(3)]
    pfeats = [leaf(N, 6) for _ in range(2)]
    gate = leaf(N, 3)
    wq, wk = leaf(6, 2), leaf(6, 2)
    z2, f2 = leaf(N, K), Tensor(np.abs(_arr(rng, N, 3, 4, 4)) + 0.1, requires_grad=True)
    zp = _arr(rng, N, K)
    reg = Conv2d("r", 3, 3, 1, make_rng(1))
    reg.weight.data = reg.weight.data.astype(np.float64)
    reg.bias.data = reg.bias.data.astype(np.float64)
    proj = leaf(6, 8)
    ref = _frozen_online(peers, gate, pfeats, wq, wk, y)
    return {
        "soft": (lambda: L.soft_target_loss(zs, zt, y, 4.0, 0.9).total, [zs]),
        "fitnets": (lambda: L.hint_loss(reg.forward(fs, True), ft), [fs, reg.weight]),
        "at": (lambda: L.soft_target_loss(zs, zt, y).total
               + L.attention_transfer_loss([fs], [ft]), [zs, fs]),
        "cc": (lambda: L.soft_target_loss(zs, zt, y).total
               + L.correlation_congruence_loss(es, et) * 0.32, [zs, es]),
        "simkd": (lambda: L.feature_l2(es @ proj, et), [es, proj]),
        "camkd": (lambda: L.camkd_loss(zs, [zt, zp], y, 4.0, es @ proj,
                                       [et, et[::-1].copy()]).total, [zs, es, proj]),
        "dml": (lambda: sum((p.total for p in L.dml_losses(peers, y)[1:]),
                            L.dml_losses(peers, y)[0].total), peers, ref["dml"]),
        "one": (lambda: L.one_loss(peers, gate, y).total, peers + [gate], ref["one"]),
        "clilr": (lambda: L.clilr_loss(peers, y).total, peers, ref["clilr"]),
        "okddip": (lambda: L.okddip_loss(peers[1:], pfeats, peers[0], y, wq, wk).total,
                   peers + pfeats + [wq, wk], ref["okddip"]),
        "tfkd": (lambda: L.tfkd_loss(zs, y, 0.9, 20.0, 0.1).total, [zs]),
        "cskd": (lambda: L.cskd_loss(zs, zp, y, np.array([1, 1, 0, 1], bool)).total, [zs]),
        "pskd": (lambda: L.pskd_loss(zs, y, L.F.softmax_t(Tensor(zp)).data, 0.4).total, [zs]),
        "ddgsd": (lambda: L.ddgsd_loss(zs, z2, fs, f2, y).total, [zs, z2, fs, f2]),
    }
