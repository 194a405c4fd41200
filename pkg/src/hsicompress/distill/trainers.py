"""Training loops for the fourteen distillation methods."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from ..autograd import NonFiniteError, Tensor, make_optimizer, no_grad
from ..autograd import functional as F
from ..autograd.rng import derive
from ..models import (ArchSpec, Conv2d, History, Linear, ModelGraph, TrainConfig,
                      TrainingDivergedError, build_model, evaluate, minibatches, save_checkpoint)
from ..pruning.surgery import resolve_target
from . import losses as L
from .branches import MultiBranchModel
from .config import OFFLINE, DistillConfig

StepFn = Callable[[np.ndarray, np.ndarray, np.ndarray, int], Tensor]


@dataclass
class DistillResult:
    student: ModelGraph
    history: History
    config: DistillConfig
    extra: dict = field(default_factory=dict)


def student_spec(arch: ArchSpec, ratio) -> ArchSpec:
    t = resolve_target(ratio)
    return arch.with_widths(t.f1, t.f2, t.hidden)


def fit(params: Sequence[Tensor], set_mode: Callable[[bool], None], data, tc: TrainConfig,
        step: StepFn, seed: int = 0, kind: str = "patch",
        after_epoch: Callable[[int], None] | None = None) -> History:
    """Minibatch loop shared by every trainer; ``step(idx, x, y, epoch)`` returns the loss."""
    if len(data) < 2:
        raise ValueError("need at least two training samples")
    opt = make_optimizer(params, tc.optim())
    rng = derive(seed, "batches")
    history = History()
    best, stale = np.inf, 0
    for epoch in range(1, tc.epochs + 1):
        set_mode(True)
        total, seen = 0.0, 0
        for idx in minibatches(len(data), tc.batch_size, rng):
            x, y = data.inputs(idx, kind), data.labels[idx]
            opt.zero_grad()
            try:
                loss = step(idx, x, y, epoch)
                loss.backward()
            except NonFiniteError as exc:
                raise TrainingDivergedError(epoch, str(exc)) from None
            opt.step()
            total += loss.item() * len(idx)
            seen += len(idx)
        mean_loss = total / seen
        if not np.isfinite(mean_loss):
            raise TrainingDivergedError(epoch, "loss is not finite")
        history.rows.append((epoch, mean_loss, None))
        if after_epoch is not None:
            after_epoch(epoch)
        if mean_loss < best - tc.min_delta:
            best, stale = mean_loss, 0
        else:
            stale += 1
            if tc.patience and stale >= tc.patience:
                break
    set_mode(False)
    return history


def _frozen(teacher: ModelGraph, x, taps=()):
    """Teacher forward in eval mode without recording a graph."""
    teacher.eval()
    with no_grad():
        return teacher(x, taps=taps) if taps else teacher(x)


def _single(model: ModelGraph, data, cfg: DistillConfig, step: StepFn, seed: int,
            extra_params=(), after_epoch=None) -> History:
    return fit(list(model.parameters()) + list(extra_params), model.train, data, cfg.train, step,
               seed, model.input_kind, after_epoch)


# -- offline -----------------------------------------------------------------

def train_soft(student, teacher, data, cfg, seed=0, **_):
    def step(idx, x, y, epoch):
        return L.soft_target_loss(student(x), _frozen(teacher, x), y, cfg.T, cfg.alpha).total
    return _single(student, data, cfg, step, seed), {}


def shape_at(model: ModelGraph, name: str) -> tuple:
    """Per-sample output shape of layer ``name``."""
    shape = model.input_shape
    for layer in model.layers[:model.index(name) + 1]:
        shape = layer.out_shape(shape)
    return shape


def make_regressor(student: ModelGraph, teacher: ModelGraph, seed: int = 0) -> Conv2d:
    """1x1 conv mapping student conv2 channels to teacher conv2 channels."""
    return Conv2d("regressor", student["conv2"].cout, teacher["conv2"].cout, 1,
                  derive(seed, "regressor"))


def fitnets_stage1(student, teacher, data, cfg, seed=0, regressor=None) -> tuple[History, Conv2d]:
    """Train the student up to its pooled conv2 output to regress the teacher's."""
    regressor = regressor or make_regressor(student, teacher, seed)
    s_shape, t_shape = shape_at(student, "pool"), shape_at(teacher, "pool")
    if s_shape[1:] != t_shape[1:]:
        raise ValueError(f"hint and guided layers differ spatially: {s_shape} vs {t_shape}; "
                         "a 1x1 regressor cannot fix that")
    stop = student.index("pool")
    params = [p for layer in student.layers[:stop + 1] for p in layer.params().values()]
    params += list(regressor.params().values())

    def step(idx, x, y, epoch):
        hint = _frozen(teacher, x, taps=["pool"])[1]["pool"]
        guided = student.forward(x, stop="pool")
        return L.hint_loss(regressor.forward(guided, True), hint)

    tc = replace(cfg.train, epochs=cfg.hint_epochs, patience=0)
    return fit(params, student.train, data, tc, step, seed, student.input_kind), regressor


def train_fitnets(student, teacher, data, cfg, seed=0, **_):
    hist1, _reg = fitnets_stage1(student, teacher, data, cfg, seed)
    hist2, _ = train_soft(student, teacher, data, cfg, seed)
    return hist2, {"hint_losses": hist1.losses}


AT_TAPS = ("relu1", "relu2")


def train_at(student, teacher, data, cfg, seed=0, **_):
    def step(idx, x, y, epoch):
        z_s, s_taps = student(x, taps=AT_TAPS)
        z_t, t_taps = _frozen(teacher, x, taps=AT_TAPS)
        soft = L.soft_target_loss(z_s, z_t, y, cfg.T, cfg.alpha).total
        at = L.attention_transfer_loss([s_taps[k] for k in AT_TAPS], [t_taps[k] for k in AT_TAPS])
        return soft + at * cfg.lambda_at
    return _single(student, data, cfg, step, seed), {}


def train_cc(student, teacher, data, cfg, seed=0, **_):
    def step(idx, x, y, epoch):
        z_s, s_taps = student(x, taps=["relu3"])
        z_t, t_taps = _frozen(teacher, x, taps=["relu3"])
        soft = L.soft_target_loss(z_s, z_t, y, cfg.T, cfg.alpha).total
        cc = L.correlation_congruence_loss(s_taps["relu3"], t_taps["relu3"], cfg.delta)
        return soft + cc * cfg.cc_weight(len(idx))
    return _single(student, data, cfg, step, seed), {}


def simkd_model(student_arch: ArchSpec, teacher: ModelGraph, seed: int = 0) -> ModelGraph:
    """Student encoder + projector to the teacher's feature width + the teacher's classifier."""
    spec = replace(student_arch, projector=teacher["fc2"].din)
    model = build_model(spec, seed)
    model["fc2"].weight.data = teacher["fc2"].weight.data.copy()
    model["fc2"].bias.data = teacher["fc2"].bias.data.copy()
    model["fc2"].weight.requires_grad = model["fc2"].bias.requires_grad = False
    return model


def train_simkd(student, teacher, data, cfg, seed=0, **_):
    """Only encoder and projector learn; the reused classifier stays frozen."""
    params = [p for layer in student.layers if layer.name != "fc2" for p in layer.params().values()]

    def step(idx, x, y, epoch):
        _, taps = student(x, taps=["proj"])
        f_t = _frozen(teacher, x, taps=["relu3"])[1]["relu3"]
        return L.feature_l2(taps["proj"], f_t)

    return fit(params, student.train, data, cfg.train, step, seed, student.input_kind), {}


def train_camkd(student, teachers, data, cfg, seed=0, **_):
    if len(teachers) < 2:
        raise ValueError(f"CA-MKD needs at least 2 teachers, got {len(teachers)}")
    proj = Linear("proj", student["fc1"].dout, teachers[0]["fc1"].dout, derive(seed, "camkd"))

    def step(idx, x, y, epoch):
        z_s, taps = student(x, taps=["relu3"])
        outs = [_frozen(t, x, taps=["relu3"]) for t in teachers]
        f_s = proj.forward(taps["relu3"], True)
        return L.camkd_loss(z_s, [o[0] for o in outs], y, cfg.T, f_s,
                            [o[1]["relu3"] for o in outs], cfg.lambda_f).total

    return _single(student, data, cfg, step, seed, proj.params().values()), {}


# -- online ------------------------------------------------------------------

def train_dml(spec, data, cfg, seed=0, eval_set=None, **_):
    peers = [build_model(spec, int(derive(seed, "peer", i).integers(2 ** 31)))
             for i in range(cfg.peers)]
    params = [p for m in peers for p in m.parameters()]

    def set_mode(mode):
        for m in peers:
            m.train(mode)

    def step(idx, x, y, epoch):
        parts = L.dml_losses([m(x) for m in peers], y)
        total = parts[0].total
        for p in parts[1:]:
            total = total + p.total
        return total

    hist = fit(params, set_mode, data, cfg.train, step, seed, peers[0].input_kind)
    extra = {}
    if eval_set is not None:
        extra["peer_top1"] = [evaluate(m, eval_set).top1 for m in peers]
    return peers[0].eval(), hist, extra


def _branch_extra(model: MultiBranchModel, eval_set) -> dict:
    if eval_set is None:
        return {}
    return {"branch_top1": [evaluate(model.deploy(i), eval_set).top1 for i in range(model.m)]}


def train_one(spec, data, cfg, seed=0, eval_set=None, **_):
    model = MultiBranchModel(spec, cfg.peers, seed, gate=True)

    def step(idx, x, y, epoch):
        out = model(x)
        return L.one_loss(out.logits, out.gate, y, cfg.T).total

    hist = fit(model.parameters(), model.train, data, cfg.train, step, seed, model.input_kind)
    return model.deploy(0), hist, _branch_extra(model, eval_set)


def train_clilr(spec, data, cfg, seed=0, eval_set=None, **_):
    model = MultiBranchModel(spec, cfg.peers, seed)

    def step(idx, x, y, epoch):
        return L.clilr_loss(model(x).logits, y, cfg.T).total

    hist = fit(model.parameters(), model.train, data, cfg.train, step, seed, model.input_kind)
    return model.deploy(0), hist, _branch_extra(model, eval_set)


def train_okddip(spec, data, cfg, seed=0, eval_set=None, **_):
    """Head 0 is the group leader; heads 1.. are the secondary peers."""
    model = MultiBranchModel(spec, cfg.peers, seed, attention_dim=cfg.attention_dim)

    def step(idx, x, y, epoch):
        out = model(x)
        return L.okddip_loss(out.logits[1:], out.feats[1:], out.logits[0], y, model.wq, model.wk,
                             cfg.T).total

    hist = fit(model.parameters(), model.train, data, cfg.train, step, seed, model.input_kind)
    return model.deploy(0), hist, _branch_extra(model, eval_set)


# -- self ----------------------------------------------------------------------

def train_tfkd(student, data, cfg, seed=0, **_):
    def step(idx, x, y, epoch):
        return L.tfkd_loss(student(x), y, cfg.tfkd_a, cfg.tfkd_T, cfg.tfkd_beta).total
    return _single(student, data, cfg, step, seed), {}


def partner_indices(labels: np.ndarray, idx: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """A uniformly drawn different sample of the same class for each index, or -1."""
    labels = np.asarray(labels)
    out = np.full(len(idx), -1, dtype=np.int64)
    by_class = {c: np.flatnonzero(labels == c) for c in np.unique(labels[idx])}
    for n, i in enumerate(idx):
        pool = by_class[labels[i]]
        if len(pool) < 2:
            continue
        j = pool[rng.integers(len(pool) - 1)]
        out[n] = j if j != i else pool[-1]
    return out


def train_cskd(student, data, cfg, seed=0, **_):
    rng = derive(seed, "cskd")
    warned = []

    def step(idx, x, y, epoch):
        partners = partner_indices(data.labels, idx, rng)
        has = partners >= 0
        if not has.all() and not warned:
            warnings.warn("some classes have a single training sample; those samples use CE only",
                          RuntimeWarning)
            warned.append(True)
        xp = data.inputs(np.where(has, partners, idx), student.input_kind)
        z = student(np.concatenate([x, xp]))
        n = len(idx)
        return L.cskd_loss(z[:n], z[n:], y, has, cfg.T, cfg.lambda_cs).total

    return _single(student, data, cfg, step, seed), {}


def train_pskd(student, data, cfg, seed=0, **_):
    snapshot: list[ModelGraph] = []
    total_epochs = cfg.train.epochs

    def step(idx, x, y, epoch):
        z = student(x)
        alpha_t = L.pskd_alpha(cfg.pskd_alpha, epoch, total_epochs) if snapshot else 0.0
        p_prev = None
        if alpha_t > 0:
            p_prev = F.softmax_t(_frozen(snapshot[0], x)).data
        return L.pskd_loss(z, y, p_prev, alpha_t).total

    def after_epoch(epoch):
        snapshot[:] = [student.copy().eval()]

    return _single(student, data, cfg, step, seed, after_epoch=after_epoch), {}


def random_flips(x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Independent horizontal and vertical flips of each spatial patch (p = 0.5 each)."""
    if x.ndim != 4:
        return x.copy()
    out = x.copy()
    h = rng.random(len(x)) < 0.5
    v = rng.random(len(x)) < 0.5
    out[h] = out[h][:, :, :, ::-1]
    out[v] = out[v][:, :, ::-1, :]
    return out


def train_ddgsd(student, data, cfg, seed=0, distort=None, **_):
    rng = derive(seed, "ddgsd")
    distort = distort or random_flips
    tap = "relu2"

    def step(idx, x, y, epoch):
        v1, v2 = distort(x, rng), distort(x, rng)
        z, taps = student(np.concatenate([v1, v2]), taps=[tap])
        n = len(idx)
        f = taps[tap]
        return L.ddgsd_loss(z[:n], z[n:], f[:n], f[n:], y, cfg.lambda_p, cfg.lambda_f).total

    return _single(student, data, cfg, step, seed), {}


TRAINERS = {
    "soft": train_soft, "fitnets": train_fitnets, "at": train_at, "cc": train_cc,
    "tfkd": train_tfkd, "cskd": train_cskd, "pskd": train_pskd, "ddgsd": train_ddgsd,
}
ONLINE_TRAINERS = {"dml": train_dml, "one": train_one, "clilr": train_clilr,
                   "okddip": train_okddip}


def distill(cfg: DistillConfig, data, arch: ArchSpec | None = None, teacher: ModelGraph | None = None,
            teachers: Sequence[ModelGraph] | None = None, seed: int = 0, eval_set=None) -> DistillResult:
    """Train a student of the configured width with ``cfg.method``.

    Offline methods need a pretrained ``teacher`` (CA-MKD: ``teachers``); online
    and self methods build their networks from ``arch``.
    """
    cfg.validate()
    method = cfg.method
    if method in OFFLINE:
        if method == "camkd":
            if not teachers:
                raise ValueError("camkd needs pretrained teachers")
            teacher = teachers[0]
        if teacher is None:
            raise ValueError(f"method {method!r} needs a pretrained teacher checkpoint")
        arch = teacher.arch
    elif arch is None:
        raise ValueError(f"method {method!r} needs an architecture for its networks")
    spec = student_spec(arch, cfg.ratio)
    if method in ONLINE_TRAINERS:
        student, hist, extra = ONLINE_TRAINERS[method](spec, data, cfg, seed, eval_set=eval_set)
    else:
        student = (simkd_model(spec, teacher, seed) if method == "simkd" else build_model(spec, seed))
        if method == "simkd":
            hist, extra = train_simkd(student, teacher, data, cfg, seed)
        elif method == "camkd":
            hist, extra = train_camkd(student, list(teachers), data, cfg, seed)
        elif method in ("soft", "fitnets", "at", "cc"):
            hist, extra = TRAINERS[method](student, teacher, data, cfg, seed)
        else:
            hist, extra = TRAINERS[method](student, data, cfg, seed)
    student.eval()
    return DistillResult(student, hist, cfg, extra)


def save_student(result: DistillResult, path: str | Path, class_names=None, metrics=None) -> Path:
    """Write the student checkpoint and a ``.distill.json`` sidecar next to it."""
    path = Path(path)
    save_checkpoint(result.student, path, class_names, result.config.to_dict(), metrics)
    sidecar = path.with_suffix(".distill.json")
    result.config.save_json(sidecar)
    return sidecar
