"""Dynamic, static and quantization-aware-trained int8 models."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..autograd import Tensor, no_grad
from ..autograd import functional as F
from ..models import (ArchSpec, BatchNorm, Conv1d, Conv2d, Flatten, Linear, MaxPool, ModelGraph,
                      ReLU, TrainConfig, Unsqueeze, train)
from ..models.checkpoint import CheckpointError, read_container, write_container
from ..autograd.rng import derive
from .fold import fold_batchnorm
from .kernels import int_conv2d, int_linear
from .qparams import (Observer, QParams, compute_qparams, dequantize, fake_quant, quantize,
                      weight_qparams)

MODES = ("dynamic", "static", "qat")
WEIGHTED = (Conv2d, Linear)  # Conv1d subclasses Conv2d


def observation_points(layers) -> dict[str, tuple[str, bool]]:
    """Weighted layer -> (name of the point whose output is observed, unsigned?).

    A weighted layer followed by ReLU is observed after the ReLU (unsigned
    range); otherwise its raw output is observed (signed range).
    """
    points = {}
    for i, layer in enumerate(layers):
        if isinstance(layer, WEIGHTED):
            nxt = layers[i + 1] if i + 1 < len(layers) else None
            if isinstance(nxt, ReLU):
                points[layer.name] = (nxt.name, True)
            else:
                points[layer.name] = (layer.name, False)
    return points


@dataclass
class QStep:
    name: str
    kind: str                          # qconv | qlinear | relu | pool | flatten | unsqueeze | float
    w_q: np.ndarray | None = None      # int8 codes
    w_qp: QParams | None = None
    bias: np.ndarray | None = None     # f32
    out_qp: QParams | None = None      # static / qat requantization target
    window: int = 2
    layer: object = None               # float layer (dynamic mode)
    conv1d: bool = False


class QuantizedModel:
    """Integer inference program produced by one of the three conversions."""

    training = False

    def __init__(self, mode: str, arch: ArchSpec, steps: list[QStep], input_shape: tuple,
                 input_qp: QParams | None = None):
        if mode not in MODES:
            raise ValueError(f"unknown quantization mode {mode!r}")
        self.mode, self.arch, self.steps = mode, arch, steps
        self.input_shape = tuple(input_shape)
        self.input_qp = input_qp

    # interface shared with ModelGraph for evaluation/latency
    @property
    def input_kind(self) -> str:
        return "patch" if len(self.input_shape) == 3 else "spectrum"

    def eval(self):
        return self

    def train(self, mode: bool = True):
        return self

    def __call__(self, x) -> Tensor:
        x = x.data if isinstance(x, Tensor) else np.asarray(x)
        return Tensor(self.forward(x).astype(np.float32))

    # -- accounting ---------------------------------------------------------
    def layer_bytes(self) -> dict[str, int]:
        out = {}
        for s in self.steps:
            if s.kind in ("qconv", "qlinear"):
                out[s.name] = 1
            elif s.kind == "float" and isinstance(s.layer, WEIGHTED):
                out[s.name] = 4
        return out

    def param_counts(self) -> dict[str, int]:
        out = {}
        for s in self.steps:
            if s.kind in ("qconv", "qlinear"):
                out[s.name] = s.w_q.size + s.bias.size
            elif s.kind == "float" and isinstance(s.layer, WEIGHTED):
                out[s.name] = s.layer.weight.size + s.layer.bias.size
        return out

    def memory_mb(self) -> float:
        """Decimal MB: params of each weighted layer times its storage width."""
        counts, widths = self.param_counts(), self.layer_bytes()
        return sum(counts[k] * widths[k] for k in counts) / 1e6

    # -- inference ----------------------------------------------------------
    def forward(self, x: np.ndarray) -> np.ndarray:
        if self.mode == "dynamic":
            return self._forward_dynamic(x)
        return self._forward_static(x)

    def _forward_dynamic(self, x: np.ndarray) -> np.ndarray:
        t = Tensor(np.asarray(x, dtype=np.float32))
        with no_grad():
            for s in self.steps:
                if s.kind == "float":
                    t = s.layer.forward(t, False)
                elif s.kind == "qlinear":
                    a = t.data
                    qp = compute_qparams(float(a.min()), float(a.max()), 8, signed=False)
                    xc = quantize(a, qp) + qp.zero_point
                    acc = int_linear(xc, s.w_q.astype(np.int64) + s.w_qp.zero_point)
                    y = qp.scale * s.w_qp.scale * acc + s.bias
                    t = Tensor(y.astype(np.float32))
                else:
                    raise ValueError(f"unexpected step {s.kind} in dynamic program")
        return t.data

    def _forward_static(self, x: np.ndarray) -> np.ndarray:
        qp = self.input_qp
        xc = quantize(x, qp) + qp.zero_point          # integer levels; real = scale * xc
        scale = qp.scale
        last = None
        for s in self.steps:
            if s.kind in ("qconv", "qlinear"):
                wc = s.w_q.astype(np.int64) + s.w_qp.zero_point
                if s.kind == "qlinear":
                    acc = int_linear(xc, wc)
                    y = scale * s.w_qp.scale * acc + s.bias
                elif s.conv1d:
                    acc = int_conv2d(xc[:, :, None, :], wc[:, :, None, :])[:, :, 0, :]
                    y = scale * s.w_qp.scale * acc + s.bias[:, None]
                else:
                    acc = int_conv2d(xc, wc)
                    y = scale * s.w_qp.scale * acc + s.bias[:, None, None]
                q = quantize(y, s.out_qp)
                xc, scale, last = q + s.out_qp.zero_point, s.out_qp.scale, s.out_qp
            elif s.kind == "relu":
                xc = np.maximum(xc, 0)
            elif s.kind == "pool":
                xc = _int_max_pool(xc, s.window)
            elif s.kind == "flatten":
                xc = xc.reshape(xc.shape[0], -1)
            elif s.kind == "unsqueeze":
                xc = xc.reshape(xc.shape[0], 1, -1)
            else:
                raise ValueError(f"unexpected step {s.kind} in static program")
        return dequantize(xc - last.zero_point, last) if last is not None else xc * scale


def _int_max_pool(x: np.ndarray, w: int) -> np.ndarray:
    if x.ndim == 3:
        n, c, length = x.shape
        lo = length // w
        return x[:, :, :lo * w].reshape(n, c, lo, w).max(axis=3)
    n, c, h, wd = x.shape
    ho, wo = h // w, wd // w
    return x[:, :, :ho * w, :wo * w].reshape(n, c, ho, w, wo, w).max(axis=(3, 5))


def _program(layers, qsteps: dict) -> list[QStep]:
    steps = []
    for layer in layers:
        if layer.name in qsteps:
            steps.append(qsteps[layer.name])
        elif isinstance(layer, ReLU):
            steps.append(QStep(layer.name, "relu"))
        elif isinstance(layer, MaxPool):
            steps.append(QStep(layer.name, "pool", window=layer.window))
        elif isinstance(layer, Flatten):
            steps.append(QStep(layer.name, "flatten"))
        elif isinstance(layer, Unsqueeze):
            steps.append(QStep(layer.name, "unsqueeze"))
        else:
            raise ValueError(f"layer {layer.name} ({layer.kind}) has no integer lowering")
    return steps


def _qweight(layer, out_qp: QParams | None, bits: int = 8) -> QStep:
    w = layer.weight.data
    qp = weight_qparams(w, bits)
    kind = "qlinear" if isinstance(layer, Linear) else "qconv"
    return QStep(layer.name, kind, quantize(w, qp).astype(np.int8), qp,
                 layer.bias.data.astype(np.float32).copy(), out_qp,
                 conv1d=isinstance(layer, Conv1d))


# -- dynamic --------------------------------------------------------------

def dynamic_quantize(model: ModelGraph) -> QuantizedModel:
    """FC weights to int8 now; FC inputs are quantized per batch at run time.
    Convolutions (and their batch norms) stay f32."""
    src = model.copy().eval()
    steps = []
    for layer in src.layers:
        if isinstance(layer, Linear):
            step = _qweight(layer, None)
            steps.append(step)
        else:
            steps.append(QStep(layer.name, "float", layer=layer))
    return QuantizedModel("dynamic", src.arch, steps, src.input_shape)


# -- static ---------------------------------------------------------------

def calibrate(folded: ModelGraph, batches, momentum: float | None = None) -> dict[str, Observer]:
    """Observers for the input and every observation point, fed by ``batches``."""
    points = observation_points(folded.layers)
    observers = {"input": Observer(signed=True, momentum=momentum)}
    for _, (point, unsigned) in points.items():
        observers[point] = Observer(signed=not unsigned, momentum=momentum)
    taps = [p for p, _ in points.values()]
    seen = 0
    folded.eval()
    with no_grad():
        for xb in batches:
            xb = np.asarray(xb, dtype=np.float32)
            observers["input"].update(xb)
            _, out = folded(xb, taps=taps)
            for name in taps:
                observers[name].update(out[name].data)
            seen += 1
    if not seen:
        raise ValueError("static quantization needs at least one calibration batch")
    return observers


def _static_from(folded: ModelGraph, observers: dict[str, Observer], mode: str) -> QuantizedModel:
    points = observation_points(folded.layers)
    qsteps = {name: _qweight(folded[name], observers[point].qparams())
              for name, (point, _) in points.items()}
    steps = _program(folded.layers, qsteps)
    return QuantizedModel(mode, folded.arch, steps, folded.input_shape,
                          observers["input"].qparams())


def calibration_batches(data, n: int = 512, batch_size: int = 128, seed: int = 0, kind="patch"):
    idx = np.sort(derive(seed, "calibration").choice(len(data), size=min(n, len(data)),
                                                     replace=False))
    for i in range(0, len(idx), batch_size):
        yield data.inputs(idx[i:i + batch_size], kind)


def static_quantize(model: ModelGraph, calib_batches) -> QuantizedModel:
    folded = fold_batchnorm(model)
    return _static_from(folded, calibrate(folded, calib_batches), "static")


# -- QAT ------------------------------------------------------------------

class QATModel:
    """Folded graph whose weights and activations pass through fake quantization.

    Weight parameters follow the current weight min/max at every step;
    activation ranges come from EMA observers that update in training mode.
    """

    def __init__(self, model: ModelGraph, calib_batches, momentum: float = 0.99):
        self.graph = fold_batchnorm(model)
        self.observers = calibrate(self.graph, calib_batches)
        for obs in self.observers.values():
            obs.momentum = momentum
        self.points = observation_points(self.graph.layers)
        self.point_of = {p: name for name, (p, _) in self.points.items()}

    def forward(self, x) -> Tensor:
        g = self.graph
        if not isinstance(x, Tensor):
            x = Tensor(np.asarray(x, dtype=np.float32))
        x = self._observe("input", x)
        for layer in g.layers:
            if isinstance(layer, WEIGHTED):
                wq = fake_quant(layer.weight, weight_qparams(layer.weight.data))
                if isinstance(layer, Linear):
                    x = F.linear(x, wq, layer.bias)
                elif isinstance(layer, Conv1d):
                    x = F.conv1d(x, wq, layer.bias)
                else:
                    x = F.conv2d(x, wq, layer.bias)
            else:
                x = layer.forward(x, g.training)
            if layer.name in self.point_of:
                x = self._observe(layer.name, x)
        return x

    __call__ = forward

    def _observe(self, point: str, x: Tensor) -> Tensor:
        obs = self.observers[point]
        if self.graph.training:
            obs.update(x.data)
        return fake_quant(x, obs.qparams())

    def convert(self) -> QuantizedModel:
        return _static_from(self.graph, self.observers, "qat")


def qat_train(model: ModelGraph, data, cfg: TrainConfig, calib_batches, seed: int = 0,
              momentum: float = 0.99) -> tuple[QuantizedModel, QATModel]:
    qat = QATModel(model, calib_batches, momentum)
    if cfg.epochs > 0:
        def loss_fn(graph, x, y, epoch):
            return F.cross_entropy(qat(x), y)
        train(qat.graph, data, cfg, seed=seed, loss_fn=loss_fn)
    qat.graph.eval()
    return qat.convert(), qat


# -- checkpoint -----------------------------------------------------------

def save_quantized(qm: QuantizedModel, path) -> None:
    steps_meta, tensors = [], []
    for s in qm.steps:
        meta = {"name": s.name, "kind": s.kind, "window": s.window, "conv1d": s.conv1d}
        if s.kind in ("qconv", "qlinear"):
            meta["out_qp"] = s.out_qp.to_dict() if s.out_qp else None
            meta["w_qp"] = s.w_qp.to_dict()
            tensors.append(({"name": f"{s.name}.weight", "dtype": "i8", "scale": s.w_qp.scale,
                             "zero_point": s.w_qp.zero_point}, s.w_q))
            tensors.append(({"name": f"{s.name}.bias", "dtype": "f32"}, s.bias))
        elif s.kind == "float":
            meta["layer"] = s.layer.describe()
            for k, t in s.layer.params().items():
                tensors.append(({"name": f"{s.name}.{k}", "dtype": "f32"}, t.data))
            for k, b in s.layer.buffers().items():
                tensors.append(({"name": f"{s.name}.{k}", "dtype": "f32"}, b))
        steps_meta.append(meta)
    manifest = {"format": "quantized", "mode": qm.mode, "arch": qm.arch.to_dict(),
                "input_shape": list(qm.input_shape),
                "input_qp": qm.input_qp.to_dict() if qm.input_qp else None, "steps": steps_meta}
    write_container(path, manifest, tensors)


def _float_layer(name: str, d: dict):
    rng = np.random.default_rng(0)
    kind = d["kind"]
    if kind == "conv2d":
        return Conv2d(name, d["cin"], d["cout"], d["k"], rng)
    if kind == "conv1d":
        return Conv1d(name, d["cin"], d["cout"], d["k"], rng)
    if kind == "batchnorm":
        return BatchNorm(name, d["c"])
    if kind == "linear":
        return Linear(name, d["din"], d["dout"], rng)
    if kind == "relu":
        return ReLU(name)
    if kind == "maxpool":
        return MaxPool(name, d["window"])
    if kind == "flatten":
        return Flatten(name)
    if kind == "unsqueeze":
        return Unsqueeze(name)
    raise CheckpointError(f"unknown layer kind {kind!r}")


def load_quantized(path) -> QuantizedModel:
    manifest, tensors = read_container(path)
    if manifest.get("format") != "quantized":
        raise CheckpointError(f"expected a quantized checkpoint, got {manifest.get('format')!r}")
    by_name = {e["name"]: (e, arr) for e, arr in tensors}
    steps = []
    for m in manifest["steps"]:
        s = QStep(m["name"], m["kind"], window=m["window"], conv1d=m["conv1d"])
        if s.kind in ("qconv", "qlinear"):
            e, w = by_name[f"{s.name}.weight"]
            s.w_q = w.astype(np.int8)
            s.w_qp = QParams.from_dict(m["w_qp"])
            if (e["scale"], e["zero_point"]) != (s.w_qp.scale, s.w_qp.zero_point):
                raise CheckpointError(f"{s.name}: weight quantization parameters disagree")
            s.bias = by_name[f"{s.name}.bias"][1]
            s.out_qp = QParams.from_dict(m["out_qp"]) if m.get("out_qp") else None
        elif s.kind == "float":
            layer = _float_layer(s.name, m["layer"])
            for k, t in layer.params().items():
                t.data = by_name[f"{s.name}.{k}"][1]
            for k in layer.buffers():
                setattr(layer, k, by_name[f"{s.name}.{k}"][1].copy())
            s.layer = layer
        steps.append(s)
    iq = manifest.get("input_qp")
    return QuantizedModel(manifest["mode"], ArchSpec.from_dict(manifest["arch"]), steps,
                          tuple(manifest["input_shape"]), QParams.from_dict(iq) if iq else None)


def quantize_model(model: ModelGraph, mode: str, calib_batches=None, data=None,
                   cfg: TrainConfig | None = None, seed: int = 0) -> QuantizedModel:
    """Single entry point for the three modes."""
    if mode == "dynamic":
        return dynamic_quantize(model)
    if mode == "static":
        if calib_batches is None:
            raise ValueError("static quantization needs calibration data")
        return static_quantize(model, calib_batches)
    if mode == "qat":
        if data is None or cfg is None or calib_batches is None:
            raise ValueError("QAT needs training data, a training config and calibration data")
        return qat_train(model, data, cfg, calib_batches, seed)[0]
    raise ValueError(f"unknown quantization mode {mode!r}; expected one of {MODES}")


__all__ = ["MODES", "QATModel", "QStep", "QuantizedModel", "calibrate", "calibration_batches",
           "dynamic_quantize", "load_quantized", "observation_points", "qat_train",
           "quantize_model", "save_quantized", "static_quantize"]
