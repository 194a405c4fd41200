"""Architecture specs, model construction and size accounting."""

from __future__ import annotations

from dataclasses import asdict, dataclass, replace


from ..autograd.rng import derive
from .graph import ModelGraph
from .layers import BatchNorm, Conv1d, Conv2d, Flatten, Linear, MaxPool, ReLU, Unsqueeze

KINDS = ("mlp", "cnn1d", "cnn2d")


@dataclass(frozen=True)
class ArchSpec:
    kind: str = "cnn2d"
    in_channels: int = 40          # PCA channels (cnn2d) or spectrum length (mlp, cnn1d)
    f1: int = 50
    f2: int = 100
    kernels: tuple = (5, 5)
    hidden: int = 100
    classes: int = 16
    patch: int = 19
    pool: int = 2
    projector: int = 0             # >0 inserts a linear "proj" (hidden -> projector) before fc2

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}; expected one of {KINDS}")
        for field in ("in_channels", "f1", "f2", "hidden", "classes", "patch", "pool"):
            if getattr(self, field) < 1:
                raise ValueError(f"ArchSpec.{field} must be >= 1, got {getattr(self, field)}")
        if self.projector < 0:
            raise ValueError("ArchSpec.projector must be >= 0")
        if any(k < 1 for k in self.kernels):
            raise ValueError("kernel sizes must be >= 1")
        object.__setattr__(self, "kernels", tuple(self.kernels))
        if self.fc1_in < 1:
            raise ValueError(f"input of size {self.patch if self.kind == 'cnn2d' else self.in_channels}"
                             " is too small for the kernels and pooling of this architecture")

    def with_widths(self, f1: int, f2: int, hidden: int) -> "ArchSpec":
        return replace(self, f1=f1, f2=f2, hidden=hidden)

    @property
    def head_in(self) -> int:
        return self.projector or self.hidden

    @property
    def fc1_in(self) -> int:
        if self.kind == "cnn2d":
            side = (self.patch - self.kernels[0] - self.kernels[1] + 2) // self.pool
            return self.f2 * side * side
        if self.kind == "cnn1d":
            length = (self.in_channels - self.kernels[0] + 1) // self.pool
            return self.f2 * ((length - self.kernels[1] + 1) // self.pool)
        return self.in_channels

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kernels"] = list(self.kernels)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ArchSpec":
        return cls(**{**d, "kernels": tuple(d.get("kernels", (5, 5)))})


def cnn2d_spec(classes: int = 16, in_channels: int = 40, patch: int = 19) -> ArchSpec:
    return ArchSpec("cnn2d", in_channels=in_channels, classes=classes, patch=patch)


def cnn1d_spec(classes: int = 16, length: int = 40) -> ArchSpec:
    return ArchSpec("cnn1d", in_channels=length, f1=20, f2=40, kernels=(11, 5), hidden=100,
                    classes=classes, patch=1)


def mlp_spec(classes: int = 16, dim: int = 40) -> ArchSpec:
    return ArchSpec("mlp", in_channels=dim, hidden=256, classes=classes, patch=1)


def default_spec(kind: str, classes: int, in_channels: int = 40, patch: int = 19) -> ArchSpec:
    if kind == "cnn2d":
        return cnn2d_spec(classes, in_channels, patch)
    if kind == "cnn1d":
        return cnn1d_spec(classes, in_channels)
    if kind == "mlp":
        return mlp_spec(classes, in_channels)
    raise ValueError(f"unknown model kind {kind!r}")


def build_model(spec: ArchSpec, seed: int = 0) -> ModelGraph:
    """Build the layer list for ``spec``; shape composition is checked here."""
    rng = derive(seed, "init")
    s = spec
    if s.kind == "cnn2d":
        layers = [
            Conv2d("conv1", s.in_channels, s.f1, s.kernels[0], rng), BatchNorm("bn1", s.f1),
            ReLU("relu1"),
            Conv2d("conv2", s.f1, s.f2, s.kernels[1], rng), BatchNorm("bn2", s.f2), ReLU("relu2"),
            MaxPool("pool", s.pool), Flatten("flatten"),
            Linear("fc1", s.fc1_in, s.hidden, rng), ReLU("relu3"),
        ]
        shape = (s.in_channels, s.patch, s.patch)
    elif s.kind == "cnn1d":
        layers = [
            Unsqueeze("unsqueeze"),
            Conv1d("conv1", 1, s.f1, s.kernels[0], rng), ReLU("relu1"), MaxPool("pool1", s.pool),
            Conv1d("conv2", s.f1, s.f2, s.kernels[1], rng), ReLU("relu2"), MaxPool("pool", s.pool),
            Flatten("flatten"),
            Linear("fc1", s.fc1_in, s.hidden, rng), ReLU("relu3"),
        ]
        shape = (s.in_channels,)
    else:
        layers = [Linear("fc1", s.in_channels, s.hidden, rng), ReLU("relu3")]
        shape = (s.in_channels,)
    if s.projector:
        layers.append(Linear("proj", s.hidden, s.projector, rng))
    layers.append(Linear("fc2", s.head_in, s.classes, rng))
    try:
        return ModelGraph(layers, shape, arch=spec)
    except ValueError as exc:
        raise ValueError(f"cannot build {spec}: {exc}") from None


@dataclass
class ParamCount:
    per_layer: dict          # conv / linear layers: weights + biases
    batchnorm: int           # BN affine parameters, reported separately
    total: int               # headline total (excludes BN)

    def rows(self) -> list[tuple[str, int]]:
        return list(self.per_layer.items()) + [("total", self.total), ("batchnorm", self.batchnorm)]


def count_params(model: ModelGraph) -> ParamCount:
    per_layer, bn = {}, 0
    for layer in model.layers:
        n = sum(t.size for t in layer.params().values())
        if layer.has_weights:
            per_layer[layer.name] = n
        else:
            bn += n
    return ParamCount(per_layer, bn, sum(per_layer.values()))


def closed_form_params(spec: ArchSpec) -> dict:
    """Independent arithmetic for the headline counts: c_in*c_out*k^d + c_out."""
    counts = _closed_form_body(spec)
    if spec.projector:
        counts["proj"] = spec.hidden * spec.projector + spec.projector
        counts["fc2"] = spec.projector * spec.classes + spec.classes
    return counts


def _closed_form_body(spec: ArchSpec) -> dict:
    if spec.kind == "cnn2d":
        k1, k2 = spec.kernels
        return {"conv1": spec.in_channels * spec.f1 * k1 * k1 + spec.f1,
                "conv2": spec.f1 * spec.f2 * k2 * k2 + spec.f2,
                "fc1": spec.fc1_in * spec.hidden + spec.hidden,
                "fc2": spec.hidden * spec.classes + spec.classes}
    if spec.kind == "cnn1d":
        k1, k2 = spec.kernels
        return {"conv1": spec.f1 * k1 + spec.f1, "conv2": spec.f1 * spec.f2 * k2 + spec.f2,
                "fc1": spec.fc1_in * spec.hidden + spec.hidden,
                "fc2": spec.hidden * spec.classes + spec.classes}
    return {"fc1": spec.in_channels * spec.hidden + spec.hidden,
            "fc2": spec.hidden * spec.classes + spec.classes}


def bytes_map(model: ModelGraph, default: int = 4, **overrides: int) -> dict[str, int]:
    """Bytes per stored weight for every weighted layer."""
    return {name: overrides.get(name, default) for name in count_params(model).per_layer}


def estimate_memory(model: ModelGraph, dtype_map: dict[str, int] | None = None) -> float:
    """Decimal megabytes: sum over weighted layers of params * bytes / 1e6."""
    counts = count_params(model).per_layer
    dtype_map = bytes_map(model) if dtype_map is None else dtype_map
    missing = [name for name in counts if name not in dtype_map]
    if missing:
        raise ValueError(f"dtype map lacks layers {missing}")
    return sum(n * dtype_map[name] for name, n in counts.items()) / 1e6
