"""Config-driven experiment execution: data, method pipeline, metrics, artifacts."""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from .. import __version__
from ..data import (PROFILES, HsiDataset, PreprocessConfig, Prepared, SplitMask, SyntheticConfig,
                    load_cube, make_synthetic_scene, prepare)
from ..distill import distill, save_student
from ..models import (ArchSpec, ModelGraph, build_model, count_params, default_spec,
                      estimate_memory, evaluate, load_checkpoint, save_checkpoint, train)
from ..models.train import History, topk_metrics
from ..pruning import PruneConfig, prune_and_finetune
from ..pruning.surgery import resolve_target
from ..quantization import QuantizedModel, calibration_batches, quantize_model, save_quantized
from .config import ConfigError, ExperimentConfig
from .latency import LatencyStats, measure_latency
from .report import ReportRow, RunManifest, write_csv

DEFAULT_PROFILE = {"train_fraction": 0.55, "lr": 1e-3, "remove": None}


@dataclass
class DataBundle:
    dataset: HsiDataset
    prepared: Prepared
    profile: dict

    @property
    def name(self) -> str:
        return self.dataset.name


def load_dataset(cfg: ExperimentConfig) -> HsiDataset:
    """Resolve ``cfg.dataset``: "synthetic", a header path, or a name under the data dir."""
    if cfg.dataset == "synthetic":
        try:
            return make_synthetic_scene(SyntheticConfig(**cfg.synthetic))
        except TypeError as exc:
            raise ConfigError(f"synthetic: {exc}") from None
    path = Path(cfg.dataset)
    if path.suffix != ".hsij":
        root = cfg.resolved_data_dir()
        if root is None:
            raise FileNotFoundError(f"dataset {cfg.dataset!r}: no data_dir and HSIB_DATA_DIR unset")
        path = root / f"{cfg.dataset}.hsij"
    if not path.is_file():
        raise FileNotFoundError(f"dataset container not found: {path}")
    return load_cube(path)


def dataset_profile(name: str) -> dict:
    p = PROFILES.get(name)
    if p is None:
        return dict(DEFAULT_PROFILE)
    return {"train_fraction": p.train_fraction, "lr": p.lr, "remove": p.remove}


def preprocess_config(cfg: ExperimentConfig, profile: dict) -> PreprocessConfig:
    remove = profile["remove"] if cfg.remove_bands == "auto" else cfg.remove_bands
    return PreprocessConfig(
        remove_bands=remove, pca_components=cfg.pca_components, fit_on=cfg.fit_on,
        patch_size=cfg.patch_size, split="random" if cfg.split == "random" else "disjoint",
        train_fraction=cfg.train_fraction or profile["train_fraction"], split_seed=cfg.split_seed)


def load_data(cfg: ExperimentConfig) -> DataBundle:
    ds = load_dataset(cfg)
    profile = dataset_profile(ds.name)
    if cfg.split == "mask":
        codes = np.load(cfg.mask_path)
        ds = replace(ds, mask=SplitMask(codes, kind="file"))
    return DataBundle(ds, prepare(ds, preprocess_config(cfg, profile)), profile)


def model_spec(cfg: ExperimentConfig, data: DataBundle) -> ArchSpec:
    p = data.prepared
    return default_spec(cfg.model, p.classes, p.info["channels"], cfg.patch_size)


def _with_lr(tc, overrides: dict, lr: float):
    return tc if "lr" in overrides else replace(tc, lr=lr)


def method_label(cfg: ExperimentConfig) -> str:
    """Row id: model name for non-CNN2D baselines, strategy suffix for II/III pruning."""
    if cfg.method == "baseline" and cfg.model != "cnn2d":
        return cfg.model
    if cfg.family == "prune" and cfg.strategy != "I":
        return f"{cfg.method}@{cfg.strategy}"
    return cfg.method


def model_size(model) -> tuple[int, float]:
    if isinstance(model, QuantizedModel):
        return sum(model.param_counts().values()), model.memory_mb()
    return count_params(model).total, estimate_memory(model)


def evaluate_any(model, data) -> tuple[float, float]:
    if isinstance(model, QuantizedModel):
        kind = model.input_kind
        logits = np.concatenate([model.forward(data.inputs(np.arange(i, min(i + 256, len(data))),
                                                           kind))
                                 for i in range(0, len(data), 256)])
        r = topk_metrics(logits, data.labels, logits.shape[1])
    else:
        r = evaluate(model, data)
    return r.top1, r.top5


def probe_inputs(model, data: DataBundle, n: int) -> np.ndarray:
    test = data.prepared.test
    idx = np.arange(min(n, len(test)))
    return test.inputs(idx, model.input_kind)


def latency(model, data: DataBundle, cfg: ExperimentConfig) -> LatencyStats | None:
    if not cfg.latency_reps:
        return None
    return measure_latency(model, probe_inputs(model, data, cfg.latency_probe), cfg.latency_reps)


class Experiment:
    """One configured run; ``run`` returns its report rows and writes artifacts."""

    def __init__(self, cfg: ExperimentConfig, out_dir: str | Path | None = None):
        cfg.validate()
        self.cfg = cfg
        self.out = Path(out_dir or cfg.out_dir)
        self.manifest = RunManifest(cfg.to_dict(), tool_version=__version__)
        self.history = History()

    # -- sources ------------------------------------------------------------
    def train_config(self, data: DataBundle):
        return _with_lr(self.cfg.train_config(), self.cfg.train, data.profile["lr"])

    def finetune_config(self, data: DataBundle):
        return _with_lr(self.cfg.finetune_config(), self.cfg.finetune, data.profile["lr"])

    def train_base(self, data: DataBundle, spec: ArchSpec, seed: int) -> ModelGraph:
        model = build_model(spec, seed)
        self.history = train(model, data.prepared.train, self.train_config(data), seed=seed)
        return model

    def source(self, data: DataBundle, spec: ArchSpec) -> ModelGraph:
        """Pretrained network for pruning, quantization and offline KD."""
        classes = data.prepared.classes
        if self.cfg.base_checkpoint:
            path = Path(self.cfg.base_checkpoint)
            if not path.is_file():
                raise FileNotFoundError(f"base_checkpoint not found: {path}")
            return load_checkpoint(path, expected_classes=classes)
        model = self.train_base(data, spec, self.cfg.seed)
        self._save_float(model, "teacher.ckpt", data)
        return model

    def teachers(self, data: DataBundle, spec: ArchSpec) -> list[ModelGraph]:
        classes = data.prepared.classes
        if self.cfg.teacher_checkpoints:
            out = []
            for p in self.cfg.teacher_checkpoints:
                if not Path(p).is_file():
                    raise FileNotFoundError(f"teacher checkpoint not found: {p}")
                out.append(load_checkpoint(p, expected_classes=classes))
            return out
        m = self.cfg.distill_config().teachers
        out = []
        for k in range(1, m + 1):
            t = self.train_base(data, spec, self.cfg.seed + k)
            self._save_float(t, f"teacher{k}.ckpt", data)
            out.append(t)
        return out

    # -- artifacts ----------------------------------------------------------
    def _save_float(self, model: ModelGraph, name: str, data: DataBundle, metrics=None) -> Path:
        path = self.out / name
        save_checkpoint(model, path, data.dataset.class_names, self.cfg.to_dict(), metrics)
        return path

    # -- pipeline -----------------------------------------------------------
    def build(self, data: DataBundle):
        cfg = self.cfg
        spec = model_spec(cfg, data)
        train_set = data.prepared.train
        fam = cfg.family
        if fam == "baseline":
            return self.train_base(data, spec, cfg.seed), {}
        if fam == "scratch":
            t = resolve_target(cfg.ratio)
            return self.train_base(data, spec.with_widths(t.f1, t.f2, t.hidden), cfg.seed), {}
        if fam == "prune":
            base = self.source(data, spec)
            pcfg = PruneConfig(method=cfg.variant, ratio=cfg.ratio, strategy=cfg.strategy,
                               finetune=self.finetune_config(data), **cfg.prune)
            model, report = prune_and_finetune(base, train_set, pcfg, seed=cfg.seed)
            return model, {"prune_report": asdict(report)}
        if fam == "quant":
            base = self.source(data, spec)
            kind = base.input_kind
            calib = list(calibration_batches(train_set, cfg.calib_samples, seed=cfg.seed,
                                             kind=kind))
            qm = quantize_model(base, cfg.variant, calib, train_set, self.finetune_config(data),
                                seed=cfg.seed)
            return qm, {"source_top1": evaluate_any(base, data.prepared.test)[0]}
        if fam == "kd":
            dcfg = replace(cfg.distill_config(), train=self.finetune_config(data))
            teacher = teachers = None
            if dcfg.method == "camkd":
                teachers = self.teachers(data, spec)
            elif dcfg.method in ("soft", "fitnets", "at", "cc", "simkd"):
                teacher = self.source(data, spec)
            result = distill(dcfg, train_set, arch=spec, teacher=teacher, teachers=teachers,
                             seed=cfg.seed)
            self.history = result.history
            self._distill_result = result
            return result.student, {k: v for k, v in result.extra.items()
                                    if isinstance(v, (int, float, str, list, dict))}
        raise ConfigError(f"method: unknown {cfg.method!r}")

    def run(self, data: DataBundle | None = None) -> list[ReportRow]:
        t0 = time.perf_counter()
        cfg = self.cfg
        data = data or load_data(cfg)
        self.out.mkdir(parents=True, exist_ok=True)
        model, extra = self.build(data)
        top1, top5 = evaluate_any(model, data.prepared.test)
        params, memory = model_size(model)
        lat = latency(model, data, cfg)
        ratio = cfg.ratio if cfg.family in ("scratch", "prune", "kd") else 0
        row = ReportRow(method_label(cfg), data.name, data.prepared.mask.kind, ratio, top1, top5,
                        params, memory, lat.median_ms if lat else math.nan, cfg.seed,
                        time.perf_counter() - t0)
        metrics = {"top1": top1, "top5": top5}
        if isinstance(model, QuantizedModel):
            ckpt = self.out / "model.qckpt"
            save_quantized(model, ckpt)
        elif cfg.family == "kd":
            ckpt = self.out / "model.ckpt"
            sidecar = save_student(self._distill_result, ckpt, data.dataset.class_names, metrics)
            self.manifest.add_artifact(sidecar, self.out)
        else:
            ckpt = self._save_float(model, "model.ckpt", data, metrics)
        self.history.to_csv(self.out / "history.csv")
        rows_path = write_csv([row], self.out / "rows.csv")
        for p in sorted(self.out.glob("*.ckpt")) + [ckpt, self.out / "history.csv", rows_path]:
            self.manifest.add_artifact(p, self.out)
        self.manifest.extra = {
            "data": data.prepared.info, "checkpoint": ckpt.name, **extra,
            "latency": None if lat is None else {"median_ms": lat.median_ms, "q1_ms": lat.q1_ms,
                                                 "q3_ms": lat.q3_ms, "iqr_ms": lat.iqr_ms,
                                                 "reps": lat.reps},
        }
        self.manifest.save(self.out / "manifest.json")
        return [row]


def run_experiment(cfg: ExperimentConfig, out_dir: str | Path | None = None,
                   data: DataBundle | None = None) -> list[ReportRow]:
    return Experiment(cfg, out_dir).run(data)


def load_any(path: str | Path):
    """Float or quantized checkpoint, decided by the container manifest."""
    from ..models import read_container
    from ..quantization import load_quantized
    manifest, _ = read_container(path)
    if manifest.get("format") == "quantized":
        return load_quantized(path)
    return load_checkpoint(path)


def manifest_of(path: str | Path) -> dict:
    return json.loads(Path(path).read_text())
