"""Report rows, CSV/markdown rendering and run manifests."""

from __future__ import annotations

import csv
import hashlib
import json
import math
import platform
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

HEADER = ("method", "dataset", "split", "ratio", "top1", "top5", "params", "memory_mb",
          "latency_ms", "seed", "wall_s")
TIMING = ("latency_ms", "wall_s")


@dataclass
class ReportRow:
    method: str
    dataset: str
    split: str
    ratio: int            # 0 for uncompressed networks and quantization
    top1: float
    top5: float
    params: int
    memory_mb: float
    latency_ms: float     # nan when not measured
    seed: int
    wall_s: float

    def __post_init__(self):
        if not 0 <= self.top1 <= self.top5 <= 100:
            raise ValueError(f"need 0 <= top1 <= top5 <= 100, got {self.top1}, {self.top5}")
        if self.params <= 0:
            raise ValueError("params must be > 0")

    def cells(self) -> list[str]:
        out = []
        for name in HEADER:
            v = getattr(self, name)
            out.append(repr(float(v)) if isinstance(v, float) else str(v))
        return out

    def metric_cells(self) -> list[str]:
        """Cells without the timing columns (the deterministic part of a row)."""
        return [c for name, c in zip(HEADER, self.cells()) if name not in TIMING]


_TYPES = {f.name: f.type for f in fields(ReportRow)}


def _parse(name: str, text: str):
    if name in ("ratio", "params", "seed"):
        return int(text)
    if name in ("top1", "top5", "memory_mb", "latency_ms", "wall_s"):
        return float(text)
    return text


def write_csv(rows, path: str | Path) -> Path:
    rows = list(rows)
    if not rows:
        raise ValueError("no rows to write")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HEADER)
        for r in rows:
            w.writerow(r.cells())
    return path


def read_csv(path: str | Path) -> list[ReportRow]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        head = tuple(next(reader))
        if head != HEADER:
            raise ValueError(f"{path}: unexpected header {head}")
        return [ReportRow(**{k: _parse(k, v) for k, v in zip(HEADER, line)}) for line in reader]


FAMILIES = (
    ("Baselines", lambda m: m in ("baseline", "mlp", "cnn1d")),
    ("Scratch", lambda m: m == "scratch"),
    ("Pruning", lambda m: m.startswith("prune.")),
    ("Quantization", lambda m: m.startswith("quant.")),
    ("Offline distillation", lambda m: m in {f"kd.{k}" for k in ("soft", "fitnets", "at", "cc",
                                                                  "simkd", "camkd")}),
    ("Online distillation", lambda m: m in {f"kd.{k}" for k in ("dml", "one", "clilr", "okddip")}),
    ("Self distillation", lambda m: m in {f"kd.{k}" for k in ("tfkd", "cskd", "pskd", "ddgsd")}),
)


def family_of(method: str) -> str:
    for name, match in FAMILIES:
        if match(method.split("@", 1)[0]):
            return name
    return "Other"


def _fmt(v) -> str:
    if isinstance(v, float):
        return "n/a" if math.isnan(v) else f"{v:.2f}"
    return str(v)


def render_markdown(rows, title: str = "Results", reference=None) -> str:
    """Markdown with one block per method family. ``reference(row)`` may return a
    published top-1 shown next to the measured value (None for no entry)."""
    rows = list(rows)
    if not rows:
        raise ValueError("no rows to render")
    cols = ["method", "dataset", "split", "ratio", "top1", "top5", "params", "memory_mb",
            "latency_ms", "seed"]
    if reference:
        cols.insert(5, "ref_top1")
    lines = [f"# {title}", ""]
    groups: dict[str, list] = {}
    for r in rows:
        groups.setdefault(family_of(r.method), []).append(r)
    order = [name for name, _ in FAMILIES] + ["Other"]
    for name in order:
        if name not in groups:
            continue
        lines += [f"## {name}", "", "| " + " | ".join(cols) + " |",
                  "|" + "---|" * len(cols)]
        for r in groups[name]:
            d = asdict(r)
            if reference:
                ref = reference(r)
                d["ref_top1"] = "-" if ref is None else f"{ref:.1f}"
            lines.append("| " + " | ".join(_fmt(d[c]) for c in cols) + " |")
        lines.append("")
    return "\n".join(lines)


def write_markdown(rows, path: str | Path, title: str = "Results", reference=None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render_markdown(rows, title, reference))
    return path


def file_digest(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunManifest:
    config: dict
    artifacts: dict = field(default_factory=dict)   # relative path -> sha256
    tool_version: str = ""
    platform: str = field(default_factory=lambda: f"{platform.platform()} / Python "
                                                   f"{sys.version.split()[0]}")
    extra: dict = field(default_factory=dict)

    def add_artifact(self, path: str | Path, root: str | Path) -> None:
        path = Path(path)
        self.artifacts[str(path.relative_to(root))] = file_digest(path)

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(asdict(self), indent=2, sort_keys=True, default=_jsonable) + "\n")
        return path


def _jsonable(o):
    if hasattr(o, "item"):
        return o.item()
    if isinstance(o, (set, tuple)):
        return list(o)
    return str(o)
