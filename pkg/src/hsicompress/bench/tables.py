"""Per-table experiment matrices and the training-free size tables."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from ..distill.config import METHODS as KD_METHODS
from ..models import build_model, closed_form_params, cnn2d_spec, count_params
from ..pruning.pipeline import METHODS as PRUNE_METHODS
from ..pruning.pipeline import STRATEGIES
from ..pruning.surgery import TARGETS
from ..quantization import MODES as QUANT_MODES
from .config import ExperimentConfig
from .reference import ACC_COLUMNS, ACCURACY, BASELINES, FILTER_TABLE, LAYER_TABLE, QUANTIZATION, \
    STRATEGY, TABLE_TITLES
from .report import ReportRow, render_markdown, write_csv
from .runner import run_experiment

TABLES = (2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12)
STATIC_TABLES = (3, 4)
DATASETS = ("indian_pines", "pavia_university")
CELL_SPLITS = ("disjoint", "random")
LAYERS = ("conv1", "conv2", "fc1", "fc2")
PRUNE_TABLE = {5: 90, 6: 95, 7: 98}
KD_TABLE = {10: 90, 11: 95, 12: 98}


# -- training-free tables -------------------------------------------------
@dataclass
class SizeRow:
    network: str
    per_layer: dict
    total: int
    memory_mb: float
    closed_form: dict


def size_rows(classes: int = 16, in_channels: int = 40, patch: int = 19) -> list[SizeRow]:
    """Parameter counts of the full and pruned CNN2D, counted on built graphs."""
    full = cnn2d_spec(classes, in_channels, patch)
    specs = [("cnn2d", full)] + [(f"{r}%", full.with_widths(t.f1, t.f2, t.hidden))
                                 for r, t in sorted(TARGETS.items())]
    rows = []
    for name, spec in specs:
        counts = count_params(build_model(spec))
        rows.append(SizeRow(name, dict(counts.per_layer), counts.total, counts.total * 4 / 1e6,
                            closed_form_params(spec)))
    return rows


def table3(classes: int = 16) -> str:
    lines = [f"# Table 3: {TABLE_TITLES[3]} ({classes} classes)", "",
             "| network | conv1 | conv2 | fc1 | fc2 | total | memory_mb | published total "
             "| published memory_mb |", "|---|---|---|---|---|---|---|---|---|"]
    for r in size_rows(classes):
        if r.per_layer != r.closed_form:
            raise AssertionError(f"{r.network}: graph counts {r.per_layer} != closed form "
                                 f"{r.closed_form}")
        key = "cnn2d" if r.network == "cnn2d" else int(r.network[:-1])
        ref = LAYER_TABLE[key]
        cells = [r.network] + [f"{r.per_layer[k]:,}" for k in LAYERS] + [
            f"{r.total:,}", f"{r.memory_mb:.2f}", f"{ref['total']:,}", f"{ref['memory_mb']:.2f}"]
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def filter_rows(classes: int = 16) -> list[tuple]:
    full = cnn2d_spec(classes)
    out = [("cnn2d", full.f1, full.f2, full.fc1_in, full.hidden)]
    for r, t in sorted(TARGETS.items()):
        spec = full.with_widths(t.f1, t.f2, t.hidden)
        model = build_model(spec)
        out.append((f"{r}%", model["conv1"].cout, model["conv2"].cout, model["fc1"].din,
                    model["fc1"].dout))
    return out


def table4(classes: int = 16) -> str:
    lines = [f"# Table 4: {TABLE_TITLES[4]}", "",
             "| network | conv1 filters | conv2 filters | fc1 inputs | fc1 neurons | published |",
             "|---|---|---|---|---|---|"]
    for row in filter_rows(classes):
        key = "cnn2d" if row[0] == "cnn2d" else int(row[0][:-1])
        lines.append("| " + " | ".join(str(c) for c in row) + " | "
                     + ", ".join(str(c) for c in FILTER_TABLE[key]) + " |")
    return "\n".join(lines) + "\n"


# -- experiment matrices --------------------------------------------------
def table_methods(n: int) -> list[dict]:
    """Config overrides for every row of table ``n`` within one dataset/split cell."""
    baselines = [{"method": "baseline", "model": m} for m in ("mlp", "cnn1d", "cnn2d")]
    if n == 2:
        return baselines
    if n in PRUNE_TABLE:
        r = PRUNE_TABLE[n]
        return baselines + [{"method": "scratch", "ratio": r}] + [
            {"method": f"prune.{m}", "ratio": r, "strategy": "I"} for m in PRUNE_METHODS]
    if n == 8:
        return [{"method": "prune.l1", "ratio": r, "strategy": s}
                for r in sorted(TARGETS) for s in STRATEGIES]
    if n == 9:
        return baselines + [{"method": f"quant.{m}"} for m in QUANT_MODES]
    if n in KD_TABLE:
        r = KD_TABLE[n]
        return baselines + [{"method": "scratch", "ratio": r}] + [
            {"method": f"kd.{m}", "ratio": r} for m in KD_METHODS]
    raise ValueError(f"table {n} has no experiment matrix; expected one of "
                     f"{[t for t in TABLES if t not in STATIC_TABLES]}")


def _column(dataset: str, split: str, metric: str = "top1") -> int:
    ds = "ip" if dataset == "indian_pines" else "up"
    return ACC_COLUMNS.index(f"{ds}_{split}_{metric}")


def published_top1(n: int, row: ReportRow) -> float | None:
    if row.dataset not in DATASETS or row.split not in ("disjoint", "random", "file"):
        return None
    split = "disjoint" if row.split == "file" else row.split
    col = _column(row.dataset, split)
    method = row.method
    if n == 2:
        key = "cnn2d" if method == "baseline" else method
        entry = BASELINES.get(key)
        return None if entry is None else entry[1 + col // 2]
    if n == 8:
        base, _, strat = method.partition("@")
        entry = STRATEGY.get((row.ratio, strat or "I"))
        return None if entry is None else entry[col]
    if n == 9:
        entry = QUANTIZATION.get(method)
        return None if entry is None else entry[2 + col // 2]
    entry = ACCURACY.get(n, {}).get(method)
    return None if entry is None else entry[col]


def _run(args) -> list[ReportRow]:
    cfg, out = args
    return run_experiment(cfg, out)


def run_all(jobs, parallel: int = 1) -> list[ReportRow]:
    """Run ``(config, out_dir)`` jobs; each job owns its seed and directory."""
    jobs = list(jobs)
    if parallel <= 1 or len(jobs) <= 1:
        return [row for job in jobs for row in _run(job)]
    with ProcessPoolExecutor(max_workers=parallel) as pool:
        return [row for rows in pool.map(_run, jobs) for row in rows]


def reproduce_table(n: int, base: ExperimentConfig | None = None, out_dir: str | Path = "runs",
                    seeds=(0,), parallel: int = 1, datasets=DATASETS, splits=CELL_SPLITS
                    ) -> tuple[str, list[ReportRow]]:
    """Markdown text and measured rows for table ``n``.

    Tables 3 and 4 are computed from the architecture alone. The others run the
    method matrix on every dataset/split cell at the training scale of ``base``;
    networks that need a trained source reuse the cell's CNN2D baseline checkpoint.
    """
    if n == 3:
        return table3(), []
    if n == 4:
        return table4(), []
    if n not in TABLES:
        raise ValueError(f"unknown table {n}; expected one of {TABLES}")
    base = base or ExperimentConfig()
    out = Path(out_dir) / f"table{n}"
    methods = table_methods(n)
    needs_source = any(m["method"].split(".")[0] in ("prune", "quant") or
                       m["method"] in ("kd.soft", "kd.fitnets", "kd.at", "kd.cc", "kd.simkd")
                       for m in methods)
    cells = [(ds, sp, seed) for ds in datasets for sp in splits for seed in seeds]

    def cfg_for(ds, sp, seed, over, tag):
        d = {**base.to_dict(), "dataset": ds, "split": sp, "seed": seed, **over,
             "out_dir": str(out / ds / sp / f"seed{seed}" / tag)}
        return ExperimentConfig.from_dict(d)

    def tag_of(over):
        t = over.get("model", "cnn2d") if over["method"] == "baseline" else over["method"]
        return "_".join(str(x) for x in (t, over.get("ratio", ""), over.get("strategy", "")) if x)

    rows: list[ReportRow] = []
    source = {}
    if needs_source:
        jobs = []
        for ds, sp, seed in cells:
            cfg = cfg_for(ds, sp, seed, {"method": "baseline", "model": "cnn2d"}, "source")
            jobs.append((cfg, cfg.out_dir))
            source[(ds, sp, seed)] = str(Path(cfg.out_dir) / "model.ckpt")
        run_all(jobs, parallel)
    jobs = []
    for ds, sp, seed in cells:
        for over in methods:
            over = dict(over)
            if over["method"].startswith(("prune.", "quant.")) or over["method"] in (
                    "kd.soft", "kd.fitnets", "kd.at", "kd.cc", "kd.simkd"):
                over["base_checkpoint"] = source[(ds, sp, seed)]
            if over["method"] == "kd.camkd":
                over["train_teacher"] = True
            cfg = cfg_for(ds, sp, seed, over, tag_of(over))
            jobs.append((cfg, cfg.out_dir))
    rows = run_all(jobs, parallel)
    write_csv(rows, out / "rows.csv")
    text = render_markdown(rows, f"Table {n}: {TABLE_TITLES[n]}",
                           reference=lambda r: published_top1(n, r))
    (out / "table.md").write_text(text)
    return text, rows
