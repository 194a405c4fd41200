"""Command-line entry point.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from .. import __version__
from ..data import load_cube
from .config import ConfigError, ExperimentConfig, load_config
from .latency import measure_latency
from .report import ReportRow, read_csv, write_csv, write_markdown
from .runner import evaluate_any, load_any, load_data, method_label, model_size, run_experiment
from .tables import TABLES, reproduce_table

FAMILY_COMMANDS = {"train": ("baseline", "scratch"), "prune": ("prune",), "quantize": ("quant",),
                   "distill": ("kd",)}


def _global_flags(p: argparse.ArgumentParser, top: bool) -> None:
    # defaults live on the top-level parser only so flags work before or after the subcommand
    d = (lambda v: v) if top else (lambda v: argparse.SUPPRESS)
    p.add_argument("--config", action="append", default=d(None),
                   help="experiment JSON (repeatable for train/prune/quantize/distill)")
    p.add_argument("--seed", type=int, default=d(None), help="override the config seed")
    p.add_argument("--out", default=d(None), help="output directory")
    p.add_argument("--threads", type=int, default=d(1), help="BLAS threads (default 1)")
    p.add_argument("--parallel-experiments", type=int, default=d(1), metavar="N",
                   help="run up to N independent configs concurrently")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hsicompress",
                                description="Compression benchmarks for hyperspectral classifiers")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _global_flags(p, top=True)
    sub = p.add_subparsers(dest="command", required=True, metavar="command")

    def cmd(name, help_):
        s = sub.add_parser(name, help=help_)
        _global_flags(s, top=False)
        return s

    s = cmd("ingest-check", "validate a dataset container")
    s.add_argument("header", help="path to the .hsij header")
    cmd("preprocess", "clean, standardize and project a scene; cache its patches")
    for name, help_ in (("train", "train a baseline or scratch network"),
                        ("prune", "prune and fine-tune a trained network"),
                        ("quantize", "quantize a trained network"),
                        ("distill", "train a student by knowledge distillation")):
        cmd(name, help_)
    s = cmd("evaluate", "top-1/top-5 of a saved checkpoint on the configured test split")
    s.add_argument("checkpoint")
    s = cmd("bench-latency", "single-sample latency of a saved checkpoint")
    s.add_argument("checkpoint")
    s.add_argument("--reps", type=int, default=30)
    s.add_argument("--probe", type=int, default=100)
    s = cmd("report", "merge rows.csv files into CSV and markdown reports")
    s.add_argument("rows", nargs="+", help="rows.csv files")
    s.add_argument("--title", default="Results")
    s = cmd("reproduce-table", "run the matrix behind one results table")
    s.add_argument("table", type=int, choices=TABLES)
    s.add_argument("--seeds", type=int, nargs="+", default=None)
    return p


def _configs(args, required: bool = True) -> list[ExperimentConfig]:
    paths = args.config or []
    if required and not paths:
        raise ConfigError("--config is required for this command")
    cfgs = [load_config(p) for p in paths]
    out = []
    for k, cfg in enumerate(cfgs):
        over = {}
        if args.seed is not None:
            over["seed"] = args.seed
        if args.out is not None:
            over["out_dir"] = args.out if len(cfgs) == 1 else str(Path(args.out) / f"run{k}")
        out.append(replace(cfg, **over))
    return out


def _print_rows(rows: list[ReportRow]) -> None:
    from .report import HEADER
    print(",".join(HEADER))
    for r in rows:
        print(",".join(r.cells()))


def cmd_ingest_check(args) -> int:
    ds = load_cube(args.header)
    counts = ds.labels.counts()
    print(json.dumps({"name": ds.name, "bands": ds.cube.bands, "height": ds.cube.height,
                      "width": ds.cube.width, "classes": ds.classes,
                      "labeled": int(counts.sum()), "per_class": counts.tolist(),
                      "mask": ds.mask is not None}, indent=1))
    return 0


def cmd_preprocess(args) -> int:
    cfg = _configs(args)[0]
    data = load_data(cfg)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    p = data.prepared
    path = out / "patches.npz"
    np.savez_compressed(path, train_x=p.train.inputs(), train_y=p.train.labels,
                        test_x=p.test.inputs(), test_y=p.test.labels,
                        split=p.mask.codes)
    (out / "preprocess.json").write_text(json.dumps(p.info, indent=1, default=str) + "\n")
    print(json.dumps({"patches": str(path), **p.info}, default=str))
    return 0


def cmd_run(args) -> int:
    cfgs = _configs(args)
    allowed = FAMILY_COMMANDS[args.command]
    for cfg in cfgs:
        if cfg.family not in allowed:
            raise ConfigError(f"method: {cfg.method!r} cannot run under '{args.command}'")
    if len(cfgs) == 1:
        rows = run_experiment(cfgs[0])
    else:
        from .tables import run_all
        rows = run_all([(c, c.out_dir) for c in cfgs], args.parallel_experiments)
    _print_rows(rows)
    return 0


def cmd_evaluate(args) -> int:
    cfg = _configs(args)[0]
    model = load_any(args.checkpoint)
    data = load_data(cfg)
    top1, top5 = evaluate_any(model, data.prepared.test)
    params, memory = model_size(model)
    ratio = cfg.ratio if cfg.family in ("scratch", "prune", "kd") else 0
    row = ReportRow(method_label(cfg), data.name, data.prepared.mask.kind, ratio, top1, top5,
                    params, memory, float("nan"), cfg.seed, 0.0)
    _print_rows([row])
    return 0


def cmd_latency(args) -> int:
    model = load_any(args.checkpoint)
    if args.config:
        cfg = _configs(args)[0]
        data = load_data(cfg)
        probe = data.prepared.test.inputs(np.arange(min(args.probe, len(data.prepared.test))),
                                          model.input_kind)
    else:
        rng = np.random.default_rng(0 if args.seed is None else args.seed)
        probe = rng.standard_normal((args.probe, *model.input_shape)).astype(np.float32)
    if args.reps < 30:
        raise ConfigError("--reps: need at least 30")
    if len(probe) < 100:
        raise ConfigError("probe set: need at least 100 samples")
    s = measure_latency(model, probe, args.reps, threads=args.threads)
    print(json.dumps({"median_ms": s.median_ms, "q1_ms": s.q1_ms, "q3_ms": s.q3_ms,
                      "iqr_ms": s.iqr_ms, "reps": s.reps}))
    return 0


def cmd_report(args) -> int:
    rows = [r for path in args.rows for r in read_csv(path)]
    if not rows:
        raise ValueError("no rows in the given files")
    out = Path(args.out or ".")
    write_csv(rows, out / "report.csv")
    write_markdown(rows, out / "report.md", args.title)
    print(f"wrote {out / 'report.csv'} and {out / 'report.md'} ({len(rows)} rows)")
    return 0


def cmd_reproduce(args) -> int:
    cfg = _configs(args)[0] if args.config else None
    seeds = args.seeds or ([args.seed] if args.seed is not None else [0])
    text, rows = reproduce_table(args.table, cfg, args.out or "runs", seeds,
                                 args.parallel_experiments)
    if args.out and args.table in (3, 4):
        path = Path(args.out) / f"table{args.table}.md"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    print(text)
    return 0


COMMANDS = {"ingest-check": cmd_ingest_check, "preprocess": cmd_preprocess, "train": cmd_run,
            "prune": cmd_run, "quantize": cmd_run, "distill": cmd_run, "evaluate": cmd_evaluate,
            "bench-latency": cmd_latency, "report": cmd_report, "reproduce-table": cmd_reproduce}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.threads < 1 or args.parallel_experiments < 1:
        print("error: --threads and --parallel-experiments must be >= 1", file=sys.stderr)
        return 2
    try:
        with threadpool_limits(limits=args.threads):
            return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, RuntimeError, AssertionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
