"""Command-line entry point: ``phenosample <subcommand> [options]``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import GRID_FORMAT_VERSION, MANIFEST_FORMAT_VERSION, __version__
from .config import PipelineConfig, parse_config
from .errors import ConfigError, PhenoSampleError
from .evalharness.folds import make_folds
from .evalharness.io import align, format_table, read_embeddings, read_labels
from .evalharness.protocol import run_protocol
from .evalharness.tasks import KINDS, TaskSpec
from .manifest import read_manifest, summarize
from .pipeline import STAGES, run_all

log = logging.getLogger("phenosample")


def _years(text: str) -> tuple[int, int]:
    try:
        a, _, b = text.partition("-")
        return int(a), int(b or a)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected YEAR or START-END, got {text!r}")


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _add_pipeline_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML/JSON pipeline config")
    p.add_argument("--out", help="output directory (overrides paths.output_dir)")
    p.add_argument("--catalog", help="scene catalog: JSON-lines path or http(s) search URL")
    p.add_argument("--max-cloud", type=float)
    p.add_argument("--years", type=_years, help="e.g. 2017-2024")
    p.add_argument("--min-images", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--nonveg-threshold", type=float)
    p.add_argument("--mountain-multiplier", type=float)
    p.add_argument("--season-mode", choices=("phenological", "calendar"))


def _apply_overrides(cfg: PipelineConfig, args) -> PipelineConfig:
    sel = {}
    if args.max_cloud is not None:
        sel["max_cloud"] = args.max_cloud
    if args.years is not None:
        sel["year_start"], sel["year_end"] = args.years
    if args.min_images is not None:
        sel["min_images"] = args.min_images
    if sel:
        cfg = cfg.replace("selection", **sel)
    if args.workers is not None:
        cfg = cfg.replace("run", workers=args.workers)
    wts = {}
    if args.nonveg_threshold is not None:
        wts["nonveg_threshold"] = args.nonveg_threshold
    if args.mountain_multiplier is not None:
        wts["mountain_multiplier"] = args.mountain_multiplier
    if wts:
        cfg = cfg.replace("weights", **wts)
    paths = {}
    if args.catalog is not None:
        paths["catalog"] = args.catalog
    if args.out is not None:
        paths["output_dir"] = args.out
    if paths:
        cfg = cfg.replace("paths", **paths)
    if args.season_mode is not None:
        cfg = cfg.replace("seasons", mode=args.season_mode)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    return cfg


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="phenosample", description=__doc__)
    parser.add_argument("--version", action="store_true",
                        help="print package and file-format versions")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command")

    for name, help_ in [
        ("grid", "equal-area land grid -> grid.jsonl"),
        ("pheno", "transition dates and season windows -> pheno.jsonl"),
        ("select", "per-season scene selection -> selections.jsonl"),
        ("weights", "pretraining sampling weights -> weights.jsonl"),
        ("manifest", "assemble manifest.jsonl from stage artifacts"),
        ("pipeline", "run grid, pheno, select, weights and manifest"),
    ]:
        _add_pipeline_flags(sub.add_parser(name, help=help_))

    p = sub.add_parser("manifest-validate", help="validate a manifest file")
    p.add_argument("path")
    p = sub.add_parser("summarize", help="coverage and cloud summary of a manifest")
    p.add_argument("path")
    p = sub.add_parser("fixture", help="write the synthetic end-to-end fixture")
    p.add_argument("directory")
    p.add_argument("--points", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)

    ev = sub.add_parser("eval", help="k-NN or linear-probe evaluation of embeddings")
    ev.add_argument("method", choices=("knn", "probe"))
    ev.add_argument("--config")
    ev.add_argument("--embeddings", required=True, help=".bin (header + float32) or .csv")
    ev.add_argument("--labels", required=True, help="JSON-lines {id, y}")
    ev.add_argument("--task", choices=KINDS, required=True)
    ev.add_argument("--n-outputs", type=int, help="classes/labels/targets; inferred if omitted")
    ev.add_argument("--loss")
    ev.add_argument("--metrics", help="comma-separated; first is the primary metric")
    ev.add_argument("--folds", type=int)
    ev.add_argument("--seed", type=int)
    ev.add_argument("--k-grid", type=_int_list)
    ev.add_argument("--temperature", type=float)
    ev.add_argument("--lr", type=float)
    ev.add_argument("--batch", type=int)
    ev.add_argument("--patience", type=int)
    ev.add_argument("--max-epochs", type=int)
    ev.add_argument("--workers", type=int, default=1)
    ev.add_argument("--report", help="write the JSON report here")
    return parser


def _infer_outputs(kind: str, y: np.ndarray) -> int:
    if kind == "classification":
        return int(np.max(y)) + 1
    return 1 if y.ndim == 1 else y.shape[1]


def cmd_eval(args) -> int:
    cfg = parse_config(args.config)
    ids, values = read_embeddings(args.embeddings)
    x, y = align(ids, values, read_labels(args.labels))
    n_outputs = args.n_outputs or _infer_outputs(args.task, y)
    metrics = tuple(m.strip() for m in args.metrics.split(",")) if args.metrics else ()
    task = TaskSpec(args.task, n_outputs, loss=args.loss or "", metrics=metrics)
    seed = cfg.seed if args.seed is None else args.seed
    plan = make_folds(len(x), args.folds or cfg.folds.k_folds, cfg.folds.val_fraction, seed)
    if args.method == "knn":
        method_cfg = cfg.knn
        changes = {}
        if args.k_grid:
            changes["k_grid"] = args.k_grid
        if args.temperature is not None:
            changes["temperature"] = args.temperature
        method_cfg = dataclasses.replace(method_cfg, **changes)
    else:
        changes = {}
        for flag, name in (("lr", "learning_rate"), ("batch", "batch_size"),
                           ("patience", "patience"), ("max_epochs", "max_epochs")):
            if getattr(args, flag) is not None:
                changes[name] = getattr(args, flag)
        method_cfg = dataclasses.replace(cfg.probe, **changes)
    result = run_protocol(x, y, task, plan, args.method, method_cfg, workers=args.workers)
    report = {"method": args.method, "task": dataclasses.asdict(task), **result.to_json()}
    if args.report:
        Path(args.report).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    sys.stdout.write(format_table(result))
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.version:
        print(f"phenosample {__version__} (manifest format {MANIFEST_FORMAT_VERSION}, "
              f"grid format {GRID_FORMAT_VERSION})")
        return 0
    if not args.command:
        parser.print_help()
        return 2
    stage = args.command
    try:
        if stage in STAGES or stage == "pipeline":
            cfg = _apply_overrides(parse_config(args.config), args)
            result = run_all(cfg) if stage == "pipeline" else STAGES[stage](cfg)
            print(json.dumps(result, sort_keys=True))
        elif stage == "manifest-validate":
            m = read_manifest(args.path)
            print(f"ok: {len(m.records)} records")
        elif stage == "summarize":
            print(json.dumps(summarize(read_manifest(args.path)), sort_keys=True))
        elif stage == "fixture":
            from .synthetic import make_fixture

            out = make_fixture(args.directory, args.points, args.seed)
            print(f"fixture written to {out}; run: phenosample pipeline --config {out / 'config.yaml'}")
        elif stage == "eval":
            return cmd_eval(args)
    except (PhenoSampleError, ConfigError, OSError, ValueError) as exc:
        print(f"phenosample {stage}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
