"""Command-line entry point: ``bboxpose <subcommand> ...``.

Exit status is 0 on success, 2 on usage or configuration errors and 1 on
any other failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import List, Optional

import numpy as np

from bboxpose.errors import ConfigError
from bboxpose.geometry import Pose9D
from bboxpose.harness.config import HarnessConfig, config_from_dict, load_config
from bboxpose.harness.corpus import Corpus, generate_corpus, mean_sizes, read_corpus, write_corpus
from bboxpose.harness.io import read_points
from bboxpose.harness.pipeline import augment_instance, encode_instance, run_pipeline
from bboxpose.metrics import DEFAULT_GRIDS, MetricReport, pose_error
from bboxpose.projection import NO_SYMMETRY, decode_pose, dump_field, encode_dvpb, load_field

log = logging.getLogger("bboxpose")

PRED_SCHEMA_VERSION = 1


def _config(args) -> HarnessConfig:
    cfg = load_config(args.config) if args.config else HarnessConfig()
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    return cfg


def _corpus_config(args, corpus: Corpus) -> HarnessConfig:
    if args.config:
        cfg = load_config(args.config)
    elif corpus.config:
        cfg = config_from_dict(corpus.config)
    else:
        cfg = HarnessConfig()
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    return cfg


def _out(args, default: Optional[str] = None) -> Path:
    if args.out is None and default is None:
        raise ConfigError("--out", "an output path is required")
    return Path(args.out if args.out is not None else default)


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def cmd_gen(args) -> int:
    cfg = _config(args)
    if args.count is not None:
        cfg = replace(cfg, instances_per_category=args.count)
    if args.categories:
        cfg = replace(cfg, categories=args.categories)
    cfg = config_from_dict(cfg.to_dict())
    fmt = args.format or "ply"
    if fmt not in ("ply", "json"):
        raise ConfigError("--format", "gen writes ply or json point files")
    out = write_corpus(generate_corpus(cfg), _out(args), fmt)
    log.info("wrote corpus to %s", out)
    return 0


def cmd_encode(args) -> int:
    corpus = read_corpus(args.corpus)
    cfg = _corpus_config(args, corpus)
    out = _out(args, str(Path(args.corpus) / "fields"))
    out.mkdir(parents=True, exist_ok=True)
    for iid, inst in zip(corpus.ids, corpus.instances):
        rng = np.random.default_rng([inst.seed, 0xE1])
        _, hyp, sprv = encode_instance(inst, corpus.mean_sizes[inst.category], cfg, rng)
        # the decodable field carries all six faces
        dump_field(encode_dvpb(inst.observed, inst.pose, NO_SYMMETRY), out / f"{iid}.dvpb.json")
        dump_field(sprv, out / f"{iid}.sprv.json")
    return 0


def cmd_decode(args) -> int:
    if args.field:
        if not args.points:
            raise ConfigError("--points", "required with --field")
        pts, _ = read_points(args.points)
        pose = decode_pose(load_field(args.field), pts)
        text = json.dumps({"schema_version": PRED_SCHEMA_VERSION, "pose": pose.to_dict()}, indent=1, sort_keys=True)
        if args.out:
            _write(Path(args.out), text)
        else:
            print(text)
        return 0
    if not args.corpus:
        raise ConfigError("corpus", "give a corpus directory or --field/--points")
    corpus = read_corpus(args.corpus)
    fields_dir = Path(args.fields) if args.fields else Path(args.corpus) / "fields"
    preds = {}
    for iid, inst in zip(corpus.ids, corpus.instances):
        field = load_field(fields_dir / f"{iid}.dvpb.json")
        preds[iid] = decode_pose(field, inst.observed).to_dict()
    text = json.dumps({"schema_version": PRED_SCHEMA_VERSION, "predictions": preds}, indent=1, sort_keys=True)
    _write(_out(args, str(Path(args.corpus) / "predictions.json")), text)
    return 0


def cmd_augment(args) -> int:
    corpus = read_corpus(args.corpus)
    cfg = _corpus_config(args, corpus)
    if args.method:
        cfg = replace(cfg, augmentation=replace(cfg.augmentation, method=args.method))
    cfg = config_from_dict(cfg.to_dict())
    instances = []
    for inst in corpus.instances:
        rng = np.random.default_rng([cfg.seed, inst.seed, 0xA6])
        instances.append(augment_instance(inst, cfg, rng))
    fmt = args.format or "ply"
    if fmt not in ("ply", "json"):
        raise ConfigError("--format", "augment writes ply or json point files")
    out = Corpus(instances, corpus.ids, mean_sizes(instances), cfg.seed, cfg.to_dict())
    write_corpus(out, _out(args), fmt)
    return 0


def _errors(args):
    corpus = read_corpus(args.corpus)
    cfg = _corpus_config(args, corpus)
    doc = json.loads(Path(args.pred).read_text())
    if doc.get("schema_version") != PRED_SCHEMA_VERSION:
        raise ConfigError("--pred", "unsupported predictions schema_version")
    preds = doc["predictions"]
    by_cat = {}
    for iid, inst in zip(corpus.ids, corpus.instances):
        if iid not in preds:
            raise ConfigError("--pred", f"no prediction for {iid}")
        err = pose_error(Pose9D.from_dict(preds[iid]), inst.pose, inst.sym, cfg.eval.iou_resolution)
        by_cat.setdefault(inst.category, []).append(err)
    return by_cat


def cmd_eval(args) -> int:
    report = MetricReport.from_errors(_errors(args))
    fmt = args.format or "json"
    if fmt == "json":
        text = report.to_json()
    elif fmt == "csv":
        text = report.to_csv()
    else:
        raise ConfigError("--format", "eval writes json or csv")
    if args.out:
        _write(Path(args.out), text)
    else:
        sys.stdout.write(text + ("" if text.endswith("\n") else "\n"))
    return 0


def cmd_report(args) -> int:
    grids = DEFAULT_GRIDS if args.axis == "all" else {args.axis: DEFAULT_GRIDS[args.axis]}
    report = MetricReport.from_errors(_errors(args), grids)
    if args.format not in (None, "csv"):
        raise ConfigError("--format", "report writes csv")
    text = report.curves_csv()
    if args.out:
        _write(Path(args.out), text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_run(args) -> int:
    cfg = _config(args)
    result = run_pipeline(cfg, out_dir=_out(args))
    s = result.summary
    log.info("5deg2cm=%.3f IoU75=%.3f mean|SPRV|=%.3g mean|DVPB|=%.3g",
             result.report.precisions["mean"]["5deg2cm"], result.report.precisions["mean"]["IoU75"],
             s["mean_sprv_norm"], s["mean_dvpb_norm"])
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="override the config seed")
    common.add_argument("--config", default=None, help="JSON or YAML harness config")
    common.add_argument("--out", default=None, help="output file or directory")
    common.add_argument("--format", choices=("json", "csv", "ply"), default=None)
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="bboxpose", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("gen", parents=[common], help="generate a synthetic corpus")
    p.add_argument("--count", type=int, default=None, help="instances per category")
    p.add_argument("--categories", nargs="+", default=None)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("encode", parents=[common], help="write DVPB and SPRV fields for a corpus")
    p.add_argument("corpus")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", parents=[common], help="recover poses from DVPB fields")
    p.add_argument("corpus", nargs="?")
    p.add_argument("--fields", default=None, help="field directory (default CORPUS/fields)")
    p.add_argument("--field", default=None, help="single field JSON")
    p.add_argument("--points", default=None, help="points matching --field")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("augment", parents=[common], help="augment a corpus (A1/A2/linear/noise)")
    p.add_argument("corpus")
    p.add_argument("--method", choices=("none", "a1", "a2", "linear", "auto"), default=None)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("eval", parents=[common], help="metric report from predictions")
    p.add_argument("corpus")
    p.add_argument("--pred", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", parents=[common], help="precision sweep curves as CSV")
    p.add_argument("corpus")
    p.add_argument("--pred", required=True)
    p.add_argument("--axis", choices=("all", "iou", "rotation", "translation"), default="all")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("run", parents=[common], help="generate, encode, decode and evaluate in one go")
    p.set_defaults(func=cmd_run)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"bboxpose {args.command}: config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        log.debug("failure", exc_info=True)
        print(f"bboxpose {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
