"""Command-line entry point: ``clsc <command> [options]``.

Every command accepts ``--config`` (JSON with optional ``"train"`` and
``"synth"`` sections), ``--seed`` (overrides the seed of both sections),
``--out`` and ``--format``. Result records go to ``--out`` or stdout.

Exit status: 0 on success, 1 on invalid input, 2 on a numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import experiments
from .dataio import load_checkpoint, load_config, load_dataset, save_checkpoint, save_dataset, write_records
from .exceptions import NumericalError, ValidationError
from .graph import build_graph, propagate
from .synth import SynthConfig, generate
from .train import TrainConfig, evaluate_params, train

log = logging.getLogger("clsc")

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 1, 2


def _configs(args):
    doc = load_config(args.config) if args.config else {}
    train_d = dict(doc.get("train", {}))
    synth_d = dict(doc.get("synth", {}))
    if args.seed is not None:
        train_d["seed"] = args.seed
        synth_d["seed"] = args.seed
    return TrainConfig.from_dict(train_d), SynthConfig.from_dict(synth_d)


def _split(ds, name):
    samples = ds.split(name)
    if not samples:
        raise ValidationError(f"dataset has no '{name}' samples")
    return samples


def _emit(args, rows):
    write_records(rows, args.out, args.format)


def cmd_generate(args):
    _, synth = _configs(args)
    ds = generate(synth)
    save_dataset(ds, args.data)
    counts = {name: len(ds.split(name)) for name in ("train", "dev", "test")}
    train_clean = float(ds.clean_mask(ds.split("train")).mean()) if counts["train"] else None
    _emit(args, [{"path": str(args.data), "n_types": len(ds.hierarchy), **counts, "train_clean_fraction": train_clean}])


def cmd_train(args):
    cfg, _ = _configs(args)
    ds = load_dataset(args.data)
    dev = ds.split(args.dev_split) if args.dev_split else None
    report = train(_split(ds, args.split), ds.hierarchy, cfg, dev=dev or None)
    if args.checkpoint:
        save_checkpoint(report.best_params, ds.hierarchy, args.checkpoint, config=cfg.as_dict())
    _emit(args, report.history())


def cmd_eval(args):
    params, h, _ = load_checkpoint(args.checkpoint)
    ds = load_dataset(args.data)
    if ds.hierarchy != h:
        raise ValidationError("checkpoint and dataset use different type inventories")
    res = evaluate_params(params, h, _split(ds, args.split))
    _emit(args, [{"split": args.split, **res.as_dict()}])


def cmd_propagate(args):
    cfg, _ = _configs(args)
    try:
        doc = json.loads(Path(args.input).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{args.input}: malformed input ({exc.msg})") from None
    if not isinstance(doc, dict) or "Z" not in doc or "M" not in doc:
        raise ValidationError(f"{args.input}: expected an object with 'Z' and 'M'")
    Z = np.asarray(doc["Z"], dtype=float)
    M = np.asarray(doc["M"], dtype=float)
    if Z.ndim != 2 or M.ndim != 2:
        raise ValidationError("Z and M must be 2-D arrays")
    graph = build_graph(Z, zero_diagonal=cfg.zero_diagonal)
    res = propagate(graph, M, S_lp=cfg.S_lp, seed=cfg.seed)
    rows = [{"row": i, **{f"phi{k}": float(v) for k, v in enumerate(r)}} for i, r in enumerate(res.Phi)]
    log.info("propagation: %d iterations, residual %.3g", res.iterations, res.residual)
    _emit(args, rows)


def _seeds(args):
    return list(range(args.seeds)) if args.seed is None else [args.seed + i for i in range(args.seeds)]


def cmd_sweep(args):
    cfg, _ = _configs(args)
    ds = load_dataset(args.data)
    rows = experiments.noise_sweep(ds, cfg, args.fractions, _seeds(args), eval_split=args.split)
    _emit(args, rows)


def cmd_ablate(args):
    cfg, _ = _configs(args)
    ds = load_dataset(args.data)
    rows, summary = experiments.ablation(ds, cfg, _seeds(args), eval_split=args.split)
    _emit(args, summary if args.summary else rows)


def cmd_project(args):
    params, h, _ = load_checkpoint(args.checkpoint)
    ds = load_dataset(args.data)
    if ds.hierarchy != h:
        raise ValidationError("checkpoint and dataset use different type inventories")
    _emit(args, experiments.project(params, h, _split(ds, args.split)))


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON config with 'train' and/or 'synth' sections")
    common.add_argument("--seed", type=int, help="override the configured seed")
    common.add_argument("--out", type=Path, help="write result records here instead of stdout")
    common.add_argument("--format", choices=("jsonl", "tsv"), default="jsonl")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="clsc", description="Latent-space clustering for noisy entity typing.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", parents=[common], help="write a synthetic dataset")
    p.add_argument("--data", type=Path, required=True, help="dataset file to create")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", parents=[common], help="train and report per-epoch losses")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--split", default="train")
    p.add_argument("--dev-split", default="dev", help="split used to pick the best epoch ('' to disable)")
    p.add_argument("--checkpoint", type=Path, help="save the selected parameters here")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", parents=[common], help="score a checkpoint on a split")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--split", default="test")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("propagate", parents=[common], help="one-shot label propagation on embeddings and masks")
    p.add_argument("--input", type=Path, required=True, help='JSON object {"Z": [[...]], "M": [[...]]}')
    p.set_defaults(func=cmd_propagate)

    p = sub.add_parser("sweep", parents=[common], help="shrink the clean training data, compare with the baseline")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--fractions", type=float, nargs="+", default=list(experiments.SWEEP_FRACTIONS))
    p.add_argument("--seeds", type=int, default=5, help="number of paired seeds")
    p.add_argument("--split", default="test")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("ablate", parents=[common], help="one-step versus multi-step regularizer")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--seeds", type=int, default=5)
    p.add_argument("--split", default="test")
    p.add_argument("--summary", action="store_true", help="emit the 4-row mean/std table instead of per-seed rows")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("project", parents=[common], help="2-D principal-component projection of embeddings")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--split", default="test")
    p.set_defaults(func=cmd_project)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except ValidationError as exc:
        print(f"clsc: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NumericalError as exc:
        print(f"clsc: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"clsc: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
