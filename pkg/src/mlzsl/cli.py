"""Command-line entry point: ``mlzsl {synth,split,train,run,attn-dump}``.

Exit codes: 0 success, 1 validation error, 2 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import experiment
from .dataset import DatasetError, DatasetNotFound, SynthSpec, generate_synthetic, load_dataset, save_dataset
from .experiment import SETTINGS, ExperimentConfig
from .model import attention_dump, load_checkpoint, score_all
from .splitter import format_table, load_folds, save_folds, split_folds
from .trainer import train

EXIT_OK, EXIT_VALIDATION, EXIT_IO = 0, 1, 2


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON experiment config; flags override its values")
    p.add_argument("--dataset")
    p.add_argument("--folds")
    p.add_argument("--mode")
    p.add_argument("--setting")
    p.add_argument("--out")
    p.add_argument("--seed", type=int)
    p.add_argument("--gamma", type=float)
    p.add_argument("--threshold", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--d-model", type=int)
    p.add_argument("--hidden", type=int)
    p.add_argument("--select-metric", choices=["micro_f1", "macro_f1"])
    p.add_argument("--selection", choices=["best", "last"])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mlzsl", description="Multi-label zero-shot audio tagging with temporal attention")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic dataset with planted segment structure")
    defaults = SynthSpec()
    p.add_argument("--out", required=True)
    p.add_argument("--n-classes", type=int, default=defaults.n_classes)
    p.add_argument("--n-samples", type=int, default=defaults.n_samples)
    p.add_argument("--t", type=int, default=defaults.t)
    p.add_argument("--f-a", type=int, default=defaults.f_a)
    p.add_argument("--f-s", type=int, default=defaults.f_s)
    p.add_argument("--max-labels", type=int, default=defaults.labels_per_sample_max)
    p.add_argument("--sigma", type=float, default=defaults.noise_sigma)
    p.add_argument("--seed", type=int, default=defaults.seed)
    p.add_argument("--overwrite", action="store_true")

    p = sub.add_parser("split", help="greedy class-disjoint three-fold split")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True, help="path of folds.json")

    p = sub.add_parser("train", help="train one model for one setting")
    _add_train_flags(p)

    p = sub.add_parser("run", help="run a comparison mode (or all of them) over one or all settings")
    _add_train_flags(p)
    p.add_argument("--runs", type=int)

    p = sub.add_parser("attn-dump", help="export attention weights of one clip for one label")
    p.add_argument("--model", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--sample-id", required=True)
    p.add_argument("--label", required=True)
    p.add_argument("--out", required=True)
    return parser


def experiment_config(args: argparse.Namespace) -> ExperimentConfig:
    cfg = ExperimentConfig()
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise FileNotFoundError(f"config {path} not found")
        cfg = ExperimentConfig.from_json(json.loads(path.read_text(encoding="utf-8")))

    top = {k: v for k, v in {"dataset": args.dataset, "folds": args.folds, "mode": args.mode,
                             "setting": args.setting, "out_dir": args.out,
                             "n_runs": getattr(args, "runs", None)}.items() if v is not None}
    train_flags = {k: v for k, v in {"seed": args.seed, "epochs": args.epochs, "batch_size": args.batch_size,
                                     "learning_rate": args.lr, "d_model": args.d_model, "hidden": args.hidden,
                                     "select_metric": args.select_metric,
                                     "selection": args.selection}.items() if v is not None}
    hyper_flags = {k: v for k, v in {"gamma": args.gamma, "m_threshold": args.threshold,
                                     "delta": args.delta}.items() if v is not None}
    cfg = replace(cfg, **top, train=replace(cfg.train, **train_flags), hyper=replace(cfg.hyper, **hyper_flags))
    if not cfg.dataset or not cfg.folds:
        raise ValueError("--dataset and --folds are required (directly or via --config)")
    return cfg


def cmd_synth(args: argparse.Namespace) -> int:
    spec = SynthSpec(args.n_classes, args.n_samples, args.t, args.f_a, args.f_s,
                     args.max_labels, args.sigma, args.seed)
    spec.validate()
    save_dataset(generate_synthetic(spec), args.out, overwrite=args.overwrite)
    print(f"wrote {spec.n_samples} samples, {spec.n_classes} classes to {args.out}")
    return EXIT_OK


def cmd_split(args: argparse.Namespace) -> int:
    d = load_dataset(args.dataset)
    split = split_folds(d)
    save_folds(split, args.out)
    print(format_table(split))
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    cfg = experiment_config(args)
    cfg.validate()
    if cfg.mode not in ("zero_shot", "uniform_aggregation", "supervised"):
        raise ValueError(f"cannot train in mode {cfg.mode!r}")
    settings = cfg.settings()
    if len(settings) != 1:
        raise ValueError("train needs a single --setting (1, 2 or 3)")
    d = load_dataset(cfg.dataset)
    split = load_folds(cfg.folds)
    experiment.check_split(d, split)

    tr, va, te = SETTINGS[settings[0]]
    if cfg.mode == "supervised":
        train_set, val_set, _ = experiment.supervised_split(experiment.fold_dataset(d, split, te), cfg.train.seed)
    else:
        train_set, val_set = experiment.fold_dataset(d, split, tr), experiment.fold_dataset(d, split, va)
    tcfg = replace(cfg.train, uniform_attention=(cfg.mode == "uniform_aggregation"))
    _, report = train(train_set, val_set, tcfg, cfg.hyper, out_dir=cfg.out_dir, echo=True)
    print(f"best epoch {report.best_epoch}; checkpoint {report.checkpoint_path}", file=sys.stderr)
    return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    cfg = experiment_config(args)
    all_modes = cfg.mode == "all"
    if all_modes:
        cfg = replace(cfg, mode="zero_shot")
    d = load_dataset(cfg.dataset)
    split = load_folds(cfg.folds)
    if all_modes:
        tables = experiment.run_all_modes(d, split, cfg)
        print("# micro F1")
        print(experiment.comparison_csv(tables, "micro_f1"))
        print("# macro F1")
        print(experiment.comparison_csv(tables, "macro_f1"))
    else:
        tables = {cfg.mode: experiment.run_experiment(d, split, cfg)}
        print(tables[cfg.mode].to_csv())
    if cfg.out_dir:
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for mode, table in tables.items():
            experiment.save_results(table, out / f"results_{mode}.json")
    return EXIT_OK


def cmd_attn_dump(args: argparse.Namespace) -> int:
    params, _, _ = load_checkpoint(args.model)
    d = load_dataset(args.dataset)
    try:
        sample = d[args.sample_id]
    except KeyError:
        raise ValueError(f"unknown sample id {args.sample_id!r}") from None
    if args.label not in d.semantics:
        raise ValueError(f"unknown label {args.label!r}")
    alpha = attention_dump(score_all(params, d.semantics, sample.acoustic, [args.label]), args.label)
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sample_id", "label", "t", "alpha"])
        for t, a in enumerate(alpha):
            w.writerow([sample.id, args.label, t, repr(float(a))])
    return EXIT_OK


COMMANDS = {"synth": cmd_synth, "split": cmd_split, "train": cmd_train, "run": cmd_run, "attn-dump": cmd_attn_dump}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (OSError, DatasetNotFound) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, KeyError, TypeError, DatasetError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
