"""Zero-shot settings, comparison modes and the results table."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import metrics
from .dataset import Dataset
from .model import HyperParams
from .splitter import FOLD_NAMES, FoldSplit
from .trainer import TrainConfig, run_seeds

# setting -> (train, validation, test)
SETTINGS = {
    1: ("fold2", "fold3", "fold1"),
    2: ("fold3", "fold1", "fold2"),
    3: ("fold1", "fold2", "fold3"),
}
MODES = ("zero_shot", "uniform_aggregation", "zero_rule", "supervised")
SUPERVISED_PROPORTIONS = (0.6, 0.2, 0.2)


@dataclass
class ExperimentConfig:
    setting: str = "all"  # "1" | "2" | "3" | "all"
    mode: str = "zero_shot"
    dataset: str = ""
    folds: str = ""
    out_dir: str = "results"
    train: TrainConfig = field(default_factory=TrainConfig)
    hyper: HyperParams = field(default_factory=HyperParams)
    n_runs: int = 3

    def settings(self) -> list[int]:
        if str(self.setting) == "all":
            return [1, 2, 3]
        if str(self.setting) in ("1", "2", "3"):
            return [int(self.setting)]
        raise ValueError(f"setting must be 1, 2, 3 or all, got {self.setting!r}")

    def validate(self) -> None:
        self.settings()
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {', '.join(MODES)}, got {self.mode!r}")
        if self.n_runs < 1:
            raise ValueError("n_runs must be at least 1")
        self.train.validate()
        self.hyper.validate()

    @classmethod
    def from_json(cls, obj: dict) -> ExperimentConfig:
        obj = dict(obj)
        paths = obj.pop("paths", {})
        train = TrainConfig(**obj.pop("train", {}))
        hyper = HyperParams(**obj.pop("hyper", {}))
        return cls(**obj, **paths, train=train, hyper=hyper)


def fold_dataset(d: Dataset, split: FoldSplit, name: str) -> Dataset:
    fold = split[name]
    return d.subset(fold.sample_ids, fold.classes)


def check_split(d: Dataset, split: FoldSplit) -> None:
    seen: dict[str, str] = {}
    for f in split.folds:
        for c in f.classes:
            if c in seen:
                raise ValueError(f"class {c!r} appears in both {seen[c]} and {f.name}")
            if c not in d.semantics:
                raise ValueError(f"fold {f.name} names unknown class {c!r}")
            seen[c] = f.name
        classes = set(f.classes)
        for sid in f.sample_ids:
            try:
                labels = d[sid].labels
            except KeyError:
                raise ValueError(f"fold {f.name} names unknown sample {sid!r}") from None
            if not labels <= classes:
                raise ValueError(f"sample {sid!r} in {f.name} carries labels outside the fold")


def supervised_split(fold: Dataset, seed: int) -> tuple[Dataset, Dataset, Dataset]:
    """Seeded 60/20/20 per-sample split of one fold; all three parts keep the fold's classes."""
    ids = [s.id for s in fold.samples]
    perm = np.random.default_rng(seed).permutation(len(ids))
    n_train = int(len(ids) * SUPERVISED_PROPORTIONS[0])
    n_val = int(len(ids) * SUPERVISED_PROPORTIONS[1])
    parts = (perm[:n_train], perm[n_train : n_train + n_val], perm[n_train + n_val :])
    return tuple(fold.subset([ids[i] for i in sorted(p)]) for p in parts)


@dataclass
class SettingResult:
    setting: int
    test_fold: str
    micro_f1: float
    macro_f1: float
    runs: list[dict] = field(default_factory=list)


def run_setting(d: Dataset, split: FoldSplit, setting: int, mode: str, cfg: TrainConfig, h: HyperParams,
                n_runs: int = 3, out_dir: str | Path | None = None) -> SettingResult:
    tr_name, va_name, te_name = SETTINGS[setting]
    test = fold_dataset(d, split, te_name)

    if mode == "zero_rule":
        golds = [s.labels for s in test.samples]
        rep = metrics.zero_rule(golds, golds, test.classes)
        return SettingResult(setting, te_name, rep.micro_f1, rep.macro_f1,
                             [{"micro_f1": rep.micro_f1, "macro_f1": rep.macro_f1}])

    if mode == "supervised":
        train_set, val_set, test_set = supervised_split(test, cfg.seed)
    elif mode in ("zero_shot", "uniform_aggregation"):
        train_set, val_set, test_set = fold_dataset(d, split, tr_name), fold_dataset(d, split, va_name), test
        cfg = replace(cfg, uniform_attention=(mode == "uniform_aggregation"))
    else:
        raise ValueError(f"unknown mode {mode!r}")

    rep = run_seeds(train_set, val_set, test_set, cfg, h, n_runs, out_dir=out_dir)
    return SettingResult(setting, te_name, rep.mean_micro_f1, rep.mean_macro_f1, rep.to_json()["runs"])


@dataclass
class ResultsTable:
    mode: str
    rows: list[SettingResult]

    @property
    def mean_micro_f1(self) -> float:
        return sum(r.micro_f1 for r in self.rows) / len(self.rows)

    @property
    def mean_macro_f1(self) -> float:
        return sum(r.macro_f1 for r in self.rows) / len(self.rows)

    def to_csv(self) -> str:
        lines = ["test_fold,micro_f1,macro_f1"]
        for r in sorted(self.rows, key=lambda r: FOLD_NAMES.index(r.test_fold)):
            lines.append(f"{r.test_fold},{r.micro_f1:.4f},{r.macro_f1:.4f}")
        lines.append(f"mean,{self.mean_micro_f1:.4f},{self.mean_macro_f1:.4f}")
        return "\n".join(lines)

    def to_json(self) -> dict:
        out = {"mode": self.mode, "rows": [asdict(r) for r in self.rows],
               "mean": {"micro_f1": self.mean_micro_f1, "macro_f1": self.mean_macro_f1}}
        if self.mode == "supervised":
            out["note"] = "supervised reference uses a seeded 60/20/20 per-sample split of the test fold"
        return out


def run_experiment(d: Dataset, split: FoldSplit, cfg: ExperimentConfig) -> ResultsTable:
    cfg.validate()
    check_split(d, split)
    rows = []
    for setting in cfg.settings():
        out = None if not cfg.out_dir else Path(cfg.out_dir) / cfg.mode / f"setting{setting}"
        rows.append(run_setting(d, split, setting, cfg.mode, cfg.train, cfg.hyper, cfg.n_runs, out))
    return ResultsTable(cfg.mode, rows)


def save_results(table: ResultsTable, path: str | Path) -> None:
    Path(path).write_text(json.dumps(table.to_json(), indent=1) + "\n", encoding="utf-8")


def run_all_modes(d: Dataset, split: FoldSplit, cfg: ExperimentConfig) -> dict[str, ResultsTable]:
    """Every comparison mode over the same settings, in table-column order."""
    return {mode: run_experiment(d, split, replace(cfg, mode=mode)) for mode in MODES}


def comparison_csv(tables: dict[str, ResultsTable], metric: str) -> str:
    """One row per test fold plus the mean, one column per mode."""
    modes = list(tables)
    by_fold = {m: {r.test_fold: getattr(r, metric) for r in tables[m].rows} for m in modes}
    folds = [f for f in FOLD_NAMES if f in by_fold[modes[0]]]
    lines = ["test_fold," + ",".join(modes)]
    for f in folds:
        lines.append(f + "," + ",".join(f"{by_fold[m][f]:.4f}" for m in modes))
    lines.append("mean," + ",".join(f"{getattr(tables[m], 'mean_' + metric):.4f}" for m in modes))
    return "\n".join(lines)
