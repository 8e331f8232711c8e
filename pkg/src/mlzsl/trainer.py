"""Mini-batch SGD training, validation-based checkpoint selection, seed averaging."""

from __future__ import annotations

import json
import sys
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import metrics
from .dataset import Dataset
from .loss import backward
from .model import HyperParams, ModelParams, forward, init_params, prediction_scores, save_checkpoint


@dataclass
class TrainConfig:
    batch_size: int = 32
    learning_rate: float = 0.01
    epochs: int = 100
    seed: int = 0
    select_metric: str = "micro_f1"
    selection: str = "best"  # or "last"
    d_model: int = 128
    hidden: int = 512
    uniform_attention: bool = False

    def validate(self) -> None:
        for name in ("batch_size", "epochs", "d_model", "hidden"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or isinstance(v, bool) or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.select_metric not in ("micro_f1", "macro_f1"):
            raise ValueError(f"select_metric must be micro_f1 or macro_f1, got {self.select_metric!r}")
        if self.selection not in ("best", "last"):
            raise ValueError(f"selection must be best or last, got {self.selection!r}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


@dataclass
class TrainReport:
    per_epoch: list[dict] = field(default_factory=list)
    best_epoch: int = 0
    checkpoint_path: str = ""

    def to_json(self) -> dict:
        return asdict(self)


def scoring_hyper(h: HyperParams, uniform_attention: bool) -> HyperParams:
    """The uniform-aggregation baseline scores with the plain segment sum only."""
    return replace(h, gamma=0.0) if uniform_attention else h


def predict(p: ModelParams, d: Dataset, h: HyperParams, uniform_attention: bool = False,
            classes: list[str] | None = None) -> list[set[str]]:
    classes = d.classes if classes is None else classes
    if not len(d) or not classes:
        return [set() for _ in range(len(d))]
    h = scoring_hyper(h, uniform_attention)
    fw = forward(p, d.acoustic_stack(), d.semantic_matrix(classes))
    p_hat = prediction_scores(fw.s, h.gamma, uniform_attention)
    return [{c for c, v in zip(classes, row) if v > h.m_threshold} for row in p_hat]


def evaluate_model(p: ModelParams, d: Dataset, h: HyperParams, uniform_attention: bool = False) -> metrics.EvalReport:
    classes = d.classes
    preds = predict(p, d, h, uniform_attention, classes)
    return metrics.evaluate([s.labels for s in d.samples], preds, classes)


def _check_compatible(train_set: Dataset, val_set: Dataset) -> None:
    if (train_set.f_a, train_set.f_s, train_set.t) != (val_set.f_a, val_set.f_s, val_set.t):
        raise ValueError("train and validation sets have different dimensions")


def train(train_set: Dataset, val_set: Dataset, cfg: TrainConfig, h: HyperParams,
          out_dir: str | Path | None = None, echo: bool = False) -> tuple[ModelParams, TrainReport]:
    cfg.validate()
    h.validate()
    if not len(train_set):
        raise ValueError("empty training set")
    _check_compatible(train_set, val_set)

    classes = train_set.classes
    col = {c: i for i, c in enumerate(classes)}
    sem = train_set.semantic_matrix(classes)
    samples = list(train_set.samples)
    positives = [[col[c] for c in sorted(s.labels)] for s in samples]

    rng = np.random.default_rng(cfg.seed)
    params = init_params(train_set.f_a, train_set.f_s, cfg.d_model, cfg.hidden, seed=cfg.seed, rng=rng)
    report = TrainReport()
    best, best_value = params.copy(), -1.0
    if echo:
        print("epoch,loss,val_micro,val_macro", file=sys.stdout, flush=True)

    n = len(samples)
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            loss, grads = backward(params, [(samples[i], positives[i]) for i in idx], sem, h.delta,
                                   cfg.uniform_attention)
            for name, g in grads.items():
                getattr(params, name)[...] -= cfg.learning_rate * g
            total += loss * len(idx)

        val = evaluate_model(params, val_set, h, cfg.uniform_attention)
        row = {"epoch": epoch, "train_loss": total / n, "val_micro_f1": val.micro_f1, "val_macro_f1": val.macro_f1}
        report.per_epoch.append(row)
        if echo:
            print(f"{epoch},{row['train_loss']!r},{val.micro_f1!r},{val.macro_f1!r}", flush=True)

        value = row["val_" + cfg.select_metric]
        if cfg.selection == "last" or value > best_value:
            best, best_value, report.best_epoch = params.copy(), value, epoch

    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / "model.json"
        save_checkpoint(best, h, path, t=train_set.t,
                        extra={"uniform_attention": cfg.uniform_attention, "classes": classes})
        report.checkpoint_path = str(path)
        (out_dir / "train_report.json").write_text(json.dumps(report.to_json(), indent=1) + "\n", encoding="utf-8")
    return best, report


@dataclass
class SeedsReport:
    seeds: list[int]
    runs: list[metrics.EvalReport]
    best_epochs: list[int]
    mean_micro_f1: float
    mean_macro_f1: float

    def to_json(self) -> dict:
        return {
            "runs": [
                {"seed": s, "best_epoch": e, "micro_f1": r.micro_f1, "macro_f1": r.macro_f1}
                for s, e, r in zip(self.seeds, self.best_epochs, self.runs)
            ],
            "mean": {"micro_f1": self.mean_micro_f1, "macro_f1": self.mean_macro_f1},
        }


def run_seeds(train_set: Dataset, val_set: Dataset, test_set: Dataset, cfg: TrainConfig, h: HyperParams,
              n_runs: int = 3, out_dir: str | Path | None = None) -> SeedsReport:
    if n_runs < 1:
        raise ValueError("n_runs must be at least 1")
    _check_compatible(train_set, test_set)
    seeds, runs, epochs = [], [], []
    for i in range(n_runs):
        run_cfg = replace(cfg, seed=cfg.seed + i)
        run_dir = None if out_dir is None else Path(out_dir) / f"run{i + 1}"
        params, rep = train(train_set, val_set, run_cfg, h, out_dir=run_dir)
        result = evaluate_model(params, test_set, h, cfg.uniform_attention)
        if run_dir is not None:
            result.save(run_dir / "eval_report.json")
        seeds.append(run_cfg.seed)
        runs.append(result)
        epochs.append(rep.best_epoch)
    return SeedsReport(
        seeds, runs, epochs,
        sum(r.micro_f1 for r in runs) / n_runs,
        sum(r.macro_f1 for r in runs) / n_runs,
    )
