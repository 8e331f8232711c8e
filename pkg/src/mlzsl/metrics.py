"""Multi-label F1 scores and the zero-rule reference."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

LabelSets = Sequence[Iterable[str]]


@dataclass
class ClassStats:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    precision: float = 0.0
    recall: float = 0.0
    f1: float = 0.0


@dataclass
class EvalReport:
    micro_f1: float
    macro_f1: float
    per_class: dict[str, ClassStats] = field(default_factory=dict)
    n_samples: int = 0

    def to_json(self) -> dict:
        return asdict(self)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1) + "\n", encoding="utf-8")

    def per_class_csv(self) -> str:
        rows = ["label,tp,fp,fn,precision,recall,f1"]
        for label, c in self.per_class.items():
            rows.append(f"{label},{c.tp},{c.fp},{c.fn},{c.precision!r},{c.recall!r},{c.f1!r}")
        return "\n".join(rows)


def _ratio(num: int, den: int) -> float:
    return num / den if den else 0.0


def confusion(golds: LabelSets, preds: LabelSets, classes: Sequence[str]) -> dict[str, ClassStats]:
    golds, preds = list(golds), list(preds)
    if len(golds) != len(preds):
        raise ValueError(f"{len(golds)} gold label sets but {len(preds)} predictions")
    stats = {c: ClassStats() for c in classes}
    for g, p in zip(golds, preds):
        g, p = set(g), set(p)
        unknown = (g | p) - stats.keys()
        if unknown:
            raise ValueError(f"label {sorted(unknown)[0]!r} is not among the evaluated classes")
        for c in g & p:
            stats[c].tp += 1
        for c in p - g:
            stats[c].fp += 1
        for c in g - p:
            stats[c].fn += 1
    for c in stats.values():
        c.precision = _ratio(c.tp, c.tp + c.fp)
        c.recall = _ratio(c.tp, c.tp + c.fn)
        c.f1 = _ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn)
    return stats


def _micro(stats: dict[str, ClassStats]) -> float:
    tp = sum(c.tp for c in stats.values())
    fp = sum(c.fp for c in stats.values())
    fn = sum(c.fn for c in stats.values())
    return _ratio(2 * tp, 2 * tp + fp + fn)


def _macro(stats: dict[str, ClassStats]) -> float:
    # zero-support classes count with f1 = 0; exact rational mean, rounded once
    if not stats:
        return 0.0
    total = sum((Fraction(2 * c.tp, 2 * c.tp + c.fp + c.fn) for c in stats.values() if c.tp + c.fp + c.fn),
                Fraction(0))
    return float(total / len(stats))


def micro_f1(golds: LabelSets, preds: LabelSets, classes: Sequence[str]) -> float:
    return _micro(confusion(golds, preds, classes))


def macro_f1(golds: LabelSets, preds: LabelSets, classes: Sequence[str]) -> float:
    return _macro(confusion(golds, preds, classes))


def evaluate(golds: LabelSets, preds: LabelSets, classes: Sequence[str]) -> EvalReport:
    golds = list(golds)
    stats = confusion(golds, preds, classes)
    return EvalReport(_micro(stats), _macro(stats), stats, len(golds))


def most_frequent(label_sets: LabelSets) -> str:
    counts = Counter(c for s in label_sets for c in s)
    if not counts:
        raise ValueError("no labels to count")
    return min(counts, key=lambda c: (-counts[c], c))


def zero_rule(train_or_test_labels: LabelSets, eval_golds: LabelSets, classes: Sequence[str]) -> EvalReport:
    """Predict the single most frequent class of ``train_or_test_labels`` for every clip."""
    top = most_frequent(list(train_or_test_labels))
    golds = list(eval_golds)
    if not golds:
        raise ValueError("nothing to evaluate")
    return evaluate(golds, [{top}] * len(golds), classes)
