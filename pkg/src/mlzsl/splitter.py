"""Greedy three-way split of a multi-label dataset into class-disjoint folds.

Seeding: the three least frequent classes open fold1, fold2 and fold3.
Growth: in rounds, each fold in turn takes the unassigned class that
co-occurs most often with the class it added last. Folds whose frontier
class has no co-occurring unassigned class sit the round out; the greedy
phase ends when no fold can grow. Leftover classes are dealt round-robin
in ascending frequency. Ties always go to the lexicographically smaller
label.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path

from .dataset import Dataset

FOLD_NAMES = ("fold1", "fold2", "fold3")


@dataclass
class CooccurrenceStats:
    class_freq: dict[str, int]
    co_count: dict[tuple[str, str], int]

    def co(self, a: str, b: str) -> int:
        return self.co_count.get((a, b), 0)


@dataclass
class Fold:
    name: str
    classes: list[str] = field(default_factory=list)
    sample_ids: list[str] = field(default_factory=list)


@dataclass
class FoldSplit:
    folds: tuple[Fold, Fold, Fold]
    dropped: list[str]

    def __getitem__(self, name: str) -> Fold:
        for f in self.folds:
            if f.name == name:
                return f
        raise KeyError(name)

    def to_json(self) -> dict:
        out = {f.name: {"classes": list(f.classes), "samples": list(f.sample_ids)} for f in self.folds}
        out["dropped"] = list(self.dropped)
        return out

    @classmethod
    def from_json(cls, obj: dict) -> FoldSplit:
        try:
            folds = tuple(Fold(n, list(obj[n]["classes"]), list(obj[n]["samples"])) for n in FOLD_NAMES)
            return cls(folds, list(obj.get("dropped", [])))
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed folds file: {exc}") from exc


def compute_stats(d: Dataset) -> CooccurrenceStats:
    freq = {c: 0 for c in d.classes}
    co: Counter = Counter()
    for s in d.samples:
        labels = sorted(s.labels)
        for a in labels:
            freq[a] += 1
            co[a, a] += 1
        for a, b in combinations(labels, 2):
            co[a, b] += 1
            co[b, a] += 1
    return CooccurrenceStats(freq, dict(co))


def split_folds(d: Dataset) -> FoldSplit:
    classes = d.classes
    if len(classes) < 3:
        raise ValueError(f"need at least 3 classes to split, got {len(classes)}")
    stats = compute_stats(d)
    by_freq = sorted(classes, key=lambda c: (stats.class_freq[c], c))

    members: list[list[str]] = [[c] for c in by_freq[:3]]
    unassigned = set(by_freq[3:])

    grew = True
    while grew and unassigned:
        grew = False
        for fold in members:
            if not unassigned:
                break
            last = fold[-1]
            best = None
            for c in sorted(unassigned):
                n = stats.co(last, c)
                if n > 0 and (best is None or n > best[0]):
                    best = (n, c)
            if best is not None:
                fold.append(best[1])
                unassigned.discard(best[1])
                grew = True

    orphans = [c for c in by_freq if c in unassigned]
    for i, c in enumerate(orphans):
        members[i % 3].append(c)

    owner = {c: k for k, fold in enumerate(members) for c in fold}
    sample_ids: list[list[str]] = [[], [], []]
    dropped = []
    for s in d.samples:
        homes = {owner[c] for c in s.labels}
        if len(homes) == 1:
            sample_ids[homes.pop()].append(s.id)
        else:
            dropped.append(s.id)

    folds = tuple(Fold(n, m, ids) for n, m, ids in zip(FOLD_NAMES, members, sample_ids))
    return FoldSplit(folds, dropped)


def save_folds(split: FoldSplit, path: str | Path) -> None:
    Path(path).write_text(json.dumps(split.to_json(), indent=1) + "\n", encoding="utf-8")


def load_folds(path: str | Path) -> FoldSplit:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"{path} not found")
    return FoldSplit.from_json(json.loads(path.read_text(encoding="utf-8")))


def format_table(split: FoldSplit) -> str:
    """CSV summary: set, number of classes, number of samples."""
    lines = ["set,n_classes,n_samples"]
    lines += [f"{f.name},{len(f.classes)},{len(f.sample_ids)}" for f in split.folds]
    lines.append(f"dropped,,{len(split.dropped)}")
    return "\n".join(lines)
