"""Embedding/label data model, on-disk format and synthetic generator.

A dataset directory holds three files:

    meta.json      {"f_a": int, "f_s": int, "t": int}
    classes.json   {label: [F_s numbers]}
    samples.jsonl  one {"id", "labels", "acoustic"} object per line,
                   acoustic given as T segments of F_a features

Acoustic matrices are kept in memory as ``(F_a, T)`` arrays (features x
segments) and transposed on the way to and from disk.
"""

from __future__ import annotations

import json
import math
import shutil
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

PRNG_NAME = "numpy.PCG64"


class DatasetError(Exception):
    pass


class InvalidDataset(DatasetError, ValueError):
    pass


class ParseError(InvalidDataset):
    pass


class DimensionMismatch(InvalidDataset):
    pass


class DatasetNotFound(DatasetError, FileNotFoundError):
    pass


@dataclass(frozen=True)
class Sample:
    id: str
    labels: frozenset[str]
    acoustic: np.ndarray  # (F_a, T)

    def __post_init__(self) -> None:
        object.__setattr__(self, "labels", frozenset(self.labels))
        a = np.array(self.acoustic, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
            raise DimensionMismatch(f"sample {self.id!r}: acoustic must be a non-empty F_a x T matrix")
        if not np.all(np.isfinite(a)):
            raise ParseError(f"sample {self.id!r}: non-finite acoustic value")
        a.setflags(write=False)
        object.__setattr__(self, "acoustic", a)
        if not self.labels:
            raise InvalidDataset(f"sample {self.id!r} has no labels")


@dataclass(frozen=True)
class Dataset:
    samples: tuple[Sample, ...]
    semantics: Mapping[str, np.ndarray]
    f_a: int
    f_s: int
    t: int
    _index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "samples", tuple(self.samples))
        for name in ("f_a", "f_s", "t"):
            if int(getattr(self, name)) < 1:
                raise DimensionMismatch(f"{name} must be a positive integer")
        sem = {}
        for label, vec in self.semantics.items():
            if not isinstance(label, str) or not label:
                raise InvalidDataset("class labels must be non-empty strings")
            v = np.array(vec, dtype=np.float64)
            if v.shape != (self.f_s,):
                raise DimensionMismatch(f"class {label!r}: semantic vector has shape {v.shape}, expected ({self.f_s},)")
            if not np.all(np.isfinite(v)):
                raise ParseError(f"class {label!r}: non-finite semantic value")
            v.setflags(write=False)
            sem[label] = v
        object.__setattr__(self, "semantics", sem)

        index = {}
        for i, s in enumerate(self.samples):
            if s.id in index:
                raise InvalidDataset(f"duplicate sample id {s.id!r}")
            index[s.id] = i
            if s.acoustic.shape != (self.f_a, self.t):
                raise DimensionMismatch(
                    f"sample {s.id!r}: acoustic shape {s.acoustic.shape}, expected ({self.f_a}, {self.t})"
                )
            missing = sorted(s.labels - sem.keys())
            if missing:
                raise DimensionMismatch(f"sample {s.id!r}: label {missing[0]!r} has no semantic vector")
        object.__setattr__(self, "_index", index)

    @property
    def classes(self) -> list[str]:
        return sorted(self.semantics)

    def __len__(self) -> int:
        return len(self.samples)

    def __getitem__(self, sample_id: str) -> Sample:
        return self.samples[self._index[sample_id]]

    def subset(self, sample_ids: Iterable[str], classes: Iterable[str] | None = None) -> Dataset:
        """Restrict to ``sample_ids`` (in the given order) and optionally to ``classes``."""
        samples = [self[i] for i in sample_ids]
        sem = self.semantics if classes is None else {c: self.semantics[c] for c in classes}
        return Dataset(samples, sem, self.f_a, self.f_s, self.t)

    def acoustic_stack(self) -> np.ndarray:
        """All acoustic matrices as an ``(N, F_a, T)`` array."""
        if not self.samples:
            return np.zeros((0, self.f_a, self.t))
        return np.stack([s.acoustic for s in self.samples])

    def semantic_matrix(self, class_order: Sequence[str]) -> np.ndarray:
        """Semantic vectors stacked row-wise in ``class_order``."""
        if not class_order:
            return np.zeros((0, self.f_s))
        return np.stack([self.semantics[c] for c in class_order])


# ---------------------------------------------------------------------------
# on-disk format


def _dumps(obj) -> str:
    # float repr is the shortest string that round-trips bit-exactly
    return json.dumps(obj, ensure_ascii=False, allow_nan=False)


def save_dataset(d: Dataset, path: str | Path, overwrite: bool = False) -> None:
    path = Path(path)
    if path.exists():
        if not overwrite:
            raise FileExistsError(f"{path} already exists (pass overwrite=True to replace it)")
        if path.is_dir():
            shutil.rmtree(path)
        else:
            path.unlink()
    path.mkdir(parents=True)

    meta = {"f_a": d.f_a, "f_s": d.f_s, "t": d.t}
    (path / "meta.json").write_text(_dumps(meta) + "\n", encoding="utf-8")
    classes = {label: d.semantics[label].tolist() for label in d.classes}
    (path / "classes.json").write_text(_dumps(classes) + "\n", encoding="utf-8")
    with open(path / "samples.jsonl", "w", encoding="utf-8", newline="\n") as fh:
        for s in d.samples:
            rec = {"id": s.id, "labels": sorted(s.labels), "acoustic": s.acoustic.T.tolist()}
            fh.write(_dumps(rec) + "\n")


def _read_json(path: Path):
    if not path.is_file():
        raise DatasetNotFound(f"{path} not found")
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: parse error at line {exc.lineno}: {exc.msg}") from exc


def load_dataset(path: str | Path) -> Dataset:
    path = Path(path)
    if not path.is_dir():
        raise DatasetNotFound(f"dataset directory {path} not found")
    meta = _read_json(path / "meta.json")
    try:
        f_a, f_s, t = int(meta["f_a"]), int(meta["f_s"]), int(meta["t"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{path / 'meta.json'}: parse error: expected integer f_a, f_s, t") from exc

    raw_classes = _read_json(path / "classes.json")
    if not isinstance(raw_classes, dict):
        raise ParseError(f"{path / 'classes.json'}: parse error: expected an object")
    semantics = {}
    for label, vec in raw_classes.items():
        if not isinstance(vec, list) or len(vec) != f_s:
            raise DimensionMismatch(f"dimension mismatch: class {label!r} semantic vector must have {f_s} entries")
        semantics[label] = np.array(vec, dtype=np.float64)

    samples_path = path / "samples.jsonl"
    if not samples_path.is_file():
        raise DatasetNotFound(f"{samples_path} not found")
    samples = []
    with open(samples_path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                sid, labels, acoustic = rec["id"], rec["labels"], rec["acoustic"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ParseError(f"{samples_path}: parse error at line {lineno}") from exc
            if not isinstance(acoustic, list) or len(acoustic) != t:
                raise DimensionMismatch(f"dimension mismatch: sample {sid!r} (line {lineno}) must have {t} segments")
            for row in acoustic:
                if not isinstance(row, list) or len(row) != f_a:
                    raise DimensionMismatch(
                        f"dimension mismatch: sample {sid!r} (line {lineno}) segment must have {f_a} features"
                    )
            try:
                a = np.array(acoustic, dtype=np.float64).T
            except (TypeError, ValueError) as exc:
                raise ParseError(f"{samples_path}: parse error at line {lineno}: non-numeric acoustic value") from exc
            samples.append(Sample(str(sid), frozenset(labels), a))
    return Dataset(samples, semantics, f_a, f_s, t)


# ---------------------------------------------------------------------------
# synthetic data


@dataclass(frozen=True)
class SynthSpec:
    n_classes: int = 30
    n_samples: int = 600
    t: int = 10
    f_a: int = 16
    f_s: int = 24
    labels_per_sample_max: int = 3
    noise_sigma: float = 0.1
    seed: int = 42

    def validate(self) -> None:
        for name in ("n_classes", "n_samples", "t", "f_a", "f_s", "labels_per_sample_max"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")
        if self.labels_per_sample_max > self.n_classes:
            raise ValueError(
                f"labels_per_sample_max ({self.labels_per_sample_max}) exceeds n_classes ({self.n_classes})"
            )
        if not math.isfinite(self.noise_sigma) or self.noise_sigma < 0:
            raise ValueError(f"noise_sigma must be a finite nonnegative real, got {self.noise_sigma!r}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


def class_label(i: int, n_classes: int) -> str:
    return f"class{i:0{len(str(n_classes - 1))}d}"


def generate_planted(spec: SynthSpec) -> tuple[Dataset, dict[str, dict[str, tuple[int, int]]], np.ndarray]:
    """Generate a synthetic dataset together with its ground truth.

    Returns the dataset, the planted intervals ``{sample_id: {label: (start, end)}}``
    (0-based, inclusive) and the shared semantic-to-acoustic map ``W`` of shape
    ``(F_a, F_s)``.

    Draw order (part of the format contract, PCG64 seeded with ``spec.seed``):
    class semantics, then ``W``, then each sample in id order (label count,
    labels, one interval per label, noise).
    """
    spec.validate()
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    n_c, t = spec.n_classes, spec.t
    labels = [class_label(i, n_c) for i in range(n_c)]

    phi = rng.standard_normal((n_c, spec.f_s))
    w = rng.standard_normal((spec.f_a, spec.f_s)) / math.sqrt(spec.f_s)
    prototypes = phi @ w.T  # (C, F_a)

    # all contiguous non-empty intervals, drawn uniformly
    intervals = [(a, b) for a in range(t) for b in range(a, t)]

    width = len(str(spec.n_samples - 1))
    samples, truth = [], {}
    for n in range(spec.n_samples):
        sid = f"s{n:0{width}d}"
        k = int(rng.integers(1, spec.labels_per_sample_max + 1))
        chosen = rng.choice(n_c, size=k, replace=False)
        spans = {}
        acoustic = np.zeros((spec.f_a, t))
        for c in chosen:
            a, b = intervals[int(rng.integers(len(intervals)))]
            spans[labels[c]] = (a, b)
            acoustic[:, a : b + 1] += prototypes[c][:, None]
        acoustic += spec.noise_sigma * rng.standard_normal((spec.f_a, t))
        samples.append(Sample(sid, frozenset(spans), acoustic))
        truth[sid] = spans

    semantics = {labels[i]: phi[i] for i in range(n_c)}
    return Dataset(samples, semantics, spec.f_a, spec.f_s, t), truth, w


def generate_synthetic(spec: SynthSpec) -> Dataset:
    return generate_planted(spec)[0]
