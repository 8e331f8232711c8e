"""Forward pass of the temporal-attention zero-shot tagger.

Shapes used throughout:

    acoustic      (F_a, T)         one clip, features x segments
    v_x           (D, T)           projected segments
    v_c           (D,)             projected class embedding
    s             (C, T)           compatibility of every class with every segment

The audio branch is one dense layer + tanh applied per segment; the semantic
branch is two dense layers (hidden, then D) each followed by tanh.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

INIT_SCHEME = "glorot_uniform/zero_bias"
PARAM_NAMES = ("W1", "b1", "V1", "c1", "V2", "c2")


@dataclass
class HyperParams:
    gamma: float = 0.5
    m_threshold: float = 1.51
    delta: float = 1.0

    def validate(self) -> None:
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")
        if not math.isfinite(self.m_threshold):
            raise ValueError("m_threshold must be finite")
        if not (self.delta >= 0 and math.isfinite(self.delta)):
            raise ValueError(f"delta must be a finite nonnegative real, got {self.delta}")


@dataclass
class ModelParams:
    W1: np.ndarray  # (D, F_a)
    b1: np.ndarray  # (D,)
    V1: np.ndarray  # (H, F_s)
    c1: np.ndarray  # (H,)
    V2: np.ndarray  # (D, H)
    c2: np.ndarray  # (D,)
    seed: int | None = None
    init: str = INIT_SCHEME

    def __post_init__(self) -> None:
        d, f_a = self.W1.shape
        h, f_s = self.V1.shape
        expected = {"b1": (d,), "c1": (h,), "V2": (d, h), "c2": (d,)}
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise ValueError(f"{name} has shape {getattr(self, name).shape}, expected {shape}")

    @property
    def f_a(self) -> int:
        return self.W1.shape[1]

    @property
    def f_s(self) -> int:
        return self.V1.shape[1]

    @property
    def d_model(self) -> int:
        return self.W1.shape[0]

    @property
    def hidden(self) -> int:
        return self.V1.shape[0]

    def arrays(self) -> dict[str, np.ndarray]:
        return {n: getattr(self, n) for n in PARAM_NAMES}

    def copy(self) -> ModelParams:
        return ModelParams(**{n: a.copy() for n, a in self.arrays().items()}, seed=self.seed, init=self.init)


def _glorot(rng: np.random.Generator, fan_out: int, fan_in: int) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_out, fan_in))


def init_params(f_a: int, f_s: int, d_model: int = 128, hidden: int = 512, seed: int = 0,
                rng: np.random.Generator | None = None) -> ModelParams:
    if min(f_a, f_s, d_model, hidden) < 1:
        raise ValueError("all layer sizes must be positive")
    if rng is None:
        rng = np.random.default_rng(seed)
    return ModelParams(
        W1=_glorot(rng, d_model, f_a),
        b1=np.zeros(d_model),
        V1=_glorot(rng, hidden, f_s),
        c1=np.zeros(hidden),
        V2=_glorot(rng, d_model, hidden),
        c2=np.zeros(d_model),
        seed=seed,
    )


# ---------------------------------------------------------------------------
# single-sample operations


def project_audio(p: ModelParams, a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != p.f_a:
        raise ValueError(f"acoustic embedding must be ({p.f_a}, T), got {a.shape}")
    return np.tanh(p.W1 @ a + p.b1[:, None])


def project_semantic(p: ModelParams, sem: np.ndarray) -> np.ndarray:
    """Project one ``(F_s,)`` vector or a ``(C, F_s)`` stack of them."""
    sem = np.asarray(sem, dtype=np.float64)
    if sem.shape[-1] != p.f_s or sem.ndim > 2:
        raise ValueError(f"semantic input must end in dimension {p.f_s}, got {sem.shape}")
    hid = np.tanh(sem @ p.V1.T + p.c1)
    return np.tanh(hid @ p.V2.T + p.c2)


def compatibility(v_x: np.ndarray, v_c: np.ndarray) -> np.ndarray:
    v_x = np.asarray(v_x, dtype=np.float64)
    v_c = np.asarray(v_c, dtype=np.float64)
    if v_x.ndim != 2 or v_c.shape != (v_x.shape[0],):
        raise ValueError(f"cannot score class vector {v_c.shape} against segments {v_x.shape}")
    return v_c @ v_x


def attention_weights(s: np.ndarray) -> np.ndarray:
    """Softmax over the last (segment) axis."""
    s = np.asarray(s, dtype=np.float64)
    e = np.exp(s - s.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def attended_score(s: np.ndarray) -> np.ndarray | float:
    s = np.asarray(s, dtype=np.float64)
    out = (attention_weights(s) * s).sum(axis=-1)
    return float(out) if out.ndim == 0 else out


def uniform_score(s: np.ndarray) -> np.ndarray | float:
    out = np.asarray(s, dtype=np.float64).sum(axis=-1)
    return float(out) if out.ndim == 0 else out


def fuse(y_hat, z_hat, gamma: float):
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"gamma must lie in [0, 1], got {gamma}")
    if gamma == 0.0:
        return z_hat
    if gamma == 1.0:
        return y_hat
    return gamma * y_hat + (1.0 - gamma) * z_hat


@dataclass
class ScoreMatrix:
    s: np.ndarray  # (C, T)
    class_order: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        if len(set(self.class_order)) != len(self.class_order):
            raise ValueError("class_order contains duplicates")
        if self.s.shape[0] != len(self.class_order):
            raise ValueError(f"{self.s.shape[0]} score rows for {len(self.class_order)} classes")

    def row(self, label: str) -> np.ndarray:
        try:
            return self.s[self.class_order.index(label)]
        except ValueError:
            raise KeyError(f"unknown label {label!r}") from None


def score_all(p: ModelParams, sem_table, a: np.ndarray, class_order: Sequence[str]) -> ScoreMatrix:
    missing = [c for c in class_order if c not in sem_table]
    if missing:
        raise KeyError(f"unknown label {missing[0]!r}")
    v_x = project_audio(p, a)
    if not class_order:
        return ScoreMatrix(np.zeros((0, v_x.shape[1])), [])
    v_c = project_semantic(p, np.stack([sem_table[c] for c in class_order]))
    return ScoreMatrix(v_c @ v_x, list(class_order))


def prediction_scores(s: np.ndarray, gamma: float, uniform_attention: bool = False) -> np.ndarray:
    """Fused per-class scores for a ``(..., C, T)`` score array.

    ``uniform_attention`` replaces the softmax weights with 1/T.
    """
    y_hat = s.mean(axis=-1) if uniform_attention else attended_score(s)
    return fuse(y_hat, uniform_score(s), gamma)


def predict_set(scores: ScoreMatrix, h: HyperParams, uniform_attention: bool = False) -> set[str]:
    p_hat = prediction_scores(scores.s, h.gamma, uniform_attention)
    return {c for c, v in zip(scores.class_order, p_hat) if v > h.m_threshold}


def attention_dump(scores: ScoreMatrix, label: str) -> np.ndarray:
    return attention_weights(scores.row(label))


# ---------------------------------------------------------------------------
# batched forward used by training and evaluation


class Forward(NamedTuple):
    acoustic: np.ndarray  # (B, F_a, T)
    sem: np.ndarray       # (C, F_s)
    v_x: np.ndarray       # (B, D, T)
    hid: np.ndarray       # (C, H)
    v_c: np.ndarray       # (C, D)
    s: np.ndarray         # (B, C, T)


def forward(p: ModelParams, acoustic: np.ndarray, sem: np.ndarray) -> Forward:
    acoustic = np.asarray(acoustic, dtype=np.float64)
    if acoustic.ndim != 3 or acoustic.shape[1] != p.f_a:
        raise ValueError(f"acoustic batch must be (B, {p.f_a}, T), got {acoustic.shape}")
    if sem.ndim != 2 or sem.shape[1] != p.f_s:
        raise ValueError(f"semantic matrix must be (C, {p.f_s}), got {sem.shape}")
    v_x = np.tanh(np.einsum("df,bft->bdt", p.W1, acoustic) + p.b1[None, :, None])
    hid = np.tanh(sem @ p.V1.T + p.c1)
    v_c = np.tanh(hid @ p.V2.T + p.c2)
    s = np.einsum("cd,bdt->bct", v_c, v_x)
    return Forward(acoustic, sem, v_x, hid, v_c, s)


# ---------------------------------------------------------------------------
# checkpoints


def save_checkpoint(p: ModelParams, h: HyperParams, path: str | Path, t: int | None = None,
                    extra: dict | None = None) -> None:
    obj = {
        "dims": {"f_a": p.f_a, "f_s": p.f_s, "d_model": p.d_model, "hidden": p.hidden, "t": t},
        "hyperparams": {"gamma": h.gamma, "m_threshold": h.m_threshold, "delta": h.delta},
        "seed": p.seed,
        "init": p.init,
        "weights": {n: a.tolist() for n, a in p.arrays().items()},
    }
    if extra:
        obj.update(extra)
    Path(path).write_text(json.dumps(obj, allow_nan=False) + "\n", encoding="utf-8")


def load_checkpoint(path: str | Path) -> tuple[ModelParams, HyperParams, dict]:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"{path} not found")
    obj = json.loads(path.read_text(encoding="utf-8"))
    try:
        w = {n: np.array(obj["weights"][n], dtype=np.float64) for n in PARAM_NAMES}
        p = ModelParams(**w, seed=obj.get("seed"), init=obj.get("init", INIT_SCHEME))
        h = HyperParams(**obj["hyperparams"])
    except (KeyError, TypeError) as exc:
        raise ValueError(f"{path}: malformed checkpoint ({exc})") from exc
    return p, h, obj
