"""Rank-weighted pairwise hinge loss and its gradients.

For one clip with attended scores ``y_hat`` over the training classes and a
set of positive class indices, every (positive, negative) pair contributes a
hinge ``max(0, delta + y_neg - y_pos)``. The pair sum of positive ``p`` is
weighted by ``H(r) / r`` where ``r`` is the 1-based rank of ``p`` among all
classes sorted by descending score (ties: lower index first) and ``H`` is the
harmonic partial sum. Batch loss is the mean over clips.

Rank weights are treated as constants when differentiating.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .dataset import Sample
from .model import ModelParams, attended_score, forward


@dataclass
class PositiveTerm:
    rank: int
    penalty_weight: float
    pair_losses: float


@dataclass
class LossBreakdown:
    total: float
    per_positive: dict[int, PositiveTerm] = field(default_factory=dict)


def hinge(y_pos: float, y_neg: float, delta: float) -> float:
    return max(0.0, delta + y_neg - y_pos)


def ranking_penalty(rank: int) -> float:
    if rank < 0:
        raise ValueError(f"rank must be nonnegative, got {rank}")
    return sum(1.0 / j for j in range(1, rank + 1))


def ranks(y_hat: np.ndarray) -> np.ndarray:
    """1-based rank of each entry under descending order, ties by ascending index."""
    order = np.argsort(-np.asarray(y_hat), kind="stable")
    r = np.empty(len(order), dtype=np.int64)
    r[order] = np.arange(1, len(order) + 1)
    return r


def _check(y_hat: np.ndarray, positives: Iterable[int]) -> tuple[np.ndarray, list[int], list[int]]:
    y_hat = np.asarray(y_hat, dtype=np.float64)
    pos = sorted(set(int(i) for i in positives))
    if not pos:
        raise ValueError("positives must be non-empty")
    if pos[0] < 0 or pos[-1] >= len(y_hat):
        raise ValueError("positive index out of range")
    if len(pos) == len(y_hat):
        raise ValueError("positives cover every class; no negatives to rank against")
    neg = [i for i in range(len(y_hat)) if i not in set(pos)]
    return y_hat, pos, neg


def _pair_matrix(y_hat, pos, neg, delta):
    # margins[i, j] = delta + y[neg_j] - y[pos_i]
    return delta + y_hat[neg][None, :] - y_hat[pos][:, None]


def warp_loss(y_hat: Sequence[float], positives: Iterable[int], delta: float = 1.0) -> LossBreakdown:
    y_hat, pos, neg = _check(y_hat, positives)
    r = ranks(y_hat)
    hinges = np.maximum(_pair_matrix(y_hat, pos, neg, delta), 0.0)
    out = LossBreakdown(0.0)
    total = 0.0
    for i, p in enumerate(pos):
        rank = int(r[p])
        w = ranking_penalty(rank) / rank
        pair = float(hinges[i].sum())
        out.per_positive[p] = PositiveTerm(rank, w, pair)
        total += w * pair
    out.total = total
    return out


def warp_grad(y_hat: Sequence[float], positives: Iterable[int], delta: float = 1.0) -> np.ndarray:
    y_hat, pos, neg = _check(y_hat, positives)
    r = ranks(y_hat)
    w = np.array([ranking_penalty(int(r[p])) / r[p] for p in pos])
    active = (_pair_matrix(y_hat, pos, neg, delta) > 0).astype(np.float64)
    g = np.zeros_like(y_hat)
    g[neg] += (w[:, None] * active).sum(axis=0)
    g[pos] -= w * active.sum(axis=1)
    return g


def attended_score_grad(s: np.ndarray, upstream: np.ndarray) -> np.ndarray:
    """Backprop ``upstream`` (dL/dy_hat, shape ``s.shape[:-1]``) through softmax-weighted pooling."""
    e = np.exp(s - s.max(axis=-1, keepdims=True))
    alpha = e / e.sum(axis=-1, keepdims=True)
    y_hat = (alpha * s).sum(axis=-1, keepdims=True)
    return upstream[..., None] * alpha * (1.0 + s - y_hat)


def backward(p: ModelParams, batch: Sequence[tuple[Sample, Iterable[int]]], sem: np.ndarray,
             delta: float = 1.0, uniform_attention: bool = False) -> tuple[float, dict[str, np.ndarray]]:
    """Mean batch loss and its gradient for every parameter array.

    ``sem`` is the ``(C, F_s)`` semantic matrix of the training classes;
    positives index its rows. With ``uniform_attention`` the clip score is the
    plain segment mean instead of the softmax-weighted mean.
    """
    if not batch:
        raise ValueError("empty batch")
    acoustic = np.stack([np.asarray(s.acoustic) for s, _ in batch])
    fw = forward(p, acoustic, np.asarray(sem, dtype=np.float64))
    n, t = len(batch), acoustic.shape[2]

    y_hat = fw.s.mean(axis=-1) if uniform_attention else attended_score(fw.s)

    loss = 0.0
    g_y = np.zeros_like(y_hat)
    for b, (_, positives) in enumerate(batch):
        positives = list(positives)
        if len(set(positives)) == y_hat.shape[1]:
            continue  # no negatives: empty pair sum, zero loss and gradient
        loss += warp_loss(y_hat[b], positives, delta).total
        g_y[b] = warp_grad(y_hat[b], positives, delta)
    loss /= n
    g_y /= n

    if uniform_attention:
        g_s = np.repeat(g_y[..., None] / t, t, axis=-1)
    else:
        g_s = attended_score_grad(fw.s, g_y)

    # s[b,c,t] = sum_d v_c[c,d] v_x[b,d,t]
    g_vc = np.einsum("bct,bdt->cd", g_s, fw.v_x)
    g_vx = np.einsum("cd,bct->bdt", fw.v_c, g_s)

    g_za = g_vx * (1.0 - fw.v_x**2)
    g_W1 = np.einsum("bdt,bft->df", g_za, fw.acoustic)
    g_b1 = g_za.sum(axis=(0, 2))

    g_z2 = g_vc * (1.0 - fw.v_c**2)
    g_V2 = g_z2.T @ fw.hid
    g_c2 = g_z2.sum(axis=0)
    g_z1 = (g_z2 @ p.V2) * (1.0 - fw.hid**2)
    g_V1 = g_z1.T @ fw.sem
    g_c1 = g_z1.sum(axis=0)

    return loss, {"W1": g_W1, "b1": g_b1, "V1": g_V1, "c1": g_c1, "V2": g_V2, "c2": g_c2}
