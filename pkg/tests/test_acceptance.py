"""Acceptance criteria, each run at its stated tolerance.

Every test records one PASS/FAIL line through the ``criterion`` fixture; the
lines are printed in a summary section at the end of the pytest session.
"""

import time
from dataclasses import replace
from itertools import combinations

import numpy as np
import pytest

from oracles import brute_f1, brute_warp, central_difference, softmax_list
from mlzsl.dataset import Dataset, Sample, SynthSpec, generate_planted, generate_synthetic
from mlzsl.experiment import MODES, ExperimentConfig, fold_dataset, run_all_modes
from mlzsl.loss import backward, warp_grad, warp_loss
from mlzsl.metrics import confusion, evaluate, macro_f1, micro_f1
from mlzsl.model import (
    HyperParams,
    attended_score,
    attention_weights,
    forward,
    init_params,
    score_all,
    uniform_score,
)
from mlzsl.splitter import split_folds
from mlzsl.trainer import TrainConfig, train

pytestmark = pytest.mark.acceptance

FIXTURE = SynthSpec()
E2E_TRAIN = TrainConfig(d_model=16)


# ---------------------------------------------------------------------------
# 1. backpropagated gradients against central differences


def _generic_point(rng, f_a=3, f_s=4, hidden=5, d=2, t=3, n_classes=4, batch=2, tol=1e-3):
    """Random parameters and batch with every hinge margin and score gap at least ``tol`` from zero."""
    while True:
        p = init_params(f_a, f_s, d, hidden, rng=rng)
        for a in p.arrays().values():
            a[...] = rng.normal(size=a.shape)
        sem = rng.normal(size=(n_classes, f_s))
        items = []
        for b in range(batch):
            k = int(rng.integers(1, n_classes))
            pos = sorted(rng.choice(n_classes, size=k, replace=False).tolist())
            items.append((Sample(f"s{b}", {"x"}, rng.normal(size=(f_a, t))), pos))
        y = attended_score(forward(p, np.stack([s.acoustic for s, _ in items]), sem).s)
        generic = True
        for b, (_, pos) in enumerate(items):
            neg = [i for i in range(n_classes) if i not in pos]
            gaps = np.abs(y[b][:, None] - y[b][None, :])[~np.eye(n_classes, dtype=bool)]
            margins = np.abs(1.0 + y[b][neg][None, :] - y[b][pos][:, None])
            generic &= gaps.min() >= tol and margins.min() >= tol
        if generic:
            return p, sem, items


def test_gradient_matches_finite_differences(criterion):
    rng = np.random.default_rng(2024)
    step, floor = 1e-4, 1e-8
    start = time.perf_counter()
    worst = 0.0
    for _ in range(20):
        p, sem, batch = _generic_point(rng)
        _, grads = backward(p, batch, sem, 1.0)
        for name, arr in p.arrays().items():
            for idx in np.ndindex(arr.shape):
                fd = central_difference(lambda: backward(p, batch, sem, 1.0)[0], arr, idx, step)
                g = grads[name][idx]
                worst = max(worst, abs(g - fd) / max(abs(g), abs(fd), floor))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-4 and elapsed < 10
    criterion("1 gradient check", ok, f"max rel err {worst:.2e} over 20 points, {elapsed:.1f}s")
    assert worst <= 1e-4
    assert elapsed < 10


# ---------------------------------------------------------------------------
# 2. loss and its gradient against literal pair enumeration


def test_warp_matches_brute_force(criterion):
    rng = np.random.default_rng(7)
    start = time.perf_counter()
    worst = 0.0
    for i in range(1000):
        c = int(rng.integers(2, 7))
        t = int(rng.integers(1, 5))
        s = rng.normal(size=(c, t)) * 1.5
        if i % 4 == 0:
            s = np.round(s, 1)  # coarse grid: ties in scores and margins
        y = attended_score(s)
        if i % 8 == 0:
            y[int(rng.integers(c))] = y[0]  # exact score tie
        pos = rng.choice(c, size=int(rng.integers(1, c)), replace=False).tolist()
        loss, grad = brute_warp(list(y), pos, 1.0)
        worst = max(worst, abs(warp_loss(y, pos, 1.0).total - loss),
                    float(np.abs(warp_grad(y, pos, 1.0) - grad).max()))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-12 and elapsed < 10
    criterion("2 loss oracle", ok, f"max abs diff {worst:.1e} over 1000 instances, {elapsed:.1f}s")
    assert worst <= 1e-12
    assert elapsed < 10


# ---------------------------------------------------------------------------
# 3. attention invariants


def test_attention_invariants(criterion):
    rng = np.random.default_rng(3)
    failures = []
    for i in range(1000):
        t = int(rng.integers(1, 20))
        s = rng.normal(size=t) * float(rng.choice([0.1, 1.0, 10.0]))
        k = float(rng.normal() * 5)
        a = attention_weights(s)
        y = attended_score(s)
        checks = {
            "sum": abs(a.sum() - 1.0) <= 1e-9,
            "positive": bool(np.all(a > 0)),
            "bounded": s.min() - 1e-9 <= y <= s.max() + 1e-9,
            "shift weights": bool(np.allclose(attention_weights(s + k), a, rtol=0, atol=1e-9)),
            "shift score": abs(attended_score(s + k) - (y + k)) <= 1e-9,
            "oracle": bool(np.allclose(a, softmax_list(list(s)), rtol=0, atol=1e-9)),
            "uniform scale": abs(uniform_score(2 * s) - 2 * uniform_score(s)) <= 1e-9,
        }
        failures += [f"row {i}: {name}" for name, ok in checks.items() if not ok]
    criterion("3 attention invariants", not failures, f"{len(failures)} violations in 1000 rows")
    assert not failures, failures[:5]


# ---------------------------------------------------------------------------
# 4. metrics: hand fixtures and the confusion oracle


def test_metrics_fixtures_and_oracle(criterion):
    hand = [
        micro_f1([{"A"}, {"B"}], [{"A"}, {"A"}], ["A", "B"]) == 0.5,
        abs(macro_f1([{"A"}, {"B"}], [{"A"}, {"A"}], ["A", "B"]) - 1 / 3) <= 1e-15,
        abs(macro_f1([{"A"}], [{"A"}], ["A", "B", "C"]) - 1 / 3) <= 1e-15,
        micro_f1([{"A"}, {"B"}], [set(), set()], ["A", "B"]) == 0.0,
    ]
    rng = np.random.default_rng(11)
    mismatches = 0
    for _ in range(1000):
        classes = [f"c{j}" for j in range(int(rng.integers(1, 8)))]
        n = int(rng.integers(1, 15))
        draw = lambda: {c for c in classes if rng.random() < 0.3}  # noqa: E731
        golds, preds = [draw() for _ in range(n)], [draw() for _ in range(n)]
        micro, macro = brute_f1(golds, preds, classes)
        stats = confusion(golds, preds, classes)
        counts = {c: (sum(c in g and c in p for g, p in zip(golds, preds)),
                      sum(c not in g and c in p for g, p in zip(golds, preds)),
                      sum(c in g and c not in p for g, p in zip(golds, preds))) for c in classes}
        rep = evaluate(golds, preds, classes)
        same = all((stats[c].tp, stats[c].fp, stats[c].fn) == counts[c] for c in classes)
        same &= rep.micro_f1 == float(micro) and rep.macro_f1 == float(macro)
        mismatches += not same
    ok = all(hand) and mismatches == 0
    criterion("4 metrics", ok, f"hand fixtures {sum(hand)}/{len(hand)}, oracle mismatches {mismatches}/1000")
    assert all(hand)
    assert mismatches == 0


# ---------------------------------------------------------------------------
# 5. fold splitter


HAND_SETS = [
    {"A", "D"}, {"A", "D"}, {"A", "E"}, {"A", "E"}, {"D", "E"}, {"B"}, {"C"}, {"D"}, {"D"},
    {"E"}, {"E"}, {"F"}, {"F"}, {"F"}, {"F"}, {"F"}, {"B", "C"},
]
HAND_FOLDS = {
    "fold1": {"classes": ["B", "F"], "samples": ["s06", "s12", "s13", "s14", "s15", "s16"]},
    "fold2": {"classes": ["C"], "samples": ["s07"]},
    "fold3": {"classes": ["A", "D", "E"], "samples": ["s01", "s02", "s03", "s04", "s05", "s08", "s09", "s10", "s11"]},
    "dropped": ["s17"],
}


def _split_violations(d, split):
    bad = []
    class_sets = [set(f.classes) for f in split.folds]
    if any(a & b for a, b in combinations(class_sets, 2)):
        bad.append("folds share a class")
    if set().union(*class_sets) != set(d.classes):
        bad.append("class not assigned")
    kept = [sid for f in split.folds for sid in f.sample_ids]
    if len(kept) != len(set(kept)) or set(kept) & set(split.dropped):
        bad.append("sample in two places")
    if len(kept) + len(split.dropped) != len(d):
        bad.append("sample lost")
    for f, cs in zip(split.folds, class_sets):
        if any(not d[sid].labels <= cs for sid in f.sample_ids):
            bad.append(f"{f.name} holds a sample with foreign labels")
    if any(any(d[sid].labels <= cs for cs in class_sets) for sid in split.dropped):
        bad.append("dropped sample fits a fold")
    return bad


def test_splitter_hand_trace_and_properties(criterion):
    samples = [Sample(f"s{i + 1:02d}", labels, np.zeros((1, 1))) for i, labels in enumerate(HAND_SETS)]
    hand = Dataset(samples, {c: [0.0] for c in "ABCDEF"}, 1, 1, 1)
    hand_ok = split_folds(hand).to_json() == HAND_FOLDS

    rng = np.random.default_rng(5)
    start = time.perf_counter()
    violations = []
    for i in range(100):
        n_classes = int(rng.integers(3, 31))
        spec = SynthSpec(n_classes=n_classes, n_samples=int(rng.integers(1, 200)), t=2, f_a=2, f_s=2,
                         labels_per_sample_max=int(min(n_classes, rng.integers(1, 4))), seed=int(rng.integers(2**31)))
        d = generate_synthetic(spec)
        split = split_folds(d)
        violations += [f"dataset {i}: {v}" for v in _split_violations(d, split)]
        if split_folds(d) != split:
            violations.append(f"dataset {i}: not deterministic")
    elapsed = time.perf_counter() - start
    ok = hand_ok and not violations and elapsed < 30
    criterion("5 splitter", ok, f"hand trace {'ok' if hand_ok else 'differs'}, "
              f"{len(violations)} violations over 100 datasets, {elapsed:.1f}s")
    assert hand_ok
    assert not violations, violations[:5]
    assert elapsed < 30


# ---------------------------------------------------------------------------
# 6. end to end on the synthetic fixture, 8. determinism


def _comparison():
    d = generate_synthetic(FIXTURE)
    split = split_folds(d)
    cfg = ExperimentConfig(setting="all", out_dir="", train=E2E_TRAIN, n_runs=3)
    return run_all_modes(d, split, cfg)


@pytest.fixture(scope="module")
def comparison():
    start = time.perf_counter()
    tables = _comparison()
    return tables, time.perf_counter() - start


def test_end_to_end_orderings(comparison, criterion):
    tables, elapsed = comparison
    assert tuple(tables) == MODES
    by_mode = {m: {r.setting: r for r in t.rows} for m, t in tables.items()}
    ok = True
    for setting in (1, 2, 3):
        att = by_mode["zero_shot"][setting].macro_f1
        uni = by_mode["uniform_aggregation"][setting].macro_f1
        zr = by_mode["zero_rule"][setting].macro_f1
        ok &= criterion(f"6 setting {setting}: attention macro > uniform macro", att > uni,
                        f"{att:.4f} vs {uni:.4f}")
        ok &= criterion(f"6 setting {setting}: attention macro > zero-rule macro", att > zr,
                        f"{att:.4f} vs {zr:.4f}")
    sup, zs = tables["supervised"].mean_micro_f1, tables["zero_shot"].mean_micro_f1
    ok &= criterion("6 supervised mean micro > zero-shot mean micro", sup > zs, f"{sup:.4f} vs {zs:.4f}")
    ok &= criterion("6 runtime under 5 min", elapsed < 300, f"{elapsed:.1f}s")
    assert ok


# ---------------------------------------------------------------------------
# 7. attention localisation on single-event probes


def test_attention_localisation(criterion):
    start = time.perf_counter()
    d = generate_synthetic(FIXTURE)
    split = split_folds(d)
    # setting 1: train fold2, validate on fold3
    p, _ = train(fold_dataset(d, split, "fold2"), fold_dataset(d, split, "fold3"), replace(E2E_TRAIN, seed=0),
                 HyperParams())
    # same seed -> same class semantics and generative map; one noiseless event per probe
    probes, truth, _ = generate_planted(replace(FIXTURE, n_samples=100, labels_per_sample_max=1, noise_sigma=0.0))
    classes = probes.classes
    sem_table = {c: probes.semantics[c] for c in classes}
    hits = 0
    for s in probes.samples:
        (label, (lo, hi)), = truth[s.id].items()
        scores = score_all(p, sem_table, s.acoustic, classes)
        peak = int(np.argmax(attention_weights(scores.row(label))))
        hits += lo <= peak <= hi
    elapsed = time.perf_counter() - start
    ok = hits >= 90 and elapsed < 120
    criterion("7 attention localisation", ok, f"{hits}/100 peaks inside the event, {elapsed:.1f}s")
    assert hits >= 90
    assert elapsed < 120


def test_end_to_end_deterministic(comparison, criterion):
    tables, _ = comparison
    again = _comparison()
    same = all(tables[m].to_json() == again[m].to_json() for m in MODES)
    criterion("8 determinism", same, "rerun reports identical" if same else "rerun reports differ")
    assert same
