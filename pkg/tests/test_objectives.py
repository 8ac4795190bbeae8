import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from irp.autograd import Tensor, grad_check
from irp.objectives import (
    ConfusionCounts, LossConfig, bce_loss, combined_loss, confusion, f_beta, precision,
    precision_loss, recall,
)
from irp.training import best_threshold


def tally(scores, labels, t):
    tp = fp = fn = tn = 0
    for s, y in zip(scores, labels):
        if s >= t:
            tp, fp = tp + (y == 1), fp + (y == 0)
        else:
            fn, tn = fn + (y == 1), tn + (y == 0)
    return tp, fp, fn, tn


def test_bce_examples():
    assert abs(bce_loss([0.5], [1]).item() - math.log(2)) < 1e-12
    assert bce_loss([1 - 1e-7], [1]).item() == pytest.approx(1e-7, rel=1e-3)
    assert bce_loss([0.9, 0.1], [1, 0]).item() == pytest.approx(-math.log(0.9), abs=1e-12)


def test_bce_clamps_extremes():
    assert math.isfinite(bce_loss([0.0, 1.0], [1, 0]).item())


def test_precision_loss_examples():
    assert precision_loss([0.9, 0.8], [1, 1]).item() == pytest.approx(1e-7 / (1.7 + 1e-7), rel=1e-6)
    assert precision_loss([0.5, 0.5], [1, 0]).item() == pytest.approx(0.5, abs=1e-6)
    assert precision_loss([0.3, 0.6], [0, 0]).item() == 1.0


def test_combined_degenerate_weights_bitwise():
    rng = np.random.default_rng(0)
    p = rng.uniform(0.01, 0.99, size=32)
    y = rng.integers(0, 2, size=32)
    bce = bce_loss(p, y).item()
    prec = precision_loss(p, y).item()
    assert combined_loss(p, y, LossConfig("sum", alpha=1, beta_w=0)).item() == bce
    assert combined_loss(p, y, LossConfig("sum", alpha=0, beta_w=1)).item() == prec
    assert combined_loss(p, y, LossConfig("bce")).item() == bce
    assert combined_loss(p, y, LossConfig("precision")).item() == prec


def test_combined_sum_of_worked_batches():
    p, y = [0.9, 0.1], [1, 0]
    expected = -math.log(0.9) + (1 - 0.9 / (1.0 + 1e-7))
    assert combined_loss(p, y, LossConfig("sum")).item() == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("kind", ["bce", "precision", "sum"])
def test_loss_gradients(kind):
    rng = np.random.default_rng(1)
    p = Tensor(rng.uniform(0.05, 0.95, size=12), requires_grad=True)
    y = rng.integers(0, 2, size=12)
    assert grad_check(lambda: combined_loss(p, y, LossConfig(kind)), [p]) < 1e-6


def test_loss_config_validation():
    with pytest.raises(ValueError):
        LossConfig("hinge")
    with pytest.raises(ValueError):
        LossConfig("sum", alpha=0, beta_w=0)
    with pytest.raises(ValueError):
        bce_loss([0.5], [2])


def test_confusion_examples():
    assert confusion([0.9, 0.2], [1, 0], 0.5) == ConfusionCounts(1, 0, 0, 1)
    assert confusion([0.5], [0], 0.5).fp == 1


def test_worked_metrics():
    c = ConfusionCounts(tp=8, fp=2, fn=8, tn=0)
    assert precision(c) == 0.8 and recall(c) == 0.5
    assert abs(f_beta(0.8, 0.5) - 0.714286) < 1e-6


def test_zero_conventions():
    c = ConfusionCounts(0, 0, 3, 5)
    assert precision(c) == 0.0 and recall(c) == 0.0 and f_beta(0.0, 0.0) == 0.0
    assert recall(ConfusionCounts(0, 2, 0, 1)) == 0.0


@given(st.floats(0.001, 1.0), st.floats(0.1, 4.0))
def test_f_beta_symmetry(x, beta):
    assert f_beta(x, x, beta) == pytest.approx(x, rel=1e-12)


def test_metrics_match_tally():
    rng = np.random.default_rng(2024)
    for _ in range(1000):
        n = int(rng.integers(1, 40))
        scores = rng.random(n)
        labels = rng.integers(0, 2, size=n)
        t = float(rng.uniform(0.01, 0.99))
        c = confusion(scores, labels, t)
        tp, fp, fn, tn = tally(scores.tolist(), labels.tolist(), t)
        assert (c.tp, c.fp, c.fn, c.tn) == (tp, fp, fn, tn)
        assert c.total == n
        assert precision(c) == (tp / (tp + fp) if tp + fp else 0.0)
        assert recall(c) == (tp / (tp + fn) if tp + fn else 0.0)


def test_threshold_separated_scores_highest_wins():
    scores = [0.1, 0.2, 0.7, 0.8]
    labels = [0, 0, 1, 1]
    assert best_threshold(scores, labels) == 0.7


def test_threshold_needs_both_classes():
    with pytest.raises(ValueError):
        best_threshold([0.2, 0.4], [1, 1])


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000))
def test_threshold_matches_grid_search(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(4, 60))
    scores = np.round(rng.random(n), 3).clip(0.001, 0.999)
    labels = rng.integers(0, 2, size=n)
    labels[:2] = (0, 1)
    t = best_threshold(scores, labels)

    def f_at(th):
        tp, fp, fn, _ = tally(scores, labels, th)
        p = tp / (tp + fp) if tp + fp else 0.0
        return f_beta(p, tp / (tp + fn))

    grid = np.round(np.arange(1, 1000) * 1e-3, 3)
    best_grid = max(f_at(g) for g in grid)
    assert f_at(t) >= best_grid - 1e-12
    # the grid optimum is reached within one grid step of the chosen threshold
    assert any(abs(g - t) <= 1e-3 + 1e-12 and f_at(g) == pytest.approx(best_grid) for g in grid)
