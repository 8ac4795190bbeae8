import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from irp.ablation import LOSS_LABELS, cell_seed, format_jsonl, format_table, run_ablation, suite_cells
from irp.domain import Corpus
from irp.objectives import LossConfig
from irp.pipeline import TABLE1_FEATURES
from irp.summarize import SummarizerConfig
from irp.training import (
    FINETUNE_PRESET, TrainConfig, TrainingError, calibrate_threshold, evaluate, stratified_order,
    train, with_threshold,
)

from conftest import make_interaction

TINY = {"d_model": 16, "n_layers": 1, "n_heads": 2, "d_ff": 32}


def tiny(**kw):
    return TrainConfig(**({"epochs": 1, "batch_size": 16, "model": TINY} | kw))


def test_zero_learning_rate_keeps_params(small_splits, small_vocab):
    train_split, val_split, _ = small_splits
    from irp.model import init_params
    cfg = tiny(learning_rate=0.0)
    init = init_params(cfg.model_config(len(small_vocab)), seed=5)
    out = train(cfg, Corpus(list(train_split)[:16]), None, small_vocab, init=init)
    for name, t in init.items():
        assert out.params[name].data.tobytes() == t.data.tobytes()


@pytest.mark.parametrize("mode", ["mean", "mmr"])
def test_training_is_deterministic(small_splits, small_vocab, mode):
    train_split, val_split, _ = small_splits
    cfg = tiny(summarizer=SummarizerConfig(mode=mode, mmr_select_n=8), seed=3)
    a = train(cfg, train_split, val_split, small_vocab)
    b = train(cfg, train_split, val_split, small_vocab)
    for name, t in a.params.items():
        assert t.data.tobytes() == b.params[name].data.tobytes()
    assert a.history[0].train_loss == b.history[0].train_loss


def test_bce_decreases(small_vocab):
    from irp.domain import split_corpus
    from irp.synthetic import GeneratorConfig, generate
    tr, va, _ = split_corpus(generate(GeneratorConfig(n=1500, seed=8)), (0.8, 0.1, 0.1), 0)
    from irp.text import build_vocab
    vocab = build_vocab(tr)
    out = train(TrainConfig(epochs=5, model=TINY), tr, va, vocab)
    assert out.history[-1].train_bce < out.history[0].train_bce
    assert [r.epoch for r in out.history] == [1, 2, 3, 4, 5]
    assert all(r.validation.threshold == 0.5 for r in out.history)


@settings(max_examples=50, deadline=None)
@given(n=st.integers(1, 300), batch=st.integers(1, 64), rate=st.floats(0.0, 1.0), seed=st.integers(0, 999))
def test_stratified_batches(n, batch, rate, seed):
    rng = np.random.default_rng(seed)
    labels = (rng.random(n) < rate).astype(int)
    batches = stratified_order(labels, batch, np.random.default_rng(seed))
    flat = np.concatenate(batches)
    assert sorted(flat.tolist()) == list(range(n))
    assert all(len(b) <= batch for b in batches)
    if labels.sum() >= len(batches):
        assert all(labels[b].sum() >= 1 for b in batches)


def test_stratified_default_follows_loss():
    assert not TrainConfig().stratified
    assert TrainConfig(loss=LossConfig("precision")).stratified
    assert TrainConfig(loss=LossConfig("sum")).stratified
    assert not TrainConfig(loss=LossConfig("sum"), stratified_batches=False).stratified


def test_config_round_trip_and_presets():
    cfg = TrainConfig(loss=LossConfig("sum", alpha=0.5), features="utterance+title", model=TINY, seed=4)
    assert TrainConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg
    ft = TrainConfig.from_dict({"preset": "finetune"})
    assert (ft.epochs, ft.batch_size, ft.learning_rate, ft.weight_decay) == (20, 128, 2e-5, 1e-2)
    assert FINETUNE_PRESET["learning_rate"] == 2e-5
    with pytest.raises(ValueError):
        TrainConfig(epochs=0)


def test_empty_training_split(small_vocab):
    with pytest.raises(TrainingError):
        train(tiny(), Corpus([]), None, small_vocab)


class FixedScores:
    """Stands in for a predictor with known scores."""

    def __init__(self, scores, threshold=0.5):
        self.scores = np.asarray(scores, dtype=float)
        self.threshold = threshold

    def probabilities(self, items):
        return self.scores[: len(items)]


def test_evaluate_conventions():
    split = Corpus([make_interaction(label=y) for y in (1, 0, 1, 0)], "test")
    perfect = evaluate(FixedScores([0.9, 0.1, 0.8, 0.2]), split)
    assert (perfect.precision, perfect.recall, perfect.f_beta) == (1.0, 1.0, 1.0)
    negatives = Corpus([make_interaction(label=0) for _ in range(3)], "test")
    rep = evaluate(FixedScores([0.1, 0.2, 0.3]), negatives)
    assert rep.precision == 0.0 and rep.counts.tn == 3
    assert rep.to_dict()["split"] == "test"
    with pytest.raises(ValueError):
        evaluate(FixedScores([]), Corpus([]))


def test_calibrate_threshold_highest_in_gap():
    split = Corpus([make_interaction(label=y) for y in (0, 0, 1, 1)])
    assert calibrate_threshold(FixedScores([0.1, 0.3, 0.6, 0.9]), split) == 0.6


def test_suite_structure():
    base = TrainConfig(seed=17)
    feats = suite_cells("features", base)
    assert [c.row for c in feats] == [fs.name for fs in TABLE1_FEATURES]
    summ = suite_cells("summarization", base)
    assert [c.config.summarizer.mode for c in summ] == ["mean", "mmr"]
    assert all(c.config.features.name == "irp" for c in summ)
    losses = suite_cells("losses", base)
    assert len(losses) == 24
    assert {(c.row, c.config.loss.kind) for c in losses} == {
        (fs, k) for fs in [f.name for f in TABLE1_FEATURES] + ["irp"] for k in ("bce", "precision", "sum")
    }
    seeds = [c.config.seed for c in losses]
    assert len(set(seeds)) == 24
    assert seeds == [c.config.seed for c in suite_cells("losses", base)]
    assert cell_seed(17, "losses", 0) != cell_seed(18, "losses", 0)
    with pytest.raises(ValueError):
        suite_cells("bogus", base)


def test_run_ablation_reports(small_splits, small_vocab):
    rows = run_ablation("summarization", tiny(summarizer=SummarizerConfig(mmr_select_n=8)), small_splits, small_vocab)
    assert [r.row for r in rows] == ["mean", "mmr"]
    assert all(r.loss == LOSS_LABELS["bce"] for r in rows)
    table = format_table(rows)
    lines = table.splitlines()
    assert lines[0].startswith("# suite: summarization")
    assert len(lines) == 4
    records = [json.loads(line) for line in format_jsonl(rows).splitlines()]
    assert [r["row"] for r in records] == ["mean", "mmr"]
    assert set(records[0]) == {"suite", "row", "loss", "precision", "recall", "f05", "threshold", "seed"}


def test_with_threshold_validates(tiny_predictor):
    assert with_threshold(tiny_predictor, 0.3).threshold == 0.3
    with pytest.raises(ValueError):
        with_threshold(tiny_predictor, 1.0)
