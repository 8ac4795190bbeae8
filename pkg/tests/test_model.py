import numpy as np
import pytest

from irp.autograd import grad_check
from irp.model import (
    ModelConfig, SequenceTooLong, check_layout, forward, forward_batch, forward_ids, fuse,
    init_params, param_shapes,
)
from irp.objectives import LossConfig, combined_loss
from irp.pipeline import FEATURE_SETS, FULL_FEATURES, TABLE1_FEATURES, InputBuilder, feature_set, predict
from irp.summarize import SummarizerConfig
from irp.text import CLS_ID, SEG_PRODUCT, SEG_SPECIAL, SEG_UTTERANCE, SEP_ID, TokenSequence

from conftest import make_interaction


def useq(n):
    """[CLS] w.. [SEP] intent [SEP] of total length n."""
    ids = (CLS_ID, *[7] * (n - 4), SEP_ID, 8, SEP_ID)
    segs = (SEG_SPECIAL, *[SEG_UTTERANCE] * (n - 4), SEG_SPECIAL, SEG_UTTERANCE, SEG_SPECIAL)
    return TokenSequence(ids, segs)


def pseq(n):
    ids = (SEP_ID, *[9] * (n - 2), SEP_ID)
    segs = (SEG_SPECIAL, *[SEG_PRODUCT] * (n - 2), SEG_SPECIAL)
    return TokenSequence(ids, segs)


def test_fuse_lengths():
    X = fuse(useq(6), pseq(10), 128)
    assert len(X) == 15
    check_layout(X)
    assert fuse(useq(6), None, 128) == useq(6)


def test_fuse_truncation_keeps_final_sep():
    X = fuse(useq(120), pseq(30), 128)
    assert len(X) == 128
    assert X.ids[120:] == (9,) * 7 + (SEP_ID,)


def test_fuse_rejects_long_utterance():
    with pytest.raises(SequenceTooLong):
        fuse(useq(130), pseq(5), 128)


def test_init_deterministic():
    cfg = ModelConfig(vocab_size=30, d_model=8, n_heads=2, d_ff=16)
    a, b = init_params(cfg, 3), init_params(cfg, 3)
    for name in param_shapes(cfg):
        assert a[name].data.tobytes() == b[name].data.tobytes()
    assert not np.array_equal(a["tok_emb"].data, init_params(cfg, 4)["tok_emb"].data)
    assert not a["head.b"].data.any()


def test_config_validation():
    with pytest.raises(ValueError):
        ModelConfig(vocab_size=30, d_model=10, n_heads=3)
    with pytest.raises(ValueError):
        ModelConfig(vocab_size=30, dropout=1.0)


def test_forward_range_and_zero_head():
    cfg = ModelConfig(vocab_size=30, d_model=8, n_heads=2, d_ff=16)
    params = init_params(cfg, 0)
    X = fuse(useq(6), pseq(5), cfg.max_len)
    p = forward(params, X)
    assert 0.0 < p < 1.0
    params["head.w"].data[:] = 0.0
    assert forward(params, X) == 0.5


def test_padding_does_not_change_cls():
    cfg = ModelConfig(vocab_size=30, d_model=8, n_heads=2, d_ff=16, dropout=0.0)
    params = init_params(cfg, 1)
    short = fuse(useq(6), None, cfg.max_len)
    long = fuse(useq(9), pseq(6), cfg.max_len)
    alone = forward(params, short)
    batched = forward_batch(params, [short, long]).data[0]
    assert batched == pytest.approx(alone, abs=1e-14)


def test_dropout_needs_rng():
    cfg = ModelConfig(vocab_size=30, d_model=8, n_heads=2, d_ff=16)
    with pytest.raises(ValueError):
        forward(init_params(cfg), useq(6), train=True)


@pytest.mark.parametrize("kind", ["bce", "precision", "sum"])
def test_end_to_end_gradients(kind):
    cfg = ModelConfig(vocab_size=12, d_model=8, n_layers=2, n_heads=2, d_ff=16, max_len=16, dropout=0.0)
    params = init_params(cfg, 0)
    rng = np.random.default_rng(0)
    ids = rng.integers(4, 12, size=(4, 7))
    ids[:, 0] = CLS_ID
    lengths = np.array([7, 5, 6, 3])
    y = np.array([1, 0, 1, 0])
    tensors = [params[n] for n in params]
    fn = lambda: combined_loss(forward_ids(params, ids, lengths), y, LossConfig(kind))
    assert grad_check(fn, tensors, n_coords=20, seed=1) < 1e-4


def test_table1_rows_and_feature_lookup():
    assert [fs.name for fs in TABLE1_FEATURES] == [
        "utterance", "intent", "title", "utterance+intent", "intent+title",
        "utterance+title", "utterance+intent+title",
    ]
    assert len(FEATURE_SETS) == 8
    assert feature_set("irp") is FULL_FEATURES
    with pytest.raises(ValueError):
        feature_set("nope")


def test_builder_layouts(small_vocab):
    it = make_interaction()
    title = InputBuilder(small_vocab, FEATURE_SETS["title"], SummarizerConfig(), 128).build(it)
    # title-only: [CLS] title tokens [SEP]
    assert title.segments[1:-1] == (SEG_PRODUCT,) * (len(title) - 2)
    check_layout(title)
    utt = InputBuilder(small_vocab, FEATURE_SETS["utterance"], SummarizerConfig(), 128).build(it)
    assert utt.ids[-1] == SEP_ID and SEG_PRODUCT not in utt.segments
    full = InputBuilder(small_vocab, FULL_FEATURES, SummarizerConfig(), 128).build(it)
    check_layout(full)
    assert full.ids.count(CLS_ID) == 1 and SEG_PRODUCT in full.segments


def test_mmr_builder_uses_embeddings(small_vocab, tiny_config):
    params = init_params(tiny_config, 0)
    b = InputBuilder(small_vocab, FULL_FEATURES, SummarizerConfig(mode="mmr", mmr_select_n=4), 128)
    it = make_interaction()
    with pytest.raises(ValueError):
        b.build(it)
    X = b.build(it, params["tok_emb"].data)
    check_layout(X)
    assert X.segments.count(SEG_PRODUCT) <= 4


def test_missing_products_named(tiny_predictor):
    with pytest.raises(ValueError, match="products"):
        tiny_predictor.predict_proba(make_interaction().utterance, ())


def test_predict_threshold_convention(tiny_predictor):
    it = make_interaction()
    p, _ = tiny_predictor.predict(it)
    from dataclasses import replace
    assert replace(tiny_predictor, threshold=p).predict(it) == (p, 1)
    assert tiny_predictor.predict(it) == tiny_predictor.predict(it)
    assert predict(tiny_predictor.params, it, tiny_predictor.vocab, SummarizerConfig(), 0.5)[0] == p


def test_batched_probabilities_match_single(tiny_predictor, small_corpus):
    items = [(it.utterance, it.products) for it in list(small_corpus)[:20]]
    batched = tiny_predictor.probabilities(items, batch_size=7)
    single = [tiny_predictor.predict_proba(u, ps) for u, ps in items]
    np.testing.assert_allclose(batched, single, rtol=0, atol=1e-14)
