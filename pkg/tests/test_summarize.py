import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from irp.domain import Utterance
from irp.summarize import (
    SummarizerConfig, candidate_pool, cosine, mmr_select, plurality, select_from_pool,
    select_product_tokens, summarize_mean,
)
from irp.text import SEP_ID, Vocabulary, tokenize_utterance

from conftest import make_product


def brute_force_mmr(cands, query, lam, n):
    """Greedy MMR written directly from the definition with plain floats."""
    def cos(u, v):
        nu = math.sqrt(sum(a * a for a in u))
        nv = math.sqrt(sum(b * b for b in v))
        if nu == 0 or nv == 0:
            return 0.0
        return sum(a * b for a, b in zip(u, v)) / (nu * nv)

    chosen = []
    for _ in range(min(n, len(cands))):
        best, best_score = None, -math.inf
        for i, d in enumerate(cands):
            if i in chosen:
                continue
            if chosen:
                score = lam * cos(d, query) - (1 - lam) * max(cos(d, cands[s]) for s in chosen)
            else:
                score = cos(d, query)
            if score > best_score:
                best, best_score = i, score
        chosen.append(best)
    return chosen


def test_mean_price():
    s = summarize_mean([make_product(price=p) for p in (10, 20, 30)])
    assert s.price == 20.0
    assert s.field_tokens("price") == ["price_20"]


def test_plurality_and_rank_tie_break():
    assert plurality(["red", "red", "blue"]) == "red"
    assert plurality(["red", "blue"]) == "red"
    assert plurality(["blue", "red"]) == "blue"
    s = summarize_mean([make_product(color=c) for c in ("red", "blue")])
    assert s.text["color"] == "red"


def test_reviews_render_two_tokens():
    s = summarize_mean([make_product(review_count=10, rating=4.0), make_product(review_count=30, rating=5.0)])
    assert s.field_tokens("reviews") == ["reviews_20", "rating_4"]


def test_summarize_empty_raises():
    with pytest.raises(ValueError):
        summarize_mean([])


def test_cosine_examples():
    assert cosine((1, 0), (1, 0)) == 1.0
    assert cosine((1, 0), (0, 1)) == 0.0
    assert cosine((0, 0), (3, 4)) == 0.0
    with pytest.raises(ValueError):
        cosine((1, 0), (1, 0, 0))


def test_mmr_worked_example():
    # B and C tie at exactly 0 after A is picked; the lowest index (B) wins
    cands = [(1.0, 0.0), (0.99, 0.1), (0.0, 1.0)]
    assert brute_force_mmr(cands, (1.0, 0.0), 0.5, 2) == [0, 1]
    assert mmr_select(cands, (1.0, 0.0), 0.5, 2) == [0, 1]


def test_mmr_n1_is_argmax():
    rng = np.random.default_rng(0)
    c = rng.standard_normal((7, 4))
    q = rng.standard_normal(4)
    assert mmr_select(c, q, 0.3, 1) == [int(np.argmax([cosine(x, q) for x in c]))]


def test_mmr_returns_min_n_pool():
    assert sorted(mmr_select(np.eye(3), np.ones(3), 0.7, 10)) == [0, 1, 2]


@pytest.mark.parametrize("bad", [dict(lam=-0.1), dict(lam=1.1), dict(n=0)])
def test_mmr_bad_args(bad):
    kw = dict(lam=0.5, n=2) | bad
    with pytest.raises(ValueError):
        mmr_select(np.eye(2), np.ones(2), **kw)


def test_mmr_empty_pool():
    with pytest.raises(ValueError):
        mmr_select(np.zeros((0, 2)), np.ones(2))


def test_mmr_matches_brute_force_seeded():
    for seed in range(100):
        rng = np.random.default_rng(seed)
        m, d, n = rng.integers(1, 7), rng.integers(1, 9), rng.integers(1, 4)
        c = rng.standard_normal((m, d))
        q = rng.standard_normal(d)
        lam = float(rng.uniform())
        assert mmr_select(c, q, lam, n) == brute_force_mmr(c.tolist(), q.tolist(), lam, n), seed


@settings(max_examples=100, deadline=None)
@given(st.data())
def test_lambda_one_is_stable_sort(data):
    m = data.draw(st.integers(1, 6))
    d = data.draw(st.integers(1, 8))
    vals = st.floats(-4, 4, allow_nan=False).map(lambda x: round(x, 1))
    c = np.array([[data.draw(vals) for _ in range(d)] for _ in range(m)])
    q = np.array([data.draw(vals) for _ in range(d)])
    n = data.draw(st.integers(1, 6))
    rel = [cosine(x, q) for x in c]
    expected = sorted(range(m), key=lambda i: -rel[i])[:n]
    assert mmr_select(c, q, 1.0, n) == expected


def test_singleton_pool_selected():
    vocab = Vocabulary(["[PAD]", "[UNK]", "[CLS]", "[SEP]", "dress", "q"])
    emb = np.random.default_rng(0).standard_normal((len(vocab), 4))
    seq_u = tokenize_utterance(Utterance("q", "q"), vocab)
    out = select_product_tokens([make_product(title="dress")], seq_u, emb, SummarizerConfig(mode="mmr"), vocab, ("title",))
    assert out.ids == (SEP_ID, 4, SEP_ID)


def test_identical_embeddings_first_index_first():
    emb = np.zeros((6, 3))
    emb[4] = emb[5] = (1.0, 2.0, 3.0)
    emb[2] = (1.0, 0.0, 0.0)
    out = select_from_pool([5, 4], [2], emb, SummarizerConfig(mode="mmr", mmr_select_n=2))
    assert out.ids == (SEP_ID, 5, 4, SEP_ID)


def test_empty_pool_gives_bare_delimiters():
    out = select_from_pool([], [4], np.zeros((5, 2)), SummarizerConfig(mode="mmr"))
    assert out.ids == (SEP_ID, SEP_ID)


def test_candidate_pool_dedupes_in_rank_order():
    vocab = Vocabulary(["[PAD]", "[UNK]", "[CLS]", "[SEP]", "red", "dress", "blue"])
    products = [make_product(title="red dress"), make_product(title="blue dress")]
    assert candidate_pool(products, ("title",), vocab) == [4, 5, 6]


def test_config_validation():
    with pytest.raises(ValueError):
        SummarizerConfig(mode="median")
    with pytest.raises(ValueError):
        SummarizerConfig(mmr_lambda=2.0)
