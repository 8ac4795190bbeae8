"""Field-wise aggregation of the top-k products and MMR token selection."""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import _kernels
from .domain import PRODUCT_TEXT_FIELDS, Product
from .text import SEG_PRODUCT, SEG_SPECIAL, SEP_ID, TokenSequence, Vocabulary, encode, normalize

logger = logging.getLogger(__name__)

ALL_FIELDS = ("title", "brand", "size", "color", "reviews", "price", "style", "group", "type")
NUMERIC_FIELDS = ("reviews", "price")
SUMMARY_MODES = ("mean", "mmr")


@dataclass(frozen=True)
class SummarizerConfig:
    mode: str = "mean"
    mmr_lambda: float = 0.7
    mmr_select_n: int = 16
    decimals: int = 0

    def __post_init__(self):
        if self.mode not in SUMMARY_MODES:
            raise ValueError(f"mode must be one of {SUMMARY_MODES}")
        if not 0.0 <= self.mmr_lambda <= 1.0:
            raise ValueError("mmr_lambda must lie in [0, 1]")
        if self.mmr_select_n < 1:
            raise ValueError("mmr_select_n must be >= 1")
        if self.decimals < 0:
            raise ValueError("decimals must be >= 0")


def render_number(name: str, value: float, decimals: int = 0) -> str:
    return f"{name}_{value:.{decimals}f}"


def product_field_tokens(product: Product, name: str, decimals: int = 0) -> list[str]:
    if name == "reviews":
        return [render_number("reviews", product.review_count, decimals), render_number("rating", product.rating, decimals)]
    if name == "price":
        return [render_number("price", product.price, decimals)]
    return normalize(getattr(product, name))


@dataclass(frozen=True)
class SummaryRecord:
    text: Mapping[str, str]
    price: float
    review_count: float
    rating: float
    mask: tuple[str, ...]

    def __post_init__(self):
        for name in NUMERIC_FIELDS:
            if name in self.mask and not all(map(math.isfinite, (self.price, self.review_count, self.rating))):
                raise ValueError("active numeric summary fields must be finite")

    def field_tokens(self, name: str, decimals: int = 0) -> list[str]:
        if name == "reviews":
            return [render_number("reviews", self.review_count, decimals), render_number("rating", self.rating, decimals)]
        if name == "price":
            return [render_number("price", self.price, decimals)]
        return normalize(self.text.get(name, ""))


def plurality(values: Sequence[str]) -> str:
    # Counter preserves first-insertion order, so ties go to the best-ranked value
    counts = Counter(values)
    best = max(counts.values())
    return next(v for v, c in counts.items() if c == best)


def summarize_mean(products: Sequence[Product], mask: Sequence[str] = ALL_FIELDS) -> SummaryRecord:
    """Aggregate products field by field: numeric fields by mean, text by plurality."""
    if not products:
        raise ValueError("cannot summarize an empty product list")
    unknown = set(mask) - set(ALL_FIELDS)
    if unknown:
        raise ValueError(f"unknown product fields {sorted(unknown)}")
    k = len(products)
    text = {name: plurality([getattr(p, name) for p in products]) for name in PRODUCT_TEXT_FIELDS}
    return SummaryRecord(
        text=text,
        price=math.fsum(p.price for p in products) / k,
        review_count=math.fsum(p.review_count for p in products) / k,
        rating=math.fsum(p.rating for p in products) / k,
        mask=tuple(f for f in ALL_FIELDS if f in mask),
    )


def cosine(u, v) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")
    nu = math.sqrt(float(np.dot(u, u)))
    nv = math.sqrt(float(np.dot(v, v)))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(np.dot(u, v)) / (nu * nv)


def mmr_select(candidates, query, lam: float = 0.7, n: int = 16) -> list[int]:
    """Greedy Maximal Marginal Relevance over cosine similarity.

    Each step picks the unselected candidate maximising
    ``lam * sim(d, query) - (1 - lam) * max_s sim(d, s)``; the first pick is
    pure relevance and ties go to the lowest index.
    """
    cands = np.ascontiguousarray(candidates, dtype=np.float64)
    if cands.ndim != 2 or cands.shape[0] == 0:
        raise ValueError("mmr_select needs a non-empty 2-D candidate matrix")
    q = np.ascontiguousarray(query, dtype=np.float64)
    if q.shape != (cands.shape[1],):
        raise ValueError(f"query has shape {q.shape}, expected ({cands.shape[1]},)")
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lambda must lie in [0, 1]")
    if n < 1:
        raise ValueError("n must be >= 1")
    return list(_kernels.mmr_greedy(cands, q, float(lam), int(n)))


def candidate_pool(products: Sequence[Product], mask: Sequence[str], vocab: Vocabulary, decimals: int = 0) -> list[int]:
    """Distinct token ids of the active fields, first occurrence kept in rank-then-field order."""
    seen: set[int] = set()
    pool = []
    for p in products:
        for name in ALL_FIELDS:
            if name not in mask:
                continue
            for idx in encode(product_field_tokens(p, name, decimals), vocab):
                if idx not in seen:
                    seen.add(idx)
                    pool.append(idx)
    return pool


def query_ids(utterance_seq: TokenSequence) -> list[int]:
    return [i for i, s in zip(utterance_seq.ids, utterance_seq.segments) if s != SEG_SPECIAL]


def select_from_pool(pool: Sequence[int], query: Sequence[int], embeddings: np.ndarray, config: SummarizerConfig) -> TokenSequence:
    if not pool:
        logger.warning("empty MMR candidate pool; emitting bare delimiters")
        return TokenSequence((SEP_ID, SEP_ID), (SEG_SPECIAL, SEG_SPECIAL))
    if query:
        qvec = embeddings[list(query)].mean(axis=0)
    else:
        qvec = np.zeros(embeddings.shape[1])
    picked = mmr_select(embeddings[list(pool)], qvec, config.mmr_lambda, config.mmr_select_n)
    ids = (SEP_ID, *(pool[j] for j in picked), SEP_ID)
    segs = (SEG_SPECIAL, *([SEG_PRODUCT] * len(picked)), SEG_SPECIAL)
    return TokenSequence(ids, segs)


def select_product_tokens(
    products: Sequence[Product],
    utterance_seq: TokenSequence,
    embeddings: np.ndarray,
    config: SummarizerConfig,
    vocab: Vocabulary,
    mask: Sequence[str] = ALL_FIELDS,
) -> TokenSequence:
    if config.mode != "mmr":
        raise ValueError("select_product_tokens requires mode='mmr'")
    if embeddings.shape[0] < len(vocab):
        raise ValueError("embedding table does not cover the vocabulary")
    pool = candidate_pool(products, mask, vocab, config.decimals)
    return select_from_pool(pool, query_ids(utterance_seq), embeddings, config)
