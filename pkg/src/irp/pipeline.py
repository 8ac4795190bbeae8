"""End-to-end input construction and prediction for single interactions."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .domain import Interaction, Product, Utterance
from .model import ModelParams, forward_batch, fuse
from .summarize import ALL_FIELDS, SummarizerConfig, candidate_pool, query_ids, select_from_pool, summarize_mean
from .text import TokenSequence, Vocabulary, tokenize_product_summary, tokenize_utterance


@dataclass(frozen=True)
class FeatureSet:
    """Which inputs reach the model.

    ``top_products`` limits the product list before summarisation (the
    single-title rows use only the top-ranked product).
    """

    name: str
    utterance: bool = True
    intent: bool = True
    product_fields: tuple[str, ...] = ALL_FIELDS
    top_products: int | None = None

    def __post_init__(self):
        unknown = set(self.product_fields) - set(ALL_FIELDS)
        if unknown:
            raise ValueError(f"unknown product fields {sorted(unknown)}")
        if not (self.utterance or self.intent or self.product_fields):
            raise ValueError("feature set must enable at least one input")
        object.__setattr__(self, "product_fields", tuple(f for f in ALL_FIELDS if f in self.product_fields))

    @property
    def uses_products(self) -> bool:
        return bool(self.product_fields)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "utterance": self.utterance,
            "intent": self.intent,
            "product_fields": list(self.product_fields),
            "top_products": self.top_products,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureSet":
        d = dict(d)
        d["product_fields"] = tuple(d.get("product_fields", ()))
        return cls(**d)


def _fs(name, utterance=False, intent=False, title=False):
    return FeatureSet(name, utterance, intent, ("title",) if title else (), 1 if title else None)


# row order of the feature-contribution table
TABLE1_FEATURES = (
    _fs("utterance", utterance=True),
    _fs("intent", intent=True),
    _fs("title", title=True),
    _fs("utterance+intent", utterance=True, intent=True),
    _fs("intent+title", intent=True, title=True),
    _fs("utterance+title", utterance=True, title=True),
    _fs("utterance+intent+title", utterance=True, intent=True, title=True),
)
FULL_FEATURES = FeatureSet("irp")
FEATURE_SETS = {fs.name: fs for fs in (*TABLE1_FEATURES, FULL_FEATURES)}


def feature_set(choice) -> FeatureSet:
    if isinstance(choice, FeatureSet):
        return choice
    if isinstance(choice, str):
        try:
            return FEATURE_SETS[choice]
        except KeyError:
            raise ValueError(f"unknown feature set {choice!r}; known: {sorted(FEATURE_SETS)}") from None
    return FeatureSet.from_dict(choice)


@dataclass
class Encoded:
    """Per-interaction token material that does not depend on the weights."""

    seq_u: TokenSequence
    seq_p: TokenSequence | None = None
    pool: list[int] = field(default_factory=list)
    query: list[int] = field(default_factory=list)


class InputBuilder:
    def __init__(self, vocab: Vocabulary, features: FeatureSet, summarizer: SummarizerConfig, max_len: int):
        self.vocab = vocab
        self.features = features
        self.summarizer = summarizer
        self.max_len = max_len

    def encode(self, utterance: Utterance, products: Sequence[Product]) -> Encoded:
        fs = self.features
        seq_u = tokenize_utterance(utterance, self.vocab, use_text=fs.utterance, use_intent=fs.intent)
        enc = Encoded(seq_u)
        if not fs.uses_products:
            return enc
        if not products:
            raise ValueError("products: missing field (this model uses product features)")
        if fs.top_products is not None:
            products = products[: fs.top_products]
        if self.summarizer.mode == "mean":
            summary = summarize_mean(products, fs.product_fields)
            enc.seq_p = tokenize_product_summary(summary, self.vocab, self.summarizer.decimals)
        else:
            enc.pool = candidate_pool(products, fs.product_fields, self.vocab, self.summarizer.decimals)
            enc.query = query_ids(seq_u)
        return enc

    def fused(self, enc: Encoded, embeddings: np.ndarray | None = None) -> TokenSequence:
        seq_p = enc.seq_p
        if self.features.uses_products and self.summarizer.mode == "mmr":
            if embeddings is None:
                raise ValueError("MMR summarisation needs the token-embedding table")
            seq_p = select_from_pool(enc.pool, enc.query, embeddings, self.summarizer)
        return fuse(enc.seq_u, seq_p, self.max_len)

    def build(self, interaction: Interaction, embeddings: np.ndarray | None = None) -> TokenSequence:
        return self.fused(self.encode(interaction.utterance, interaction.products), embeddings)


@dataclass
class Predictor:
    """A trained model bundled with everything needed to score raw interactions."""

    params: ModelParams
    vocab: Vocabulary
    features: FeatureSet
    summarizer: SummarizerConfig
    threshold: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.threshold < 1.0:
            raise ValueError("threshold must lie in (0, 1)")
        self.builder = InputBuilder(self.vocab, self.features, self.summarizer, self.params.config.max_len)

    def probabilities(self, items: Sequence[tuple[Utterance, Sequence[Product]]], batch_size: int = 256) -> np.ndarray:
        emb = self.params["tok_emb"].data
        seqs = [self.builder.fused(self.builder.encode(u, ps), emb) for u, ps in items]
        out = np.empty(len(seqs))
        for start in range(0, len(seqs), batch_size):
            out[start:start + batch_size] = forward_batch(self.params, seqs[start:start + batch_size]).data
        return out

    def predict_proba(self, utterance: Utterance, products: Sequence[Product]) -> float:
        emb = self.params["tok_emb"].data
        X = self.builder.fused(self.builder.encode(utterance, products), emb)
        return float(forward_batch(self.params, [X]).data[0])

    def predict(self, interaction: Interaction) -> tuple[float, int]:
        p = self.predict_proba(interaction.utterance, interaction.products)
        return p, int(p >= self.threshold)


def predict(params: ModelParams, interaction: Interaction, vocab: Vocabulary, summarizer: SummarizerConfig, threshold: float = 0.5, features: FeatureSet = FULL_FEATURES) -> tuple[float, int]:
    return Predictor(params, vocab, features, summarizer, threshold).predict(interaction)
