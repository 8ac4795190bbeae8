"""Word-level vocabulary and the utterance / product-summary tokenizers."""

from __future__ import annotations

import hashlib
import logging
import string
from collections import Counter
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, Sequence

if TYPE_CHECKING:
    from .domain import Corpus, Utterance
    from .summarize import SummaryRecord

logger = logging.getLogger(__name__)

PAD, UNK, CLS, SEP = "[PAD]", "[UNK]", "[CLS]", "[SEP]"
PAD_ID, UNK_ID, CLS_ID, SEP_ID = 0, 1, 2, 3
SPECIAL_TOKENS = (PAD, UNK, CLS, SEP)

SEG_SPECIAL, SEG_UTTERANCE, SEG_PRODUCT = "special", "utterance", "product"

_EDGE = string.punctuation


def normalize(text: str) -> list[str]:
    """Lowercase, split on whitespace and strip punctuation from token edges.

    >>> normalize("Show me RED dresses!")
    ['show', 'me', 'red', 'dresses']
    >>> normalize("4K-TV, 55in")
    ['4k-tv', '55in']
    """
    tokens = []
    for raw in text.lower().split():
        tok = raw.strip(_EDGE)
        if tok:
            tokens.append(tok)
    return tokens


def intent_token(intent: str) -> str:
    # one opaque token per intent label
    return "_".join(intent.lower().split())


class Vocabulary:
    def __init__(self, tokens: Sequence[str]):
        if tuple(tokens[:4]) != SPECIAL_TOKENS:
            raise ValueError("vocabulary must start with [PAD], [UNK], [CLS], [SEP]")
        if len(set(tokens)) != len(tokens):
            raise ValueError("vocabulary tokens must be unique")
        self._itos = list(tokens)
        self._stoi = {t: i for i, t in enumerate(self._itos)}

    def __len__(self) -> int:
        return len(self._itos)

    @property
    def size(self) -> int:
        return len(self._itos)

    def __contains__(self, token: str) -> bool:
        return token in self._stoi

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self._itos == other._itos

    def id_of(self, token: str) -> int:
        return self._stoi.get(token, UNK_ID)

    def token_of(self, idx: int) -> str:
        return self._itos[idx]

    @property
    def tokens(self) -> list[str]:
        return list(self._itos)

    def dumps(self) -> str:
        return "".join(f"{tok}\t{i}\n" for i, tok in enumerate(self._itos))

    def digest(self) -> str:
        return hashlib.sha256(self.dumps().encode("utf-8")).hexdigest()

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.dumps())

    @classmethod
    def loads(cls, text: str) -> "Vocabulary":
        tokens = []
        for lineno, line in enumerate(text.splitlines()):
            if not line:
                continue
            tok, _, idx = line.rpartition("\t")
            if not tok or int(idx) != len(tokens):
                raise ValueError(f"vocabulary line {lineno}: expected id {len(tokens)}")
            tokens.append(tok)
        return cls(tokens)

    @classmethod
    def load(cls, path) -> "Vocabulary":
        with open(path, encoding="utf-8") as fh:
            return cls.loads(fh.read())


def corpus_tokens(corpus: "Corpus", decimals: int = 0) -> Iterable[str]:
    from .summarize import product_field_tokens, summarize_mean, ALL_FIELDS

    for it in corpus:
        yield from normalize(it.utterance.text)
        yield intent_token(it.utterance.intent)
        for p in it.products:
            for name in ALL_FIELDS:
                yield from product_field_tokens(p, name, decimals)
        # numeric means of the summary become their own tokens
        summary = summarize_mean(it.products, ("reviews", "price"))
        yield from summary.field_tokens("reviews", decimals)
        yield from summary.field_tokens("price", decimals)


def build_vocab(corpus: "Corpus", min_freq: int = 2, max_size: int = 20_000, decimals: int = 0) -> Vocabulary:
    """Ids are assigned by descending frequency, ties broken lexicographically."""
    if len(corpus) == 0:
        raise ValueError("cannot build a vocabulary from an empty corpus")
    if min_freq < 1:
        raise ValueError("min_freq must be >= 1")
    counts = Counter(corpus_tokens(corpus, decimals))
    for special in SPECIAL_TOKENS:
        counts.pop(special, None)
    kept = sorted((t for t, c in counts.items() if c >= min_freq), key=lambda t: (-counts[t], t))
    return Vocabulary(list(SPECIAL_TOKENS) + kept[: max(0, max_size - len(SPECIAL_TOKENS))])


def encode(tokens: Iterable[str], vocab: Vocabulary) -> list[int]:
    return [vocab.id_of(t) for t in tokens]


def decode(ids: Iterable[int], vocab: Vocabulary) -> list[str]:
    return [vocab.token_of(i) for i in ids]


@dataclass(frozen=True)
class TokenSequence:
    ids: tuple[int, ...]
    segments: tuple[str, ...]

    def __post_init__(self):
        if len(self.ids) < 1:
            raise ValueError("token sequence must be non-empty")
        if len(self.ids) != len(self.segments):
            raise ValueError("segments must align with ids")

    def __len__(self) -> int:
        return len(self.ids)


class _Builder:
    def __init__(self):
        self.ids: list[int] = []
        self.segments: list[str] = []

    def special(self, idx: int):
        self.ids.append(idx)
        self.segments.append(SEG_SPECIAL)

    def extend(self, ids: Sequence[int], segment: str):
        self.ids.extend(ids)
        self.segments.extend([segment] * len(ids))

    def build(self) -> TokenSequence:
        return TokenSequence(tuple(self.ids), tuple(self.segments))


def tokenize_utterance(utterance: "Utterance", vocab: Vocabulary, *, use_text: bool = True, use_intent: bool = True) -> TokenSequence:
    """Layout ``[CLS] text [SEP] intent [SEP]``; disabled segments are dropped."""
    b = _Builder()
    b.special(CLS_ID)
    if use_text:
        words = normalize(utterance.text)
        if not words:
            logger.warning("utterance %r is empty after normalization", utterance.text)
        b.extend(encode(words, vocab), SEG_UTTERANCE)
        b.special(SEP_ID)
    if use_intent:
        b.extend([vocab.id_of(intent_token(utterance.intent))], SEG_UTTERANCE)
        b.special(SEP_ID)
    return b.build()


def tokenize_product_summary(summary: "SummaryRecord", vocab: Vocabulary, decimals: int = 0) -> TokenSequence:
    """``[SEP] field tokens [SEP] ...`` in fixed field order, empty fields collapsed."""
    from .summarize import ALL_FIELDS

    b = _Builder()
    b.special(SEP_ID)
    for name in ALL_FIELDS:
        if name not in summary.mask:
            continue
        toks = summary.field_tokens(name, decimals)
        if toks:
            b.extend(encode(toks, vocab), SEG_PRODUCT)
            b.special(SEP_ID)
    return b.build()
