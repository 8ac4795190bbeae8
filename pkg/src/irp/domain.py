"""Typed interaction records, line-delimited corpus I/O and deterministic splits."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import IO, Any, Iterable, Sequence

import numpy as np

K_MAX = 10
SPLIT_TAGS = ("train", "validation", "test", "unsplit")
PRODUCT_TEXT_FIELDS = ("title", "brand", "size", "color", "style", "group", "type")


class ValidationError(ValueError):
    """Raised when a record violates one or more domain invariants."""

    def __init__(self, errors: Sequence[str], line: int | None = None):
        self.errors = list(errors)
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + "; ".join(self.errors))


@dataclass(frozen=True)
class Utterance:
    text: str
    intent: str


@dataclass(frozen=True)
class Product:
    title: str
    brand: str = ""
    size: str = ""
    color: str = ""
    review_count: int = 0
    rating: float = 0.0
    price: float = 0.0
    style: str = ""
    group: str = ""
    type: str = ""

    def to_record(self) -> dict[str, Any]:
        return {
            "title": self.title,
            "brand": self.brand,
            "size": self.size,
            "color": self.color,
            "reviews": {"count": self.review_count, "rating": self.rating},
            "price": self.price,
            "style": self.style,
            "group": self.group,
            "type": self.type,
        }


@dataclass(frozen=True)
class Interaction:
    utterance: Utterance
    products: tuple[Product, ...]
    label: int

    @property
    def k(self) -> int:
        return len(self.products)

    def to_record(self) -> dict[str, Any]:
        return {
            "query": {"text": self.utterance.text, "intent": self.utterance.intent},
            "products": [p.to_record() for p in self.products],
            "label": self.label,
        }


@dataclass
class Corpus:
    interactions: list[Interaction] = field(default_factory=list)
    split_tag: str = "unsplit"

    def __post_init__(self):
        if self.split_tag not in SPLIT_TAGS:
            raise ValueError(f"unknown split tag {self.split_tag!r}")

    def __len__(self) -> int:
        return len(self.interactions)

    def __iter__(self):
        return iter(self.interactions)

    def __getitem__(self, i):
        return self.interactions[i]

    @property
    def labels(self) -> np.ndarray:
        return np.array([it.label for it in self.interactions], dtype=np.float64)


def _is_number(x: Any) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def _parse_product(raw: Any, where: str, errors: list[str]) -> Product | None:
    if not isinstance(raw, dict):
        errors.append(f"{where}: product must be an object")
        return None
    n_before = len(errors)
    text = {}
    for name in PRODUCT_TEXT_FIELDS:
        value = raw.get(name, "")
        if value is None:
            value = ""
        if not isinstance(value, str):
            errors.append(f"{where}.{name}: must be a string")
            value = ""
        text[name] = value
    if "title" not in raw:
        errors.append(f"{where}.title: missing field")
    elif not text["title"].strip():
        errors.append(f"{where}.title: must be non-empty")

    price = raw.get("price", 0.0)
    if not _is_number(price):
        errors.append(f"{where}.price: must be a finite number")
        price = 0.0
    elif price < 0:
        errors.append(f"{where}.price: negative price")

    reviews = raw.get("reviews", {"count": 0, "rating": 0.0})
    count, rating = 0, 0.0
    if not isinstance(reviews, dict):
        errors.append(f"{where}.reviews: must be an object with count and rating")
    else:
        count = reviews.get("count", 0)
        rating = reviews.get("rating", 0.0)
        if isinstance(count, float) and count.is_integer():
            count = int(count)
        if not isinstance(count, int) or isinstance(count, bool):
            errors.append(f"{where}.reviews.count: must be an integer")
            count = 0
        elif count < 0:
            errors.append(f"{where}.reviews.count: negative count")
        if not _is_number(rating):
            errors.append(f"{where}.reviews.rating: must be a finite number")
            rating = 0.0
        elif not 0.0 <= rating <= 5.0:
            errors.append(f"{where}.reviews.rating: rating out of range [0, 5]")
    if len(errors) > n_before:
        return None
    return Product(
        review_count=int(count),
        rating=float(rating),
        price=float(price),
        **text,
    )


def parse_query(raw: Any, errors: list[str]) -> Utterance | None:
    if "query" not in raw:
        errors.append("query: missing field")
        return None
    query = raw["query"]
    if not isinstance(query, dict):
        errors.append("query: must be an object")
        return None
    text, intent = query.get("text"), query.get("intent")
    ok = True
    if text is None:
        errors.append("query.text: missing field")
        ok = False
    elif not isinstance(text, str) or not text.strip():
        errors.append("query.text: must be non-empty text")
        ok = False
    if intent is None:
        errors.append("query.intent: missing field")
        ok = False
    elif not isinstance(intent, str) or not intent.strip():
        errors.append("query.intent: must be non-empty text")
        ok = False
    return Utterance(text, intent) if ok else None


def parse_products(raw: Any, errors: list[str], *, k_max: int = K_MAX) -> tuple[Product, ...] | None:
    if "products" not in raw:
        errors.append("products: missing field")
        return None
    items = raw["products"]
    if not isinstance(items, list):
        errors.append("products: must be a list")
        return None
    if not items:
        errors.append("products: k = 0 (at least one product required)")
        return None
    if len(items) > k_max:
        errors.append(f"products: k = {len(items)} exceeds k_max = {k_max}")
    parsed = [_parse_product(p, f"products[{j}]", errors) for j, p in enumerate(items)]
    if any(p is None for p in parsed):
        return None
    return tuple(parsed)


def validation_errors(raw: Any, *, k_max: int = K_MAX) -> tuple[Interaction | None, list[str]]:
    errors: list[str] = []
    if not isinstance(raw, dict):
        return None, ["record: must be a JSON object"]
    utterance = parse_query(raw, errors)
    products = parse_products(raw, errors, k_max=k_max)
    label = raw.get("label")
    if "label" not in raw:
        errors.append("label: missing field")
    elif isinstance(label, bool) or label not in (0, 1):
        errors.append("label: label not in {0, 1}")
    if errors:
        return None, errors
    return Interaction(utterance, products, int(label)), []


def validate_interaction(raw: Any, *, k_max: int = K_MAX) -> Interaction:
    """Build an :class:`Interaction` from a decoded record.

    Every violated invariant is collected before raising, so a single
    :class:`ValidationError` lists all problems with the record.
    """
    interaction, errors = validation_errors(raw, k_max=k_max)
    if errors:
        raise ValidationError(errors)
    return interaction


def load_corpus(source: IO, *, split_tag: str = "unsplit", k_max: int = K_MAX) -> Corpus:
    interactions = []
    for lineno, line in enumerate(source, start=1):
        if isinstance(line, bytes):
            line = line.decode("utf-8")
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValidationError([f"parse failure: {exc.msg}"], line=lineno) from None
        interaction, errors = validation_errors(raw, k_max=k_max)
        if errors:
            raise ValidationError(errors, line=lineno)
        interactions.append(interaction)
    return Corpus(interactions, split_tag)


def dumps_interaction(interaction: Interaction) -> str:
    return json.dumps(interaction.to_record(), ensure_ascii=False)


def save_corpus(corpus: Corpus | Iterable[Interaction], sink: IO) -> None:
    binary = "b" in getattr(sink, "mode", "") or not hasattr(sink, "encoding")
    for interaction in corpus:
        line = dumps_interaction(interaction) + "\n"
        sink.write(line.encode("utf-8") if binary else line)


def read_corpus(path, **kwargs) -> Corpus:
    with open(path, "rb") as fh:
        return load_corpus(fh, **kwargs)


def write_corpus(corpus: Corpus, path) -> None:
    with open(path, "wb") as fh:
        save_corpus(corpus, fh)


def split_sizes(n: int, fractions: Sequence[float]) -> tuple[int, int, int]:
    if len(fractions) != 3 or any(f <= 0 for f in fractions) or abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"fractions must be three positive values summing to 1, got {tuple(fractions)}")
    n_val = math.floor(n * fractions[1])
    n_test = math.floor(n * fractions[2])
    return n - n_val - n_test, n_val, n_test


def split_corpus(corpus: Corpus, fractions: Sequence[float] = (0.8, 0.1, 0.1), seed: int = 0) -> tuple[Corpus, Corpus, Corpus]:
    """Shuffle with ``seed`` and cut into train/validation/test.

    Validation and test get ``floor(n * f)`` rows; whatever is left over goes to train.
    """
    n = len(corpus)
    n_train, n_val, _ = split_sizes(n, fractions)
    order = np.random.default_rng(seed).permutation(n)
    items = corpus.interactions
    train = [items[i] for i in order[:n_train]]
    val = [items[i] for i in order[n_train:n_train + n_val]]
    test = [items[i] for i in order[n_train + n_val:]]
    return Corpus(train, "train"), Corpus(val, "validation"), Corpus(test, "test")
