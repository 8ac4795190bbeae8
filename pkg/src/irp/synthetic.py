"""Proxy-labelled synthetic interactions with a planted visual-intent signal.

Each interaction has a latent visual need ``v``.  The signal reaches the
observations through two channels: the utterance modifier (visual vs
functional lexicon) and the colour/style palette of the retrieved products
(vivid vs muted).  The observed label is ``v`` flipped with probability
``label_noise``.  Because everything else is drawn independently of ``v``,
the observation space relevant to the label is the 2 x 2 grid
(modifier class, palette class) and :func:`bayes_report` is exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources

import numpy as np

from .domain import Corpus, Interaction, Product, Utterance
from .objectives import f_beta

INTENTS = ("product_search", "browse")
P_PRODUCT_SEARCH = 0.9


@dataclass(frozen=True)
class GeneratorConfig:
    n: int = 10_000
    positive_rate: float = 0.20
    label_noise: float = 0.10
    k: int = 10
    cue_strength: tuple[float, float] = (0.9, 0.05)
    product_signal: float = 0.8
    n_categories: int = 40
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "cue_strength", tuple(float(c) for c in self.cue_strength))
        probs = (self.positive_rate, self.label_noise, self.product_signal, *self.cue_strength)
        if len(self.cue_strength) != 2 or not all(0.0 <= q <= 1.0 for q in probs):
            raise ValueError("generator probabilities must lie in [0, 1]")
        if self.n < 1 or self.k < 1:
            raise ValueError("n and k must be >= 1")
        if not 1 <= self.n_categories <= len(lexicons()["categories"]):
            raise ValueError(f"n_categories must be in [1, {len(lexicons()['categories'])}]")

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "positive_rate": self.positive_rate,
            "label_noise": self.label_noise,
            "k": self.k,
            "cue_strength": list(self.cue_strength),
            "product_signal": self.product_signal,
            "n_categories": self.n_categories,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GeneratorConfig":
        d = dict(d)
        if "cue_strength" in d:
            d["cue_strength"] = tuple(d["cue_strength"])
        return cls(**d)


@lru_cache(maxsize=1)
def lexicons() -> dict[str, tuple[str, ...]]:
    text = resources.files("irp").joinpath("resources/lexicons.txt").read_text(encoding="utf-8")
    sections: dict[str, list[str]] = {}
    current = None
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            current = sections.setdefault(line[1:-1], [])
        elif current is None:
            raise ValueError("lexicon entry outside a section")
        else:
            current.append(line)
    return {k: tuple(v) for k, v in sections.items()}


@dataclass(frozen=True)
class _Category:
    noun: str
    group: str
    price_range: tuple[float, float]
    review_range: tuple[int, int]


def _categories(n: int) -> list[_Category]:
    cats = []
    for i, line in enumerate(lexicons()["categories"][:n]):
        noun, group = line.split()
        lo = 5.0 * (1 + i % 8)
        cats.append(_Category(noun, group, (lo, 4.0 * lo), (5 * (1 + i % 3), 60 * (1 + i % 5))))
    return cats


def _pick(rng: np.random.Generator, items):
    return items[int(rng.integers(len(items)))]


def _interaction(config: GeneratorConfig, index: int, cats: list[_Category], lex) -> Interaction:
    rng = np.random.default_rng([config.seed, index])
    v = int(rng.random() < config.positive_rate)
    visual_cue = rng.random() < config.cue_strength[1 - v]
    modifier = _pick(rng, lex["visual_modifiers" if visual_cue else "functional_modifiers"])
    cat = _pick(rng, cats)
    intent = INTENTS[0] if rng.random() < P_PRODUCT_SEARCH else INTENTS[1]
    vivid = v == 1 and rng.random() < config.product_signal
    colors = lex["vivid_colors" if vivid else "muted_colors"]
    styles = lex["vivid_styles" if vivid else "muted_styles"]
    products = []
    for _ in range(config.k):
        brand = _pick(rng, lex["brands"])
        color = _pick(rng, colors)
        style = _pick(rng, styles)
        lo, hi = cat.price_range
        rlo, rhi = cat.review_range
        products.append(
            Product(
                title=f"{brand} {color} {style} {cat.noun}",
                brand=brand,
                size=_pick(rng, lex["sizes"]),
                color=color,
                review_count=int(rng.integers(rlo, rhi + 1)),
                rating=round(float(rng.uniform(2.5, 5.0)), 1),
                price=round(float(rng.uniform(lo, hi)), 2),
                style=style,
                group=cat.group,
                type=cat.noun,
            )
        )
    label = v ^ int(rng.random() < config.label_noise)
    return Interaction(Utterance(f"find me a {modifier} {cat.noun}", intent), tuple(products), label)


def generate(config: GeneratorConfig) -> Corpus:
    """Draw ``config.n`` interactions; a pure function of ``config``.

    Interaction ``i`` uses its own generator seeded with ``(seed, i)``.
    """
    cats = _categories(config.n_categories)
    lex = lexicons()
    return Corpus([_interaction(config, i, cats, lex) for i in range(config.n)])


def is_visual_modifier(word: str) -> bool:
    return word in lexicons()["visual_modifiers"]


def is_vivid_color(word: str) -> bool:
    return word in lexicons()["vivid_colors"]


@dataclass(frozen=True)
class Cell:
    visual_modifier: bool
    vivid_palette: bool
    mass: float
    positive_mass: float

    @property
    def posterior(self) -> float:
        return self.positive_mass / self.mass if self.mass > 0 else 0.0


@dataclass(frozen=True)
class BayesReport:
    precision: float
    recall: float
    f05: float
    threshold: float
    positive_rate: float
    cells: tuple[Cell, ...] = field(repr=False)


def observation_cells(config: GeneratorConfig) -> list[Cell]:
    rho, noise, ps = config.positive_rate, config.label_noise, config.product_signal
    cells = []
    for vis in (True, False):
        for vivid in (True, False):
            mass = pos = 0.0
            for v, pv in ((1, rho), (0, 1.0 - rho)):
                p_mod = config.cue_strength[1 - v] if vis else 1.0 - config.cue_strength[1 - v]
                p_pal = (ps if vivid else 1.0 - ps) if v == 1 else (0.0 if vivid else 1.0)
                joint = pv * p_mod * p_pal
                mass += joint
                pos += joint * ((1.0 - noise) if v == 1 else noise)
            cells.append(Cell(vis, vivid, mass, pos))
    return cells


def bayes_report(config: GeneratorConfig, beta: float = 0.5) -> BayesReport:
    """Best achievable precision/recall/F_beta for the generator's distribution.

    The posterior P(y=1 | modifier class, palette class) is computed exactly
    per cell; predicting positive on the cells whose posterior clears a
    threshold is swept over every distinct posterior, keeping the F_beta
    maximiser (ties go to the higher threshold).
    """
    cells = [c for c in observation_cells(config) if c.mass > 0]
    total_pos = sum(c.positive_mass for c in cells)
    best = (0.0, 0.0, 0.0, 1.0)
    for t in sorted({c.posterior for c in cells}, reverse=True):
        chosen = [c for c in cells if c.posterior >= t]
        tp = sum(c.positive_mass for c in chosen)
        pp = sum(c.mass for c in chosen)
        p = tp / pp if pp > 0 else 0.0
        r = tp / total_pos if total_pos > 0 else 0.0
        f = f_beta(p, r, beta)
        if f > best[2]:
            best = (p, r, f, t)
    return BayesReport(best[0], best[1], best[2], best[3], total_pos, tuple(observation_cells(config)))
