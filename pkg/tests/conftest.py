import numpy as np
import pytest

from irp.domain import Interaction, Product, Utterance, split_corpus
from irp.model import ModelConfig, init_params
from irp.pipeline import FULL_FEATURES, Predictor
from irp.summarize import SummarizerConfig
from irp.synthetic import GeneratorConfig, generate
from irp.text import build_vocab


def make_product(title="red dress", **kw):
    fields = dict(brand="acme", size="m", color="red", review_count=10, rating=4.0,
                  price=20.0, style="plain", group="apparel", type="dress")
    fields.update(kw)
    return Product(title=title, **fields)


def make_interaction(text="red dress", intent="product_search", label=1, products=None):
    return Interaction(Utterance(text, intent), tuple(products or [make_product()]), label)


@pytest.fixture(scope="session")
def small_corpus():
    return generate(GeneratorConfig(n=400, seed=5))


@pytest.fixture(scope="session")
def small_splits(small_corpus):
    return split_corpus(small_corpus, (0.8, 0.1, 0.1), seed=0)


@pytest.fixture(scope="session")
def small_vocab(small_corpus):
    return build_vocab(small_corpus, min_freq=1)


@pytest.fixture(scope="session")
def tiny_config(small_vocab):
    return ModelConfig(vocab_size=len(small_vocab), d_model=16, n_layers=2, n_heads=2, d_ff=32, max_len=128)


@pytest.fixture
def tiny_predictor(small_vocab, tiny_config):
    params = init_params(tiny_config, seed=11)
    return Predictor(params, small_vocab, FULL_FEATURES, SummarizerConfig(), threshold=0.5)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE: list[str] = []


def record_criterion(number: int, title: str, ok: bool, detail: str = "") -> None:
    """Log one acceptance line; the summary hook prints them after the run."""
    line = f"criterion {number} {'PASS' if ok else 'FAIL'}: {title}"
    ACCEPTANCE.append(line + (f" ({detail})" if detail else ""))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
