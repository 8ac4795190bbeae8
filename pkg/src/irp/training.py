"""Training loop, evaluation and decision-threshold calibration."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np

from .autograd import NonFiniteError, OptimizerState, Tape, adamw_step
from .domain import Corpus
from .model import ModelConfig, ModelParams, forward_batch, init_params
from .objectives import ConfusionCounts, LossConfig, combined_loss, confusion, f_beta, precision, recall
from .pipeline import FULL_FEATURES, FeatureSet, InputBuilder, Predictor, feature_set
from .summarize import SummarizerConfig
from .text import Vocabulary

logger = logging.getLogger(__name__)

F_BETA = 0.5


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 5
    batch_size: int = 32
    learning_rate: float = 1e-3
    weight_decay: float = 1e-2
    loss: LossConfig = field(default_factory=LossConfig)
    features: FeatureSet = FULL_FEATURES
    summarizer: SummarizerConfig = field(default_factory=SummarizerConfig)
    seed: int = 0
    stratified_batches: bool | None = None
    model: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be non-negative")
        object.__setattr__(self, "features", feature_set(self.features))

    @property
    def stratified(self) -> bool:
        if self.stratified_batches is None:
            return self.loss.kind in ("precision", "sum")
        return self.stratified_batches

    def model_config(self, vocab_size: int) -> ModelConfig:
        fusion = "mmr" if self.summarizer.mode == "mmr" else "full_concat"
        return ModelConfig(vocab_size=vocab_size, fusion_mode=fusion, **self.model)

    def to_dict(self) -> dict:
        return {
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "learning_rate": self.learning_rate,
            "weight_decay": self.weight_decay,
            "loss": asdict(self.loss),
            "features": self.features.to_dict(),
            "summarizer": asdict(self.summarizer),
            "seed": self.seed,
            "stratified_batches": self.stratified_batches,
            "model": dict(self.model),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        preset = d.pop("preset", None)
        base = PRESETS[preset] if preset else {}
        merged = {**base, **d}
        if "loss" in merged and isinstance(merged["loss"], dict):
            merged["loss"] = LossConfig(**merged["loss"])
        if "summarizer" in merged and isinstance(merged["summarizer"], dict):
            merged["summarizer"] = SummarizerConfig(**merged["summarizer"])
        if "features" in merged:
            merged["features"] = feature_set(merged["features"])
        return cls(**merged)


# learning rate and batch size used for fine-tuning pretrained backbones
FINETUNE_PRESET = {"epochs": 20, "batch_size": 128, "learning_rate": 2e-5, "weight_decay": 1e-2}
DESK_PRESET = {"epochs": 5, "batch_size": 32, "learning_rate": 1e-3, "weight_decay": 1e-2}
PRESETS = {"finetune": FINETUNE_PRESET, "desk": DESK_PRESET}


@dataclass(frozen=True)
class EvalReport:
    precision: float
    recall: float
    f_beta: float
    counts: ConfusionCounts
    threshold: float
    split: str

    @classmethod
    def from_counts(cls, counts: ConfusionCounts, threshold: float, split: str) -> "EvalReport":
        p, r = precision(counts), recall(counts)
        return cls(p, r, f_beta(p, r, F_BETA), counts, threshold, split)

    def to_dict(self) -> dict:
        return {
            "split": self.split,
            "threshold": self.threshold,
            "precision": self.precision,
            "recall": self.recall,
            "f05": self.f_beta,
            **asdict(self.counts),
        }


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    train_bce: float
    validation: EvalReport | None


@dataclass
class TrainResult:
    params: ModelParams
    history: list[EpochRecord]
    predictor: Predictor


def stratified_order(labels: np.ndarray, batch_size: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Shuffled batches with positives spread evenly across them.

    When there are at least as many positives as batches, every batch gets
    at least one.
    """
    n = len(labels)
    pos = rng.permutation(np.flatnonzero(labels == 1))
    neg = rng.permutation(np.flatnonzero(labels != 1))
    n_batches = math.ceil(n / batch_size)
    sizes = [min(batch_size, n - b * batch_size) for b in range(n_batches)]
    if len(pos) >= n_batches:
        extra = len(pos) - n_batches
        capacity = [s - 1 for s in sizes]
        total = sum(capacity)
        cum = np.floor(np.cumsum(capacity) * extra / total).astype(int) if total else np.zeros(n_batches, int)
        share = np.diff(np.concatenate([[0], cum])) + 1
    else:
        cum = np.floor(np.cumsum(sizes) * len(pos) / n).astype(int)
        share = np.diff(np.concatenate([[0], cum]))
    batches = []
    pi = ni = 0
    for size, k in zip(sizes, share):
        idx = np.concatenate([pos[pi:pi + k], neg[ni:ni + size - k]])
        pi += k
        ni += size - k
        batches.append(rng.permutation(idx))
    return batches


def shuffled_order(n: int, batch_size: int, rng: np.random.Generator) -> list[np.ndarray]:
    order = rng.permutation(n)
    return [order[i:i + batch_size] for i in range(0, n, batch_size)]


def _bce_value(p: np.ndarray, y: np.ndarray, eps: float) -> float:
    pc = np.clip(p, eps, 1.0 - eps)
    return float(-np.mean(y * np.log(pc) + (1.0 - y) * np.log(1.0 - pc)))


def train(
    config: TrainConfig,
    train_split: Corpus,
    val_split: Corpus | None,
    vocab: Vocabulary,
    init: ModelParams | None = None,
) -> TrainResult:
    """AdamW training; a deterministic function of ``config`` and the data."""
    if len(train_split) == 0:
        raise TrainingError("training split is empty")
    model_cfg = config.model_config(len(vocab))
    params = init.copy() if init is not None else init_params(model_cfg, config.seed)
    builder = InputBuilder(vocab, config.features, config.summarizer, model_cfg.max_len)
    encoded = [builder.encode(it.utterance, it.products) for it in train_split]
    dynamic = config.features.uses_products and config.summarizer.mode == "mmr"
    static_seqs = None if dynamic else [builder.fused(e) for e in encoded]
    labels = train_split.labels
    state = OptimizerState(lr=config.learning_rate, weight_decay=config.weight_decay)
    order_rng = np.random.default_rng([config.seed, 1])
    dropout_rng = np.random.default_rng([config.seed, 2])
    names = {id(t): name for name, t in params.items()}
    history = []

    for epoch in range(1, config.epochs + 1):
        if config.stratified:
            batches = stratified_order(labels, config.batch_size, order_rng)
        else:
            batches = shuffled_order(len(labels), config.batch_size, order_rng)
        losses, bces, sizes = [], [], []
        for b, idx in enumerate(batches):
            if dynamic:
                emb = params["tok_emb"].data
                seqs = [builder.fused(encoded[i], emb) for i in idx]
            else:
                seqs = [static_seqs[i] for i in idx]
            y = labels[idx]
            try:
                with Tape() as tape:
                    p = forward_batch(params, seqs, train=True, rng=dropout_rng)
                    loss = combined_loss(p, y, config.loss)
                grads = tape.backward(loss)
                adamw_step(params.tensors, {names[id(t)]: g for t, g in grads.items()}, state)
            except (NonFiniteError, FloatingPointError) as exc:
                raise TrainingError(f"non-finite value at epoch {epoch}, batch {b}: {exc}") from exc
            losses.append(loss.item())
            bces.append(_bce_value(p.data, y, config.loss.epsilon))
            sizes.append(len(idx))
        w = np.asarray(sizes, dtype=np.float64)
        predictor = Predictor(params, vocab, config.features, config.summarizer)
        val = evaluate(predictor, val_split, 0.5) if val_split is not None and len(val_split) else None
        record = EpochRecord(epoch, float(np.dot(losses, w) / w.sum()), float(np.dot(bces, w) / w.sum()), val)
        history.append(record)
        logger.info("epoch %d loss %.5f bce %.5f", epoch, record.train_loss, record.train_bce)
    return TrainResult(params, history, Predictor(params, vocab, config.features, config.summarizer))


def evaluate(predictor: Predictor, split: Corpus, threshold: float | None = None, probs: np.ndarray | None = None) -> EvalReport:
    """Hard-thresholded precision / recall / F_0.5 on ``split`` (dropout off)."""
    if len(split) == 0:
        raise ValueError("cannot evaluate an empty split")
    if threshold is None:
        threshold = predictor.threshold
    if probs is None:
        probs = predictor.probabilities([(it.utterance, it.products) for it in split])
    return EvalReport.from_counts(confusion(probs, split.labels, threshold), threshold, split.split_tag)


def best_threshold(scores: Sequence[float], labels: Sequence[float], beta: float = F_BETA) -> float:
    """F_beta-maximising cut over every distinct score (and 0.5).

    Among equally good candidates the highest threshold wins.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if len(np.unique(labels)) < 2:
        raise ValueError("threshold calibration needs both classes in the split")
    cands = np.unique(np.concatenate([scores[(scores > 0) & (scores < 1)], [0.5]]))
    pos_scores = np.sort(scores[labels == 1])
    all_scores = np.sort(scores)
    n_pos = len(pos_scores)
    tp = n_pos - np.searchsorted(pos_scores, cands, side="left")
    pp = len(all_scores) - np.searchsorted(all_scores, cands, side="left")
    f = np.array([f_beta(t / q if q else 0.0, t / n_pos, beta) for t, q in zip(tp, pp)])
    return float(cands[np.flatnonzero(f == f.max()).max()])


def calibrate_threshold(predictor: Predictor, validation: Corpus, beta: float = F_BETA, probs: np.ndarray | None = None) -> float:
    if probs is None:
        probs = predictor.probabilities([(it.utterance, it.products) for it in validation])
    return best_threshold(probs, validation.labels, beta)


def with_threshold(predictor: Predictor, threshold: float) -> Predictor:
    return replace(predictor, threshold=threshold)
