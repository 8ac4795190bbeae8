"""Sequence fusion and the compact pre-norm transformer classifier."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Iterator, Sequence

import numpy as np

from .autograd import Tensor, ops
from .text import CLS_ID, PAD_ID, SEG_SPECIAL, SEP_ID, TokenSequence

FUSION_MODES = ("full_concat", "mmr")
_MASK_VALUE = -1e30


class SequenceTooLong(ValueError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    d_model: int = 64
    n_layers: int = 2
    n_heads: int = 4
    d_ff: int = 256
    max_len: int = 128
    dropout: float = 0.1
    fusion_mode: str = "full_concat"

    def __post_init__(self):
        if self.vocab_size < 4:
            raise ValueError("vocab_size must cover the four reserved tokens")
        if self.d_model % self.n_heads:
            raise ValueError("d_model must be divisible by n_heads")
        if self.max_len < 8:
            raise ValueError("max_len must be >= 8")
        if self.n_layers < 1 or self.d_ff < 1:
            raise ValueError("n_layers and d_ff must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")
        if self.fusion_mode not in FUSION_MODES:
            raise ValueError(f"fusion_mode must be one of {FUSION_MODES}")

    def to_dict(self) -> dict:
        return asdict(self)


def fuse(seq_u: TokenSequence, seq_p: TokenSequence | None, max_len: int) -> TokenSequence:
    """Concatenate utterance and product sequences into the model input.

    The product sequence's leading [SEP] is dropped.  Over-long inputs lose
    product tokens from the tail; the closing [SEP] and every utterance token
    are always kept.
    """
    if not seq_u.ids or seq_u.ids[0] != CLS_ID:
        raise ValueError("utterance sequence must start with [CLS]")
    if len(seq_u) > max_len:
        raise SequenceTooLong(f"utterance sequence of length {len(seq_u)} exceeds max_len {max_len}")
    if seq_p is None or len(seq_p) <= 1:
        return seq_u
    ids = list(seq_p.ids[1:])
    segs = list(seq_p.segments[1:])
    budget = max_len - len(seq_u)
    if len(ids) > budget:
        if budget == 0:
            return seq_u
        ids = ids[: budget - 1] + [ids[-1]]
        segs = segs[: budget - 1] + [segs[-1]]
    return TokenSequence(seq_u.ids + tuple(ids), seq_u.segments + tuple(segs))


class ModelParams:
    """Named trainable tensors plus the config that shaped them."""

    def __init__(self, config: ModelConfig, tensors: dict[str, Tensor]):
        self.config = config
        self.tensors = tensors

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self.tensors)

    def items(self):
        return self.tensors.items()

    def copy(self) -> "ModelParams":
        return ModelParams(self.config, {k: Tensor(v.data.copy(), requires_grad=True, name=k) for k, v in self.tensors.items()})

    def arrays(self) -> dict[str, np.ndarray]:
        return {k: v.data for k, v in self.tensors.items()}


def param_shapes(config: ModelConfig) -> dict[str, tuple[int, ...]]:
    d, f = config.d_model, config.d_ff
    shapes: dict[str, tuple[int, ...]] = {
        "tok_emb": (config.vocab_size, d),
        "pos_emb": (config.max_len, d),
    }
    for i in range(config.n_layers):
        p = f"layers.{i}."
        shapes.update({
            p + "ln1.gamma": (d,), p + "ln1.beta": (d,),
            p + "attn.wq": (d, d), p + "attn.bq": (d,),
            # no key bias: it adds a per-query constant to every score, which
            # softmax cancels, so it would never receive a gradient
            p + "attn.wk": (d, d),
            p + "attn.wv": (d, d), p + "attn.bv": (d,),
            p + "attn.wo": (d, d), p + "attn.bo": (d,),
            p + "ln2.gamma": (d,), p + "ln2.beta": (d,),
            p + "ff.w1": (d, f), p + "ff.b1": (f,),
            p + "ff.w2": (f, d), p + "ff.b2": (d,),
        })
    shapes.update({"ln_f.gamma": (d,), "ln_f.beta": (d,), "head.w": (d, 1), "head.b": (1,)})
    return shapes


def glorot_bound(shape: tuple[int, int]) -> float:
    return math.sqrt(6.0 / (shape[0] + shape[1]))


def init_params(config: ModelConfig, seed: int = 0) -> ModelParams:
    """Glorot-uniform matrices, zero biases, unit layer-norm scales."""
    rng = np.random.default_rng(seed)
    tensors = {}
    for name, shape in param_shapes(config).items():
        if len(shape) == 2:
            b = glorot_bound(shape)
            data = rng.uniform(-b, b, size=shape)
        elif name.endswith(".gamma"):
            data = np.ones(shape)
        else:
            data = np.zeros(shape)
        tensors[name] = Tensor(data, requires_grad=True, name=name)
    return ModelParams(config, tensors)


def pad_batch(seqs: Sequence[TokenSequence], max_len: int) -> tuple[np.ndarray, np.ndarray]:
    lengths = np.array([len(s) for s in seqs], dtype=np.int64)
    if lengths.max() > max_len:
        raise SequenceTooLong(f"input of length {lengths.max()} exceeds max_len {max_len}")
    ids = np.full((len(seqs), lengths.max()), PAD_ID, dtype=np.int64)
    for row, s in enumerate(seqs):
        ids[row, : len(s)] = s.ids
    return ids, lengths


def _linear(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    return ops.add(ops.matmul(x, w), b)


def forward_ids(params: ModelParams, ids: np.ndarray, lengths: np.ndarray, train: bool = False, rng: np.random.Generator | None = None) -> Tensor:
    """Probabilities for a padded id batch ``(B, L)``; returns shape ``(B,)``.

    Padding positions are excluded from attention as keys, so appending
    [PAD] does not change the [CLS] representation.
    """
    cfg = params.config
    B, L = ids.shape
    if L > cfg.max_len:
        raise SequenceTooLong(f"input of length {L} exceeds max_len {cfg.max_len}")
    if train and cfg.dropout > 0 and rng is None:
        raise ValueError("training forward needs a random generator for dropout")
    d, H = cfg.d_model, cfg.n_heads
    dh = d // H
    scale = 1.0 / math.sqrt(dh)
    key_mask = np.where(np.arange(L)[None, :] < lengths[:, None], 0.0, _MASK_VALUE).reshape(B, 1, 1, L)

    x = ops.add(ops.embedding_lookup(params["tok_emb"], ids), ops.embedding_lookup(params["pos_emb"], np.arange(L)))
    x = ops.reshape(ops.dropout(x, cfg.dropout, train, rng), (B * L, d))

    def heads(t: Tensor, key: bool = False) -> Tensor:
        t = ops.reshape(t, (B, L, H, dh))
        return ops.transpose(t, (0, 2, 3, 1) if key else (0, 2, 1, 3))

    for i in range(cfg.n_layers):
        p = f"layers.{i}."
        last = i == cfg.n_layers - 1
        h = ops.layer_norm(x, params[p + "ln1.gamma"], params[p + "ln1.beta"])
        k = heads(ops.matmul(h, params[p + "attn.wk"]), key=True)
        v = heads(_linear(h, params[p + "attn.wv"], params[p + "attn.bv"]))
        if last:
            # only the [CLS] row feeds the head, so the final block runs on it alone
            x = ops.select(ops.reshape(x, (B, L, d)), (slice(None), 0))
            h = ops.select(ops.reshape(h, (B, L, d)), (slice(None), 0))
            q = ops.reshape(_linear(h, params[p + "attn.wq"], params[p + "attn.bq"]), (B, H, 1, dh))
            rows = B
        else:
            q = heads(_linear(h, params[p + "attn.wq"], params[p + "attn.bq"]))
            rows = B * L
        scores = ops.add(ops.multiply(ops.matmul(q, k), scale), key_mask)
        ctx = ops.matmul(ops.softmax_rows(scores), v)
        ctx = ops.reshape(ops.transpose(ctx, (0, 2, 1, 3)), (rows, d))
        attn = _linear(ctx, params[p + "attn.wo"], params[p + "attn.bo"])
        x = ops.add(x, ops.dropout(attn, cfg.dropout, train, rng))
        h = ops.layer_norm(x, params[p + "ln2.gamma"], params[p + "ln2.beta"])
        ff = _linear(ops.gelu(_linear(h, params[p + "ff.w1"], params[p + "ff.b1"])), params[p + "ff.w2"], params[p + "ff.b2"])
        x = ops.add(x, ops.dropout(ff, cfg.dropout, train, rng))

    cls = ops.layer_norm(x, params["ln_f.gamma"], params["ln_f.beta"])
    logit = ops.reshape(_linear(cls, params["head.w"], params["head.b"]), (B,))
    return ops.sigmoid(logit)


def forward_batch(params: ModelParams, seqs: Sequence[TokenSequence], train: bool = False, rng: np.random.Generator | None = None) -> Tensor:
    ids, lengths = pad_batch(seqs, params.config.max_len)
    return forward_ids(params, ids, lengths, train, rng)


def forward(params: ModelParams, X: TokenSequence, train: bool = False, rng: np.random.Generator | None = None) -> float:
    """Probability of image-seeking intent for one fused sequence."""
    return forward_batch(params, [X], train, rng).item()


def check_layout(X: TokenSequence) -> None:
    """Assert the fused-input invariants: one leading [CLS], trailing [SEP]."""
    if X.ids[0] != CLS_ID or X.ids.count(CLS_ID) != 1:
        raise ValueError("fused input must contain exactly one [CLS], at position 0")
    if len(X) > 1 and X.ids[-1] != SEP_ID:
        raise ValueError("fused input must end with [SEP]")
    if X.segments[0] != SEG_SPECIAL:
        raise ValueError("position 0 must be a special token")
