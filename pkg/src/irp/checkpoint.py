"""Binary checkpoint format.

Layout (all integers little-endian)::

    magic  b"IRP1"
    u32    format version
    u32    length of the config block, then that many bytes of UTF-8 JSON
    u32    tensor count
    per tensor:
        u32 name length, UTF-8 name
        u32 rank, rank x u64 dims
        float64 values, row-major
"""

from __future__ import annotations

import hashlib
import io
import json
import struct
from dataclasses import asdict, dataclass, field

import numpy as np

from .autograd import Tensor
from .model import ModelConfig, ModelParams, param_shapes
from .pipeline import FeatureSet, Predictor
from .summarize import SummarizerConfig
from .text import Vocabulary

MAGIC = b"IRP1"
VERSION = 1


class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    params: ModelParams
    summarizer: SummarizerConfig
    features: FeatureSet
    threshold: float
    vocab_digest: str
    vocab_path: str | None = None
    extra: dict = field(default_factory=dict)
    model_version: str = ""

    @property
    def model_config(self) -> ModelConfig:
        return self.params.config

    def check_vocab(self, vocab: Vocabulary) -> None:
        if vocab.digest() != self.vocab_digest:
            raise CheckpointError("vocabulary digest mismatch: checkpoint was saved with a different vocabulary")

    def predictor(self, vocab: Vocabulary) -> Predictor:
        self.check_vocab(vocab)
        return Predictor(self.params, vocab, self.features, self.summarizer, self.threshold)


def _u32(n: int) -> bytes:
    return struct.pack("<I", n)


def dumps_checkpoint(predictor: Predictor, *, vocab_path: str | None = None, extra: dict | None = None) -> bytes:
    config = {
        "model": predictor.params.config.to_dict(),
        "summarizer": asdict(predictor.summarizer),
        "features": predictor.features.to_dict(),
        "threshold": predictor.threshold,
        "vocab_digest": predictor.vocab.digest(),
        "vocab_path": vocab_path,
        "extra": extra or {},
    }
    blob = json.dumps(config, sort_keys=True).encode("utf-8")
    out = io.BytesIO()
    out.write(MAGIC)
    out.write(_u32(VERSION))
    out.write(_u32(len(blob)))
    out.write(blob)
    out.write(_u32(len(predictor.params.tensors)))
    for name, t in predictor.params.items():
        encoded = name.encode("utf-8")
        out.write(_u32(len(encoded)))
        out.write(encoded)
        out.write(_u32(t.data.ndim))
        out.write(struct.pack(f"<{t.data.ndim}Q", *t.data.shape))
        out.write(np.ascontiguousarray(t.data, dtype="<f8").tobytes())
    return out.getvalue()


def save_checkpoint(path, predictor: Predictor, *, vocab_path: str | None = None, extra: dict | None = None) -> None:
    with open(path, "wb") as fh:
        fh.write(dumps_checkpoint(predictor, vocab_path=vocab_path, extra=extra))


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise CheckpointError("truncated file")
        chunk = self.buf[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]


def loads_checkpoint(buf: bytes) -> Checkpoint:
    r = _Reader(buf)
    if len(buf) < 4 or buf[:4] != MAGIC:
        raise CheckpointError("bad magic")
    r.take(4)
    version = r.u32()
    if version != VERSION:
        raise CheckpointError(f"version mismatch: file has {version}, expected {VERSION}")
    try:
        config = json.loads(r.take(r.u32()).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"corrupt config block: {exc}") from None
    model_cfg = ModelConfig(**config["model"])
    tensors = {}
    for _ in range(r.u32()):
        name = r.take(r.u32()).decode("utf-8")
        rank = r.u32()
        shape = struct.unpack(f"<{rank}Q", r.take(8 * rank))
        count = int(np.prod(shape)) if rank else 1
        data = np.frombuffer(r.take(8 * count), dtype="<f8").astype(np.float64).reshape(shape)
        if name in tensors:
            raise CheckpointError(f"duplicate tensor {name!r}")
        tensors[name] = Tensor(data, requires_grad=True, name=name)
    if r.pos != len(buf):
        raise CheckpointError("trailing bytes after tensor table")
    expected = param_shapes(model_cfg)
    if set(expected) != set(tensors):
        missing = sorted(set(expected) - set(tensors))
        raise CheckpointError(f"tensor table does not match the model config (missing: {missing})")
    for name, shape in expected.items():
        if tensors[name].shape != shape:
            raise CheckpointError(f"tensor {name!r} has shape {tensors[name].shape}, expected {shape}")
    params = ModelParams(model_cfg, {name: tensors[name] for name in expected})
    return Checkpoint(
        params=params,
        summarizer=SummarizerConfig(**config["summarizer"]),
        features=FeatureSet.from_dict(config["features"]),
        threshold=float(config["threshold"]),
        vocab_digest=config["vocab_digest"],
        vocab_path=config.get("vocab_path"),
        extra=config.get("extra", {}),
        model_version="irp1-" + hashlib.sha256(buf).hexdigest()[:12],
    )


def load_checkpoint(path, vocab: Vocabulary | None = None) -> Checkpoint:
    with open(path, "rb") as fh:
        ckpt = loads_checkpoint(fh.read())
    if vocab is not None:
        ckpt.check_vocab(vocab)
    return ckpt
