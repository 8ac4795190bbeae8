import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from irp.checkpoint import CheckpointError, dumps_checkpoint, load_checkpoint, loads_checkpoint, save_checkpoint
from irp.model import ModelConfig, init_params
from irp.pipeline import FEATURE_SETS, Predictor
from irp.summarize import SummarizerConfig
from irp.text import Vocabulary

from conftest import make_interaction


def test_round_trip_bitwise(tmp_path, tiny_predictor):
    path = tmp_path / "m.ckpt"
    save_checkpoint(path, tiny_predictor, vocab_path="v.txt", extra={"note": [1, 2]})
    ckpt = load_checkpoint(path, tiny_predictor.vocab)
    for name, t in tiny_predictor.params.items():
        assert ckpt.params[name].data.tobytes() == t.data.tobytes()
    assert ckpt.model_config == tiny_predictor.params.config
    assert ckpt.features == tiny_predictor.features
    assert ckpt.summarizer == tiny_predictor.summarizer
    assert ckpt.threshold == tiny_predictor.threshold
    assert (ckpt.vocab_path, ckpt.extra) == ("v.txt", {"note": [1, 2]})
    probe = make_interaction()
    assert ckpt.predictor(tiny_predictor.vocab).predict(probe) == tiny_predictor.predict(probe)


def test_serialization_is_stable(tiny_predictor):
    a = dumps_checkpoint(tiny_predictor)
    assert dumps_checkpoint(loads_checkpoint(a).predictor(tiny_predictor.vocab)) == a
    assert loads_checkpoint(a).model_version.startswith("irp1-")


def test_bad_magic(tiny_predictor):
    buf = bytearray(dumps_checkpoint(tiny_predictor))
    buf[:4] = b"XXXX"
    with pytest.raises(CheckpointError, match="bad magic"):
        loads_checkpoint(bytes(buf))


def test_version_mismatch(tiny_predictor):
    buf = bytearray(dumps_checkpoint(tiny_predictor))
    buf[4:8] = struct.pack("<I", 99)
    with pytest.raises(CheckpointError, match="version mismatch"):
        loads_checkpoint(bytes(buf))


def test_truncated(tiny_predictor):
    buf = dumps_checkpoint(tiny_predictor)
    with pytest.raises(CheckpointError, match="truncated"):
        loads_checkpoint(buf[:-5])


def test_vocab_digest_mismatch(tmp_path, tiny_predictor):
    path = tmp_path / "m.ckpt"
    save_checkpoint(path, tiny_predictor)
    other = Vocabulary(["[PAD]", "[UNK]", "[CLS]", "[SEP]", "something"])
    with pytest.raises(CheckpointError, match="digest mismatch"):
        load_checkpoint(path, other)
    with pytest.raises(CheckpointError, match="digest mismatch"):
        load_checkpoint(path).predictor(other)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), threshold=st.floats(0.01, 0.99), fs=st.sampled_from(sorted(FEATURE_SETS)))
def test_round_trip_property(small_vocab, seed, threshold, fs):
    cfg = ModelConfig(vocab_size=len(small_vocab), d_model=8, n_layers=1, n_heads=2, d_ff=8, max_len=64)
    pred = Predictor(init_params(cfg, seed), small_vocab, FEATURE_SETS[fs], SummarizerConfig(mode="mmr"), threshold)
    back = loads_checkpoint(dumps_checkpoint(pred))
    assert back.threshold == threshold and back.features == pred.features
    for name, t in pred.params.items():
        np.testing.assert_array_equal(back.params[name].data, t.data)
