import logging
import math

import numpy as np
import pytest

from nesc.autograd import GradTape
from nesc.config import Config
from nesc.corpus import Corpus, Sentence
from nesc.errors import TrainingError, UsageError
from nesc.features import EmbeddingTable
from nesc.ner import ENCODER_BLOCKS, NerModel, NerParams, emissions, encode, predict_labels, sentence_loss, tag, train_ner
from nesc.tags import NUM_LABELS, EntitySpan, label_index

from oracles import central_diff, rel_error


def tiny_params(d=6, H=5, seed=0):
    p = NerParams.init(d, H, np.random.default_rng(seed))
    rng = np.random.default_rng(seed + 100)
    # non-zero dense bias and transitions so every block has a real gradient
    p.arrays["dense.b"] = rng.normal(size=NUM_LABELS)
    p.arrays["transitions"] = rng.normal(size=(13, 13))
    return p


class TestShapes:
    def test_param_shapes(self):
        p = NerParams.init(253, 100, np.random.default_rng(0))
        assert p.arrays["fwd.Wx"].shape == (400, 253) and p.arrays["bwd.Wh"].shape == (400, 100)
        assert p.arrays["dense.W"].shape == (11, 200) and p.arrays["transitions"].shape == (13, 13)
        assert not p.arrays["transitions"].any()
        assert p.hidden_size == 100 and p.input_size == 253

    def test_single_token(self):
        p = tiny_params()
        out = encode(np.ones((1, 6)), p)
        assert out.shape == (1, 10)

    def test_empty_sequence(self):
        with pytest.raises(UsageError):
            encode(np.zeros((0, 6)), tiny_params())


class TestEncode:
    def test_zero_params_zero_output(self):
        p = tiny_params()
        zero = NerParams({k: np.zeros_like(v) for k, v in p.arrays.items()})
        assert not encode(np.random.default_rng(1).normal(size=(4, 6)), zero).data.any()

    def test_reverse_symmetry(self):
        p = tiny_params()
        X = np.random.default_rng(2).normal(size=(5, 6))
        swapped = dict(p.arrays)
        for b in ("Wx", "Wh", "b"):
            swapped[f"fwd.{b}"], swapped[f"bwd.{b}"] = p.arrays[f"bwd.{b}"], p.arrays[f"fwd.{b}"]
        a = encode(X, p).data
        r = encode(X[::-1], NerParams(swapped)).data
        np.testing.assert_allclose(r[::-1, :5], a[:, 5:], atol=1e-14)
        np.testing.assert_allclose(r[::-1, 5:], a[:, :5], atol=1e-14)

    def test_halves_are_directional(self):
        # the forward half at t only sees tokens up to t
        p = tiny_params()
        X = np.random.default_rng(3).normal(size=(4, 6))
        Y = X.copy()
        Y[3] += 1.0
        a, b = encode(X, p).data, encode(Y, p).data
        np.testing.assert_array_equal(a[:3, :5], b[:3, :5])
        assert not np.allclose(a[:3, 5:], b[:3, 5:])

    def test_eval_deterministic(self):
        p = tiny_params()
        X = np.ones((3, 6))
        np.testing.assert_array_equal(encode(X, p).data, encode(X, p).data)

    def test_dropout_only_in_train_mode(self):
        p = tiny_params()
        X = np.random.default_rng(4).normal(size=(6, 6))
        clean = encode(X, p).data
        noisy = encode(X, p, True, np.random.default_rng(0), 0.5).data
        kept = noisy != 0
        assert 0 < kept.sum() < kept.size
        np.testing.assert_allclose(noisy[kept], 2.0 * clean[kept])

    def test_train_mode_needs_rng(self):
        with pytest.raises(UsageError):
            encode(np.ones((2, 6)), tiny_params(), True, None, 0.5)


class TestEmissions:
    def test_uniform(self):
        p = tiny_params()
        p.arrays["dense.W"][:] = 0
        p.arrays["dense.b"][:] = 0
        np.testing.assert_allclose(emissions(np.zeros(10), p).data, -math.log(11), atol=1e-15)

    def test_normalised(self):
        ctx = np.random.default_rng(5).normal(size=(7, 10))
        np.testing.assert_allclose(np.exp(emissions(ctx, tiny_params()).data).sum(axis=1), 1.0, atol=1e-12)

    def test_bias_shift_invariant(self):
        p = tiny_params()
        ctx = np.random.default_rng(6).normal(size=10)
        q = NerParams(dict(p.arrays))
        q.arrays["dense.b"] = p.arrays["dense.b"] + 3.0
        np.testing.assert_allclose(emissions(ctx, p).data, emissions(ctx, q).data, atol=1e-12)


def test_full_gradient_check():
    p = tiny_params()
    X = np.random.default_rng(7).normal(size=(3, 6))
    y = [1, 2, 0]
    arrays = {k: v.copy() for k, v in p.arrays.items()}
    with GradTape() as tape:
        loss = sentence_loss(X, y, tape.watch_all(arrays))
    grads = tape.gradient(loss)
    assert set(grads) == set(arrays)
    for name, arr in arrays.items():
        num = central_diff(lambda: sentence_loss(X, y, NerParams(arrays)).item(), arr)
        assert rel_error(grads[name], num) < 1e-4, name


class TestTraining:
    def test_history_logged(self, small_ner, small_config):
        assert len(small_ner.history) == small_config.ner_epochs
        assert all(np.isfinite(small_ner.history))

    def test_logs_each_epoch(self, small_corpus, small_embeddings, caplog):
        with caplog.at_level(logging.INFO, logger="nesc.ner"):
            train_ner(small_corpus, small_embeddings, Config(hidden_size=3), np.random.default_rng(0), epochs=2)
        assert sum("ner epoch" in r.getMessage() for r in caplog.records) == 2

    def test_deterministic(self, small_corpus, small_embeddings, small_ner, small_config):
        again = train_ner(small_corpus, small_embeddings, small_config, np.random.default_rng(13))
        for k, v in small_ner.params.arrays.items():
            assert v.tobytes() == again.params.arrays[k].tobytes()
        assert again.history == small_ner.history

    def test_loss_decreases(self, small_ner):
        assert small_ner.history[-1] < small_ner.history[0]

    def test_empty_corpus(self, small_embeddings):
        with pytest.raises(UsageError):
            train_ner(Corpus([]), small_embeddings)

    def test_non_finite_loss_names_sentence(self, small_corpus, small_embeddings):
        p = NerParams.init(253, 3, np.random.default_rng(0))
        p.arrays["transitions"][0, 0] = np.nan
        with pytest.raises(TrainingError, match="sentence"):
            train_ner(small_corpus, small_embeddings, Config(hidden_size=3), np.random.default_rng(0), 1, p)


class TestTag:
    def test_probability_table(self, small_ner, small_corpus):
        spans, probs = tag(small_corpus[0], small_ner)
        assert probs.shape == (len(small_corpus[0]), NUM_LABELS)
        np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-9)

    def test_empty(self, small_ner):
        spans, probs = tag(Sentence((), ()), small_ner)
        assert spans == [] and probs.shape == (0, NUM_LABELS)

    def test_all_outside_decoding(self, small_ner, small_corpus):
        p = NerParams({k: v.copy() for k, v in small_ner.params.arrays.items()})
        p.arrays["dense.b"][0] = 100.0
        model = NerModel(p, small_ner.embeddings)
        assert tag(small_corpus[0], model)[0] == []
        assert predict_labels(small_corpus[0], model) == [0] * len(small_corpus[0])

    def test_i_love_san_francisco(self):
        # a model trained on this one sentence learns the gold labels
        s = Sentence(("I", "love", "San", "Francisco"), ("PRON", "VERB", "PROPN", "PROPN"),
                     (0, 0, label_index("B-Place"), label_index("I-Place")))
        emb = EmbeddingTable.random(s.tokens, np.random.default_rng(0))
        model = train_ner(Corpus([s]), emb, Config(hidden_size=8, dropout=0.0), np.random.default_rng(1), epochs=60)
        spans, probs = tag(s, model)
        assert spans == [EntitySpan(2, 3, "Place")]
        assert probs.argmax(axis=1).tolist() == list(s.labels)

    def test_featurize_tokens_need_pos(self, small_ner):
        from nesc.features import tokenize
        with pytest.raises(UsageError):
            small_ner.featurize(tokenize("hello there"))


def test_encoder_block_names():
    assert set(ENCODER_BLOCKS) <= set(tiny_params().arrays)
