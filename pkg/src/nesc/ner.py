"""biLSTM-CRF tagger.

Token vectors pass through a bidirectional LSTM (dropout on its outputs at
training time), a dense layer with log-softmax over the 11 IOB labels, and a
linear-chain CRF whose transition scores are trained jointly.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from . import autograd as ag
from .autograd import AdamState, GradTape, Tensor
from .config import Config
from .corpus import Corpus, Sentence
from .crf import NUM_STATES, crf_nll, viterbi
from .errors import TrainingError, UsageError
from .features import EmbeddingTable, Token, vectorize_sentence
from .tags import NUM_LABELS, EntitySpan, decode_spans

log = logging.getLogger(__name__)

ENCODER_BLOCKS = ("fwd.Wx", "fwd.Wh", "fwd.b", "bwd.Wx", "bwd.Wh", "bwd.b")


@dataclass
class NerParams:
    arrays: Dict[str, np.ndarray]
    dropout: float = 0.5

    @property
    def hidden_size(self) -> int:
        return self.arrays["fwd.Wh"].shape[1]

    @property
    def input_size(self) -> int:
        return self.arrays["fwd.Wx"].shape[1]

    @classmethod
    def init(cls, input_size: int, hidden: int, rng: np.random.Generator, dropout: float = 0.5) -> "NerParams":
        arrays = {}
        arrays.update(ag.init_lstm(input_size, hidden, rng, "fwd."))
        arrays.update(ag.init_lstm(input_size, hidden, rng, "bwd."))
        arrays["dense.W"] = ag.glorot_uniform((NUM_LABELS, 2 * hidden), rng)
        arrays["dense.b"] = np.zeros(NUM_LABELS)
        arrays["transitions"] = np.zeros((NUM_STATES, NUM_STATES))
        return cls(arrays, dropout)

    def tensors(self) -> Dict[str, Tensor]:
        return {k: Tensor(v) for k, v in self.arrays.items()}


def _tensors(params) -> Mapping[str, Tensor]:
    return params.tensors() if isinstance(params, NerParams) else params


def encode(vectors, params, train_mode: bool = False, rng: Optional[np.random.Generator] = None,
           dropout: Optional[float] = None) -> Tensor:
    """Context vectors ``[forward_h_t | backward_h_t]`` as a ``(T, 2H)`` tensor."""
    if dropout is None:
        dropout = params.dropout if isinstance(params, NerParams) else 0.0
    p = _tensors(params)
    X = ag.as_tensor(vectors)
    if X.ndim != 2 or X.shape[0] == 0:
        raise UsageError(f"encode needs a non-empty T×d sequence, got shape {X.shape}")
    fwd = ag.lstm_sequence(X, p, "fwd.")
    bwd = ag.lstm_sequence(X, p, "bwd.", reverse=True)
    out = ag.concat([ag.stack(fwd), ag.stack(bwd)], axis=1)
    if train_mode and dropout > 0:
        if rng is None:
            raise UsageError("training-mode encode needs an rng for dropout")
        keep = 1.0 - dropout
        out = out * ((rng.random(out.shape) < keep) / keep)
    return out


def emissions(context, params) -> Tensor:
    """Per-label log-probabilities for one context vector or a ``(T, 2H)`` batch."""
    p = _tensors(params)
    return ag.log_softmax(ag.affine(p["dense.W"], context, p["dense.b"]), axis=-1)


def sentence_loss(vectors, labels: Sequence[int], params, train_mode: bool = False,
                  rng: Optional[np.random.Generator] = None, dropout: Optional[float] = None) -> Tensor:
    p = _tensors(params)
    E = emissions(encode(vectors, p, train_mode, rng, dropout), p)
    return crf_nll(E, p["transitions"], labels)


@dataclass
class NerModel:
    params: NerParams
    embeddings: EmbeddingTable
    history: List[float] = field(default_factory=list)

    def featurize(self, sentence: Union[Sentence, Sequence[Token]]) -> np.ndarray:
        if isinstance(sentence, Sentence):
            return vectorize_sentence(sentence.tokens, sentence.pos, self.embeddings)
        if any(t.pos is None for t in sentence):
            raise UsageError("every token needs a POS tag before featurisation")
        return vectorize_sentence([t.surface for t in sentence], [t.pos for t in sentence], self.embeddings)

    def encode(self, sentence) -> np.ndarray:
        """Evaluation-mode encoder outputs for a sentence as a plain array."""
        return encode(self.featurize(sentence), self.params).data


def train_ner(corpus: Corpus, embeddings: EmbeddingTable, config: Config = Config(),
              rng: Optional[np.random.Generator] = None, epochs: Optional[int] = None,
              params: Optional[NerParams] = None) -> NerModel:
    """Per-sentence Adam on the CRF negative log-likelihood.

    The returned model carries the mean loss of every epoch in ``history``.
    Results are a deterministic function of ``rng``'s state.
    """
    if not len(corpus):
        raise UsageError("cannot train on an empty corpus")
    rng = np.random.default_rng(0) if rng is None else rng
    epochs = config.ner_epochs if epochs is None else epochs
    feats = [vectorize_sentence(s.tokens, s.pos, embeddings) for s in corpus]
    if params is None:
        params = NerParams.init(feats[0].shape[1], config.hidden_size, rng, config.dropout)
    arrays = dict(params.arrays)
    state = AdamState.zeros_like(arrays)
    history = []
    for epoch in range(epochs):
        total = 0.0
        for idx in rng.permutation(len(feats)):
            with GradTape() as tape:
                p = tape.watch_all(arrays)
                loss = sentence_loss(feats[idx], corpus[idx].labels, p, True, rng, params.dropout)
            value = loss.item()
            if not np.isfinite(value):
                raise TrainingError(f"non-finite loss on sentence {idx} in epoch {epoch}")
            grads = ag.clip_global_norm(ag.backward(loss, tape), config.clip_norm)
            arrays, state = ag.adam_step(arrays, grads, state, config.lr, config.beta1, config.beta2, config.eps)
            total += value
        history.append(total / len(feats))
        log.info("ner epoch %d: mean loss %.6f", epoch + 1, history[-1])
    return NerModel(NerParams(arrays, params.dropout), embeddings, history)


def tag(sentence, model: NerModel) -> Tuple[List[EntitySpan], np.ndarray]:
    """Decoded typed spans and the ``(T, 11)`` per-token label probabilities."""
    if len(sentence) == 0:
        return [], np.zeros((0, NUM_LABELS))
    p = model.params.tensors()
    E = emissions(encode(model.featurize(sentence), p), p)
    labels, _ = viterbi(E, p["transitions"])
    return decode_spans(labels), np.exp(E.data)


def predict_labels(sentence, model: NerModel) -> List[int]:
    if len(sentence) == 0:
        return []
    p = model.params.tensors()
    E = emissions(encode(model.featurize(sentence), p), p)
    return viterbi(E, p["transitions"])[0]
