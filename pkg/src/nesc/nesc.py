"""Span classifier over frozen encoder outputs.

A candidate span ``[i, j]`` is widened by ``k`` tokens on each side.  The
encoder outputs covering that window (zero vectors where the window runs
past the sentence) feed a unidirectional LSTM; its final hidden state goes
through a dense layer and a two-way softmax whose second entry is the
probability that the span is an entity.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from . import autograd as ag
from .autograd import AdamState, GradTape, Tensor
from .config import Config
from .corpus import Corpus
from .errors import DimensionError, TrainingError, UsageError
from .ner import NerModel
from .sampling import NescDataset

log = logging.getLogger(__name__)

PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class ContextWindow:
    start: int
    end: int
    k: int
    n: int

    @property
    def lo(self) -> int:
        return self.start - self.k

    @property
    def hi(self) -> int:
        return self.end + self.k

    def __len__(self) -> int:
        return self.hi - self.lo + 1

    @property
    def positions(self) -> range:
        return range(self.lo, self.hi + 1)

    @property
    def pad_mask(self) -> List[bool]:
        return [not 0 <= p < self.n for p in self.positions]

    @property
    def n_pads(self) -> int:
        return max(0, self.k - self.start) + max(0, self.k - (self.n - 1 - self.end))


def context_window(i: int, j: int, k: int, n: int) -> ContextWindow:
    if not 0 <= i <= j < n:
        raise UsageError(f"span ({i}, {j}) is not a valid span of a {n}-token sentence")
    if k < 0:
        raise UsageError(f"context size must be non-negative, got {k}")
    return ContextWindow(i, j, k, n)


def window_slice(encoder_outputs, window: ContextWindow) -> np.ndarray:
    enc = np.asarray(encoder_outputs, dtype=np.float64)
    if enc.ndim != 2 or enc.shape[0] != window.n:
        raise UsageError(f"window is for {window.n} tokens but encoder outputs have shape {enc.shape}")
    out = np.zeros((len(window), enc.shape[1]))
    a, b = max(window.lo, 0), min(window.hi, window.n - 1)
    out[a - window.lo: b - window.lo + 1] = enc[a: b + 1]
    return out


@dataclass
class NescParams:
    arrays: Dict[str, np.ndarray]
    context_size: int = 2
    w_pos: float = 1.0
    w_neg: float = 1.0
    history: List[float] = field(default_factory=list)

    def __post_init__(self):
        if self.context_size < 0:
            raise UsageError(f"context size must be non-negative, got {self.context_size}")
        if not (self.w_pos > 0 and self.w_neg > 0):
            raise UsageError(f"class weights must be positive, got ({self.w_pos}, {self.w_neg})")

    @property
    def hidden_size(self) -> int:
        return self.arrays["head.Wh"].shape[1]

    @property
    def input_size(self) -> int:
        return self.arrays["head.Wx"].shape[1]

    @classmethod
    def init(cls, input_size: int, hidden: int, rng: np.random.Generator, context_size: int = 2,
             w_pos: float = 1.0, w_neg: float = 1.0) -> "NescParams":
        arrays = ag.init_lstm(input_size, hidden, rng, "head.")
        arrays["dense.W"] = ag.glorot_uniform((2, hidden), rng)
        arrays["dense.b"] = np.zeros(2)
        return cls(arrays, context_size, w_pos, w_neg)

    def tensors(self) -> Dict[str, Tensor]:
        return {k: Tensor(v) for k, v in self.arrays.items()}


def _tensors(params) -> Mapping[str, Tensor]:
    return params.tensors() if isinstance(params, NescParams) else params


def class_probabilities(window_vectors, params) -> Tensor:
    """``[P(not entity), P(entity)]`` for one window slice."""
    p = _tensors(params)
    x = ag.as_tensor(window_vectors)
    if x.ndim != 2 or x.shape[0] == 0:
        raise UsageError(f"span classifier needs a non-empty window, got shape {x.shape}")
    if x.shape[1] != p["head.Wx"].shape[1]:
        raise DimensionError(f"window width {x.shape[1]} does not match head input {p['head.Wx'].shape[1]}")
    h = ag.lstm_sequence(x, p, "head.")[-1]
    return ag.softmax(ag.affine(p["dense.W"], h, p["dense.b"]))


def nesc_score(window_vectors, params) -> float:
    return float(class_probabilities(window_vectors, params).data[1])


def weighted_ce(p, y: int, w_pos: float = 1.0, w_neg: float = 1.0):
    """``−w_pos·y·log p − w_neg·(1−y)·log(1−p)`` with ``p`` clamped away from 0 and 1.

    ``p`` may be a float or, for training, the two-way probability tensor
    returned by :func:`class_probabilities`.
    """
    if isinstance(p, Tensor):
        q = p[1] if y else p[0]
        if q.data < PROB_FLOOR:
            q = Tensor(PROB_FLOOR)
        return ag.log(q) * -(w_pos if y else w_neg)
    p = min(max(float(p), PROB_FLOOR), 1.0 - PROB_FLOOR)
    return -w_pos * np.log(p) if y else -w_neg * np.log(1.0 - p)


def window_loss(window_vectors, target: int, params, w_pos: float = 1.0, w_neg: float = 1.0) -> Tensor:
    return weighted_ce(class_probabilities(window_vectors, params), target, w_pos, w_neg)


def fit_head(windows: Sequence[np.ndarray], targets: Sequence[int], config: Config = Config(),
             rng: Optional[np.random.Generator] = None, w_pos: float = 1.0, w_neg: float = 1.0,
             epochs: Optional[int] = None, params: Optional[NescParams] = None) -> NescParams:
    """Per-sample Adam on the weighted cross-entropy over precomputed window slices."""
    if len(windows) != len(targets) or not len(windows):
        raise UsageError(f"need matching non-empty windows and targets, got {len(windows)} and {len(targets)}")
    rng = np.random.default_rng(0) if rng is None else rng
    epochs = config.nesc_epochs if epochs is None else epochs
    if params is None:
        params = NescParams.init(windows[0].shape[1], config.nesc_hidden, rng, config.context_size, w_pos, w_neg)
    arrays = dict(params.arrays)
    state = AdamState.zeros_like(arrays)
    history = []
    for epoch in range(epochs):
        total = 0.0
        for idx in rng.permutation(len(windows)):
            with GradTape() as tape:
                p = tape.watch_all(arrays)
                loss = window_loss(windows[idx], targets[idx], p, w_pos, w_neg)
            value = loss.item()
            if not np.isfinite(value):
                raise TrainingError(f"non-finite loss on sample {idx} in epoch {epoch}")
            grads = ag.clip_global_norm(ag.backward(loss, tape), config.clip_norm)
            arrays, state = ag.adam_step(arrays, grads, state, config.lr, config.beta1, config.beta2, config.eps)
            total += value
        history.append(total / len(windows))
        log.info("nesc epoch %d: mean loss %.6f", epoch + 1, history[-1])
    return NescParams(arrays, params.context_size, w_pos, w_neg, history)


def dataset_windows(dataset: NescDataset, corpus: Corpus, ner_model: NerModel) -> List[np.ndarray]:
    """Evaluation-mode encoder slices for every sample, one encoder pass per sentence."""
    cache: Dict[int, np.ndarray] = {}
    out = []
    for s in dataset.samples:
        enc = cache.get(s.sentence)
        if enc is None:
            enc = cache[s.sentence] = ner_model.encode(corpus[s.sentence])
        out.append(window_slice(enc, context_window(s.start, s.end, dataset.context_size, len(enc))))
    return out


def train_nesc(dataset: NescDataset, corpus: Corpus, ner_model: NerModel, config: Config = Config(),
               rng: Optional[np.random.Generator] = None, epochs: Optional[int] = None) -> NescParams:
    """Train only the head; the encoder is run once per sentence and never updated."""
    if dataset.context_size != config.context_size:
        raise UsageError(
            f"dataset was built with context size {dataset.context_size} but config uses {config.context_size}"
        )
    windows = dataset_windows(dataset, corpus, ner_model)
    targets = [s.target for s in dataset.samples]
    return fit_head(windows, targets, config, rng, dataset.w_pos, dataset.w_neg, epochs)


def score_spans(sentence, spans: Sequence, ner_model: NerModel, nesc_params: NescParams,
                calibrator=None) -> List[float]:
    """Entity probability for several spans of one sentence (one encoder pass)."""
    n = len(sentence)
    for span in spans:
        if not 0 <= span[0] <= span[1] < n:
            raise UsageError(f"span ({span[0]}, {span[1]}) out of range for a {n}-token sentence")
    if not spans:
        return []
    enc = ner_model.encode(sentence)
    p = nesc_params.tensors()
    out = []
    for span in spans:
        w = context_window(span[0], span[1], nesc_params.context_size, n)
        score = nesc_score(window_slice(enc, w), p)
        out.append(calibrator(score) if calibrator is not None else score)
    return out


def score_span(sentence, span, ner_model: NerModel, nesc_params: NescParams, calibrator=None) -> float:
    return score_spans(sentence, [span], ner_model, nesc_params, calibrator)[0]
