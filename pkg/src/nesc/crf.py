"""Linear-chain CRF over the 11 IOB labels.

Transitions live in a 13×13 matrix whose last two rows/columns are the
virtual START and END states; ``transitions[a, b]`` scores moving from
label ``a`` to label ``b``.  The START column and END row are never read.
"""

from __future__ import annotations

from typing import List, Sequence, Tuple

import numpy as np

from . import autograd as ag
from .autograd import Tensor
from .errors import DimensionError, UsageError
from .tags import NUM_LABELS

START = NUM_LABELS
END = NUM_LABELS + 1
NUM_STATES = NUM_LABELS + 2


def _check(emissions: Tensor, transitions: Tensor) -> None:
    if emissions.ndim != 2 or emissions.shape[0] < 1:
        raise DimensionError(f"emissions must be T×L with T ≥ 1, got {emissions.shape}")
    L = emissions.shape[1]
    if transitions.shape != (L + 2, L + 2):
        raise DimensionError(f"transitions {transitions.shape} do not match {L} labels (+START/END)")


def log_partition(emissions, transitions) -> Tensor:
    """Forward algorithm: log of the summed exp-score of every label path."""
    E, A = ag.as_tensor(emissions), ag.as_tensor(transitions)
    _check(E, A)
    L = E.shape[1]
    inner = A[:L, :L]
    alpha = A[L, :L] + E[0]
    for t in range(1, E.shape[0]):
        alpha = ag.log_sum_exp(alpha.reshape(L, 1) + inner, axis=0) + E[t]
    return ag.log_sum_exp(alpha + A[:L, L + 1])


def gold_score(emissions, transitions, labels: Sequence[int]) -> Tensor:
    E, A = ag.as_tensor(emissions), ag.as_tensor(transitions)
    _check(E, A)
    L = E.shape[1]
    y = np.asarray(labels, dtype=np.intp)
    if y.shape != (E.shape[0],):
        raise UsageError(f"{E.shape[0]} emission rows but {len(y)} gold labels")
    prev = np.concatenate([[L], y])
    nxt = np.concatenate([y, [L + 1]])
    return E[np.arange(len(y)), y].sum() + A[prev, nxt].sum()


def crf_nll(emissions, transitions, labels: Sequence[int]) -> Tensor:
    """Negative log-likelihood of ``labels``: ``log Z − score(labels)``."""
    return log_partition(emissions, transitions) - gold_score(emissions, transitions, labels)


def path_score(emissions: np.ndarray, transitions: np.ndarray, labels: Sequence[int]) -> float:
    E, A = np.asarray(emissions), np.asarray(transitions)
    L = E.shape[1]
    s = A[L, labels[0]] + A[labels[-1], L + 1]
    for t, y in enumerate(labels):
        s += E[t, y]
        if t:
            s += A[labels[t - 1], y]
    return float(s)


def viterbi(emissions, transitions) -> Tuple[List[int], float]:
    """Highest-scoring label path and its score.

    Ties go to the lowest label index at every backtracking step.
    """
    E = emissions.data if isinstance(emissions, Tensor) else np.asarray(emissions, dtype=np.float64)
    A = transitions.data if isinstance(transitions, Tensor) else np.asarray(transitions, dtype=np.float64)
    _check(Tensor(E), Tensor(A))
    T, L = E.shape
    inner = A[:L, :L]
    delta = A[L, :L] + E[0]
    back = np.zeros((T, L), dtype=np.intp)
    for t in range(1, T):
        cand = delta[:, None] + inner
        back[t] = np.argmax(cand, axis=0)
        delta = cand[back[t], np.arange(L)] + E[t]
    final = delta + A[:L, L + 1]
    best = int(np.argmax(final))
    path = [best]
    for t in range(T - 1, 0, -1):
        best = int(back[t, best])
        path.append(best)
    path.reverse()
    return path, float(final[path[-1]])
