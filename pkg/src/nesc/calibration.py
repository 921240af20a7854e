"""Isotonic calibration of span scores by pool-adjacent-violators."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DataError, UsageError


@dataclass(frozen=True)
class IsotonicCalibrator:
    """Piecewise-linear monotone map through ``(thresholds[i], values[i])`` knots."""

    thresholds: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.thresholds, dtype=np.float64)
        v = np.asarray(self.values, dtype=np.float64)
        if t.ndim != 1 or t.shape != v.shape or t.size == 0:
            raise DataError(f"calibrator needs aligned non-empty knot arrays, got {t.shape} and {v.shape}")
        if np.any(np.diff(t) <= 0) or np.any(np.diff(v) < 0) or v.min() < 0 or v.max() > 1:
            raise DataError("calibrator knots must have ascending thresholds and nondecreasing values in [0, 1]")
        object.__setattr__(self, "thresholds", t)
        object.__setattr__(self, "values", v)

    def __call__(self, score):
        return calibrate(score, self)


def fit_pav(scores: Sequence[float], labels: Sequence[int]) -> IsotonicCalibrator:
    """Least-squares nondecreasing fit of ``labels`` against ``scores``.

    Points with equal scores are pooled first, so they always share a value.
    Each final block contributes its lowest and highest score as knots.
    """
    x = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if x.size == 0:
        raise UsageError("cannot fit a calibrator on zero points")
    if x.shape != y.shape or x.ndim != 1:
        raise UsageError(f"scores {x.shape} and labels {y.shape} must be aligned 1-d arrays")
    if not np.all((y == 0) | (y == 1)):
        raise UsageError("labels must be 0 or 1")
    ux, inverse = np.unique(x, return_inverse=True)
    sums = np.bincount(inverse, weights=y, minlength=ux.size)
    counts = np.bincount(inverse, minlength=ux.size).astype(np.float64)

    # each block: [sum, count, first unique index, last unique index]
    blocks = []
    for u in range(ux.size):
        blocks.append([sums[u], counts[u], u, u])
        while len(blocks) > 1 and blocks[-2][0] / blocks[-2][1] > blocks[-1][0] / blocks[-1][1]:
            s, c, _, last = blocks.pop()
            blocks[-1][0] += s
            blocks[-1][1] += c
            blocks[-1][3] = last

    thresholds, values = [], []
    for s, c, first, last in blocks:
        for u in (first, last) if last != first else (first,):
            thresholds.append(ux[u])
            values.append(s / c)
    return IsotonicCalibrator(np.array(thresholds), np.clip(values, 0.0, 1.0))


def calibrate(score, calibrator: IsotonicCalibrator):
    """Interpolate between knots; clamp to the end values outside them."""
    out = np.interp(score, calibrator.thresholds, calibrator.values)
    return float(out) if np.ndim(out) == 0 else out
