"""Token- and entity-level precision/recall/F1 and the span-score PR curve.

Empty denominators count as perfect: precision is 1 with no predictions,
recall is 1 with no relevant items.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import DataError, UsageError
from .tags import EntitySpan, decode_spans


@dataclass(frozen=True)
class PRF:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 1.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 1.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r else 0.0

    def __add__(self, other: "PRF") -> "PRF":
        return PRF(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn)

    def __str__(self) -> str:
        return f"P={self.precision:.4f} R={self.recall:.4f} F1={self.f1:.4f} (tp={self.tp} fp={self.fp} fn={self.fn})"


def token_prf(gold: Sequence[int], pred: Sequence[int]) -> PRF:
    """Entity-vs-outside per token; entity types and B/I are ignored."""
    if len(gold) != len(pred):
        raise UsageError(f"{len(gold)} gold labels but {len(pred)} predicted")
    g = np.asarray(gold) != 0
    p = np.asarray(pred) != 0
    return PRF(int(np.sum(g & p)), int(np.sum(p & ~g)), int(np.sum(g & ~p)))


def _check_disjoint(spans: Sequence[EntitySpan]) -> None:
    ordered = sorted(spans, key=lambda s: (s[0], s[1]))
    for a, b in zip(ordered, ordered[1:]):
        if b[0] <= a[1]:
            raise DataError(f"gold spans {tuple(a)} and {tuple(b)} overlap")


def entity_prf(gold: Sequence[EntitySpan], pred: Sequence[EntitySpan], typed: bool = True) -> PRF:
    """Exact-boundary span matching, optionally requiring equal types; one-to-one."""
    _check_disjoint(gold)
    key = (lambda s: (s[0], s[1], s[2])) if typed else (lambda s: (s[0], s[1]))
    remaining = {}
    for s in gold:
        remaining[key(s)] = remaining.get(key(s), 0) + 1
    tp = 0
    for s in pred:
        k = key(s)
        if remaining.get(k):
            remaining[k] -= 1
            tp += 1
    return PRF(tp, len(pred) - tp, len(gold) - tp)


def default_thresholds() -> np.ndarray:
    return np.round(np.arange(101) * 0.01, 2)


def pr_curve(scores: Sequence[float], labels: Sequence[int],
             thresholds: Optional[Iterable[float]] = None) -> List[Tuple[float, float, float]]:
    """``(threshold, precision, recall)`` predicting positive when ``score ≥ threshold``."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels) == 1
    if s.shape != y.shape:
        raise UsageError(f"{s.size} scores but {y.size} labels")
    ts = default_thresholds() if thresholds is None else np.asarray(list(thresholds), dtype=np.float64)
    if np.any(np.diff(ts) < 0):
        raise UsageError("thresholds must be ascending")
    rows = []
    for t in ts:
        pred = s >= t
        m = PRF(int(np.sum(pred & y)), int(np.sum(pred & ~y)), int(np.sum(~pred & y)))
        rows.append((float(t), m.precision, m.recall))
    return rows


def pr_curve_csv(rows: Sequence[Tuple[float, float, float]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["threshold", "precision", "recall"])
    for t, p, r in rows:
        w.writerow([f"{t:.6g}", f"{p:.6f}", f"{r:.6f}"])
    return buf.getvalue()


def roc_auc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Probability a random positive outscores a random negative (ties count half)."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels) == 1
    pos, neg = s[y], s[~y]
    if not pos.size or not neg.size:
        raise UsageError("ROC-AUC needs both classes")
    greater = (pos[:, None] > neg[None, :]).sum()
    ties = (pos[:, None] == neg[None, :]).sum()
    return float((greater + 0.5 * ties) / (pos.size * neg.size))


@dataclass(frozen=True)
class NerReport:
    token: PRF
    untyped: PRF
    typed: PRF

    def format(self) -> str:
        lines = ["measure\tprecision\trecall\tf1"]
        for name, m in (("untyped token level", self.token), ("untyped entity level", self.untyped),
                        ("typed entity level", self.typed)):
            lines.append(f"{name}\t{m.precision:.4f}\t{m.recall:.4f}\t{m.f1:.4f}")
        return "\n".join(lines) + "\n"


def evaluate_labels(gold_seqs: Iterable[Sequence[int]], pred_seqs: Iterable[Sequence[int]]) -> NerReport:
    token, untyped, typed = PRF(), PRF(), PRF()
    for g, p in zip(gold_seqs, pred_seqs):
        token += token_prf(g, p)
        gs, ps = decode_spans(g), decode_spans(p)
        untyped += entity_prf(gs, ps, typed=False)
        typed += entity_prf(gs, ps, typed=True)
    return NerReport(token, untyped, typed)
