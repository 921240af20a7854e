"""IOB label inventory and conversion between label sequences and spans."""

from __future__ import annotations

from typing import List, NamedTuple, Optional, Sequence

from .errors import DataError

ENTITY_TYPES = ("Person", "Place", "Product", "Organization", "Other")
OUTSIDE = "O"
LABELS = (OUTSIDE,) + tuple(f"{p}-{t}" for t in ENTITY_TYPES for p in ("B", "I"))
NUM_LABELS = len(LABELS)
LABEL_INDEX = {name: i for i, name in enumerate(LABELS)}
# Accept the long spelling of the outside label as well.
LABEL_INDEX["O-not-an-entity"] = 0


class EntitySpan(NamedTuple):
    """Inclusive token range ``[start, end]`` with an optional entity type."""

    start: int
    end: int
    type: Optional[str] = None

    def untyped(self) -> "EntitySpan":
        return EntitySpan(self.start, self.end)

    def __len__(self):  # number of tokens covered
        return self.end - self.start + 1


def label_index(name: str, where: str = "") -> int:
    try:
        return LABEL_INDEX[name]
    except KeyError:
        raise DataError(f"unknown label {name!r}{where}") from None


def label_parts(index: int):
    """``(prefix, type)`` for a label index; ``("O", None)`` for outside."""
    if index == 0:
        return OUTSIDE, None
    k = index - 1
    return ("B", "I")[k % 2], ENTITY_TYPES[k // 2]


def begin_index(entity_type: str) -> int:
    return 1 + 2 * ENTITY_TYPES.index(entity_type)


def decode_spans(labels: Sequence) -> List[EntitySpan]:
    """Typed spans from IOB labels (indices or names).

    A run is ``B-X (I-X)*``.  An ``I-X`` that does not continue an ``X`` span
    opens a new span, as if it were ``B-X``.
    """
    spans: List[EntitySpan] = []
    start = cur = None
    for t, lab in enumerate(labels):
        idx = label_index(lab) if isinstance(lab, str) else int(lab)
        if not 0 <= idx < NUM_LABELS:
            raise DataError(f"label index {idx} at position {t} is not in the tag set")
        prefix, etype = label_parts(idx)
        if prefix == "I" and cur == etype:
            continue
        if cur is not None:
            spans.append(EntitySpan(start, t - 1, cur))
            start = cur = None
        if prefix != OUTSIDE:
            start, cur = t, etype
    if cur is not None:
        spans.append(EntitySpan(start, len(labels) - 1, cur))
    return spans


def spans_to_labels(spans: Sequence[EntitySpan], length: int) -> List[int]:
    """Inverse of :func:`decode_spans` for non-overlapping typed spans."""
    labels = [0] * length
    for s in sorted(spans):
        if not 0 <= s.start <= s.end < length:
            raise DataError(f"span {tuple(s)} outside a sentence of length {length}")
        if any(labels[t] for t in range(s.start, s.end + 1)):
            raise DataError(f"span {tuple(s)} overlaps another span")
        b = begin_index(s.type)
        labels[s.start] = b
        for t in range(s.start + 1, s.end + 1):
            labels[t] = b + 1
    return labels
