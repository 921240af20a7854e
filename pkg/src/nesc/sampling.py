"""Training samples for the span classifier.

Positives are the gold entities.  Negatives come from perturbing each gold
span (shrink, shift or extend by one token on either side) and from random
sub-sequences whose length follows the empirical entity-length distribution.
A negative never equals a gold span exactly; overlapping is fine.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Iterable, List, NamedTuple, Optional, Sequence, Set, Tuple

import numpy as np

from .corpus import Corpus, Sentence
from .errors import DataError
from .tags import EntitySpan, decode_spans

POSITIVE, PERTURBED, RANDOM = "positive", "perturbed", "random"


class NescSample(NamedTuple):
    sentence: int
    start: int
    end: int
    target: int
    provenance: str

    @property
    def span(self) -> EntitySpan:
        return EntitySpan(self.start, self.end)


@dataclass(frozen=True)
class LengthDistribution:
    lengths: Tuple[int, ...]
    probs: Tuple[float, ...]

    def __post_init__(self):
        if not self.lengths or len(self.lengths) != len(self.probs):
            raise DataError("length distribution needs matching, non-empty lengths and probabilities")

    def as_dict(self) -> Dict[int, float]:
        return dict(zip(self.lengths, self.probs))

    def sample(self, rng: np.random.Generator) -> int:
        return int(self.lengths[int(rng.choice(len(self.lengths), p=self.probs))])


def _gold_spans(sentence: Sentence) -> Set[Tuple[int, int]]:
    return {(s.start, s.end) for s in decode_spans(sentence.labels)}


def extract_positives(sentence: Sentence, sentence_id: int = 0) -> List[NescSample]:
    return [NescSample(sentence_id, s.start, s.end, 1, POSITIVE) for s in decode_spans(sentence.labels)]


def perturb(span, n: int, gold: Iterable = ()) -> List[Tuple[int, int]]:
    """Shrink, shift and extend ``span`` by one token each way.

    Candidates falling outside ``[0, n)``, empty ones, and ones equal to a
    span in ``gold`` are dropped.  Order: shrink-left, shrink-right,
    shift-left, shift-right, extend-left, extend-right.
    """
    i, j = span[0], span[1]
    taken = {(g[0], g[1]) for g in gold}
    out = []
    for a, b in ((i + 1, j), (i, j - 1), (i - 1, j - 1), (i + 1, j + 1), (i - 1, j), (i, j + 1)):
        if 0 <= a <= b < n and (a, b) not in taken:
            out.append((a, b))
    return out


def fit_length_distribution(corpus: Iterable[Sentence]) -> LengthDistribution:
    counts: Dict[int, int] = {}
    for s in corpus:
        for span in decode_spans(s.labels):
            counts[len(span)] = counts.get(len(span), 0) + 1
    if not counts:
        raise DataError("corpus contains no entities; cannot fit a length distribution")
    total = sum(counts.values())
    lengths = tuple(sorted(counts))
    return LengthDistribution(lengths, tuple(counts[k] / total for k in lengths))


def sample_random_negative(sentence: Sentence, dist: LengthDistribution, rng: np.random.Generator,
                           max_attempts: int = 20, sentence_id: int = 0) -> Optional[NescSample]:
    """Draw a length, then a uniform start; retry when the span is a gold entity.

    Returns ``None`` once ``max_attempts`` draws have all been rejected.  A
    drawn length longer than the sentence counts as a rejection.
    """
    n = len(sentence)
    gold = _gold_spans(sentence)
    for _ in range(max_attempts):
        length = dist.sample(rng)
        if length > n:
            continue
        i = int(rng.integers(0, n - length + 1))
        j = i + length - 1
        if (i, j) not in gold:
            return NescSample(sentence_id, i, j, 0, RANDOM)
    return None


def sentence_samples(sentence: Sentence, sentence_id: int, dist: Optional[LengthDistribution],
                     random_negatives: int, rng: np.random.Generator, max_attempts: int = 20) -> List[NescSample]:
    """All samples for one sentence, deduplicated on span, first occurrence kept."""
    gold = decode_spans(sentence.labels)
    samples = extract_positives(sentence, sentence_id)
    for g in gold:
        samples.extend(NescSample(sentence_id, a, b, 0, PERTURBED) for a, b in perturb(g, len(sentence), gold))
    if dist is not None:
        for _ in range(random_negatives):
            s = sample_random_negative(sentence, dist, rng, max_attempts, sentence_id)
            if s is not None:
                samples.append(s)
    seen: Set[Tuple[int, int]] = set()
    out = []
    for s in samples:
        if (s.start, s.end) not in seen:
            seen.add((s.start, s.end))
            out.append(s)
    return out


@dataclass
class NescDataset:
    samples: List[NescSample]
    w_pos: float
    w_neg: float
    context_size: int = 2
    length_distribution: Optional[LengthDistribution] = None

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def counts(self) -> Tuple[int, int]:
        pos = sum(s.target for s in self.samples)
        return pos, len(self.samples) - pos

    def to_tsv(self) -> str:
        return "".join(f"{s.sentence}\t{s.start}\t{s.end}\t{s.target}\t{s.provenance}\n" for s in self.samples)

    def write_tsv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            f.write(self.to_tsv())


def class_weights(n_pos: int, n_neg: int) -> Tuple[float, float]:
    """``(w_pos, w_neg)`` with ``w_neg = 1`` and ``w_pos·n_pos = n_neg``."""
    if n_pos == 0 or n_neg == 0:
        return 1.0, 1.0
    return n_neg / n_pos, 1.0


def build_dataset(corpus: Corpus, random_negatives_per_sentence: int = 2, seed: int = 0,
                  max_attempts: int = 20, context_size: int = 2,
                  length_distribution: Optional[LengthDistribution] = None) -> NescDataset:
    """Positives, perturbation negatives and random negatives for every sentence.

    Sentence ``i`` draws from its own generator seeded with ``(seed, i)``, so
    the output does not depend on processing order.  By default the length
    distribution is fitted on ``corpus`` itself.
    """
    if not len(corpus):
        raise DataError("cannot build a span dataset from an empty corpus")
    dist = length_distribution
    if dist is None and random_negatives_per_sentence > 0:
        dist = fit_length_distribution(corpus)
    samples: List[NescSample] = []
    for idx, sentence in enumerate(corpus):
        rng = np.random.default_rng([seed, idx])
        samples.extend(sentence_samples(sentence, idx, dist, random_negatives_per_sentence, rng, max_attempts))
    n_pos = sum(s.target for s in samples)
    w_pos, w_neg = class_weights(n_pos, len(samples) - n_pos)
    return NescDataset(samples, w_pos, w_neg, context_size, dist)


def read_dataset_tsv(path) -> List[NescSample]:
    out = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            cols = line.rstrip("\n").split("\t")
            if len(cols) != 5 or cols[4] not in (POSITIVE, PERTURBED, RANDOM):
                raise DataError(f"{path}:{lineno}: malformed sample record")
            try:
                out.append(NescSample(int(cols[0]), int(cols[1]), int(cols[2]), int(cols[3]), cols[4]))
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-integer field") from None
    return out
