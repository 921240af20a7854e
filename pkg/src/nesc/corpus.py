"""CoNLL-style corpus files: ``surface<TAB>pos<TAB>label`` per token.

A blank line ends a sentence.  Corpora without POS can be read with
``has_pos=False``; every token then gets the reserved tag ``X``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, List, Optional, Sequence, Tuple

from .errors import DataError
from .features import POS_TAGS, UNKNOWN_POS
from .tags import LABELS, EntitySpan, decode_spans, label_index

_POS = frozenset(POS_TAGS)


@dataclass(frozen=True)
class Sentence:
    tokens: Tuple[str, ...]
    pos: Tuple[str, ...]
    labels: Tuple[int, ...] = ()

    def __post_init__(self):
        if len(self.tokens) != len(self.pos):
            raise DataError(f"{len(self.tokens)} tokens but {len(self.pos)} POS tags")
        if self.labels and len(self.labels) != len(self.tokens):
            raise DataError(f"{len(self.tokens)} tokens but {len(self.labels)} labels")

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def entities(self) -> List[EntitySpan]:
        return decode_spans(self.labels)

    def text(self, span: Optional[EntitySpan] = None) -> str:
        if span is None:
            return " ".join(self.tokens)
        return " ".join(self.tokens[span.start: span.end + 1])


@dataclass
class Corpus:
    sentences: List[Sentence] = field(default_factory=list)
    split: str = "train"

    def __len__(self) -> int:
        return len(self.sentences)

    def __iter__(self) -> Iterator[Sentence]:
        return iter(self.sentences)

    def __getitem__(self, i) -> Sentence:
        return self.sentences[i]

    def vocabulary(self) -> List[str]:
        return sorted({w for s in self.sentences for w in s.tokens})


def load_conll(path, split: str = "train", has_pos: bool = True) -> Corpus:
    ncols = 3 if has_pos else 2
    sentences: List[Sentence] = []
    toks: List[str] = []
    pos: List[str] = []
    labs: List[int] = []

    def flush():
        if toks:
            sentences.append(Sentence(tuple(toks), tuple(pos), tuple(labs)))
            toks.clear(), pos.clear(), labs.clear()

    try:
        f = open(path, encoding="utf-8")
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror}") from None
    with f:
        try:
            for lineno, line in enumerate(f, 1):
                line = line.rstrip("\r\n")
                if not line.strip():
                    flush()
                    continue
                cols = line.split("\t")
                if len(cols) != ncols:
                    raise DataError(f"{path}:{lineno}: expected {ncols} tab-separated columns, got {len(cols)}")
                if not cols[0]:
                    raise DataError(f"{path}:{lineno}: empty token")
                tag = cols[1] if has_pos else UNKNOWN_POS
                if tag not in _POS:
                    raise DataError(f"{path}:{lineno}: unknown POS tag {tag!r}")
                toks.append(cols[0])
                pos.append(tag)
                labs.append(label_index(cols[-1], f" at {path}:{lineno}"))
        except UnicodeDecodeError as exc:
            raise DataError(f"{path}: not valid UTF-8 ({exc})") from None
    flush()
    return Corpus(sentences, split)


def format_conll(sentences: Sequence[Sentence]) -> str:
    blocks = []
    for s in sentences:
        blocks.append("".join(f"{w}\t{p}\t{LABELS[y]}\n" for w, p, y in zip(s.tokens, s.pos, s.labels)))
    return "\n".join(blocks)


def write_conll(corpus, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(format_conll(list(corpus)))
