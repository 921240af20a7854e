"""Tokenisation and the 253-dimensional token vector.

A token vector is ``[embedding (200) | surface (36) | pos (17)]``.  Sparse
parts use 0.1 rather than 1 for their nonzero entries so they sit in the
same numeric range as the embedding values.
"""

from __future__ import annotations

import hashlib
import re
import unicodedata
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

from .errors import DataError, UsageError

EMBEDDING_DIM = 200
ONE_HOT_VALUE = 0.1

# Tokens made of exactly one of these characters get their own indicator.
SPECIAL_CHARS = (
    "%", "/", ".", "!", "?", ",", ";", ":", "'", '"', "(", ")", "[", "]", "{", "}",
    "@", "#", "$", "&", "*", "+", "-", "=", "<", ">", "|", "\\", "~", "^", "_", "`",
)
HASHTAG = len(SPECIAL_CHARS)
HANDLE = HASHTAG + 1
FIRST_CAP = HASHTAG + 2
ALL_CAPS = HASHTAG + 3
SURFACE_DIM = ALL_CAPS + 1

# Universal POS tags.
POS_TAGS = (
    "ADJ", "ADP", "ADV", "AUX", "CCONJ", "DET", "INTJ", "NOUN", "NUM",
    "PART", "PRON", "PROPN", "PUNCT", "SCONJ", "SYM", "VERB", "X",
)
POS_DIM = len(POS_TAGS)
_POS_INDEX = {t: i for i, t in enumerate(POS_TAGS)}
UNKNOWN_POS = "X"

_SPECIAL_INDEX = {c: i for i, c in enumerate(SPECIAL_CHARS)}


@dataclass(frozen=True)
class Token:
    surface: str
    start: int
    end: int
    pos: Optional[str] = None

    def with_pos(self, pos: str) -> "Token":
        return Token(self.surface, self.start, self.end, pos)


_URL = re.compile(r"(?:https?://|www\.)\S+", re.IGNORECASE)
_HANDLE = re.compile(r"@\w+")
_HASHTAG = re.compile(r"#\w+")
_URL_TRAIL = set(".,!?;:'\")]}>")


def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch)[0] in "PS"


def _split_chunk(chunk: str, offset: int) -> List[Token]:
    head: List[Token] = []
    i, j = 0, len(chunk)
    while i < j:
        rest = chunk[i:j]
        m = _URL.match(rest) or _HANDLE.match(rest) or _HASHTAG.match(rest)
        if m:
            end = i + m.end()
            if m.re is _URL:
                while end > i + 1 and chunk[end - 1] in _URL_TRAIL:
                    end -= 1
            head.append(Token(chunk[i:end], offset + i, offset + end))
            i = end
            continue
        if _is_punct(chunk[i]):
            head.append(Token(chunk[i], offset + i, offset + i + 1))
            i += 1
            continue
        break
    tail: List[Token] = []
    while j > i and _is_punct(chunk[j - 1]):
        tail.append(Token(chunk[j - 1], offset + j - 1, offset + j))
        j -= 1
    if j > i:
        head.append(Token(chunk[i:j], offset + i, offset + j))
    return head + tail[::-1]


def tokenize(text: str) -> List[Token]:
    """Whitespace split, then detach leading and trailing punctuation.

    URLs, @handles and #hashtags stay whole.  Every token records its
    character offsets, so ``text[t.start:t.end] == t.surface``.
    """
    tokens: List[Token] = []
    for m in re.finditer(r"\S+", text):
        tokens.extend(_split_chunk(m.group(), m.start()))
    return tokens


def surface_features(token) -> np.ndarray:
    s = token.surface if isinstance(token, Token) else token
    if not s:
        raise UsageError("surface_features of an empty token")
    v = np.zeros(SURFACE_DIM)
    if s in _SPECIAL_INDEX:
        v[_SPECIAL_INDEX[s]] = ONE_HOT_VALUE
        return v
    if len(s) > 1 and s[0] == "#":
        v[HASHTAG] = ONE_HOT_VALUE
    elif len(s) > 1 and s[0] == "@":
        v[HANDLE] = ONE_HOT_VALUE
    letters = [c for c in s if c.isalpha()]
    if len(letters) >= 2 and all(c.isupper() for c in letters):
        v[ALL_CAPS] = ONE_HOT_VALUE
    elif s[0].isupper():
        v[FIRST_CAP] = ONE_HOT_VALUE
    return v


def pos_one_hot(tag: str, line: Optional[int] = None) -> np.ndarray:
    try:
        idx = _POS_INDEX[tag]
    except KeyError:
        where = f" (line {line})" if line is not None else ""
        raise DataError(f"unknown POS tag {tag!r}{where}") from None
    v = np.zeros(POS_DIM)
    v[idx] = ONE_HOT_VALUE
    return v


class EmbeddingTable:
    """Read-only map from surface form to a dense row, with an UNK fallback."""

    def __init__(self, words: Sequence[str], matrix: np.ndarray, unk: Optional[np.ndarray] = None,
                 checksum: Optional[str] = None):
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.ndim != 2 or matrix.shape[0] != len(words):
            raise DataError(f"embedding matrix {matrix.shape} does not match {len(words)} words")
        self.dim = matrix.shape[1]
        self.words = list(words)
        self.index: Dict[str, int] = {w: i for i, w in enumerate(self.words)}
        self.matrix = matrix
        self.matrix.flags.writeable = False
        self.unk = np.zeros(self.dim) if unk is None else np.asarray(unk, dtype=np.float64)
        self.unk.flags.writeable = False
        self.checksum = checksum

    def __len__(self) -> int:
        return len(self.words)

    def __contains__(self, word: str) -> bool:
        return word in self.index

    def lookup(self, word: str) -> np.ndarray:
        i = self.index.get(word)
        if i is None:
            i = self.index.get(word.lower())
        return self.unk if i is None else self.matrix[i]

    @classmethod
    def random(cls, vocab: Iterable[str], rng: np.random.Generator, dim: int = EMBEDDING_DIM,
               scale: float = 0.1) -> "EmbeddingTable":
        """Gaussian rows for a vocabulary, used when no pretrained file is given."""
        words = sorted(set(vocab))
        return cls(words, rng.normal(0.0, scale, size=(len(words), dim)))

    @classmethod
    def load(cls, path, dim: int = EMBEDDING_DIM) -> "EmbeddingTable":
        """Read ``word f1 ... f{dim}`` lines.  A ``<UNK>`` line sets the UNK row."""
        raw = open(path, "rb").read()
        words, rows, unk = [], [], None
        try:
            text = raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise DataError(f"{path}: not valid UTF-8 ({exc})") from None
        for lineno, line in enumerate(text.splitlines(), 1):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split(" ")
            if len(parts) != dim + 1:
                raise DataError(f"{path}:{lineno}: expected word and {dim} floats, got {len(parts) - 1} values")
            try:
                row = np.array([float(x) for x in parts[1:]])
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric embedding value") from None
            if not np.all(np.isfinite(row)):
                raise DataError(f"{path}:{lineno}: non-finite embedding value")
            if parts[0] == "<UNK>":
                unk = row
            else:
                words.append(parts[0])
                rows.append(row)
        matrix = np.array(rows).reshape(len(rows), dim)
        return cls(words, matrix, unk, checksum=hashlib.sha256(raw).hexdigest())


def embed(token, table: EmbeddingTable) -> np.ndarray:
    """Exact match, then lowercase match, then the UNK row."""
    return table.lookup(token.surface if isinstance(token, Token) else token)


def vectorize(token: Token, table: EmbeddingTable) -> np.ndarray:
    if token.pos is None:
        raise UsageError(f"token {token.surface!r} has no POS tag")
    return np.concatenate([embed(token, table), surface_features(token), pos_one_hot(token.pos)])


def vectorize_sentence(surfaces: Sequence[str], pos: Sequence[str], table: EmbeddingTable) -> np.ndarray:
    """Stack token vectors for a sentence into a ``(T, dim + 53)`` matrix."""
    if len(surfaces) != len(pos):
        raise UsageError(f"{len(surfaces)} tokens but {len(pos)} POS tags")
    out = np.zeros((len(surfaces), table.dim + SURFACE_DIM + POS_DIM))
    for t, (s, p) in enumerate(zip(surfaces, pos)):
        out[t, : table.dim] = table.lookup(s)
        out[t, table.dim: table.dim + SURFACE_DIM] = surface_features(s)
        out[t, table.dim + SURFACE_DIM:] = pos_one_hot(p)
    return out
