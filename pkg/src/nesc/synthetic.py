"""Small generated corpora with planted entities, for tests and demos."""

from __future__ import annotations

from typing import List, Optional

import numpy as np

from .corpus import Corpus, Sentence
from .tags import ENTITY_TYPES, begin_index

FILLER = [
    ("the", "DET"), ("a", "DET"), ("this", "DET"), ("i", "PRON"), ("we", "PRON"), ("they", "PRON"),
    ("love", "VERB"), ("saw", "VERB"), ("visited", "VERB"), ("watched", "VERB"), ("likes", "VERB"),
    ("with", "ADP"), ("in", "ADP"), ("from", "ADP"), ("at", "ADP"), ("and", "CCONJ"), ("but", "CCONJ"),
    ("great", "ADJ"), ("new", "ADJ"), ("old", "ADJ"), ("really", "ADV"), ("today", "NOUN"),
    ("show", "NOUN"), ("city", "NOUN"), ("game", "NOUN"), ("phone", "NOUN"), ("!", "PUNCT"), (".", "PUNCT"),
]

NAMES = {
    "Person": ["Alice Moreno", "Tony Romo", "Bill Ritter", "Harry Potter", "Calum", "Ashton", "Russell Wilson"],
    "Place": ["San Francisco", "Paris", "Long Island", "Seattle", "New Mexico City"],
    "Product": ["Galaxy Note", "Memory Foam Cushion", "iPad", "Compression Seals"],
    "Organization": ["Steelers", "Seahawks", "Waterstones", "Twitter", "Stanford University"],
    "Other": ["Veterans Day", "The Essex Serpent", "NowPlaying Live", "Awaken My Love"],
}


def planted_corpus(n_sentences: int, rng: np.random.Generator, min_len: int = 4, max_len: int = 10,
                   max_entities: int = 2, split: str = "train",
                   entity_rate: Optional[float] = 0.85) -> Corpus:
    """Sentences of filler words with up to ``max_entities`` planted names.

    Entity tokens are tagged ``PROPN``; filler tokens carry their usual tag.
    """
    sentences: List[Sentence] = []
    for _ in range(n_sentences):
        length = int(rng.integers(min_len, max_len + 1))
        toks, pos, labs = [], [], []
        for _ in range(length):
            w, p = FILLER[int(rng.integers(len(FILLER)))]
            toks.append(w), pos.append(p), labs.append(0)
        k = int(rng.integers(1, max_entities + 1)) if rng.random() < entity_rate else 0
        slots = sorted(rng.choice(length + 1, size=k, replace=False).tolist(), reverse=True)
        for slot in slots:
            etype = ENTITY_TYPES[int(rng.integers(len(ENTITY_TYPES)))]
            words = NAMES[etype][int(rng.integers(len(NAMES[etype])))].split()
            b = begin_index(etype)
            ent_labels = [b] + [b + 1] * (len(words) - 1)
            toks[slot:slot] = words
            pos[slot:slot] = ["PROPN"] * len(words)
            labs[slot:slot] = ent_labels
        # keep adjacent planted names apart so gold spans stay distinct
        fixed_t, fixed_p, fixed_l = [], [], []
        for t, (w, p, y) in enumerate(zip(toks, pos, labs)):
            if y and y % 2 == 1 and fixed_l and fixed_l[-1]:
                fixed_t.append("and"), fixed_p.append("CCONJ"), fixed_l.append(0)
            fixed_t.append(w), fixed_p.append(p), fixed_l.append(y)
        sentences.append(Sentence(tuple(fixed_t), tuple(fixed_p), tuple(fixed_l)))
    return Corpus(sentences, split)
