"""Hyperparameters, loadable from a ``key = value`` file."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from typing import Dict

from .errors import DataError


@dataclass(frozen=True)
class Config:
    # tagger
    embedding_dim: int = 200
    hidden_size: int = 100
    dropout: float = 0.5
    ner_epochs: int = 30
    # span classifier
    nesc_hidden: int = 100
    nesc_epochs: int = 10
    context_size: int = 2
    random_negatives_per_sentence: int = 2
    max_attempts: int = 20
    # optimiser, shared by both models
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    clip_norm: float = 5.0

    def replace(self, **changes) -> "Config":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> Dict[str, object]:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, values: Dict[str, object]) -> "Config":
        known = {f.name: f for f in fields(cls)}
        out = {}
        for key, raw in values.items():
            if key not in known:
                raise DataError(f"unknown config key {key!r}")
            typ = int if known[key].type in (int, "int") else float
            try:
                out[key] = typ(raw)
            except (TypeError, ValueError):
                raise DataError(f"config key {key!r}: cannot parse {raw!r} as {typ.__name__}") from None
        return cls(**out)

    @classmethod
    def load(cls, path) -> "Config":
        values = {}
        with open(path, encoding="utf-8") as f:
            for lineno, line in enumerate(f, 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise DataError(f"{path}:{lineno}: expected key=value, got {line!r}")
                key, value = (part.strip() for part in line.split("=", 1))
                values[key] = value
        return cls.from_dict(values)

    def dumps(self) -> str:
        return "".join(f"{k} = {v!r}\n" for k, v in self.to_dict().items())
