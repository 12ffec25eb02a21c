from __future__ import annotations

import difflib
import re
from dataclasses import dataclass
from typing import Dict, List, Sequence

from .errors import UnknownLabel

# Fixed symbol order; the position is the class index used everywhere.
SYMBOLS: tuple[str, ...] = ("1", "2", "3", "4", "5", "A", "B", "C", "D", "E", "F")
N_CLASSES = len(SYMBOLS)

CHANNELS: tuple[str, ...] = ("thumb", "index", "middle", "ring", "little")
N_CHANNELS = len(CHANNELS)

_DIGIT_WORDS = {"1": "one", "2": "two", "3": "three", "4": "four", "5": "five"}


def _aliases(symbol: str) -> List[str]:
    low = symbol.lower()
    if symbol.isdigit():
        return [low, f"digit_{low}", f"number_{low}", f"num_{low}", _DIGIT_WORDS[symbol]]
    return [low, f"letter_{low}", f"sign_{low}", f"char_{low}"]


CANONICAL_LABELS: Dict[str, List[str]] = {symbol: _aliases(symbol) for symbol in SYMBOLS}


@dataclass(frozen=True)
class ClassLabel:
    symbol: str

    def __post_init__(self) -> None:
        if self.symbol not in SYMBOLS:
            raise UnknownLabel(f"unknown sign {self.symbol!r}; expected one of {', '.join(SYMBOLS)}")

    @property
    def index(self) -> int:
        return SYMBOLS.index(self.symbol)

    @classmethod
    def from_index(cls, index: int) -> "ClassLabel":
        if not 0 <= index < N_CLASSES:
            raise UnknownLabel(f"class index {index} outside 0..{N_CLASSES - 1}")
        return cls(SYMBOLS[index])

    def __str__(self) -> str:
        return self.symbol


def _normalize(name: str) -> str:
    return re.sub(r"[\s\-]+", "_", name.strip().lower())


class LabelResolver:
    """Maps directory names and manifest entries onto the fixed label set."""

    def __init__(self, cutoff: float = 0.9):
        self.cutoff = cutoff
        self.lookup: Dict[str, str] = {
            alias: symbol for symbol, aliases in CANONICAL_LABELS.items() for alias in aliases
        }

    def resolve(self, name: str) -> ClassLabel:
        normalized = _normalize(name)
        if normalized in self.lookup:
            return ClassLabel(self.lookup[normalized])
        closest = difflib.get_close_matches(normalized, list(self.lookup), n=1, cutoff=self.cutoff)
        if closest:
            return ClassLabel(self.lookup[closest[0]])
        raise UnknownLabel(f"cannot map {name!r} onto a sign label")


def resolve_label(name: str) -> ClassLabel:
    return LabelResolver().resolve(name)


def labels_from_indices(indices: Sequence[int]) -> List[ClassLabel]:
    return [ClassLabel.from_index(int(i)) for i in indices]


__all__ = [
    "SYMBOLS",
    "N_CLASSES",
    "CHANNELS",
    "N_CHANNELS",
    "CANONICAL_LABELS",
    "ClassLabel",
    "LabelResolver",
    "resolve_label",
    "labels_from_indices",
]
