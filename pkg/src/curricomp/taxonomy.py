from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


class BasicClass(enum.IntEnum):
    ANGER = 0
    DISGUST = 1
    FEAR = 2
    HAPPINESS = 3
    SADNESS = 4
    SURPRISE = 5

    @property
    def label(self) -> str:
        return self.name.lower()


BASIC_NAMES = tuple(c.label for c in BasicClass)
# manifest column order; neutral is ingested and then dropped
MANIFEST_COLUMNS = ("path",) + BASIC_NAMES + ("neutral",)


@dataclass(frozen=True)
class CompoundClass:
    name: str
    constituents: frozenset

    @property
    def indices(self) -> tuple[int, int]:
        return tuple(sorted(int(c) for c in self.constituents))


def _entry(name, *classes):
    return CompoundClass(name, frozenset(classes))


B = BasicClass
CATALOG: tuple[CompoundClass, ...] = (
    _entry("FearfullySurprised", B.FEAR, B.SURPRISE),
    _entry("HappilySurprised", B.HAPPINESS, B.SURPRISE),
    _entry("SadlySurprised", B.SADNESS, B.SURPRISE),
    _entry("DisgustedlySurprised", B.DISGUST, B.SURPRISE),
    _entry("AngrilySurprised", B.ANGER, B.SURPRISE),
    _entry("SadlyFearful", B.SADNESS, B.FEAR),
    _entry("SadlyAngry", B.SADNESS, B.ANGER),
)
del B

COMPOUND_NAMES = tuple(e.name for e in CATALOG)


def membership_matrix(catalog=CATALOG) -> np.ndarray:
    """(len(catalog), 6) 0/1 matrix; row k marks the constituents of entry k."""
    m = np.zeros((len(catalog), len(BasicClass)))
    for k, entry in enumerate(catalog):
        m[k, list(entry.indices)] = 1.0
    return m


def catalog_index_for(label, catalog=CATALOG) -> int:
    """Catalog entry with the largest summed label mass; ties go to the lowest index."""
    scores = membership_matrix(catalog) @ np.asarray(label, dtype=float)
    return int(np.argmax(scores))


def entry_for_support(support, catalog=CATALOG) -> int | None:
    support = frozenset(int(c) for c in support)
    for k, entry in enumerate(catalog):
        if frozenset(int(c) for c in entry.constituents) == support:
            return k
    return None
