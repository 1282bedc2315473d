"""The six matrix types and the finite state sets ``M_D``."""
from __future__ import annotations

import enum
import functools
from dataclasses import dataclass
from typing import Sequence

from .cf_core import Mat2
from .errors import InvalidMatrix


class StateType(enum.IntEnum):
    I = 1
    II = 2
    III = 3
    IV = 4
    V = 5
    VI = 6


def type_of(a: int, b: int, c: int, d: int) -> int:
    """Lowest matching type number, 0 if none.  Does not look at the determinant."""
    if c == 0 and b >= 0 and a > 0 and d > 0 and b < d:
        return 1
    if d == 0 and a >= 0 and b > 0 and c > 0 and a < c:
        return 2
    if a == 0 and d >= 0 and b > 0 and c > 0 and d < b:
        return 3
    if b == 0 and c >= 0 and a > 0 and d > 0 and c < a:
        return 4
    if a < 0 and b > 0 and c > 0 and d > 0 and -a < c:
        return 5
    if b < 0 and a > 0 and c > 0 and d > 0 and -b < d:
        return 6
    return 0


def classify(m: Sequence[int]) -> StateType | None:
    """Type of ``m``, or ``None`` when ``m`` lies in no ``M_D``."""
    a, b, c, d = m
    if a * d - b * c == 0:
        raise InvalidMatrix(f"singular matrix {Mat2(*m)}")
    t = type_of(a, b, c, d)
    return StateType(t) if t else None


def in_md(m: Sequence[int]) -> bool:
    return type_of(*m) != 0


@dataclass(frozen=True)
class StateSet:
    D: int
    members: dict  # Mat2 -> StateType, in scan order

    def __contains__(self, m) -> bool:
        return Mat2(*m) in self.members

    def __iter__(self):
        return iter(self.members)

    def __len__(self) -> int:
        return len(self.members)


@functools.lru_cache(maxsize=None)
def enumerate_states(D: int) -> StateSet:
    """All matrices with ``|det| = D`` and a type, by exhaustive scan of ``[-D, D]^4``."""
    if D < 1:
        raise ValueError(f"D must be >= 1, got {D}")
    rng = range(-D, D + 1)
    members = {}
    for a in rng:
        for b in rng:
            for c in rng:
                for d in rng:
                    if abs(a * d - b * c) == D:
                        t = type_of(a, b, c, d)
                        if t:
                            members[Mat2(a, b, c, d)] = StateType(t)
    return StateSet(D, members)
