"""Trigger strings: the shortest input windows whose output contains a target.

Positions are 1-based over the tail ``d1..dm`` of a resultant string.  A
copy of ``r`` sits *nicely* when it avoids the entries that prepending or
appending input can still rewrite.
"""
from __future__ import annotations

import bisect
import itertools
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

from .cf_core import CFString, Mat2, absorb
from .errors import CFXError
from .transducer import run, step

CONSERVATIVE = "conservative"  # d2 .. d(m-2)
LOOSE = "loose"  # d1 .. d(m-2)


def _first_nice(reading: str) -> int:
    if reading == CONSERVATIVE:
        return 2
    if reading == LOOSE:
        return 1
    raise ValueError(f"unknown reading {reading!r}")


def occurrences(t: CFString, r: CFString) -> list[int]:
    """Every start index of ``r`` in the tail of ``t``."""
    pat = tuple(r.tail)
    k = len(pat)
    tail = t.tail
    return [i + 1 for i in range(len(tail) - k + 1) if tuple(tail[i : i + k]) == pat]


def occurrences_nicely(t: CFString, r: CFString, reading: str = CONSERVATIVE) -> list[int]:
    if not r.tail or not r.is_proper:
        raise ValueError(f"target must be a nonempty proper string, got {r}")
    lo = _first_nice(reading)
    last = len(t.tail) - 2 - len(r.tail) + 1
    return [i for i in occurrences(t, r) if lo <= i <= last]


def is_nice_at(t: CFString, r: CFString, i: int, reading: str = CONSERVATIVE) -> bool:
    k = len(r.tail)
    if i < _first_nice(reading) or i + k - 1 > len(t.tail) - 2:
        return False
    return tuple(t.tail[i - 1 : i - 1 + k]) == tuple(r.tail)


@dataclass(frozen=True)
class TriggerInstance:
    s: CFString
    state: Mat2
    multiplicity: int
    relative_position: int
    span: tuple = (0, 0)  # [start, stop) within the full input tail
    positions: tuple = ()  # every relative position sharing this decomposition

    def to_dict(self) -> dict:
        return {
            "s": list(self.s.tail),
            "state": str(self.state),
            "multiplicity": self.multiplicity,
            "relative_position": self.relative_position,
            "span": list(self.span),
        }


class _Trace:
    """Prefix data of one run, enough to relocate positions in sub-windows.

    After ``a`` digits the prefix output has ``n[a]`` tail entries and last
    entry ``last[a]``; ``states[a]`` is the state.
    """

    def __init__(self, m: Mat2, digits: Sequence[int]):
        self.digits = tuple(digits)
        self.states = [Mat2(*m)]
        buf = [0]
        self.n = [0]
        self.last = [0]
        for j in self.digits:
            res = step(self.states[-1], j)
            absorb(buf, res.out)
            self.states.append(res.next)
            self.n.append(len(buf) - 1)
            self.last.append(buf[-1])
        self.result = CFString(buf[0], tuple(buf[1:]))
        # monotone envelopes of n, for bisecting window bounds
        self.pmax = list(itertools.accumulate(self.n, max))
        self.smin = list(itertools.accumulate(reversed(self.n), min))[::-1]

    def offset(self, a: int, t: CFString) -> int:
        """Shift from positions in ``t = R(window, states[a])`` to the full output, valid for ``k >= 2``."""
        n = self.n[a]
        if n and t.head and self.last[a] + t.head == 0:
            return n - 2
        return n

    def window(self, a: int, b: int) -> CFString:
        return run(self.states[a], CFString(0, self.digits[a:b]))[0]

    def nice(self, a: int, b: int, i: int, r: CFString, reading: str) -> tuple[bool, int]:
        if a >= b:
            return False, 0
        t = self.window(a, b)
        rel = i - self.offset(a, t)
        return is_nice_at(t, r, rel, reading), rel


def minimal_decomposition(full: CFString, m: Mat2, occ: int, r: CFString, reading: str = CONSERVATIVE, trace: _Trace | None = None) -> TriggerInstance:
    """Shrink the input around the nice copy of ``r`` at ``occ`` in ``R(full, M)``."""
    trace = trace or _Trace(m, full.tail)
    N = len(trace.digits)
    if not is_nice_at(trace.result, r, occ, reading):
        raise ValueError(f"no nice copy of {r} at position {occ}")
    # start from a window that brackets the copy, widening until it reproduces
    need_lo, need_hi = occ - 3, occ + len(r.tail) + 3
    a = max(0, bisect.bisect_right(trace.pmax, need_lo) - 1)
    b = max(a + 1, min(N, bisect.bisect_left(trace.smin, need_hi)))
    w = 1
    while not trace.nice(a, b, occ, r, reading)[0]:
        if a == 0 and b == N:
            raise CFXError(f"copy of {r} at {occ} not reproduced by the full window")
        a, b = max(0, a - w), min(N, b + w)
        w *= 2
    changed = True
    while changed:
        changed = False
        while trace.nice(a + 1, b, occ, r, reading)[0]:
            a += 1
            changed = True
        while trace.nice(a, b - 1, occ, r, reading)[0]:
            b -= 1
            changed = True
    rel = trace.nice(a, b, occ, r, reading)[1]
    s = CFString(0, trace.digits[a:b])
    inst = TriggerInstance(s, trace.states[a], 1, rel, (a, b), (rel,))
    if not is_nice_at(run(inst.state, s)[0], r, rel, reading):
        raise CFXError(f"trigger {s} from {inst.state} does not replay")
    return inst


def is_minimal(inst: TriggerInstance, r: CFString, reading: str = CONSERVATIVE) -> bool:
    """Dropping either end digit must lose the copy at the same relative position."""
    s, m = inst.s.tail, inst.state
    t = run(m, inst.s)[0]
    if not all(is_nice_at(t, r, p, reading) for p in inst.positions):
        return False
    for p in inst.positions:
        # drop the last digit: positions are unchanged
        if len(s) > 1 and is_nice_at(run(m, CFString(0, s[:-1]))[0], r, p, reading):
            return False
        if len(s) > 1:
            head = step(m, s[0])
            t2 = run(head.next, CFString(0, s[1:]))[0]
            n = len(head.out.tail)
            last = head.out.tail[-1] if head.out.tail else head.out.head
            off = n - 2 if n and t2.head and last + t2.head == 0 else n
            if is_nice_at(t2, r, p - off, reading):
                return False
    return True


@dataclass
class Census:
    instances: list = field(default_factory=list)
    occurrence_count: int = 0
    nice_count: int = 0
    output_length: int = 0

    @property
    def multiplicity_sum(self) -> int:
        return sum(i.multiplicity for i in self.instances)

    @property
    def slack(self) -> int:
        return abs(self.occurrence_count - self.multiplicity_sum)

    @property
    def max_trigger_length(self) -> int:
        return max((len(i.s.tail) for i in self.instances), default=0)

    def to_dict(self) -> dict:
        return {
            "count": self.occurrence_count,
            "nice": self.nice_count,
            "multiplicity_sum": self.multiplicity_sum,
            "slack": self.slack,
            "triggers": [i.to_dict() for i in self.instances],
        }


def trigger_census(m: Mat2, inp: CFString, r: CFString, reading: str = CONSERVATIVE) -> Census:
    trace = _Trace(m, inp.tail)
    out = trace.result
    census = Census(occurrence_count=len(occurrences(out, r)), output_length=len(out.tail))
    groups: dict = {}
    for occ in occurrences_nicely(out, r, reading):
        census.nice_count += 1
        inst = minimal_decomposition(inp, m, occ, r, reading, trace)
        key = inst.span
        if key in groups:
            prev = groups[key]
            groups[key] = TriggerInstance(
                prev.s, prev.state, prev.multiplicity + 1, prev.relative_position, key, prev.positions + inst.positions
            )
        else:
            groups[key] = inst
    census.instances = list(groups.values())
    return census


def trigger_multiset(census: Census) -> Counter:
    """``(s, state) -> total multiplicity`` across all spans."""
    c = Counter()
    for i in census.instances:
        c[(i.s, i.state)] += i.multiplicity
    return c
