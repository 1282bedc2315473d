"""Digit-at-a-time transduction of ``x`` into ``Mx``.

For a state ``M`` and an input digit ``j`` the step finds a string
``[d0; d1, ..., dm]`` and a successor ``M'`` with

    M J A_j = A_{d0} J A_{d1} ... J A_{dm} M'

so that ``M<0; j, rest> = [d0; d1, ..., dm] . M'(<0; rest>)``.  Since every
member of ``M_D`` maps ``(0, 1)`` into ``(-1, inf]``, the output digits are
the true digits of ``Mx`` except for the last two, which later steps may
still rewrite.
"""
from __future__ import annotations

import functools
import os
from fractions import Fraction
from typing import Iterable, Iterator, NamedTuple, Sequence

from .cf_core import (
    EMPTY,
    CFString,
    Mat2,
    absorb,
    apply,
    mat_mul,
    mul_JA,
    rational_to_cf,
    string_to_matrix,
)
from .errors import CFXError, InvalidMatrix, NeedMoreDigits, NonTerminationError, PoleError
from .md_states import type_of

DEBUG = bool(os.environ.get("CFX_DEBUG"))
SAMPLE_EVERY = 1024
ANNIHILATOR = CFString(-1, (1,))


class StepResult(NamedTuple):
    out: CFString
    next: Mat2
    clamps: int = 0


def _euclid(A: int, B: int, C: int, D: int, cap: int):
    """Peel digits off a non-negative matrix until it lands in some ``M_D``.

    Each round swaps rows and subtracts ``q`` times the new bottom row from
    the top, with ``q`` the smaller of the defined column quotients.  When
    that quotient is 0 (one column has top > bottom) it is clamped to 1,
    which drives that column negative and lands in Type V or VI.
    """
    digits = []
    clamps = 0
    trace = []
    while not type_of(A, B, C, D):
        if len(digits) >= cap:
            raise NonTerminationError(f"Euclidean loop exceeded {cap} rounds", trace)
        trace.append((A, B, C, D))
        if A > 0:
            q = C // A
            if B > 0 and D // B < q:
                q = D // B
        elif B > 0:
            q = D // B
        else:
            raise NonTerminationError(f"no defined quotient for ({A},{B};{C},{D})", trace)
        if q == 0:
            q = 1
            clamps += 1
        A, B, C, D = C - q * A, D - q * B, A, B
        if A < 0 and B < 0:
            raise NonTerminationError(f"both top entries negative: ({A},{B};{C},{D})", trace)
        digits.append(q)
    return digits, Mat2(A, B, C, D), clamps


def _first_digit(t: int, A: int, B: int, C: int, D: int) -> int:
    # the case analysis on the type of the source state
    if t == 1 or t == 4:
        return min(A // C, B // D)
    if t == 2 or t == 3:
        return B // D if C == 0 else min(A // C, B // D)
    if t == 5:
        if B > 0:
            return min(A // C, B // D)
        return 0  # B == 0 is trivially fine; B < 0 is already Type VI
    return 0 if B > 0 else -1


@functools.lru_cache(maxsize=1 << 20)
def step(m: Mat2, j: int) -> StepResult:
    a, b, c, d = m
    t = type_of(a, b, c, d)
    if not t:
        raise InvalidMatrix(f"{Mat2(*m)} is not a state (no type matches)")
    if j < 1:
        raise ValueError(f"digits must be >= 1, got {j}")
    A, B, C, D = b, a + b * j, d, c + d * j
    d0 = _first_digit(t, A, B, C, D)
    A -= d0 * C
    B -= d0 * D
    det = abs(a * d - b * c)
    digits, nxt, clamps = _euclid(A, B, C, D, 64 * det)
    out = CFString(d0, tuple(digits))
    res = StepResult(out, nxt, clamps)
    _check_counter[0] += 1
    if DEBUG or _check_counter[0] % SAMPLE_EVERY == 0:
        verify_step(m, j, res)
    return res


_check_counter = [0]


def verify_step(m: Sequence[int], j: int, res: StepResult) -> None:
    """Exact check of ``M J A_j = M_out M'`` plus the shape rules."""
    if mul_JA(m, j) != mat_mul(string_to_matrix(res.out), res.next):
        raise CFXError(f"step identity fails for M={Mat2(*m)}, j={j}: {res}")
    if res.out.head < -1 or (res.out.head == -1 and not res.out.tail):
        raise CFXError(f"bad output head for M={Mat2(*m)}, j={j}: {res.out}")
    if any(q < 1 for q in res.out.tail):
        raise CFXError(f"non-positive output digit for M={Mat2(*m)}, j={j}: {res.out}")


def run(m: Mat2, s: CFString) -> tuple[CFString, Mat2]:
    """``(R(s, M), U(s, M))`` for a proper string ``s``."""
    buf = [0]
    for c in s.tail:
        r = step(m, c)
        absorb(buf, r.out)
        m = r.next
    return CFString(buf[0], tuple(buf[1:])), m


def run_digits(m: Mat2, digits: Iterable[int]) -> Mat2:
    """``U`` only; cheaper than :func:`run` when the output is not needed."""
    for c in digits:
        m = step(m, c).next
    return m


class HeadResult(NamedTuple):
    consumed: int
    prefix: CFString
    state: Mat2
    sign: int = 1  # the absorbed matrix equals sign * M_prefix * state


def head_normalize(m: Sequence[int], digits: Iterator[int], a0: int = 0) -> HeadResult:
    """Absorb leading digits of ``x = <a0; a1, ...>`` until ``M`` becomes a state.

    ``digits`` yields ``a1, a2, ...``; exactly ``consumed`` of them are taken.
    """
    a, b, c, d = m
    det = a * d - b * c
    if det == 0:
        raise InvalidMatrix(f"singular matrix {Mat2(*m)}")
    b, d = a * a0 + b, c * a0 + d
    consumed = 0
    digits = iter(digits)
    while True:
        if type_of(a, b, c, d):
            return HeadResult(consumed, EMPTY, Mat2(a, b, c, d))
        if c * d > 0:
            break
        try:
            j = next(digits)
        except StopIteration:
            # x is the rational M_s(0); the step matrix has a pole there iff d == 0
            if d == 0:
                raise PoleError(f"{Mat2(*m)} has a pole at x") from None
            raise NeedMoreDigits(f"source exhausted after {consumed} digits") from None
        a, b, c, d = b, a + b * j, d, c + d * j
        consumed += 1
    sign = 1
    if c < 0:
        a, b, c, d = -a, -b, -c, -d
        sign = -1
    d0 = min(a // c, b // d)
    digits_out, state, _ = _euclid(a - d0 * c, b - d0 * d, c, d, 64 * abs(det) + 64)
    return HeadResult(consumed, CFString(d0, tuple(digits_out)), state, sign)


class Transducer:
    """Streaming emitter: pushes input digits, releases output digits once final.

    ``out`` holds ``[d0, d1, ...]`` of everything produced; entries before
    ``final`` have been released and are never touched again.  The last
    ``holdback`` entries stay pending.
    """

    def __init__(self, state: Mat2, prefix: CFString = EMPTY, holdback: int = 8):
        if holdback < 2:
            raise ValueError("holdback must be >= 2")
        self.state = Mat2(*state)
        self.holdback = holdback
        self.out = [prefix.head, *prefix.tail]
        self.final = 0
        self.n_consumed = 0
        self.m_max = 0
        self.m_max_at = 0
        self.annih_run = 0
        self.annih_max = 0
        self.annih_max_at = 0
        self.clamps = 0
        self.head_consumed = 0
        self.source_matrix = self.state
        self.a0 = 0

    @classmethod
    def start(cls, m: Sequence[int], digits: Iterator[int], a0: int = 0, holdback: int = 8) -> "Transducer":
        head = head_normalize(m, digits, a0)
        t = cls(head.state, head.prefix, holdback)
        t.n_consumed = head.consumed
        t.head_consumed = head.consumed
        t.source_matrix = Mat2(*m)
        t.a0 = a0
        return t

    @property
    def ell(self) -> int:
        return len(self.out) - 1

    @property
    def emitted(self) -> list[int]:
        return self.out[: self.final]

    @property
    def pending(self) -> list[int]:
        return self.out[self.final :]

    def push(self, j: int) -> list[int]:
        r = step(self.state, j)
        self.state = r.next
        self.n_consumed += 1
        k = len(r.out.tail)
        if k > self.m_max:
            self.m_max = k
            self.m_max_at = self.n_consumed
        if r.out == ANNIHILATOR:
            self.annih_run += 1
            if self.annih_run > self.annih_max:
                self.annih_max = self.annih_run
                self.annih_max_at = self.n_consumed
        else:
            self.annih_run = 0
        self.clamps += r.clamps
        absorb(self.out, r.out, self.final)
        cut = len(self.out) - self.holdback
        if cut > self.final:
            released = self.out[self.final : cut]
            self.final = cut
            return released
        return []

    def feed(self, digits: Iterable[int]) -> None:
        for j in digits:
            self.push(j)

    def result(self) -> CFString:
        return CFString(self.out[0], tuple(self.out[1:]))

    def finish(self, exact_tail=None) -> CFString:
        """Close the stream.

        With ``exact_tail`` (the exact value of the unread part of ``x``, in
        ``[0, 1)``), the canonical expansion of ``Mx`` is returned and every
        digit becomes final.  Without it, the pending digits are returned as
        they stand and stay non-final.
        """
        if exact_tail is None:
            return self.result()
        # compose first: the state alone may send the tail to infinity
        total = apply(mat_mul(string_to_matrix(self.result()), self.state), Fraction(exact_tail))
        s = rational_to_cf(total.numerator, total.denominator)
        self.out = [s.head, *s.tail]
        self.final = len(self.out)
        return s


def transform_rational(m: Sequence[int], x) -> CFString:
    """Exact expansion of ``Mx`` for rational ``x``."""
    x = Fraction(x)
    y = apply(m, x)
    return rational_to_cf(y.numerator, y.denominator)


def transform_string(m: Sequence[int], s: CFString, holdback: int = 8) -> Transducer:
    """Stream the finite expansion ``s`` through ``M`` without closing it."""
    it = iter(s.tail)
    t = Transducer.start(m, it, s.head, holdback)
    for j in it:
        t.push(j)
    return t
