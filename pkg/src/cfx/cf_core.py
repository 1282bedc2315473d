"""Exact continued-fraction primitives.

A string ``[c0; c1, ..., cn]`` is a :class:`CFString` with an integer head and
a tuple of positive digits.  It is identified with the matrix
``A_{c0} J A_{c1} J ... J A_{cn}`` where ``A_i = (1, i; 0, 1)`` and
``J = (0, 1; 1, 0)``.  Matrices are row-major 4-tuples ``(a, b, c, d)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple, Sequence

import gmpy2

from .errors import InvalidMatrix, PoleError, UnderflowError


class Mat2(NamedTuple):
    a: int
    b: int
    c: int
    d: int

    @property
    def det(self) -> int:
        return self.a * self.d - self.b * self.c

    def __matmul__(self, other: Sequence[int]) -> "Mat2":
        return mat_mul(self, other)

    def __neg__(self) -> "Mat2":
        return Mat2(-self.a, -self.b, -self.c, -self.d)

    def __str__(self) -> str:
        return f"{self.a},{self.b};{self.c},{self.d}"

    @classmethod
    def parse(cls, text: str) -> "Mat2":
        """Parse ``"a,b;c,d"``."""
        try:
            top, bottom = text.split(";")
            a, b = (int(v) for v in top.split(","))
            c, d = (int(v) for v in bottom.split(","))
        except ValueError:
            raise InvalidMatrix(f"cannot parse matrix {text!r}; expected 'a,b;c,d'") from None
        return cls(a, b, c, d)


IDENTITY = Mat2(1, 0, 0, 1)
J = Mat2(0, 1, 1, 0)


def A(i: int) -> Mat2:
    return Mat2(1, i, 0, 1)


def mat_mul(x: Sequence[int], y: Sequence[int]) -> Mat2:
    a, b, c, d = x
    e, f, g, h = y
    return Mat2(a * e + b * g, a * f + b * h, c * e + d * g, c * f + d * h)


def mul_JA(m: Sequence[int], j: int) -> Mat2:
    """``m @ J @ A(j)`` without building the intermediate matrices."""
    a, b, c, d = m
    return Mat2(b, a + b * j, d, c + d * j)


class CFString(NamedTuple):
    head: int = 0
    tail: tuple = ()

    @classmethod
    def proper(cls, *digits: int) -> "CFString":
        return cls(0, tuple(digits))

    @property
    def length(self) -> int:
        # |s| ignores the head term
        return len(self.tail)

    @property
    def is_proper(self) -> bool:
        return self.head == 0

    def digits(self) -> list[int]:
        return [self.head, *self.tail]

    def validate(self) -> "CFString":
        for c in self.tail:
            if c < 1:
                raise ValueError(f"tail digits must be >= 1, got {c} in {self}")
        return self

    def __str__(self) -> str:
        return f"[{self.head};{','.join(map(str, self.tail))}]"


EMPTY = CFString(0, ())


def string_to_matrix(s: CFString) -> Mat2:
    """Canonical matrix of ``s``; its columns are the last two convergents."""
    m = A(s.head)
    for c in s.tail:
        m = mul_JA(m, c)
    return m


def absorb(buf: list[int], s: CFString, floor: int = 0) -> None:
    """Concatenate ``s`` onto the digit list ``buf = [c0, c1, ..., cn]`` in place.

    Positions below ``floor`` are frozen; touching one raises
    :class:`UnderflowError`.
    """
    h, tail = s
    n = len(buf) - 1
    if h != 0:
        if n == 0:
            if floor > 0:
                raise UnderflowError("head term already flushed")
            buf[0] += h
        else:
            if h < -1:
                raise ValueError(f"right operand head must be >= -1, got {h}")
            merged = buf[-1] + h
            if merged > 0:
                if n < floor:
                    raise UnderflowError(f"junction needs position {n}, frozen below {floor}")
                buf[-1] = merged
            else:
                # A_{c_{n-1}} J A_0 J A_{c'_1} = A_{c_{n-1} + c'_1}
                if not tail:
                    raise ValueError("concatenation would leave a dangling J")
                if n - 1 < floor:
                    raise UnderflowError(f"junction needs position {n - 1}, frozen below {floor}")
                buf.pop()
                buf[-1] += tail[0]
                buf.extend(tail[1:])
                return
    buf.extend(tail)


def concat(s: CFString, s2: CFString) -> CFString:
    buf = [s.head, *s.tail]
    absorb(buf, s2)
    return CFString(buf[0], tuple(buf[1:]))


def convergents(s: CFString) -> list[tuple[int, int]]:
    p0, q0 = 1, 0
    p1, q1 = s.head, 1
    out = [(p1, q1)]
    for c in s.tail:
        p0, q0, p1, q1 = p1, q1, c * p1 + p0, c * q1 + q0
        out.append((p1, q1))
    return out


def value(s: CFString) -> Fraction:
    """The rational ``<c0; c1, ..., cn>``."""
    m = string_to_matrix(s)
    return Fraction(m.b, m.d)


def rational_to_cf(p: int, q: int = 1) -> CFString:
    """Canonical expansion of ``p/q``; the last tail digit is always >= 2."""
    if q == 0:
        raise PoleError("denominator is zero")
    return CFString(*_split(rational_digits(p, q)))


def _split(digits):
    it = iter(digits)
    head = next(it)
    return head, tuple(it)


def rational_digits(p, q=1):
    """Yield ``a0, a1, ...`` of ``p/q``.

    Large operands go through :func:`_chunked_digits`, which certifies a few
    thousand digits at a time from the leading bits and then reduces the
    full pair with one unimodular matrix.
    """
    if q == 0:
        raise PoleError("denominator is zero")
    if isinstance(p, Fraction):
        p, q = p.numerator * (1 if q > 0 else -1), p.denominator * abs(q)
    if q < 0:
        p, q = -p, -q
    p, q = gmpy2.mpz(p), gmpy2.mpz(q)
    if q.bit_length() > CHUNK_THRESHOLD:
        p, q = yield from _chunked_digits(p, q)
    while q:
        a, r = gmpy2.f_divmod(p, q)
        yield int(a)
        p, q = q, r


CHUNK_THRESHOLD = 1 << 15
CHUNK_BITS = 8192


def interval_digits(lp, lq, hp, hq, lo_closed=True, hi_closed=True) -> list[int]:
    """Leading digits shared by every real in the interval ``lp/lq .. hp/hq``.

    Denominators must be positive and ``lp/lq < hp/hq``.  The walk peels the
    common integer part and inverts, swapping endpoints, until the interval
    straddles an integer or reaches infinity.
    """
    out = []
    while True:
        k = lp // lq
        top = (k + 1) * hq
        if hp > top or (hp == top and hi_closed):
            return out
        out.append(int(k))
        rem = lp - k * lq
        if rem == 0:
            return out
        lp, lq, hp, hq = hq, hp - k * hq, lq, rem
        lo_closed, hi_closed = hi_closed, lo_closed


def _chunked_digits(p, q):
    while q.bit_length() > CHUNK_THRESHOLD:
        shift = max(p.bit_length(), q.bit_length()) - CHUNK_BITS
        a, b = p >> shift, q >> shift
        # p/q lies strictly inside (a/(b+1), (a+1)/b)
        ds = interval_digits(a, b + 1, a + 1, b, False, False)
        if len(ds) < 2:
            break
        P0, P1, Q0, Q1 = string_to_matrix(CFString(ds[0], tuple(ds[1:])))
        sign = P0 * Q1 - P1 * Q0
        num = sign * (Q1 * p - P1 * q)
        den = sign * (P0 * q - Q0 * p)
        if num <= 0:
            # p/q ends exactly here; let plain Euclid produce the canonical tail
            break
        yield from ds
        p, q = den, num
    return p, q


def both_representations(s: CFString) -> list[CFString]:
    """The canonical form of a finite string and its ``..., k-1, 1]`` twin."""
    if s.tail:
        last = s.tail[-1]
        if last > 1:
            return [s, CFString(s.head, s.tail[:-1] + (last - 1, 1))]
        return [s, concat(CFString(s.head, s.tail[:-1]), CFString(1, ()))]
    return [s, CFString(s.head - 1, (1,))]


def apply(m: Sequence[int], x) -> Fraction:
    a, b, c, d = m
    x = Fraction(x)
    den = c * x + d
    if den == 0:
        raise PoleError(f"matrix {Mat2(*m)} has a pole at {x}")
    return (a * x + b) / den


@dataclass(frozen=True)
class CFInterval:
    lo: Fraction
    hi: Fraction
    lo_closed: bool = True
    hi_closed: bool = False

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")

    def __contains__(self, x) -> bool:
        x = Fraction(x)
        above = x > self.lo or (self.lo_closed and x == self.lo)
        below = x < self.hi or (self.hi_closed and x == self.hi)
        return above and below

    @property
    def width(self) -> Fraction:
        return self.hi - self.lo


@dataclass(frozen=True)
class Cylinder:
    string: CFString
    interval: CFInterval
    measure: float


def cylinder_interval(s: CFString) -> CFInterval:
    """``{x : x starts with s}`` as an interval between ``M_s(0)`` and ``M_s(1)``.

    ``M_s(1)`` is never attained.  ``M_s(0)`` is, unless the last digit is 1:
    then it equals ``[..., c_{n-1} + 1]`` and belongs to a different cylinder.
    """
    P, Pp, Q, Qp = string_to_matrix(s)
    at0 = Fraction(Pp, Qp)
    at1 = Fraction(P + Pp, Q + Qp)
    closed0 = not s.tail or s.tail[-1] != 1
    if at0 < at1:
        return CFInterval(at0, at1, closed0, False)
    return CFInterval(at1, at0, False, closed0)


def gauss_measure(s: CFString) -> float:
    if not s.is_proper:
        raise ValueError(f"cylinder strings must be proper, got {s}")
    if not s.tail:
        return 1.0
    iv = cylinder_interval(s)
    # log2((1+hi)/(1+lo)) = log1p((hi-lo)/(1+lo)) / ln 2, exact until the log
    return math.log1p(float(iv.width / (1 + iv.lo))) / math.log(2)


def cylinder(s: CFString) -> Cylinder:
    return Cylinder(s, cylinder_interval(s), gauss_measure(s))


def gauss_kuzmin(k: int) -> float:
    """``mu(C_[k]) = log2(1 + 1/(k(k+2)))``."""
    return math.log1p(1.0 / (k * (k + 2))) / math.log(2)

