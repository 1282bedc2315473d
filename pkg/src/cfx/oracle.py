"""Certified digits of ``Mx`` by exact interval arithmetic.

Knowing the first ``n`` digits of ``x`` pins ``x`` to a cylinder; its image
under ``M`` is an interval whose common leading digits are certain.  Nothing
here shares code with the transducer's step logic, which is the point.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .cf_core import CFInterval, CFString, Mat2, apply, cylinder_interval, interval_digits
from .errors import NeedMoreDigits


@dataclass(frozen=True)
class CertifiedPrefix:
    digits: CFString
    certified_len: int
    witness: CFInterval
    image: CFInterval

    def as_list(self) -> list[int]:
        # certified_len is -1 when not even the integer part is pinned
        return self.digits.digits()[: self.certified_len + 1]


def image_interval(prefix: CFString, m: Sequence[int]) -> CFInterval:
    """``M`` applied to the cylinder of ``prefix``, endpoints exact."""
    a, b, c, d = m
    if a * d - b * c == 0:
        raise ValueError(f"singular matrix {Mat2(*m)}")
    iv = cylinder_interval(prefix)
    lo_den = c * iv.lo + d
    hi_den = c * iv.hi + d
    if lo_den == 0 or hi_den == 0 or (lo_den > 0) != (hi_den > 0):
        raise NeedMoreDigits(f"pole of {Mat2(*m)} meets the cylinder of {prefix}")
    lo, hi = apply(m, iv.lo), apply(m, iv.hi)
    if a * d - b * c > 0:
        return CFInterval(lo, hi, iv.lo_closed, iv.hi_closed)
    return CFInterval(hi, lo, iv.hi_closed, iv.lo_closed)


def certified_digits(prefix: CFString, m: Sequence[int]) -> CertifiedPrefix:
    """Longest digit string shared by the expansion of every point of the image."""
    img = image_interval(prefix, m)
    ds = interval_digits(
        img.lo.numerator, img.lo.denominator, img.hi.numerator, img.hi.denominator,
        img.lo_closed, img.hi_closed,
    )
    if not ds:
        s = CFString(0, ())
        return CertifiedPrefix(s, -1, cylinder_interval(prefix), img)
    s = CFString(ds[0], tuple(ds[1:]))
    return CertifiedPrefix(s, len(ds) - 1, cylinder_interval(prefix), img)


@dataclass(frozen=True)
class VerifyReport:
    matrix: Mat2
    n: int
    emitted: int
    certified: int
    match_len: int
    first_mismatch: int | None

    @property
    def ok(self) -> bool:
        return self.first_mismatch is None

    def to_dict(self) -> dict:
        return {
            "matrix": str(self.matrix),
            "n": self.n,
            "emitted": self.emitted,
            "certified": self.certified,
            "match_len": self.match_len,
            "first_mismatch": self.first_mismatch,
        }


def compare(emitted: Sequence[int], certified: Sequence[int]) -> tuple[int, int | None]:
    """Length of agreement and index of the first disagreement.

    Emitted digits beyond the certified ones are not a mismatch: the oracle
    simply does not know them yet.
    """
    k = min(len(emitted), len(certified))
    for i in range(k):
        if emitted[i] != certified[i]:
            return i, i
    return k, None


def verify_digits(m: Sequence[int], a0: int, digits: Sequence[int], checkpoints=None, holdback: int = 8) -> VerifyReport:
    """Stream ``<a0; digits>`` through ``M`` and check against the oracle.

    At every checkpoint the emitted digits must be a prefix-compatible match
    of the digits certified for the cylinder of the digits read so far.
    """
    from .transducer import Transducer

    m = Mat2(*m)
    n = len(digits)
    checkpoints = sorted(set(checkpoints or [n // 4, n // 2, 3 * n // 4, n]))
    shifted = Mat2(m.a, m.a * a0 + m.b, m.c, m.c * a0 + m.d)
    it = iter(digits)
    t = Transducer.start(m, it, a0, holdback)
    pos = t.n_consumed
    match = cert_len = 0
    for cp in checkpoints:
        if cp < pos:
            continue
        while pos < cp:
            t.push(next(it))
            pos += 1
        cert = certified_digits(CFString(0, tuple(digits[:pos])), shifted)
        em = t.emitted
        match, bad = compare(em, cert.as_list())
        cert_len = cert.certified_len + 1
        if bad is not None:
            return VerifyReport(m, pos, len(em), cert_len, match, bad)
    return VerifyReport(m, pos, len(t.emitted), cert_len, match, None)


def verify_transduction(m: Sequence[int], spec, n: int, holdback: int = 8) -> VerifyReport:
    from .lab import source_digits

    a0, digits = source_digits(spec, n)
    return verify_digits(m, a0, digits, holdback=holdback)
