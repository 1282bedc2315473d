"""Orbit experiments: push a long digit stream through a transducer and count.

Inputs stand in for CF-normal numbers by random rationals of large height,
whose partial quotients follow the Gauss statistics up to the tail end.
"""
from __future__ import annotations

import functools
import itertools
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator

import numpy as np

from . import cfd1
from .cf_core import CFString, Mat2, gauss_measure, rational_digits
from .errors import CFXError
from .transducer import Transducer

RATIONAL = "rational-random"
FILE = "file"
EXPLICIT = "explicit"


@dataclass(frozen=True)
class SourceSpec:
    kind: str = RATIONAL
    bits: int = 20_000
    seed: int = 0
    path: str | None = None
    value: object = None  # Fraction, "p/q" text, or a CFString

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "seed": self.seed}
        if self.kind == RATIONAL:
            d["bits"] = self.bits
        elif self.kind == FILE:
            d["path"] = self.path
        else:
            d["value"] = str(self.value)
        return d


def random_rational(bits: int, seed: int) -> tuple[int, int]:
    """``(p, q)`` with ``q`` a random odd ``bits``-bit integer and ``0 < p < q``.

    Not reduced: the expansion is the same and the gcd is costly at this size.
    """
    if bits < 2:
        raise ValueError("bits must be >= 2")
    rng = random.Random(seed)
    q = rng.getrandbits(bits) | 1 | (1 << (bits - 1))
    p = rng.randrange(1, q)
    return p, q


@functools.lru_cache(maxsize=4)
def _rational_expansion(bits: int, seed: int) -> tuple:
    # several experiments usually share one large source; expanding it dominates their cost
    return tuple(rational_digits(*random_rational(bits, seed)))


def sample_source(spec: SourceSpec) -> tuple[int, Iterator[int]]:
    """``(a0, digits)`` where ``digits`` yields ``a1, a2, ...`` lazily."""
    if spec.kind == RATIONAL:
        ds = _rational_expansion(spec.bits, spec.seed)
        return ds[0], itertools.islice(ds, 1, None)
    if spec.kind == FILE:
        fh = open(spec.path)
        return cfd1.iter_stream(fh)
    if spec.kind == EXPLICIT:
        v = spec.value
        if isinstance(v, CFString):
            return v.head, iter(v.tail)
        if isinstance(v, str) and "/" not in v and ("h=" in v or "," in v or " " in v.strip()):
            s = cfd1.parse(v)
            return s.head, iter(s.tail)
        x = Fraction(v)
        it = rational_digits(x.numerator, x.denominator)
        return next(it), it
    raise ValueError(f"unknown source kind {spec.kind!r}")


def source_digits(spec: SourceSpec, n: int | None = None) -> tuple[int, list[int]]:
    a0, it = sample_source(spec)
    return a0, list(it if n is None else itertools.islice(it, n))


@dataclass
class Checkpoint:
    n: int
    ell: int
    emitted: int
    c1: float
    rho: dict


@dataclass
class OrbitStats:
    matrix: Mat2
    n_consumed: int = 0
    head_consumed: int = 0
    ell_trace: list = field(default_factory=list)
    ell_decreases: int = 0
    cylinder_state_counts: dict = field(default_factory=dict)  # (digits, state) -> count
    state_counts: dict = field(default_factory=dict)
    output_digit_counts: dict = field(default_factory=dict)  # key max_digit+1 pools the larger digits
    output_pair_counts: dict = field(default_factory=dict)
    n_output: int = 0
    m_max: int = 0
    m_max_at: int = 0
    annihilation_max: int = 0
    annihilation_max_at: int = 0
    c1_estimate: float = 0.0
    rho_estimates: dict = field(default_factory=dict)
    checkpoints: list = field(default_factory=list)
    steps_counted: int = 0
    partial: bool = False
    error: str | None = None

    def cylinder_marginal(self, s: tuple) -> int:
        return sum(c for (cyl, _), c in self.cylinder_state_counts.items() if cyl == s)

    def occupancy(self) -> dict:
        tot = sum(self.state_counts.values())
        return {m: c / tot for m, c in self.state_counts.items()} if tot else {}

    def digit_freq(self, k: int) -> float:
        return self.output_digit_counts.get(k, 0) / self.n_output if self.n_output else 0.0


def _clipped(digits, max_digit: int) -> np.ndarray:
    # partial quotients can exceed int64; everything above max_digit is one bin anyway
    cap = max_digit + 1
    return np.fromiter((x if x < cap else cap for x in digits), dtype=np.int64, count=len(digits))


def rho_from_digits(digits: np.ndarray, max_digit: int = 8) -> dict:
    """Frequencies of every proper string of rank <= 2 with entries <= ``max_digit``."""
    out = {}
    n = len(digits)
    if n == 0:
        return out
    clipped = np.minimum(digits, max_digit + 1)
    ones = np.bincount(clipped, minlength=max_digit + 2)
    for k in range(1, max_digit + 1):
        out[(k,)] = ones[k] / n
    if n > 1:
        base = max_digit + 2
        pairs = np.bincount(clipped[:-1] * base + clipped[1:], minlength=base * base)
        for a in range(1, max_digit + 1):
            for b in range(1, max_digit + 1):
                out[(a, b)] = pairs[a * base + b] / (n - 1)
    return out


def run_experiment(
    m,
    spec: SourceSpec,
    n: int,
    holdback: int = 8,
    max_digit: int = 8,
    until_output: bool = False,
    sample_every: int | None = None,
    sink: frozenset | None = None,
) -> OrbitStats:
    """Consume ``n`` input digits (or emit ``n`` output digits when ``until_output``).

    Occupancy is counted for the pair (next input cylinder, current state);
    with ``sink`` given, only time spent inside that component counts.
    """
    m = Mat2(*m)
    a0, it = sample_source(spec)
    stats = OrbitStats(m)
    sample_every = sample_every or max(1, n // 1000)
    digits_in: list[int] = []
    state_ids: list[int] = []
    ids: dict = {}
    id_list: list = []
    try:
        t = Transducer.start(m, _recording(it, digits_in), a0, holdback)
    except CFXError as exc:
        stats.partial, stats.error = True, f"{type(exc).__name__}: {exc}"
        return stats
    stats.head_consumed = t.head_consumed
    marks = [n // 4, n // 2, 3 * n // 4, n]
    mark = 0
    prev_ell = t.ell
    out = t.out
    try:
        while True:
            count = t.final - 1 if until_output else t.n_consumed
            if count >= n:
                break
            j = next(it, None)
            if j is None:
                break
            digits_in.append(j)
            s = t.state
            sid = ids.get(s)
            if sid is None:
                sid = ids[s] = len(id_list)
                id_list.append(s)
            state_ids.append(sid)
            t.push(j)
            ell = len(out) - 1
            if ell < prev_ell:
                stats.ell_decreases += 1
            prev_ell = ell
            if t.n_consumed % sample_every == 0:
                stats.ell_trace.append((t.n_consumed, ell))
            count = t.final - 1 if until_output else t.n_consumed
            while mark < 4 and count >= marks[mark]:
                stats.checkpoints.append(_checkpoint(t, max_digit))
                mark += 1
    except CFXError as exc:
        stats.partial, stats.error = True, f"{type(exc).__name__}: {exc}"

    stats.n_consumed = t.n_consumed
    stats.ell_trace.append((t.n_consumed, t.ell))
    stats.m_max, stats.m_max_at = t.m_max, t.m_max_at
    stats.annihilation_max, stats.annihilation_max_at = t.annih_max, t.annih_max_at
    stats.c1_estimate = t.ell / t.n_consumed if t.n_consumed else 0.0
    if not stats.checkpoints or stats.checkpoints[-1].n != t.n_consumed:
        stats.checkpoints.append(_checkpoint(t, max_digit))

    emitted = _clipped(t.out[1 : t.final], max_digit)
    stats.n_output = len(emitted)
    if len(emitted):
        vals, cnts = np.unique(emitted, return_counts=True)
        stats.output_digit_counts = {int(v): int(c) for v, c in zip(vals, cnts)}
    stats.rho_estimates = rho_from_digits(emitted, max_digit)
    stats.output_pair_counts = {k: round(v * (len(emitted) - 1)) for k, v in stats.rho_estimates.items() if len(k) == 2}
    _occupancy(stats, digits_in[t.head_consumed :], state_ids, id_list, max_digit, sink)
    return stats


def _recording(it, sink_list):
    # head normalization reads through this so its digits are kept too
    for j in it:
        sink_list.append(j)
        yield j


def _checkpoint(t: Transducer, max_digit: int) -> Checkpoint:
    em = _clipped(t.out[1 : t.final], max_digit)
    return Checkpoint(t.n_consumed, t.ell, len(em), t.ell / t.n_consumed if t.n_consumed else 0.0, rho_from_digits(em, max_digit))


def _occupancy(stats, digits, state_ids, id_list, max_digit, sink) -> None:
    d = _clipped(digits, max_digit)
    s = np.asarray(state_ids, dtype=np.int64)
    if sink is not None:
        keep = np.array([id_list[i] in sink for i in range(len(id_list))], dtype=bool)
        mask = keep[s] if len(s) else np.zeros(0, bool)
    else:
        mask = np.ones(len(s), bool)
    stats.steps_counted = int(mask.sum())
    if len(s):
        occ = np.bincount(s[mask], minlength=len(id_list))
        stats.state_counts = {id_list[i]: int(c) for i, c in enumerate(occ) if c}
    base = max_digit + 2
    k = len(id_list)
    # rank 1 cylinders
    key1 = s * base + d
    c1 = np.bincount(key1[mask], minlength=k * base)
    cyl = {}
    for idx in np.nonzero(c1)[0]:
        sid, a = divmod(int(idx), base)
        if 1 <= a <= max_digit:
            cyl[((a,), id_list[sid])] = int(c1[idx])
    # rank 2 cylinders need the following digit too
    if len(d) > 1:
        key2 = (s[:-1] * base + d[:-1]) * base + d[1:]
        c2 = np.bincount(key2[mask[:-1]], minlength=k * base * base)
        for idx in np.nonzero(c2)[0]:
            rest, b = divmod(int(idx), base)
            sid, a = divmod(rest, base)
            if 1 <= a <= max_digit and 1 <= b <= max_digit:
                cyl[((a, b), id_list[sid])] = int(c2[idx])
    stats.cylinder_state_counts = cyl


def sigma(mu: float, n: int) -> float:
    """Binomial standard error, ignoring mixing corrections."""
    return math.sqrt(mu * (1 - mu) / n) if n else math.inf


@dataclass
class ConvergenceReport:
    c1_drift: float
    rho_drift: dict
    rho_vs_gauss: dict  # string -> (estimate, mu, z)
    occupancy_vs_pi: dict  # state -> (freq, pi, z)
    verdicts: dict

    def to_dict(self) -> dict:
        return {
            "c1_drift": self.c1_drift,
            "rho_drift": {_key(k): v for k, v in self.rho_drift.items()},
            "rho_vs_gauss": {_key(k): list(v) for k, v in self.rho_vs_gauss.items()},
            "occupancy_vs_pi": {str(k): list(v) for k, v in self.occupancy_vs_pi.items()},
            "verdicts": self.verdicts,
        }


def _key(s: tuple) -> str:
    return ",".join(map(str, s))


def convergence_report(stats: OrbitStats, model=None, z_max: float = 3.0) -> ConvergenceReport:
    """Half-run versus full-run drift, Gauss comparison and, given a model, occupancy versus ``pi``."""
    cps = stats.checkpoints
    if len(cps) < 2:
        raise ValueError("need at least two checkpoints")
    full = cps[-1]
    half = min(cps, key=lambda c: abs(c.n - full.n / 2))
    c1_drift = abs(full.c1 - half.c1) / full.c1 if full.c1 else 0.0
    rho_drift = {s: abs(full.rho[s] - half.rho.get(s, 0.0)) for s in full.rho}
    rho_vs = {}
    for s, est in stats.rho_estimates.items():
        mu = gauss_measure(CFString(0, s))
        nwin = stats.n_output - len(s) + 1
        se = sigma(mu, nwin)
        rho_vs[s] = (est, mu, (est - mu) / se)
    occ_vs = {}
    if model is not None:
        tot = sum(stats.state_counts.get(m, 0) for m in model.states)
        for m, p in zip(model.states, model.pi):
            f = stats.state_counts.get(m, 0) / tot if tot else 0.0
            se = sigma(float(p), tot)
            occ_vs[m] = (f, float(p), (f - p) / se if se else 0.0)
    verdicts = {
        "c1_drift_below_1pct": c1_drift < 0.01,
        "rho_within_3sigma": all(abs(z) <= z_max for _, _, z in rho_vs.values()),
        "m_max_stable": stats.m_max_at <= stats.n_consumed // 2,
        "annihilation_stable": stats.annihilation_max_at <= stats.n_consumed // 2,
    }
    if model is not None:
        verdicts["occupancy_within_3sigma"] = all(abs(z) <= z_max for _, _, z in occ_vs.values())
    return ConvergenceReport(c1_drift, rho_drift, rho_vs, occ_vs, verdicts)


def stats_to_dict(stats: OrbitStats, model=None) -> dict:
    rep = convergence_report(stats, model) if len(stats.checkpoints) >= 2 else None
    m = stats.matrix
    d = {
        "matrix": str(m),
        "det": m.det,
        "n": stats.n_consumed,
        "ell": stats.ell_trace[-1][1] if stats.ell_trace else 0,
        "c1": stats.c1_estimate,
        "m_max": stats.m_max,
        "annih_max": stats.annihilation_max,
        "digit_freqs": {str(k): stats.digit_freq(k) for k in sorted(stats.output_digit_counts) if k <= 8},
        "cylinder_freqs": {_key(k): v for k, v in stats.rho_estimates.items()},
        "state_occupancy": {str(k): v for k, v in sorted(stats.occupancy().items())},
        "pi_reference": {str(s): float(p) for s, p in zip(model.states, model.pi)} if model is not None else None,
        "verdicts": rep.verdicts if rep else {},
    }
    if stats.partial:
        d["error"] = stats.error
    return d
