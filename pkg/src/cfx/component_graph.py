"""Transition graph on ``M_D``, its transitive components, and a Markov surrogate.

Each state's successor ``U([j], M)`` is eventually periodic in ``j``; a
:class:`SuccessorMap` stores the finitely many exceptional ``j`` plus one
template per residue class, so the whole graph is finite and exact.
"""
from __future__ import annotations

import functools
import json
import math
from collections import deque
from dataclasses import dataclass, field

import networkx as nx
import numpy as np

from .cf_core import CFString, Mat2
from .errors import ClosureError, PeriodicityNotFound
from .md_states import StateSet, enumerate_states
from .transducer import StepResult, run_digits, step


@dataclass(frozen=True)
class Residue:
    """Output and successor for ``j = first + k*p``, ``k >= 0``.

    ``slot`` indexes ``[d0, d1, ...]``; that entry equals
    ``base[slot] + slope*k`` while the others stay fixed.
    """

    first: int
    next: Mat2
    base: tuple
    slot: int | None = None
    slope: int = 0

    def output(self, j: int, p: int) -> CFString:
        k, rem = divmod(j - self.first, p)
        if rem or k < 0:
            raise ValueError(f"j={j} is not in the class starting at {self.first}")
        ds = list(self.base)
        if self.slot is not None:
            ds[self.slot] += self.slope * k
        return CFString(ds[0], tuple(ds[1:]))


@dataclass(frozen=True)
class SuccessorMap:
    source: Mat2
    exceptions: tuple  # StepResult for j = 1..t
    period: int
    residues: tuple  # Residue for j = t+1 .. t+p

    @property
    def preperiod(self) -> int:
        return len(self.exceptions)

    def residue(self, j: int) -> Residue:
        return self.residues[(j - self.preperiod - 1) % self.period]

    def predict(self, j: int) -> StepResult:
        if j < 1:
            raise ValueError(f"digits must be >= 1, got {j}")
        if j <= self.preperiod:
            return self.exceptions[j - 1]
        r = self.residue(j)
        return StepResult(r.output(j, self.period), r.next)

    def successors(self) -> set:
        return {e.next for e in self.exceptions} | {r.next for r in self.residues}

    def digit_for(self, target: Mat2) -> int | None:
        """Smallest ``j`` with ``U([j], source) = target``."""
        for j, e in enumerate(self.exceptions, 1):
            if e.next == target:
                return j
        best = None
        for r in self.residues:
            if r.next == target and (best is None or r.first < best):
                best = r.first
        return best

    def summary(self) -> str:
        return f"t={self.preperiod} p={self.period}"


def _shape(res: StepResult):
    return res.next, len(res.out.tail)


def _triple_ok(x: StepResult, y: StepResult, z: StepResult) -> bool:
    if _shape(x) != _shape(y) or _shape(y) != _shape(z):
        return False
    varying = 0
    for u, v, w in zip(x.out.digits(), y.out.digits(), z.out.digits()):
        if u == v == w:
            continue
        if v - u != w - v:
            return False
        varying += 1
    return varying <= 1


def successor_map(m: Mat2, j_max: int = 10_000, window: int = 64) -> SuccessorMap:
    """Find the least period ``p``, then the least preperiod ``t``, verified over ``window`` periods.

    For each candidate ``p`` the preperiod is searched up to ``p * window``;
    every triple ``j, j+p, j+2p`` past ``t`` must have equal successors,
    equal output shape and at most one entry moving linearly.
    """
    m = Mat2(*m)
    res = [None]

    def get(j):
        while len(res) <= j:
            res.append(step(m, len(res)))
        return res[j]

    p = 1
    while p * window + 2 * p <= j_max:
        span = p * window
        t = 0
        j = 1
        found = True
        while j <= t + span - 2 * p:
            if _triple_ok(get(j), get(j + p), get(j + 2 * p)):
                j += 1
                continue
            t = j
            j += 1
            if t > span or t + span + 2 * p > j_max:
                found = False
                break
        if found:
            return _build(m, get, t, p)
        p += 1
    raise PeriodicityNotFound(f"no period for {m} with j_max={j_max}, window={window}")


def _build(m, get, t, p) -> SuccessorMap:
    residues = []
    for r in range(p):
        j0 = t + 1 + r
        a, b = get(j0), get(j0 + p)
        slot, slope = None, 0
        for i, (u, v) in enumerate(zip(a.out.digits(), b.out.digits())):
            if u != v:
                slot, slope = i, v - u
        residues.append(Residue(j0, a.next, tuple(a.out.digits()), slot, slope))
    return SuccessorMap(m, tuple(get(j) for j in range(1, t + 1)), p, tuple(residues))


@dataclass
class ComponentGraph:
    states: StateSet
    edges: dict  # Mat2 -> SuccessorMap
    scc_id: dict  # Mat2 -> int
    components: list  # frozensets, indexed by scc id
    sinks: list  # scc ids
    entry: dict = field(default_factory=dict)  # Mat2 -> (digits, landing state)

    def sink_components(self) -> list:
        return [self.components[i] for i in self.sinks]

    def is_sink_state(self, m) -> bool:
        return self.scc_id[Mat2(*m)] in self.sinks

    def sink_of(self, m) -> frozenset:
        m = Mat2(*m)
        if not self.is_sink_state(m):
            raise ValueError(f"{m} is not in a transitive component")
        return self.components[self.scc_id[m]]

    def successors(self, m) -> set:
        return self.edges[Mat2(*m)].successors()

    def entry_string(self, m) -> CFString:
        digits, _ = self.entry[Mat2(*m)]
        return CFString(0, digits)

    def to_dot(self) -> str:
        lines = ["digraph MD {"]
        for m in self.states:
            shape = "doublecircle" if self.is_sink_state(m) else "circle"
            lines.append(f'  "{m}" [shape={shape} label="{m}\\n{self.edges[m].summary()}"];')
        for m, sm in self.edges.items():
            labels = {}
            for j, e in enumerate(sm.exceptions, 1):
                labels.setdefault(e.next, []).append(f"j={j}")
            for k, r in enumerate(sm.residues):
                labels.setdefault(r.next, []).append(f"r{k}")
            for nxt, lab in labels.items():
                lines.append(f'  "{m}" -> "{nxt}" [label="{",".join(lab)}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {
            "det": self.states.D,
            "n_states": len(self.states),
            "components": [sorted(map(str, c)) for c in self.components],
            "sinks": [sorted(map(str, self.components[i])) for i in self.sinks],
            "edges": {
                str(m): {"t": sm.preperiod, "p": sm.period, "successors": sorted(map(str, sm.successors()))}
                for m, sm in self.edges.items()
            },
            "entry_strings": {str(m): list(d) for m, (d, _) in self.entry.items()},
        }


def transitive_components(D: int, j_max: int = 10_000, window: int = 64, workers: int = 1) -> ComponentGraph:
    states = enumerate_states(D)
    members = list(states)
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        job = functools.partial(successor_map, j_max=j_max, window=window)
        with ProcessPoolExecutor(workers) as pool:
            maps = list(pool.map(job, members, chunksize=8))
    else:
        maps = [successor_map(m, j_max, window) for m in members]
    edges = dict(zip(members, maps))
    g = nx.DiGraph()
    g.add_nodes_from(states)
    for m, sm in edges.items():
        for nxt in sm.successors():
            if nxt not in states:
                raise ClosureError(f"successor {nxt} of {m} is not in M_{D}")
            g.add_edge(m, nxt)

    components = [frozenset(c) for c in nx.strongly_connected_components(g)]
    components.sort(key=lambda c: min(c))
    scc_id = {m: i for i, c in enumerate(components) for m in c}
    sinks = [i for i, c in enumerate(components) if all(scc_id[n] == i for m in c for n in g.successors(m))]
    graph = ComponentGraph(states, edges, scc_id, components, sinks)
    for i in sinks:
        _verify_sink(graph, components[i])
    graph.entry = _entry_strings(graph)
    return graph


def _verify_sink(graph: ComponentGraph, comp: frozenset) -> None:
    # closure over every exception and residue class, then pairwise reachability
    for m in comp:
        out = graph.successors(m) - comp
        if out:
            raise ClosureError(f"sink state {m} has successors {sorted(map(str, out))} outside its component")
    for m in comp:
        seen = {m}
        todo = deque([m])
        while todo:
            u = todo.popleft()
            for v in graph.successors(u):
                if v not in seen:
                    seen.add(v)
                    todo.append(v)
        if seen != comp:
            raise ClosureError(f"{m} does not reach all of its component")


def _entry_strings(graph: ComponentGraph) -> dict:
    # BFS backwards from all sink states; each edge carries its smallest digit
    rev = {m: [] for m in graph.states}
    for m, sm in graph.edges.items():
        for nxt in sm.successors():
            rev[nxt].append(m)
    nxt_hop = {}
    todo = deque()
    for m in graph.states:
        if graph.is_sink_state(m):
            nxt_hop[m] = None
            todo.append(m)
    while todo:
        v = todo.popleft()
        for u in sorted(rev[v]):
            if u not in nxt_hop:
                nxt_hop[u] = (graph.edges[u].digit_for(v), v)
                todo.append(u)
    entry = {}
    for m in graph.states:
        digits = []
        u = m
        while nxt_hop[u] is not None:
            j, u = nxt_hop[u]
            digits.append(j)
        landing = run_digits(m, digits)
        if not graph.is_sink_state(landing):
            raise ClosureError(f"entry string {digits} from {m} lands outside every sink")
        entry[m] = (tuple(digits), landing)
    return entry


@dataclass(frozen=True)
class MarkovModel:
    states: tuple  # Mat2, row/column order of K
    K: np.ndarray
    tail_bounds: np.ndarray
    pi: np.ndarray
    gap: float
    residual: float
    iterations: int
    converged: bool
    cutoff: int
    spectral_radius2: float | None = None

    def index(self, m) -> int:
        return self.states.index(Mat2(*m))

    def to_dict(self) -> dict:
        return {
            "states": [str(m) for m in self.states],
            "K": self.K.tolist(),
            "tail_bounds": self.tail_bounds.tolist(),
            "pi": self.pi.tolist(),
            "gap": self.gap,
            "residual": self.residual,
            "iterations": self.iterations,
            "converged": self.converged,
            "cutoff": self.cutoff,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _gk_table(A: int) -> np.ndarray:
    a = np.arange(1, A + 1, dtype=np.float64)
    return np.log1p(1.0 / (a * (a + 2.0))) / math.log(2)


def markov_model(graph: ComponentGraph, sink, cutoff: int = 10**6, tol: float = 1e-12, max_iter: int = 10**5) -> MarkovModel:
    """Transition matrix ``K[i, k] = mu(digits a sending state i to state k)`` on a sink.

    Digits up to ``cutoff`` are summed exactly in double precision.  The mass
    beyond it, ``log2(1 + 1/(A+1))`` in total, is split evenly over the
    residue classes and reported per row as ``tail_bounds``.
    """
    if not isinstance(sink, frozenset):
        sink = graph.sink_of(sink)
    states = tuple(sorted(sink))
    idx = {m: i for i, m in enumerate(states)}
    k = len(states)
    gk = _gk_table(cutoff)
    tail = math.log1p(1.0 / (cutoff + 1)) / math.log(2)
    K = np.zeros((k, k))
    tails = np.full(k, tail)
    for i, m in enumerate(states):
        sm = graph.edges[m]
        for j, e in enumerate(sm.exceptions[:cutoff], 1):
            K[i, idx[e.next]] += gk[j - 1]
        for r in sm.residues:
            if r.first <= cutoff:
                K[i, idx[r.next]] += math.fsum(gk[r.first - 1 :: sm.period])
            K[i, idx[r.next]] += tail / sm.period
    pi, it, residual, converged = _stationary(K, tol, max_iter)
    lam2 = None
    if not converged:
        ev = np.sort(np.abs(np.linalg.eigvals(K)))[::-1]
        lam2 = float(ev[1]) if len(ev) > 1 else 0.0
    gap = 0.5 * float(min(pi.min(), 1.0 - pi.max())) if k > 1 else 0.0
    return MarkovModel(states, K, tails, pi, gap, residual, it, converged, cutoff, lam2)


def _stationary(K: np.ndarray, tol: float, max_iter: int):
    # power iteration on the lazy chain (I + K)/2: same fixed point, no periodicity trap
    k = K.shape[0]
    P = 0.5 * (np.eye(k) + K)
    v = np.full(k, 1.0 / k)
    residual = math.inf
    for it in range(1, max_iter + 1):
        w = v @ P
        w /= w.sum()
        residual = float(np.abs(w @ K - w).max())
        v = w
        if residual < tol:
            return v, it, residual, True
    return v, max_iter, residual, False
