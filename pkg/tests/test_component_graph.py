import json
import math
import random

import numpy as np
import pytest

from cfx.cf_core import IDENTITY, J, CFString, Mat2
from cfx.component_graph import markov_model, successor_map, transitive_components
from cfx.md_states import enumerate_states
from cfx.transducer import run, step

P = CFString.proper


@pytest.fixture(scope="module")
def graphs():
    return {D: transitive_components(D) for D in range(1, 7)}


def test_successor_map_doubling():
    sm = successor_map(Mat2(2, 0, 0, 1))
    assert (sm.preperiod, sm.period) == (1, 2)
    assert sm.exceptions[0].next == Mat2(0, 2, 1, 1)
    for j in (2, 4, 10, 9998):
        assert sm.predict(j)[:2] == (P(j // 2), Mat2(1, 0, 0, 2))
    for j in (3, 5, 11, 9999):
        assert sm.predict(j)[:2] == (P((j - 1) // 2), Mat2(1, 1, 0, 2))


def test_successor_map_halving_and_identity():
    sm = successor_map(Mat2(1, 0, 0, 2))
    assert (sm.preperiod, sm.period) == (0, 1)
    assert sm.predict(17)[:2] == (P(34), Mat2(2, 0, 0, 1))
    sm = successor_map(IDENTITY)
    assert (sm.preperiod, sm.period) == (0, 1)
    assert sm.predict(5)[:2] == (P(5), IDENTITY)


@pytest.mark.parametrize("D", range(1, 13))
def test_edge_predictions_against_step(D):
    rng = random.Random(D)
    maps = {m: successor_map(m) for m in enumerate_states(D)}
    states = list(maps)
    for _ in range(1000):
        m = rng.choice(states)
        j = rng.randint(1, 10_000)
        want = step(m, j)
        got = maps[m].predict(j)
        assert (got.out, got.next) == (want.out, want.next)


def test_d1_components(graphs):
    g = graphs[1]
    assert [set(c) for c in g.sink_components()] == [{IDENTITY}]
    assert not g.is_sink_state(J)
    assert g.entry_string(J) == P(1)
    assert g.entry_string(IDENTITY) == P()


def test_d2_doubling_family_in_one_sink(graphs):
    g = graphs[2]
    fam = {Mat2(1, 0, 0, 2), Mat2(2, 0, 0, 1), Mat2(0, 2, 1, 1), Mat2(1, 1, 0, 2)}
    ids = {g.scc_id[m] for m in fam}
    assert len(ids) == 1 and ids.pop() in g.sinks


def test_entry_strings_replay(graphs):
    for g in graphs.values():
        for m in g.states:
            s = g.entry_string(m)
            _, U = run(m, s)
            assert g.is_sink_state(U)


def test_sinks_are_closed_and_connected(graphs):
    for g in graphs.values():
        assert g.sinks
        for comp in g.sink_components():
            for m in comp:
                assert g.successors(m) <= comp


def test_markov_trivial_sink(graphs):
    mm = markov_model(graphs[1], frozenset({IDENTITY}), cutoff=1000)
    assert mm.K.tolist() == [[1.0]] and mm.pi.tolist() == [1.0]


def test_markov_d2(graphs):
    g = graphs[2]
    mm = markov_model(g, g.sink_components()[0], cutoff=10**6)
    sums = mm.K.sum(axis=1)
    assert np.all(np.abs(sums - 1) <= 2e-6)
    assert np.abs(mm.pi @ mm.K - mm.pi).max() < 1e-10
    assert mm.converged and 0 < mm.gap < 0.5
    assert mm.tail_bounds[0] == pytest.approx(math.log2(1 + 1 / (10**6 + 1)))
    # from (2,0;0,1): even digits -> (1,0;0,2)
    i, k = mm.index(Mat2(2, 0, 0, 1)), mm.index(Mat2(1, 0, 0, 2))
    even = sum(math.log2(1 + 1 / (a * (a + 2))) for a in range(2, 10**5, 2))
    assert mm.K[i, k] == pytest.approx(even, abs=1e-5)
    json.loads(mm.to_json())


def test_dot_and_dict(graphs):
    g = graphs[2]
    dot = g.to_dot()
    assert dot.startswith("digraph") and '"2,0;0,1" -> "1,0;0,2"' in dot
    d = g.to_dict()
    assert d["n_states"] == 8 and d["sinks"]


def test_parallel_build_matches_serial():
    a = transitive_components(3)
    b = transitive_components(3, workers=2)
    assert a.to_dict() == b.to_dict()
