import random

import pytest

from cfx.cf_core import IDENTITY, CFString, Mat2, concat
from cfx.md_states import enumerate_states
from cfx.transducer import run
from cfx.triggers import (
    LOOSE,
    is_minimal,
    is_nice_at,
    minimal_decomposition,
    occurrences,
    occurrences_nicely,
    trigger_census,
)

from conftest import random_rational_digits

P = CFString.proper


def test_occurrences_nicely_examples():
    t = P(3, 1, 2, 5, 4, 9)
    assert occurrences_nicely(t, P(2)) == [3]
    assert occurrences_nicely(t, P(9)) == []
    assert occurrences_nicely(t, P(3, 1)) == []
    assert occurrences_nicely(t, P(3, 1), LOOSE) == [1]
    assert occurrences(t, P(9)) == [6]
    with pytest.raises(ValueError):
        occurrences_nicely(t, P())


def test_repeated_ones_multiplicity():
    # a resultant [1;1,1,1,1,1] holds the target [1] nicely twice
    assert occurrences_nicely(CFString(1, (1, 1, 1, 1, 1)), P(1)) == [2, 3]


def test_minimal_decomposition_identity():
    inst = minimal_decomposition(P(5, 1, 2, 9, 9, 3), IDENTITY, 3, P(2))
    assert inst.s == P(1, 2, 9, 9)
    assert inst.state == IDENTITY and inst.relative_position == 2
    assert inst.multiplicity == 1
    assert is_minimal(inst, P(2))


def test_census_identity():
    rng = random.Random(1)
    s = P(*(rng.randint(1, 4) for _ in range(1000)))
    c = trigger_census(IDENTITY, s, P(1))
    assert c.slack <= 4
    assert all(i.multiplicity == 1 for i in c.instances)


def test_census_doubling_large():
    rng = random.Random(2)
    s = P(*random_rational_digits(rng, 20_000)[:10_000])
    c = trigger_census(Mat2(2, 0, 0, 1), s, P(2))
    assert c.slack <= 4
    for inst in c.instances:
        assert is_minimal(inst, P(2))
        t, _ = run(inst.state, inst.s)
        assert all(is_nice_at(t, P(2), p) for p in inst.positions)


def test_census_when_target_absent():
    c = trigger_census(IDENTITY, P(*([1] * 50)), P(7))
    assert c.instances == [] and c.occurrence_count <= 4


def test_nice_region_stability():
    rng = random.Random(3)
    pools = {D: list(enumerate_states(D)) for D in range(1, 13)}
    checked = 0
    for _ in range(400):
        m0 = rng.choice(pools[rng.randint(1, 12)])
        pre = P(*(rng.randint(1, 9) for _ in range(rng.randint(0, 8))))
        mid = P(*(rng.randint(1, 9) for _ in range(rng.randint(3, 12))))
        suf = P(*(rng.randint(1, 9) for _ in range(rng.randint(0, 8))))
        Rp, m = run(m0, pre)
        t, _ = run(m, mid)
        full, _ = run(m0, concat(concat(pre, mid), suf))
        # locate t inside the full output: only entries from d2 on are pinned
        joined = concat(Rp, t)
        off = len(joined.tail) - len(t.tail)
        for r_len in (1, 2):
            for i in range(2, len(t.tail) - 1 - r_len + 1):
                r = P(*t.tail[i - 1 : i - 1 + r_len])
                if is_nice_at(t, r, i):
                    assert tuple(full.tail[off + i - 1 : off + i - 1 + r_len]) == r.tail
                    checked += 1
    assert checked > 1000
