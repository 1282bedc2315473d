import random

import pytest

from cfx.cf_core import Mat2


def random_matrix(rng: random.Random, dmax: int = 12, bound: int = 12) -> Mat2:
    while True:
        m = Mat2(*(rng.randint(-bound, bound) for _ in range(4)))
        if 0 < abs(m.det) <= dmax:
            return m


def random_rational_digits(rng: random.Random, bits: int) -> list[int]:
    from cfx.cf_core import rational_digits

    q = rng.getrandbits(bits) | 1 | (1 << (bits - 1))
    p = rng.randrange(1, q)
    return list(rational_digits(p, q))[1:]


@pytest.fixture
def rng():
    return random.Random(20261014)


# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
