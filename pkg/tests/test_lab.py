from collections import Counter
from fractions import Fraction

import pytest

from cfx.cf_core import IDENTITY, CFString, Mat2, gauss_kuzmin
from cfx.component_graph import markov_model, transitive_components
from cfx.errors import FormatError
from cfx.lab import (
    EXPLICIT,
    FILE,
    SourceSpec,
    convergence_report,
    random_rational,
    run_experiment,
    sample_source,
    source_digits,
    stats_to_dict,
)
from cfx.transducer import step


def test_explicit_source():
    assert source_digits(SourceSpec(EXPLICIT, value=Fraction(3, 7))) == (0, [2, 3])
    assert source_digits(SourceSpec(EXPLICIT, value="3/7")) == (0, [2, 3])
    assert source_digits(SourceSpec(EXPLICIT, value="h=2 1 5")) == (2, [1, 5])


def test_rational_source_deterministic():
    a = source_digits(SourceSpec(bits=5000, seed=9))
    b = source_digits(SourceSpec(bits=5000, seed=9))
    c = source_digits(SourceSpec(bits=5000, seed=10))
    assert a == b and a != c
    p, q = random_rational(64, 1)
    assert q % 2 == 1 and q.bit_length() == 64 and 0 < p < q


def test_rational_source_length():
    _, ds = source_digits(SourceSpec(bits=10**6, seed=1))
    assert len(ds) >= 0.4 * 10**6


def test_file_source(tmp_path):
    f = tmp_path / "x.cfd1"
    f.write_text("# golden\nh=1 1 1 1\n1 1\n")
    assert source_digits(SourceSpec(FILE, path=str(f))) == (1, [1] * 5)
    f.write_text("1 two\n")
    with pytest.raises(FormatError):
        source_digits(SourceSpec(FILE, path=str(f)))


def test_identity_experiment():
    spec = SourceSpec(bits=30_000, seed=2)
    st = run_experiment(IDENTITY, spec, 10_000, holdback=2)
    assert st.n_consumed == 10_000
    assert all(ell == n for n, ell in st.ell_trace)
    assert st.c1_estimate == 1.0
    _, ds = source_digits(spec, 10_000)
    emitted = ds[: st.n_output]
    counts = Counter(min(d, 9) for d in emitted)
    assert st.output_digit_counts == dict(counts)
    rep = convergence_report(st)
    assert rep.c1_drift == 0.0


def test_all_ones_state_trace():
    ones = CFString(0, (1,) * 30)
    st = run_experiment(Mat2(1, 0, 0, 2), SourceSpec(EXPLICIT, value=ones), 30)
    m, seq = Mat2(1, 0, 0, 2), []
    for _ in range(6):
        seq.append(m)
        m = step(m, 1).next
    assert seq[:3] == [Mat2(1, 0, 0, 2), Mat2(2, 0, 0, 1), Mat2(0, 2, 1, 1)]
    assert set(st.state_counts) == set(seq)


def test_marginal_consistency():
    spec = SourceSpec(bits=50_000, seed=3)
    st = run_experiment(Mat2(2, 0, 0, 1), spec, 20_000)
    _, ds = source_digits(spec, 20_000)
    for k in range(1, 9):
        assert st.cylinder_marginal((k,)) == ds.count(k)
    pairs = Counter(zip(ds, ds[1:]))
    assert st.cylinder_marginal((1, 2)) == pairs[(1, 2)]


def test_d1_occupancy_matches_pi():
    g = transitive_components(1)
    sink = g.sink_components()[0]
    mm = markov_model(g, sink, cutoff=1000)
    st = run_experiment(IDENTITY, SourceSpec(bits=20_000, seed=4), 5000, sink=sink)
    rep = convergence_report(st, mm)
    assert rep.occupancy_vs_pi[IDENTITY][:2] == (1.0, 1.0)
    assert rep.verdicts["occupancy_within_3sigma"]


def test_unimodular_tail_preserved():
    spec = SourceSpec(bits=20_000, seed=5)
    st = run_experiment(Mat2(1, 1, 1, 2), spec, 5000, holdback=2)
    assert st.c1_estimate == pytest.approx(1.0, abs=0.01)


def test_report_dict_shape():
    st = run_experiment(Mat2(2, 0, 0, 1), SourceSpec(bits=20_000, seed=6), 5000)
    d = stats_to_dict(st)
    for key in ["matrix", "det", "n", "ell", "c1", "m_max", "annih_max", "digit_freqs", "cylinder_freqs", "state_occupancy", "pi_reference", "verdicts"]:
        assert key in d
    assert d["digit_freqs"]["1"] == pytest.approx(gauss_kuzmin(1), abs=0.03)


def test_until_output():
    st = run_experiment(Mat2(1, 0, 0, 3), SourceSpec(bits=20_000, seed=7), 3000, until_output=True)
    assert st.n_output >= 3000


def test_partial_on_pole():
    st = run_experiment(Mat2(1, 0, 2, -1), SourceSpec(EXPLICIT, value="1/2"), 10)
    assert st.partial and "PoleError" in st.error
