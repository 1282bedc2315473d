import pytest

from cfx import cfd1
from cfx.cf_core import CFString
from cfx.errors import FormatError


def test_parse_with_head_comments_and_commas():
    text = "# a comment\nh=-3 1, 2\n  # another\n3,4 5\n"
    assert cfd1.parse(text) == CFString(-3, (1, 2, 3, 4, 5))


def test_parse_without_head():
    assert cfd1.parse("4 4 4") == CFString(0, (4, 4, 4))


def test_round_trip():
    s = CFString(7, tuple(range(1, 60)))
    assert cfd1.parse(cfd1.format(s)) == s


@pytest.mark.parametrize("bad", ["1 0 2", "1 x", "1 2 h=3", "h=x 1"])
def test_bad_input(bad):
    with pytest.raises(FormatError):
        cfd1.parse(bad)


def test_iter_stream_is_lazy():
    def lines():
        yield "h=1 2 3"
        raise AssertionError("read too far")

    head, it = cfd1.iter_stream(lines())
    assert head == 1
    assert next(it) == 2
