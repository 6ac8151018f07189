import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cantorcdh.bitspace import (
    ONE,
    ZERO,
    BitspaceError,
    Cylinder,
    PointSpec,
    all_words,
    deinterleave,
    extends,
    first_difference,
    interleave,
    interleave_words,
    point_eq,
    prefix,
    split_word,
    words,
)
from conftest import points


def test_prefix_examples():
    assert prefix(ZERO, 0) == ""
    assert prefix(ZERO, 3) == "000"
    assert prefix(PointSpec("1", "10"), 5) == "11010"


def test_extends_examples():
    assert extends("", "")
    assert extends("010", "01")
    assert not extends("10", "01")


def test_point_eq_examples():
    assert point_eq(PointSpec("", "0"), PointSpec("0", "00"))
    assert point_eq(PointSpec("", "01"), PointSpec("01", "01"))
    assert not point_eq(ZERO, ONE)


def test_canonical_form():
    p = PointSpec("0110", "1010")
    assert (p.head, p.period) == ("01", "10")
    assert PointSpec("", "0") == PointSpec("000", "00")


def test_bad_words_rejected():
    with pytest.raises(BitspaceError):
        PointSpec("2", "0")
    with pytest.raises(BitspaceError):
        PointSpec("0", "")
    with pytest.raises(BitspaceError):
        PointSpec.parse("0101")


def test_parse_roundtrip():
    p = PointSpec("110", "01")
    assert PointSpec.parse(str(p)) == p


def test_word_orders():
    assert list(words(2)) == ["00", "01", "10", "11"]
    it = all_words()
    assert [next(it) for _ in range(4)] == ["", "0", "1", "00"]


def test_cylinder():
    c = Cylinder("10")
    assert PointSpec("101", "1") in c
    assert ZERO not in c
    assert c.point() == PointSpec("10", "0")


def test_interleave_words():
    assert interleave_words("01", "1") == "011"
    assert split_word("011") == ("01", "1")
    with pytest.raises(BitspaceError):
        interleave_words("0", "110")


@given(points, st.integers(0, 64), st.integers(0, 64))
def test_prefix_coherence(p, m, n):
    m, n = min(m, n), max(m, n)
    assert extends(p.prefix(n), p.prefix(m))


@settings(max_examples=100)
@given(points, points, points)
def test_point_eq_is_equivalence(p, q, r):
    assert point_eq(p, p)
    assert point_eq(p, q) == point_eq(q, p)
    if point_eq(p, q) and point_eq(q, r):
        assert point_eq(p, r)


@given(points, points)
def test_equality_matches_canonical_form(p, q):
    assert point_eq(p, q) == (p == q)
    if point_eq(p, q):
        assert all(p.prefix(n) == q.prefix(n) for n in range(65))
    else:
        i = first_difference(p, q)
        assert p.prefix(i) == q.prefix(i) and p.bit(i) != q.bit(i)


@given(points, points)
def test_interleave_roundtrip(x, y):
    z = interleave(x, y)
    assert deinterleave(z) == (x, y)
    for i in range(40):
        assert z.bit(2 * i) == x.bit(i) and z.bit(2 * i + 1) == y.bit(i)
