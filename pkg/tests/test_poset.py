import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cantorcdh.bitspace import ONE, ZERO, PointSpec, words
from cantorcdh.denseset import DisjointFamily, canonical_QR, cantor_pair, parse_tag, tail_coded_family
from cantorcdh.poset import (
    Cell,
    Condition,
    Dom,
    GenericRun,
    Level,
    MergeConflict,
    PosetError,
    Ran,
    cell_of,
    centered_check,
    decode,
    encode,
    extend_dom,
    extend_level,
    extend_ran,
    in_cell,
    independent_eval,
    leq,
    list_code,
    list_decode,
    make_condition,
    meets,
    root,
    run_generic,
    validate_condition,
    x_e,
)
from cantorcdh.tower import check_coherent, eval, from_tables, to_tables

Q, R = canonical_QR()
QR = (DisjointFamily([Q]), DisjointFamily([R]))
SWAP = [["1", "0"]]


def test_validate_examples():
    assert validate_condition(root(), QR)
    assert not validate_condition(make_condition([(0, ZERO, ONE)], [1], [["0", "1"]]), QR)
    assert validate_condition(make_condition([(0, ZERO, ONE)], [1], SWAP), QR)


def test_validate_rejects_wrong_side():
    assert not validate_condition(make_condition([(0, ONE, ZERO)], [1], SWAP), QR)


def test_leq_examples():
    p = make_condition([(0, ZERO, ONE)], [1], SWAP)
    assert leq(p, p)
    assert leq(p, root())
    assert not leq(make_condition([], [1], SWAP), make_condition([], [1], [["0", "1"]]))


def test_extend_level_examples():
    q = extend_level(root(), 2, QR)
    assert q.n == 2 and to_tables(q.pi).perms[-1] == list(words(2))
    p = make_condition([(0, ZERO, ONE)], [1], SWAP)
    q = extend_level(p, 2, QR)
    assert q.n == 2
    assert to_tables(q.pi).perms[-1] == ["11", "10", "00", "01"]
    assert validate_condition(q, QR) and leq(q, p)
    assert extend_level(q, 1, QR) is q


def test_extend_dom_examples():
    p = extend_dom(root(), ZERO, 0, QR)
    assert p.g == ((0, ZERO, ONE),)
    q = extend_level(p, 1, QR)
    assert to_tables(q.pi).perms[-1] == ["1", "0"]
    assert extend_dom(p, ZERO, 0, QR) is p
    with pytest.raises(PosetError):
        extend_dom(root(), ONE, 0, QR)


def test_extend_ran_examples():
    p = extend_ran(root(), ONE, 0, QR)
    assert p.g == ((0, ZERO, ONE),)
    assert extend_ran(p, ONE, 0, QR) is p
    q = extend_ran(extend_level(p, 2, QR), PointSpec("0", "1"), 0, QR)
    assert validate_condition(q, QR)


def test_run_generic_examples():
    T = run_generic(QR, 0)
    assert T.levels == (0,)
    T = run_generic(QR, 4)
    assert to_tables(T).perms[1] == ["1", "0"]


def test_run_generic_tail_family():
    pairs = (tail_coded_family(3), tail_coded_family(3, start=3))
    T = run_generic(pairs, 60, check_steps=True)
    assert check_coherent(T)
    for alpha in range(3):
        for a in pairs[0][alpha].first(5):
            b = T.exact_image(a)
            assert pairs[1][alpha].membership(b)
            assert all(eval(T, a, i) == b.bit(i) for i in range(T.top))


def test_requirements_met_and_chain_monotone():
    run = GenericRun(QR, check_steps=True)
    prev = run.condition
    for _ in range(40):
        run.step()
        assert leq(run.condition, prev)
        prev = run.condition
    assert all(meets(run.condition, r) for r in run.transcript)
    assert isinstance(run.transcript[0], Level)
    assert isinstance(run.transcript[1], Dom) and isinstance(run.transcript[2], Ran)


def test_forced_requirement_keeps_chain():
    run = GenericRun(QR, check_steps=True).run(10)
    a = Q.fresh_query("0110110")
    before = run.condition
    b = run.exact_image(a)
    assert R.membership(b) and leq(run.condition, before)
    assert run.exact_preimage(b) == a


def test_independent_family_examples():
    e = encode({})
    assert all(independent_eval(alpha, e) == 0 for alpha in range(5))
    e = encode({0: 3})
    assert independent_eval(0, e) == 3 and independent_eval(1, e) == 0


def test_decode_rejects_non_functions():
    clash = list_code([cantor_pair(0, 0), cantor_pair(0, 1)])
    with pytest.raises(PosetError):
        decode(clash)
    with pytest.raises(PosetError):
        decode(-1)


@given(st.lists(st.integers(0, 50), max_size=6))
def test_list_code_roundtrip(xs):
    assert list_decode(list_code(xs)) == xs


@given(st.dictionaries(st.integers(0, 6), st.integers(0, 6), max_size=5))
def test_encode_roundtrip(phi):
    assert decode(encode(phi)) == phi


def test_cell_examples():
    c = cell_of(root(), QR)
    assert c.e == encode({}) and c.n == 0
    p = make_condition([], [1], SWAP)
    q = make_condition([], [1], [["0", "1"]])
    assert cell_of(p, QR) != cell_of(q, QR)


def test_shared_cell_and_merge():
    T = from_tables([1], SWAP)
    g = ((0, ZERO, ONE), (0, PointSpec("01", "0"), PointSpec("10", "1")))
    p, q = Condition(g[:1], T), Condition(g[1:], T)
    whole = cell_of(Condition(g, T), QR)
    assert in_cell(p, whole, QR) and in_cell(q, whole, QR)
    r = centered_check(p, q, QR)
    assert not isinstance(r, MergeConflict) and validate_condition(r, QR)
    assert leq(r, p) and leq(r, q)
    assert centered_check(p, p, QR) is p


def test_permutation_clash_reported():
    p = make_condition([], [1], SWAP)
    q = make_condition([], [1], [["0", "1"]])
    r = centered_check(p, q, QR)
    assert isinstance(r, MergeConflict) and r.reason == "permutation clash"
    assert r.witness == "0"


def test_domain_clash_reported():
    T = from_tables([1], SWAP)
    p = Condition(((0, ZERO, ONE),), T)
    q = Condition(((0, ZERO, PointSpec("10", "1")),), T)
    r = centered_check(p, q, QR)
    assert isinstance(r, MergeConflict) and r.reason == "domain clash"


def test_x_e_contains_its_part():
    g = ((0, ZERO, ONE), (0, PointSpec("1", "0"), PointSpec("0", "1")))
    c = cell_of(Condition(g, from_tables([1], SWAP)), QR)
    assert set(g) <= x_e(c.e, QR)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.integers(0, 25))
def test_extensions_stay_valid(seed, steps):
    rng = random.Random(seed)
    pairs = (DisjointFamily([Q, parse_tag("tail:0")]), DisjointFamily([R, parse_tag("tail:1")]))
    p = root()
    for _ in range(steps):
        alpha = rng.randrange(2)
        op = rng.randrange(3)
        if op == 0:
            q = extend_level(p, rng.randrange(8), pairs)
        elif op == 1:
            q = extend_dom(p, pairs[0][alpha].enumerate(rng.randrange(10)), alpha, pairs)
        else:
            q = extend_ran(p, pairs[1][alpha].enumerate(rng.randrange(10)), alpha, pairs)
        assert validate_condition(q, pairs) and leq(q, p)
        p = q
