import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import all_strings, coset, orthogonal, span
from qucoin.f2 import (
    BitVec,
    Coset,
    F2Matrix,
    Subspace,
    coset_member,
    dual,
    member,
    random_subspace,
    rref,
    split_subspace,
)


def bv(s):
    return BitVec.from_str(s)


def rows(m):
    return [str(r) for r in m.rows]


# -- BitVec -------------------------------------------------------------------


def test_bitvec_text_and_hex_forms():
    v = bv("1100")
    assert v.value == 0b1100
    assert v[0] == 1 and v[3] == 0
    assert v.hex() == "0xC"
    assert BitVec.from_hex("0xC", 4) == v
    assert str(v) == "1100"


def test_bitvec_self_xor_is_zero():
    v = bv("1011")
    assert (v ^ v) == BitVec.zeros(4)


def test_bitvec_length_mismatch():
    with pytest.raises(ValueError):
        bv("10") ^ bv("100")
    with pytest.raises(ValueError):
        BitVec(8, 3)


def test_bitvec_is_immutable():
    v = bv("01")
    with pytest.raises(AttributeError):
        v.length = 3


# -- rref -----------------------------------------------------------------------


def test_rref_identity():
    eye = F2Matrix.from_rows(["1000", "0100", "0010", "0001"])
    assert rref(eye) == eye


def test_rref_worked_example():
    m = F2Matrix.from_rows(["1111", "1100"])
    r = rref(m)
    assert rows(r) == ["1100", "0011"]
    assert span(rows(r), 4) == span(["1111", "1100"], 4) == {"0000", "1100", "0011", "1111"}


def test_rref_zero_matrix_has_rank_zero():
    r = rref(F2Matrix.from_rows(["0000", "0000"]))
    assert r.nrows == 0 and r.ncols == 4


@st.composite
def generator_sets(draw, max_n=8):
    n = draw(st.integers(1, max_n))
    k = draw(st.integers(0, n + 1))
    gens = [draw(st.text("01", min_size=n, max_size=n)) for _ in range(k)]
    return n, gens


@given(generator_sets())
def test_rref_idempotent_and_span_preserving(ng):
    n, gens = ng
    m = F2Matrix.from_rows(gens, n)
    r = rref(m)
    assert rref(r) == r
    assert span(rows(r), n) == span(gens, n)
    assert r.nrows == len(rows(r)) and r.rank() <= min(len(gens), n)


# -- random_subspace ------------------------------------------------------------------


def test_random_subspace_extremes():
    rng = np.random.default_rng(0)
    assert random_subspace(4, 0, rng) == Subspace.zero(4)
    assert random_subspace(4, 4, rng) == Subspace.full(4)


def test_random_subspace_deterministic():
    a = random_subspace(4, 2, np.random.default_rng(42))
    b = random_subspace(4, 2, np.random.default_rng(42))
    assert a == b and a.dim == 2


def test_random_subspace_range_check():
    with pytest.raises(ValueError):
        random_subspace(4, 5, np.random.default_rng(0))


def test_random_subspace_roughly_uniform():
    # GF(2)^4 has 35 two-dimensional subspaces
    rng = np.random.default_rng(7)
    seen = {random_subspace(4, 2, rng) for _ in range(2000)}
    assert len(seen) == 35


# -- membership / dual ---------------------------------------------------------------


def test_member_examples():
    s = Subspace.span(["1100", "0011"])
    assert member(s, bv("1111"))
    assert not member(s, bv("1000"))
    assert span(["1100", "0011"], 4) == {"0000", "1100", "0011", "1111"}
    assert member(Subspace.span(["1010"]), bv("0000"))
    with pytest.raises(ValueError):
        member(s, bv("111"))


def test_dual_examples():
    s = Subspace.span(["1100", "0011"])
    assert orthogonal(["1100", "0011"], 4) == {"0000", "1100", "0011", "1111"}
    assert dual(s) == s
    assert dual(Subspace.full(4)) == Subspace.zero(4)
    assert dual(Subspace.zero(4)) == Subspace.full(4)


@settings(max_examples=60)
@given(generator_sets())
def test_member_and_dual_agree_with_brute_force(ng):
    n, gens = ng
    s = Subspace.span(gens, n)
    points = span(gens, n)
    assert {v for v in all_strings(n) if member(s, bv(v))} == points
    assert {str(v) for v in s.elements()} == points
    d = dual(s)
    assert d.dim == n - s.dim
    assert {str(v) for v in d.elements()} == orthogonal(gens, n)


@given(st.integers(1, 12).flatmap(lambda n: st.tuples(st.just(n), st.integers(0, n), st.integers(0, 2**32))))
def test_double_dual(args):
    n, k, seed = args
    s = random_subspace(n, k, np.random.default_rng(seed))
    assert dual(dual(s)) == s


# -- split / cosets -------------------------------------------------------------------


def test_split_example_postconditions():
    s = Subspace.span(["1100", "0011"])
    s0, w = split_subspace(s, np.random.default_rng(0))
    assert s0.dim == 1 and s0.issubset(s)
    assert member(s, w) and not member(s0, w)
    assert {str(v) for v in s0.elements()} | {str(v ^ w) for v in s0.elements()} == span(["1100", "0011"], 4)


def test_split_one_dimensional():
    s0, w = split_subspace(Subspace.span(["1"]), np.random.default_rng(0))
    assert s0 == Subspace.zero(1) and w == bv("1")


def test_split_zero_errors():
    with pytest.raises(ValueError):
        split_subspace(Subspace.zero(3), np.random.default_rng(0))


@settings(max_examples=60)
@given(st.integers(1, 8).flatmap(lambda n: st.tuples(st.just(n), st.integers(1, n), st.integers(0, 2**32))))
def test_split_partitions_subspace(args):
    n, k, seed = args
    rng = np.random.default_rng(seed)
    s = random_subspace(n, k, rng)
    s0, w = split_subspace(s, rng)
    low, high = Coset(s0, BitVec.zeros(n)), Coset(s0, w)
    for v in s.elements():
        assert (v in low) + (v in high) == 1
    assert not member(s0, w)


def test_coset_member_examples():
    x = bv("0110")
    c = Coset(Subspace.span(["1100"]), x)
    assert coset_member(c, x)
    c2 = Coset(Subspace.span(["1100"]), bv("0001"))
    assert coset_member(c2, bv("1101"))
    assert coset(["1100"], "0001", 4) == {"0001", "1101"}
    with pytest.raises(ValueError):
        coset_member(c2, bv("11"))


@settings(max_examples=40)
@given(st.integers(2, 8).flatmap(lambda n: st.tuples(st.just(n), st.integers(1, n), st.integers(0, 2**32))))
def test_cosets_of_same_space_identical_or_disjoint(args):
    n, k, seed = args
    rng = np.random.default_rng(seed)
    s = random_subspace(n, k, rng)
    a, b = BitVec.random(n, rng), BitVec.random(n, rng)
    pa = {str(v) for v in Coset(s, a).elements()}
    pb = {str(v) for v in Coset(s, b).elements()}
    assert pa == pb or not (pa & pb)
    assert Coset(s, a).same_as(Coset(s, b)) == (pa == pb)


def test_subspace_serialization_roundtrip():
    s = Subspace.span(["1100", "0011"])
    data = s.to_json()
    assert data == {"ambient": 4, "basis": ["0xC", "0x3"]}
    assert Subspace.from_json(data) == s


def test_subspace_requires_rref():
    with pytest.raises(ValueError):
        Subspace(F2Matrix.from_rows(["1111", "1100"]), 4)
