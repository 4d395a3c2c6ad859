from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import float_coeffs, series
from freetransport.errors import MissingVariable
from freetransport.ncpoly import (
    Series,
    SeriesSeq,
    add,
    cyc_sym,
    from_json,
    from_text,
    max_abs_coeff,
    mul,
    norm_R,
    number_op,
    pi_proj,
    rotations,
    scale,
    sigma,
    star,
    substitute,
    to_json,
    to_text,
)

X1, X2, X3 = Series.var(1), Series.var(2), Series.var(3)


def test_mul_concatenates():
    assert X1 * X2 == Series.word((1, 2))
    one = Series.const(1)
    assert (one + X1) * (one + X1) == one + 2 * X1 + Series.word((1, 1))


def test_mul_cap_is_minimum():
    a = Series(X1.terms, 3)
    b = Series(X2.terms, 5)
    assert mul(a, b).degree_cap == 3
    assert mul(a, b, 2).degree_cap == 2
    assert not mul(Series.word((1, 1)), Series.word((2, 2)), 3)


def test_capped_series_drops_long_words():
    assert Series({(1, 2, 3): 1, (1,): 2}, 2).terms == {(1,): 2}


def test_star_reverses():
    assert star(X1 * X2) == X2 * X1
    assert star(3 * X1) == 3 * X1


def test_norm_examples():
    R = 2.5
    assert norm_R(X1 * X2 + 3 * X3, R) == pytest.approx(R ** 2 + 3 * R)
    assert norm_R(Series.const(1), 7) == 1
    five = Series({(k,): 1 for k in range(1, 6)})
    assert norm_R(five, 5) == 25


def test_structural_maps():
    assert sigma(Series.word((1, 2, 3))) == Series.word((1, 2, 3), Fraction(1, 3))
    assert cyc_sym(X1 * X2) == Series({(1, 2): Fraction(1, 2), (2, 1): Fraction(1, 2)})
    assert sigma(Series.const(5)) == Series.zero()
    assert pi_proj(Series.const(5) + X1) == X1
    assert number_op(Series.word((2, 2), 3)) == Series.word((2, 2), 6)


def test_rotations():
    assert sorted(rotations((1, 2, 3))) == [(1, 2, 3), (2, 3, 1), (3, 1, 2)]


def test_substitute_examples():
    Y = SeriesSeq.identity([1, 2])
    assert substitute(X1 * X2, Y, 4) == X1 * X2
    eps = Fraction(1, 7)
    Y = SeriesSeq({1: X1 + eps * X2})
    expected = Series.word((1, 1)) + eps * (X1 * X2 + X2 * X1) + eps ** 2 * Series.word((2, 2))
    assert substitute(Series.word((1, 1)), Y, 4) == expected


def test_substitute_missing_variable():
    with pytest.raises(MissingVariable):
        substitute(X1 * X3, SeriesSeq.identity([1, 2]), 4)


def test_text_and_json_round_trip():
    P = Series({(): Fraction(1, 2), (1, 2): -3, (2,): 4})
    assert to_text(P) == "1/2 + 4 * x2 + -3 * x1.x2"
    assert from_text(to_text(P)) == P
    assert from_json(to_json(P)) == P
    assert from_text("1 * x1 - 2 * x2.x2") == X1 - 2 * Series.word((2, 2))


# algebra laws

@given(series(), series(), series())
def test_associative_and_distributive(a, b, c):
    assert (a * b) * c == a * (b * c)
    assert a * (b + c) == a * b + a * c
    assert (a + b) * c == a * c + b * c
    assert a * Series.const(1) == a


@given(series(), series())
def test_star_is_anti_automorphism(a, b):
    assert star(a * b) == star(b) * star(a)
    assert star(star(a)) == a
    assert norm_R(star(a), 3.0) == pytest.approx(norm_R(a, 3.0))


@given(series(coeffs=float_coeffs), series(coeffs=float_coeffs))
def test_norm_submultiplicative(a, b):
    R = 5.0
    assert norm_R(a * b, R) <= norm_R(a, R) * norm_R(b, R) * (1 + 1e-12) + 1e-12


@given(series())
def test_sigma_number_op_is_projection(a):
    assert sigma(number_op(a)) == pi_proj(a)
    assert number_op(sigma(a)) == pi_proj(a)


@given(series(coeffs=float_coeffs), st.floats(0.5, 6))
def test_cyc_sym_idempotent_and_contractive(a, R):
    s = cyc_sym(a)
    assert max_abs_coeff(add(cyc_sym(s), s, -1)) < 1e-12
    assert norm_R(s, R) <= norm_R(a, R) * (1 + 1e-12) + 1e-12
    for w, c in s.terms.items():
        for r in rotations(w):
            assert s.coeff(r) == pytest.approx(c)


@given(series(n_vars=2, max_len=3), series(n_vars=2, max_len=3), series(n_vars=2, max_len=2))
def test_substitute_is_homomorphism(p, q, y1):
    Y = SeriesSeq({1: X1 + y1, 2: X2 - y1})
    cap = 6
    lhs = substitute(p * q, Y, cap)
    rhs = mul(substitute(p, Y, cap), substitute(q, Y, cap), cap)
    assert lhs == rhs


@given(series(n_vars=2, max_len=3, coeffs=float_coeffs),
       series(n_vars=2, max_len=2, coeffs=float_coeffs),
       series(n_vars=2, max_len=2, coeffs=float_coeffs))
def test_substitute_contracts_norms(P, a, b):
    R, S = 6.0, 5.0
    Y = SeriesSeq({1: a, 2: b})
    top = max(Y.norm_inf(S), 1e-9)
    Y = Y * (R / top * 0.999)
    assert Y.norm_inf(S) <= R
    assert norm_R(substitute(P, Y, 12), S) <= norm_R(P, R) * (1 + 1e-9) + 1e-12


def test_scale_and_exact_mode():
    P = from_text("0.5 * x1", mode="exact")
    assert P.coeff((1,)) == Fraction(1, 2)
    assert scale(P, 2) == X1
