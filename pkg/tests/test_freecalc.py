import math
import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import brentq, minimize_scalar

import bound_checks as bc
from conftest import float_coeffs, matrices, series, tensors
from freetransport.errors import DomainError
from freetransport.fock import StructureArray, build_rep, trace_Q
from freetransport.freecalc import (
    cyc_diff,
    cyc_diff_via_tensor,
    diff,
    dstar,
    grad,
    inverse_C,
    jacobian,
    jstar,
    script_C,
)
from freetransport.ncpoly import Series, SeriesSeq, norm_R, star, substitute
from freetransport.nctensor import (
    MatTensor,
    TensorElem,
    invol_dagger,
    invol_diamond,
    left_mul,
    mat_diamond,
    mat_norm,
    mat_star,
    right_mul,
)
from freetransport.semitrace import SEMICIRCULAR

X1, X2 = Series.var(1), Series.var(2)


def pair(u, v, c=1):
    return TensorElem({(tuple(u), tuple(v)): c})


def test_diff_examples():
    assert diff(Series.word((1, 2, 1)), 1) == pair([], [2, 1]) + pair([1, 2], [])
    assert not diff(X2, 1)


def test_cyc_diff_examples():
    assert cyc_diff(X1 * X2, 1) == X2
    assert cyc_diff(X1 * X1, 1) == 2 * X1
    assert grad(Series.word((1, 2, 1))).indices() == [1, 2]


def test_jacobian_examples():
    X = SeriesSeq.identity([1, 2, 3])
    assert jacobian(X) == MatTensor.identity([1, 2, 3])
    J = jacobian(grad(Series.word((1, 2, 1))))
    assert J[(2, 1)] == invol_diamond(J[(1, 2)])


def test_dstar_examples():
    assert dstar(TensorElem.one(), 2, X2, SEMICIRCULAR) == X2
    assert dstar(pair([1], []), 1, X1, SEMICIRCULAR) == X1 * X1 - Series.const(1)


def test_jstar_examples():
    X = SeriesSeq.identity([1, 2, 3])
    assert jstar(MatTensor.identity([1, 2, 3]), X, SEMICIRCULAR) == X
    assert jstar(MatTensor(), X, SEMICIRCULAR) == SeriesSeq()


def test_constants_examples():
    assert script_C(2 * math.e, 2) == pytest.approx(1 / (2 * math.e), rel=1e-14)
    assert inverse_C(3.9, 2.1) > 0.3718
    with pytest.raises(DomainError):
        script_C(2, 3)
    with pytest.raises(DomainError):
        inverse_C(2, 2)


def numeric_script_C(R, S):
    f = lambda t: -math.exp(math.log(t) + (t - 1) * math.log(S) - t * math.log(R))
    grid = np.geomspace(1e-4, 1e4, 4001)
    k = int(np.argmin([f(t) for t in grid]))
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)]
    res = minimize_scalar(f, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
    return -res.fun


def test_script_C_matches_numeric_maximum():
    rng = random.Random(7)
    for _ in range(20):
        S = rng.uniform(0.5, 10)
        R = S * rng.uniform(1.05, 5)
        assert script_C(R, S) == pytest.approx(numeric_script_C(R, S), rel=1e-6)


def test_inverse_C_solves_its_equation():
    for R, S in [(3.9, 2.1), (6, 5), (10, 2)]:
        T = (R + S) / 2
        g = lambda C: C / (1 - C * script_C(R, T)) - (R - S) / 4
        root = brentq(g, 0, 1 / script_C(R, T) * (1 - 1e-12), xtol=1e-15)
        assert inverse_C(R, S) == pytest.approx(root, rel=1e-10)


# algebraic properties

@given(series(n_vars=2), series(n_vars=2), st.integers(1, 2))
def test_leibniz(p, q, n):
    lhs = diff(p * q, n)
    rhs = right_mul(diff(p, n), q) + left_mul(p, diff(q, n))
    assert lhs == rhs


@given(series(), st.integers(1, 3))
def test_realness(p, n):
    assert invol_dagger(diff(p, n)) == diff(star(p), n)
    assert cyc_diff(star(p), n) == star(cyc_diff(p, n))
    assert cyc_diff(p, n) == cyc_diff_via_tensor(p, n)


@given(series(n_vars=2))
def test_jacobian_of_gradient_symmetries(p):
    g = p + star(p)
    J = jacobian(grad(g))
    assert mat_diamond(J) == J
    assert mat_star(J) == J


# adjointness against the Fock oracle at q = 0

@pytest.fixture(scope="module")
def free_trace():
    rep = build_rep(StructureArray.zero(2), 2, 5)
    return lambda w: trace_Q(rep, w)


def test_dstar_adjoint_via_fock_oracle(free_trace):
    rng = random.Random(11)

    def rand_word(k):
        return tuple(rng.choice((1, 2)) for _ in range(rng.randint(0, k)))

    for _ in range(50):
        eta = TensorElem({(rand_word(2), rand_word(2)): rng.randint(-3, 3) or 1
                          for _ in range(rng.randint(1, 3))})
        P = Series({rand_word(4): rng.randint(-3, 3) or 1 for _ in range(rng.randint(1, 3))})
        n = rng.choice((1, 2))
        x = dstar(eta, n, Series.var(n), SEMICIRCULAR)
        # <x, P> = tau(P^* x)
        lhs = sum(a * b * free_trace(tuple(reversed(v)) + u)
                  for u, a in x.terms.items() for v, b in P.terms.items())
        # <a (x) b, c (x) d> = tau(c^* a) tau(b d^*)
        rhs = sum(e * f * free_trace(tuple(reversed(c)) + a) * free_trace(b + tuple(reversed(d)))
                  for (a, b), e in eta.terms.items() for (c, d), f in diff(P, n).terms.items())
        assert lhs == pytest.approx(rhs, abs=1e-9)


# norm bounds

R, S = 6.0, 5.0


@given(series(coeffs=float_coeffs))
def test_difference_quotient_bounds(P):
    for lhs, rhs in (bc.diff_sigma(P, R), bc.diff_radius_change(P, R, S, script_C(R, S)),
                     bc.partial_trace(P, R), bc.grad_sigma(P, R)):
        assert lhs <= rhs * (1 + 1e-12) + 1e-12


@given(series(n_vars=2, coeffs=float_coeffs))
def test_jacobian_bound(P):
    T = (R + S) / 2
    lhs = mat_norm(jacobian(grad(P)), S, 1)
    assert lhs <= script_C(T, S) * script_C(R, T) * norm_R(P, R) * (1 + 1e-12) + 1e-12


@given(tensors(coeffs=float_coeffs), st.integers(1, 2))
def test_dstar_bound(eta, n):
    lhs, rhs = bc.dstar_bound(eta, n, R)
    assert lhs <= rhs * (1 + 1e-12) + 1e-12


@given(matrices(coeffs=float_coeffs))
def test_jstar_bound(H):
    lhs, rhs = bc.jstar_bound(H, R)
    assert lhs <= rhs * (1 + 1e-12) + 1e-12


@given(series(n_vars=2, max_len=3, coeffs=float_coeffs),
       series(n_vars=2, max_len=2, coeffs=float_coeffs),
       series(n_vars=2, max_len=2, coeffs=float_coeffs))
def test_mean_value_estimate(P, a, b):
    rad, eps = 4.0, 1.0
    X = SeriesSeq.identity([1, 2])
    da = SeriesSeq({1: a, 2: b})
    db = SeriesSeq({1: b, 2: -a})
    # keep both substitutions inside the radius-rad ball at radius S0
    S0 = 2.0
    room = (rad - S0) / max(da.norm_inf(S0), db.norm_inf(S0), 1e-9)
    Y1, Y2 = X + da * room, X + db * (0.5 * room)
    lhs = norm_R(substitute(P, Y1, 12) - substitute(P, Y2, 12), S0)
    rhs = script_C(rad + eps, rad) * norm_R(P, rad + eps) * (Y1 - Y2).norm_inf(S0)
    assert lhs <= rhs * (1 + 1e-9) + 1e-12
