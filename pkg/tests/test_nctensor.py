import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import float_coeffs, matrices, series, tensors
from freetransport.errors import NormTooLarge
from freetransport.ncpoly import Series, SeriesSeq, norm_R
from freetransport.nctensor import (
    MatTensor,
    TensorElem,
    hash_apply,
    invol_dagger,
    invol_diamond,
    invol_star,
    mat_analytic,
    mat_from_json,
    mat_mul,
    mat_norm,
    mat_star,
    mat_to_json,
    mat_trace,
    mat_apply,
    mul_map,
    partial_trace_left,
    partial_trace_right,
    tau_tensor,
    tensor_from_json,
    tensor_mul,
    tensor_to_json,
    tnorm_upper,
)
from freetransport.semitrace import SEMICIRCULAR, tau_sc


def pair(u, v, c=1):
    return TensorElem({(tuple(u), tuple(v)): c})


def test_hash_product_definition():
    assert tensor_mul(pair([1], [2]), pair([3], [4])) == pair([1, 3], [4, 2])
    eta = pair([1, 2], [2]) + pair([], [1], 3)
    assert tensor_mul(TensorElem.one(), eta) == eta
    assert tensor_mul(eta, TensorElem.one()) == eta


def test_hash_apply_definition():
    assert hash_apply(pair([1], [2]), Series.var(3)) == Series.word((1, 3, 2))
    P = Series({(1, 2): 2, (): 1})
    assert hash_apply(TensorElem.one(), P) == P


def test_involutions_examples():
    assert invol_dagger(pair([1, 2], [3])) == pair([3], [2, 1])
    assert invol_diamond(pair([1], [2])) == pair([2], [1])
    assert invol_star(pair([1, 2], [3, 1])) == pair([2, 1], [1, 3])


def test_tnorm_examples():
    R = 3.5
    assert tnorm_upper(TensorElem.one(), R) == 1
    assert tnorm_upper(pair([1], [2]) + pair([2], [1]), R) == pytest.approx(2 * R ** 2)


def test_partial_traces_examples():
    assert partial_trace_right(pair([1], []), SEMICIRCULAR) == Series.var(1)
    assert not partial_trace_right(pair([1], [2]), SEMICIRCULAR)
    assert partial_trace_left(pair([2, 2], [1]), SEMICIRCULAR) == Series.var(1)
    assert mul_map(pair([1], [2])) == Series.word((1, 2))


def test_matrix_examples():
    H = MatTensor({(1, 1): pair([1], [2]), (1, 2): pair([], [2], 2)})
    assert mat_mul(MatTensor.identity([1, 2]), H) == H
    one = MatTensor({(1, 1): pair([1], [2])})
    R = 2.2
    assert mat_norm(one, R, 1) == pytest.approx(R ** 2)
    assert mat_norm(one, R, math.inf) == pytest.approx(R ** 2)


def test_json_round_trips():
    eta = pair([1], [2], Fraction(1, 3)) + pair([], [], 2)
    assert tensor_from_json(tensor_to_json(eta)) == eta
    H = MatTensor({(1, 2): eta, (2, 2): pair([2], [])})
    assert mat_from_json(mat_to_json(H)) == H


# analytic functions

def test_analytic_of_zero():
    Z = MatTensor()
    log, tail = mat_analytic(Z, "log1p", 5, 3.0, indices=[1])
    assert not log and tail == 0
    inv, _ = mat_analytic(Z, "neumann_inv", 5, 3.0, indices=[1, 2])
    assert inv == MatTensor.identity([1, 2])


@pytest.mark.parametrize("c", [0.3, -0.45, 0.05])
def test_log_of_scalar_matrix_matches_log(c):
    H = MatTensor({(1, 1): TensorElem.one(c)})
    for m in (5, 10, 20, 40):
        value, tail = mat_analytic(H, "log1p", m, 3.0)
        got = value[(1, 1)].coeff((), ())
        assert abs(got - math.log1p(c)) <= tail + 1e-15


def test_tail_decreases_with_m():
    H = MatTensor({(1, 1): pair([1], [], 0.25 / 3), (1, 2): pair([], [], 0.25)})
    assert mat_norm(H, 3.0, 1) == pytest.approx(0.5)
    tails = [mat_analytic(H, "neumann_inv", m, 3.0)[1] for m in range(1, 8)]
    assert all(a > b for a, b in zip(tails, tails[1:]))


def test_analytic_norm_too_large():
    H = MatTensor({(1, 1): pair([1], [1], 0.2)})
    with pytest.raises(NormTooLarge):
        mat_analytic(H, "log1p", 5, 3.0)


def test_neumann_inverse_is_inverse():
    H = MatTensor({(1, 1): pair([1], [], 0.05), (1, 2): pair([], [2], 0.1),
                   (2, 1): pair([2], [1], 0.02)})
    inv, _ = mat_analytic(H, "neumann_inv", 12, 3.0, degree_cap=6, indices=[1, 2])
    one_plus = MatTensor.identity([1, 2]) + H
    prod = mat_mul(one_plus, inv, 6)
    diff = prod - MatTensor.identity([1, 2])
    assert max((abs(c) for t in diff.entries.values() for c in t.terms.values()), default=0) < 1e-12


# properties

@given(tensors(), tensors(), tensors())
def test_hash_associative(a, b, c):
    assert tensor_mul(tensor_mul(a, b), c) == tensor_mul(a, tensor_mul(b, c))


@given(tensors(coeffs=float_coeffs), tensors(coeffs=float_coeffs), st.floats(0.5, 5))
def test_tnorm_submultiplicative(a, b, R):
    assert tnorm_upper(tensor_mul(a, b), R) <= tnorm_upper(a, R) * tnorm_upper(b, R) * (1 + 1e-12) + 1e-12


@given(tensors(coeffs=float_coeffs), series(n_vars=2, max_len=3, coeffs=float_coeffs))
def test_hash_apply_norm(eta, P):
    R = 4.0
    assert norm_R(hash_apply(eta, P), R) <= tnorm_upper(eta, R) * norm_R(P, R) * (1 + 1e-12) + 1e-12


@given(tensors())
def test_involution_laws(eta):
    assert invol_dagger(eta) == invol_diamond(invol_star(eta)) == invol_star(invol_diamond(eta))
    for f in (invol_star, invol_dagger, invol_diamond):
        assert f(f(eta)) == eta
        assert tnorm_upper(f(eta), 2.5) == pytest.approx(tnorm_upper(eta, 2.5))


@given(matrices(), matrices())
def test_trace_is_tracial(G, H):
    a = tau_tensor(mat_trace(mat_mul(G, H)), tau_sc)
    b = tau_tensor(mat_trace(mat_mul(H, G)), tau_sc)
    assert a == b


@given(matrices(coeffs=float_coeffs), matrices(coeffs=float_coeffs), st.floats(0.5, 4))
def test_norms_submultiplicative_and_right_ideal(G, H, R):
    GH = mat_mul(G, H)
    slack = 1 + 1e-12
    assert mat_norm(GH, R, 1) <= mat_norm(G, R, 1) * mat_norm(H, R, math.inf) * slack + 1e-12
    assert mat_norm(GH, R, 1) <= mat_norm(G, R, 1) * mat_norm(H, R, 1) * slack + 1e-12
    assert mat_norm(GH, R, math.inf) <= mat_norm(G, R, math.inf) * mat_norm(H, R, math.inf) * slack + 1e-12


def _l2_inner(x: SeriesSeq, y: SeriesSeq):
    # <x, y> = sum_i tau(y_i^* x_i) for the semicircular trace
    total = 0
    for i, p in x:
        for u, a in p.terms.items():
            for v, b in y[i].terms.items():
                total += a * b * tau_sc(tuple(reversed(v)) + u)
    return total


@given(matrices(), series(n_vars=2, max_len=2), series(n_vars=2, max_len=2),
       series(n_vars=2, max_len=2), series(n_vars=2, max_len=2))
def test_mat_star_is_adjoint(H, a, b, c, d):
    x = SeriesSeq({1: a, 2: b})
    y = SeriesSeq({1: c, 2: d})
    assert _l2_inner(mat_apply(H, x), y) == _l2_inner(x, mat_apply(mat_star(H), y))


@given(tensors(coeffs=float_coeffs))
def test_tnorm_dominates_l2_norm(eta):
    # ||eta||_2^2 = sum c c' tau(u'^* u) tau(v v'^*) in L^2 of the tensor product
    keys = list(eta.terms)
    G = np.zeros((len(keys), len(keys)))
    for a, (u, v) in enumerate(keys):
        for b, (s, t) in enumerate(keys):
            G[a, b] = tau_sc(tuple(reversed(s)) + u) * tau_sc(v + tuple(reversed(t)))
    c = np.array([eta.terms[k] for k in keys], dtype=float)
    l2 = math.sqrt(max(float(c @ G @ c), 0.0)) if keys else 0.0
    assert l2 <= tnorm_upper(eta, 2.0) * (1 + 1e-12) + 1e-12
