"""Norm inequalities shared by the calculus tests and the acceptance run.

Each check returns ``(lhs, rhs)``; the inequality holds when ``lhs <= rhs``.
"""
from freetransport.freecalc import diff, dstar, grad, jstar
from freetransport.ncpoly import Series, SeriesSeq, norm_R, sigma
from freetransport.nctensor import mat_norm, partial_trace_right, tnorm_upper
from freetransport.semitrace import SEMICIRCULAR

SUP_X = SEMICIRCULAR.sup_norm


def diff_sigma(P: Series, R):
    lhs = sum(tnorm_upper(diff(sigma(P), n), R) for n in P.variables())
    return lhs, norm_R(P, R) / R


def diff_radius_change(P: Series, R, S, C):
    lhs = sum(tnorm_upper(diff(P, n), S) for n in P.variables())
    return lhs, C * norm_R(P, R)


def partial_trace(P: Series, R):
    lhs = sum(norm_R(partial_trace_right(diff(P, n), SEMICIRCULAR), R) for n in P.variables())
    return lhs, norm_R(P, R) / (R - SUP_X)


def grad_sigma(P: Series, R):
    return grad(sigma(P), "1").norm_1(R), norm_R(P, R) / R


def dstar_bound(eta, n, R):
    xi = Series.var(n)
    lhs = norm_R(dstar(eta, n, xi, SEMICIRCULAR), R)
    return lhs, (2 / (R - SUP_X) + norm_R(xi, R)) * tnorm_upper(eta, R)


def jstar_bound(H, R):
    cols = {j for _, j in H.entries} | {i for i, _ in H.entries} | {1}
    xi = SeriesSeq({j: Series.var(j) for j in cols})
    lhs = jstar(H, xi, SEMICIRCULAR).norm_1(R)
    return lhs, (2 / (R - SUP_X) + R) * mat_norm(H, R, 1)
