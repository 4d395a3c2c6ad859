"""Free monotone transport for a semicircular family perturbed by a potential W.

The solver looks for ``g_hat`` with ``g_hat = F(g_hat)`` where

    F(g) = -W(X + D S g) - 1/2 (D S g) # (D S g) + L(S g),
    L(h) = (1 (x) tau + tau (x) 1) Tr log(1 + J D h),

``D`` is the cyclic gradient, ``S`` divides degree-d terms by d, ``J`` is the
Jacobian and ``tau`` the semicircular trace.  With ``g = cyc_sym(S g_hat)``
the variables ``Y = X + D g`` have the free Gibbs law with potential W.
Everything is computed on truncations at a fixed degree.
"""
from __future__ import annotations

import math
import warnings
from fractions import Fraction
from dataclasses import dataclass, field

from .errors import NoConvergence, NormTooLarge, PreconditionFailed, DomainError
from .freecalc import grad, inverse_C, jacobian, jstar, script_C
from .ncpoly import (
    Series,
    SeriesSeq,
    add,
    cyc_sym,
    max_abs_coeff,
    norm_R,
    number_op,
    scale,
    seq_dot,
    sigma,
    star,
    substitute,
)
from .nctensor import (
    MatTensor,
    mat_analytic,
    mat_apply,
    mat_dagger,
    mat_diamond,
    mat_max_abs,
    mat_mul,
    mat_norm,
    mat_star,
    mat_trace,
    partial_trace_both,
)
from .semitrace import SEMICIRCULAR

# radius at which the Jacobian of the gradient must be a strict contraction
JACOBIAN_RADIUS = 3.0


def _identity(indices, cap=None):
    return SeriesSeq.identity(indices, cap)


def _uncapped(P: Series) -> Series:
    # the solver truncates explicitly at its own degree; drop provenance caps
    return Series._raw(P.terms, None)


def default_m_max(H: MatTensor, tensor_cap: int, tol=1e-15, limit=60):
    """Number of powers of ``H`` after which dropped powers are below ``tol``.

    Split ``H = H0 + H1`` into the scalar part (multiples of ``1 (x) 1``) and
    the rest, of minimal total degree ``d1``.  Under the total-degree cap a
    product holds at most ``tensor_cap // d1`` factors from ``H1``, so the
    coefficients of ``H^m`` are bounded by
    ``sum_{k <= tensor_cap // d1} binom(m, k) c0^(m-k) c1^k`` with ``c0``, ``c1``
    the radius-1 norms of the two parts.
    """
    c0 = sum(abs(t.coeff((), ())) for t in H.entries.values())
    c1 = mat_norm(H, 1.0, 1) - c0
    degrees = [len(u) + len(v) for t in H.entries.values() for u, v in t.terms if u or v]
    if not degrees:
        kmax = 0
    else:
        kmax = tensor_cap // min(degrees)

    def bound(m):
        return sum(math.comb(m, k) * c0 ** (m - k) * c1 ** k for k in range(0, min(kmax, m) + 1))

    for m in range(1, limit + 1):
        if bound(m + 1) < tol and bound(m + 2) < tol:
            return m
    return limit


def _scalar_radius(H: MatTensor):
    # spectral radius of the (1 (x) 1)-part; the formal series needs it below 1
    import numpy as np
    idx = H.indices()
    pos = {n: k for k, n in enumerate(idx)}
    M = np.zeros((len(idx), len(idx)))
    for (i, j), t in H.items():
        M[pos[i], pos[j]] = float(t.coeff((), ()))
    return float(max(abs(np.linalg.eigvals(M)), default=0.0))


def _checked_norm(H: MatTensor, label, strict):
    """Radius-3 norm of ``H``; raises unless ``strict`` is off and the formal series still converges."""
    h = mat_norm(H, JACOBIAN_RADIUS, 1)
    if h < 1:
        return h
    msg = f"||{label}||_(3,1,1) = {h:.6g} >= 1"
    if strict or _scalar_radius(H) >= 1:
        raise NormTooLarge(msg)
    warnings.warn(msg + "; summing the series degree by degree", RuntimeWarning, stacklevel=3)
    return h


def _analytic(H, kind, m_max, tensor_cap, h, indices=None):
    if h < 1:
        return mat_analytic(H, kind, m_max, JACOBIAN_RADIUS, degree_cap=tensor_cap, indices=indices)
    return mat_analytic(H, kind, m_max, None, degree_cap=tensor_cap, indices=indices)


def L_term(g: Series, S=None, m_max=None, degree_cap=None, tensor_cap=None, tau=SEMICIRCULAR,
           strict=True):
    """``L(Sigma g)`` with its geometric tail bound.

    Returns ``(L, tail_bound)``; ``tail_bound`` bounds the radius-3 norm of the
    dropped powers ``m > m_max`` of the log series (partial traces do not
    increase norms at radii >= 2).  ``S`` is accepted for symmetry with the
    other terms of F; the series itself does not depend on it.

    With ``strict=False`` a radius-3 norm above 1 only warns: the truncated
    series is then summed as a formal power series (valid while the scalar
    part has spectral radius below 1) and the tail bound is ``inf``.
    """
    H = jacobian(grad(sigma(_uncapped(g))))
    if not H:
        return Series.zero(degree_cap), 0.0
    h = _checked_norm(H, "J D Sigma g", strict)
    if tensor_cap is None:
        tensor_cap = degree_cap or max(H.entries[k].degree() for k in H.entries)
    if m_max is None:
        m_max = default_m_max(H, tensor_cap)
    logH, tail = _analytic(H, "log1p", m_max, tensor_cap, h)
    L = partial_trace_both(mat_trace(logH), tau)
    L = Series(L.terms, degree_cap)
    return L, 2 * tail


def _images(W: Series, g: Series, f: SeriesSeq):
    indices = set(W.variables()) | set(g.variables()) | set(f.indices())
    return sorted(indices)


def F_map(W: Series, g: Series, degree_cap=8, m_max=None, tensor_cap=None, tau=SEMICIRCULAR,
          return_parts=False, strict=True):
    """``F(g) = -W(X + D Sigma g) - 1/2 (D Sigma g)#(D Sigma g) + L(Sigma g)``."""
    W, g = _uncapped(W), _uncapped(g)
    f = grad(sigma(g))
    idx = _images(W, g, f)
    Y = SeriesSeq({n: add(Series.var(n), f[n]) for n in idx})
    w_part = -substitute(W, Y, degree_cap) if W else Series.zero(degree_cap)
    dot_part = scale(seq_dot(f, f, degree_cap), Fraction(-1, 2))
    l_part, tail = L_term(g, None, m_max, degree_cap, tensor_cap, tau, strict)
    out = add(add(w_part, dot_part), l_part).with_cap(degree_cap)
    if return_parts:
        return out, {"W": w_part, "dot": dot_part, "L": l_part, "L_tail": tail}
    return out


def _is_float(*series):
    return any(isinstance(c, float) for s in series for c in s.terms.values())


@dataclass
class TransportProblem:
    W: Series
    R: float = 6.0
    S: float = 5.0
    degree_cap: int = 8
    m_max: int | None = None
    tol: float = 1e-12
    max_iter: int = 200
    tensor_cap: int | None = None
    mode: str = "float"
    # False: sum log series formally when the radius-3 Jacobian norm exceeds 1
    strict: bool = False
    # variables of the family (default: those occurring in W)
    variables: tuple | None = None

    def hypotheses(self):
        """Sufficient conditions for the transport to exist, evaluated."""
        W = self.W
        bound = math.e * math.log((self.R + 1) / (self.S + 1)) / 2 if self.R > self.S else -math.inf
        w_norm = norm_R(W, self.R + 1)
        return {
            "radii_ok": bool(self.R > self.S > 4),
            "self_adjoint": bool(max_abs_coeff(add(star(W), W, -1)) == 0),
            "no_constant": W.constant() == 0,
            "W_norm_R_plus_1": w_norm,
            "W_norm_bound": bound,
            "small_potential": bool(w_norm <= bound),
        }


@dataclass
class TransportSolution:
    problem: TransportProblem
    g_hat: Series
    g: Series
    f: SeriesSeq
    Y: SeriesSeq
    diagnostics: dict = field(default_factory=dict)


def solve(problem: TransportProblem) -> TransportSolution:
    """Iterate ``g_(k+1) = F(g_k)`` from ``g_0 = -W`` until the step is below ``tol``."""
    W = problem.W.to_float() if problem.mode == "float" else problem.W
    hyp = problem.hypotheses()
    failed = [k for k in ("radii_ok", "self_adjoint", "no_constant", "small_potential") if not hyp[k]]
    if failed:
        warnings.warn("transport hypotheses not met: " + ", ".join(failed) +
                      "; iterating anyway", RuntimeWarning, stacklevel=2)
    S = problem.S
    cap = problem.degree_cap
    g = Series(scale(W, -1).terms, cap)
    steps, ratios, l_tails = [], [], []
    converged = not W
    it = 0
    while not converged and it < problem.max_iter:
        it += 1
        nxt, parts = F_map(W, g, cap, problem.m_max, problem.tensor_cap, return_parts=True,
                           strict=problem.strict)
        step = norm_R(add(nxt, g, -1), S)
        l_tails.append(parts["L_tail"])
        if steps and steps[-1] > 0:
            ratios.append(step / steps[-1])
        steps.append(step)
        g = nxt
        if step < problem.tol:
            converged = True
    if not converged:
        raise NoConvergence(f"no convergence after {it} iterations (last step {steps[-1]:.3e})",
                            ratios[-1] if ratios else None)
    g_sym = cyc_sym(sigma(g))
    f = grad(g_sym)
    idx = sorted(set(W.variables()) | set(f.indices()) | set(problem.variables or ()))
    Y = SeriesSeq({n: add(Series.var(n), f[n]) for n in idx})
    noise = 1e3 * problem.tol
    meaningful = [r for r, s in zip(ratios, steps[:-1]) if s > noise]
    diagnostics = {
        "iterations": it,
        "steps": steps,
        "ratios": ratios,
        "contraction_ratio": max(meaningful) if meaningful else 0.0,
        "fixed_point_residual": steps[-1] if steps else 0.0,
        "L_tail_bound": max(l_tails) if l_tails else 0.0,
        "g_hat_norm_S": norm_R(g, S),
        "W_norm_S": norm_R(W, S),
        "Y_minus_X_norm_S_inf": f.norm_inf(S),
        "self_adjoint_defect": max_abs_coeff(add(star(g), g, -1)),
        "hypotheses": hyp,
    }
    return TransportSolution(problem, g, g_sym, f, Y, diagnostics)


def sd_residual(solution: TransportSolution, check_degree=3, tensor_cap=None, m_max=None,
                radius=1.0, strict=True):
    """Schwinger-Dyson residual of the transported law, in X coordinates.

    Compares ``J*((1 + J f)^(-1))`` (conjugate variables ``X``, semicircular
    trace) with ``X + f + (D W)(X + f)`` on terms of degree ``<= check_degree``.
    Returns ``(residual, tail_bound)``: the sum over rows of the radius-``radius``
    norm of the difference, and the geometric tail of the truncated Neumann
    series at radius 3 (``inf`` when ``strict=False`` let a norm above 1 through).
    """
    W = solution.problem.W
    f = solution.f
    if solution.problem.mode == "float":
        W = W.to_float()
    J = jacobian(f)
    idx = sorted(set(W.variables()) | set(f.indices()))
    if tensor_cap is None:
        tensor_cap = solution.problem.degree_cap + 2
    if J:
        h = _checked_norm(J, "J f", strict)
        if m_max is None:
            m_max = default_m_max(J, tensor_cap)
        inv, tail = _analytic(J, "neumann_inv", m_max, tensor_cap, h, indices=idx)
    else:
        inv, tail = MatTensor.identity(idx), 0.0
    X = _identity(idx)
    lhs = jstar(inv, X, SEMICIRCULAR, degree_cap=check_degree)
    Y = SeriesSeq({n: add(Series.var(n), f[n]) for n in idx})
    rhs = {}
    for n in idx:
        dW = grad(W)[n]
        val = add(Series.var(n), f[n])
        if dW:
            val = add(val, substitute(dW, Y, check_degree))
        rhs[n] = val.restrict(check_degree)
    total = 0.0
    for n in idx:
        diff = add(lhs[n], rhs[n], -1).restrict(check_degree)
        total += norm_R(diff, radius)
    return total, float(tail)


def invert_certified(f: SeriesSeq, R, S):
    """Whether the inverse-function precondition ``||f||_(R,inf) < C(R, S)`` holds."""
    return f.norm_inf(R) < inverse_C(R, S)


def invert(f: SeriesSeq, R, S, degree_cap, tol=1e-15, max_iter=200, strict=True):
    """Compositional inverse ``H`` of ``X + f``: ``H(X + f) = X`` up to ``degree_cap``.

    Iterates ``H_k = X - f(H_(k-1))`` from ``H_0 = X``.  The analytic
    precondition ``||f||_(R,inf) < inverse_C(R, S)`` guarantees convergence in
    ``P^(S + C)``; with ``strict=False`` a failed precondition only warns,
    since the iteration also converges degree by degree whenever ``f`` has no
    constant term and a small linear part.
    """
    if not invert_certified(f, R, S):
        msg = (f"||f||_(R,inf) = {f.norm_inf(R):.6g} is not below "
               f"inverse_C(R, S) = {inverse_C(R, S):.6g}")
        if strict:
            raise PreconditionFailed(msg)
        warnings.warn(msg + "; iterating anyway", RuntimeWarning, stacklevel=2)
    idx = f.indices()
    X = _identity(idx, degree_cap)
    H = X
    for _ in range(max_iter):
        nxt = SeriesSeq({n: add(Series.var(n), -substitute(f[n], H, degree_cap))
                         .with_cap(degree_cap) for n in idx})
        change = (nxt - H).norm_inf(1.0)
        H = nxt
        if change < tol:
            return H
    raise NoConvergence(f"inverse iteration did not settle in {max_iter} steps", None)


def composition_residual(H: SeriesSeq, Y: SeriesSeq, max_degree, radius=1.0):
    """``||H(Y) - X||_(radius, inf)`` restricted to degree ``<= max_degree``."""
    worst = 0.0
    for n, p in H:
        val = add(substitute(p, Y, max_degree), Series.var(n), -1).restrict(max_degree)
        worst = max(worst, norm_R(val, radius))
    return worst


def monotonicity_certificate(solution_or_g, tol=None):
    """Sufficient condition for ``1 + J D g > 0``: norm below 1 plus symmetry.

    Returns a dict with ``norm`` (``||J D g||_(3,1,1)``), the three symmetry
    defects and ``passed``.  Symmetry defects must vanish (exactly for exact
    scalars, below ``tol`` for floats).
    """
    g = solution_or_g.g if isinstance(solution_or_g, TransportSolution) else solution_or_g
    J = jacobian(grad(g))
    norm = mat_norm(J, JACOBIAN_RADIUS, 1)
    defects = {
        "diamond": mat_max_abs(mat_diamond(J) - J),
        "star": mat_max_abs(mat_star(J) - J),
        "dagger": mat_max_abs(mat_dagger(J) - J),
    }
    if tol is None:
        tol = 1e-13 * max(1.0, mat_max_abs(J)) if _is_float(g) else 0
    passed = norm < 1 and all(d <= tol for d in defects.values())
    return {"norm": norm, "defects": defects, "tolerance": tol, "passed": bool(passed),
            "reference_bound": 1 / (12 * math.e * math.log(4 / 3))}


def gibbs_uniqueness_bound(S_x, R):
    """``e (S+1)(S+2) log(R/(S+2))`` with ``S = S_x``: below it the free Gibbs state is unique."""
    if not R > S_x + 2:
        raise DomainError(f"need R > S_x + 2, got R={R}, S_x={S_x}")
    return math.e * (S_x + 1) * (S_x + 2) * math.log(R / (S_x + 2))


def L_lipschitz_bound(g_norm, h_norm, diff_norm, R):
    """Local Lipschitz bound for ``L(Sigma .)`` at radius ``R``."""
    a = 1 - 2 * g_norm / R ** 2
    b = 1 - 2 * h_norm / R ** 2
    return diff_norm * (2 / R ** 2) * (1 / (a * b) + 1)


def F_lipschitz_constant(W_norm_R_eps, g_norm, h_norm, R, S, eps):
    """Lipschitz factor of F on the ball, for ``R > S > 4``, ``eps < S/2``."""
    a = 1 - 2 * g_norm / S ** 2
    b = 1 - 2 * h_norm / S ** 2
    return (W_norm_R_eps / (S * (S + eps) * math.e * math.log((R + eps) / (S + eps)))
            + (g_norm + h_norm) / (2 * S ** 2) + (2 / S ** 2) * (1 / (a * b) + 1))


# identities of the transport derivation (exact scalars)

def _mat_power(H, k, indices):
    out = MatTensor.identity(indices)
    for _ in range(k):
        out = mat_mul(out, H)
    return out


def _seq_max_abs(F: SeriesSeq):
    return max((max_abs_coeff(p) for _, p in F), default=0)


def identity_suite(g: Series):
    """Evaluate the polynomial identities behind the fixed-point equation.

    With ``f = D g``, ``J = J f`` and ``X`` the conjugate variables of the
    semicircular family:

    * ``trick_m`` for m in (-1, 0, 1):
      ``J # J*(J^(m+1)) - J*(J^(m+2)) = D (1(x)tau + tau(x)1) Tr[J^(m+2)] / (m+2)``
    * ``K_two_forms``: ``-J*(J) - f = D{(1(x)tau + tau(x)1) Tr[J] - N g}``
    * ``dot_gradient``: ``D[1/2 D g # D g] = (J D g) # D g``

    Returns a dict of maximal coefficient deviations (0 means exact).
    """
    tau = SEMICIRCULAR
    f = grad(g)
    J = jacobian(f)
    idx = sorted(set(g.variables()))
    X = _identity(idx)

    def grad_of(P):
        return SeriesSeq({n: grad(P)[n] for n in idx}, "1")

    report = {}
    for m in (-1, 0, 1):
        Jm1 = _mat_power(J, m + 1, idx)
        Jm2 = _mat_power(J, m + 2, idx)
        lhs = mat_apply(J, jstar(Jm1, X, tau)) - jstar(Jm2, X, tau)
        trace = partial_trace_both(mat_trace(Jm2), tau)
        rhs = grad_of(trace) * Fraction(1, m + 2)
        report[f"trick_m={m}"] = _seq_max_abs(lhs - rhs)
    K = -jstar(J, X, tau) - f
    inner = add(partial_trace_both(mat_trace(J), tau), number_op(g), -1)
    report["K_two_forms"] = _seq_max_abs(K - grad_of(inner))
    half_dot = scale(seq_dot(f, f), Fraction(1, 2))
    report["dot_gradient"] = _seq_max_abs(grad_of(half_dot) - mat_apply(J, f))
    return report
