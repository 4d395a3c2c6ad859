"""Mixed q-Gaussian data as noncommutative series.

For a structure array ``Q`` this module builds the tensor series ``Xi_n(T)``
whose evaluation at the q-Gaussian generators is the diagonal operator
``Xi_n = sum_[j] q_n(j) p_[j]``, inverts it, forms the conjugate variables
``xi_n(T)`` and the potential ``W`` with ``D_n W = xi_n - T_n``, and
evaluates the smallness criterion under which the generated algebra is a
free group factor.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, PreconditionFailed, WindowTooSmall
from .fock import FockRep, QTrace, StructureArray, classes, gram_inv, wick
from .freecalc import cyc_diff, dstar
from .ncpoly import Series, add, max_abs_coeff, norm_R, sigma, star
from .nctensor import (
    MatTensor,
    TensorElem,
    invol_dagger,
    invol_star,
    mat_analytic,
    tensor_add,
    tnorm_upper,
)

# largest variable window tried when choosing one automatically
MAX_WINDOW = 12


def _rho(Q: StructureArray, R):
    qi = float(Q.q_inf)
    if qi >= 0.5:
        return math.inf
    return (R * (1 - qi) + 1) / (1 - 2 * qi)


def pi_bound(Q: StructureArray, n: int, R) -> float:
    """``x^2 / ((1 - 2 q_inf)^2 - x^2)`` with ``x = (R(1 - q_inf) + 1) Q_n(1/2)``.

    Returns ``inf`` when the denominator is not positive.
    """
    qi = float(Q.q_inf)
    Qn = Q.Q_n(n, 0.5)
    if Qn == 0:
        return 0.0
    if Qn == math.inf:
        return math.inf
    x2 = ((R * (1 - qi) + 1) * Qn) ** 2
    den = (1 - 2 * qi) ** 2 - x2
    if den <= 0:
        return math.inf
    return x2 / den


# the tensor series Xi_n(T)

@dataclass
class XiSeries:
    n: int
    value: TensorElem
    d_max: int
    window: int
    degree_tail: float
    window_tail: float

    @property
    def tail_bound(self):
        return self.degree_tail + self.window_tail


def _window_tail(Q, n, R, d_max, window):
    """Norm bound for the classes of length ``<= d_max`` that use an index above ``window``.

    Words with some index beyond the window carry at most
    ``d T Q^(d-1)`` of the total ``sum_k sqrt|q_n(k)|``, with ``T`` the tail of
    ``Q_n(1/2)``; the per-degree estimate then squares it.
    """
    if d_max == 0:
        return 0.0
    T = Q.Q_n_tail(n, 0.5, window)
    if T == 0:
        return 0.0
    rho = _rho(Q, R)
    Qn = Q.Q_n(n, 0.5)
    if math.isinf(rho) or math.isinf(T) or math.isinf(Qn):
        return math.inf
    return sum((rho ** d * d * T * Qn ** (d - 1)) ** 2 for d in range(1, d_max + 1))


def _degree_tail(Q, n, R, d_max):
    x = _rho(Q, R) * Q.Q_n(n, 0.5)
    if x == 0:
        return 0.0
    if not x < 1:
        return math.inf
    return x ** (2 * (d_max + 1)) / (1 - x ** 2)


def _finite_size(Q: StructureArray):
    if Q.kind == "explicit":
        return len(Q.matrix)
    if Q.kind == "constant" and Q.n_vars is not None:
        return Q.n_vars
    return None


def choose_window(Q: StructureArray, n, R, d_max, tol=1e-12, window=None):
    """Variable window for class enumeration, with its dropped-mass bound.

    Finite arrays use all their indices.  Otherwise the smallest window
    (at least ``n``) whose tail is ``<= tol`` is used, or the given one is
    checked.  Raises ``WindowTooSmall`` when the tail stays above ``tol``.
    """
    size = _finite_size(Q)
    if size is not None and window is None:
        return max(size, n), 0.0
    if Q.kind == "constant" and Q.q_value == 0 and window is None:
        return n, 0.0
    candidates = [window] if window is not None else range(n, MAX_WINDOW + 1)
    tail = math.inf
    for N in candidates:
        tail = _window_tail(Q, n, R, d_max, N)
        if tail <= tol:
            return N, tail
    raise WindowTooSmall(f"variable window tail {tail:.3g} exceeds {tol:.3g} for n = {n}")


def xi_series(Q: StructureArray, n: int, d_max: int, R, window=None, tol=1e-12) -> XiSeries:
    """``sum_(d <= d_max) sum_[j] q_n(j) sum_(k, l in [j]) (G_[j]^-1)_(l k) psi_k (x) psi_l^*``.

    ``psi_k`` is the Wick word of ``e_k`` and ``G_[j]`` the Q-Gram matrix of
    the class.  Classes are enumerated over indices ``1..window``.
    """
    N, w_tail = choose_window(Q, n, R, d_max, tol, window)
    terms = {((), ()): 1.0}
    for d in range(1, d_max + 1):
        for cls in classes(range(1, N + 1), d):
            qn = float(Q.q_word(n, cls.key))
            if qn == 0:
                continue
            Ginv = gram_inv(Q, cls)
            psi = [wick(Q, k) for k in cls.members]
            psi_star = [star(p) for p in psi]
            for a, pk in enumerate(psi):
                for b, pl in enumerate(psi_star):
                    c = qn * float(Ginv[b, a])
                    if c == 0:
                        continue
                    for u, x in pk.terms.items():
                        for v, y in pl.terms.items():
                            key = (u, v)
                            terms[key] = terms.get(key, 0.0) + c * float(x) * float(y)
    value = TensorElem(terms)
    return XiSeries(n, value, d_max, N, _degree_tail(Q, n, R, d_max), w_tail)


def tensor_operator(rep: FockRep, eta: TensorElem) -> np.ndarray:
    """Dense matrix of ``eta(X^Q)`` acting as ``v -> sum c <v, b^* Omega>_Q a Omega``."""
    vac = rep.vacuum()
    G = rep.gram.toarray()
    left, right = {}, {}
    out = np.zeros((rep.size, rep.size))
    for (u, v), c in eta.terms.items():
        if u not in left:
            left[u] = rep.apply_word(u, vac)
        rv = tuple(reversed(v))
        if rv not in right:
            right[rv] = rep.apply_word(rv, vac) @ G
        out += float(c) * np.outer(left[u], right[rv])
    return out


def xi_operator_residual(rep: FockRep, xi: XiSeries) -> float:
    """Max entry of ``Xi_n(X^Q) - Xi_n`` on levels ``<= min(d_max, depth)``."""
    from .fock import xi_operator
    top = min(xi.d_max, rep.depth)
    mask = rep.level_mask(top)
    diff = tensor_operator(rep, xi.value) - xi_operator(rep, xi.n).toarray()
    block = diff[np.ix_(mask, mask)]
    return float(np.abs(block).max()) if block.size else 0.0


# conjugate variables

def _scalar_part(eta: TensorElem):
    return eta.terms.get(((), ()), 0)


def xi_inverse(xi: XiSeries, R, tensor_cap=None, m_max=None, strict=True):
    """Neumann inverse of ``Xi_n(T)`` truncated at total degree ``tensor_cap``.

    Returns ``(inverse, tail)``; ``tail`` is the geometric bound at radius
    ``R``.  With ``strict=False`` a norm of ``Xi_n(T) - 1 (x) 1`` above 1
    only warns and the series is summed degree by degree (``tail = inf``).
    """
    if tensor_cap is None:
        tensor_cap = 2 * xi.d_max
    H = tensor_add(xi.value, TensorElem.one(), -1)
    mat = MatTensor({(xi.n, xi.n): H}) if H else MatTensor()
    h = tnorm_upper(H, R)
    if h >= 1:
        msg = f"||Xi_n(T) - 1 (x) 1|| = {h:.6g} >= 1 at R = {R}"
        if strict or abs(_scalar_part(H)) >= 1:
            raise PreconditionFailed(msg)
        warnings.warn(msg + "; summing the series degree by degree", RuntimeWarning, stacklevel=2)
        radius = None
    else:
        radius = R
    if m_max is None:
        from .transport import default_m_max
        m_max = default_m_max(mat, tensor_cap) if mat else 0
    inv, tail = mat_analytic(mat, "neumann_inv", m_max, radius, degree_cap=tensor_cap,
                             indices=[xi.n])
    return inv[(xi.n, xi.n)], tail


def conjugate_series(Q: StructureArray, n: int, R, d_max=2, degree_cap=None, m_max=None,
                     window=None, strict=True, tol=1e-12, xi: XiSeries | None = None) -> Series:
    """``xi_n(T)`` as the deformed adjoint applied to ``(Xi_n(T)^-1)^*``.

    ``P = eta # T_n - m(1 (x) tau (x) 1)(1 (x) d^Q + d^Q (x) 1)(eta)`` with
    ``d^Q = d_n(.) # Xi_n(T)`` and ``tau`` the q-Gaussian trace.  The
    precondition ``pi(Q, n, R) < 1`` is enforced when ``strict``.
    """
    p = pi_bound(Q, n, R)
    if not p < 1:
        msg = f"pi(Q, {n}, R) = {p:.6g} is not below 1"
        if strict:
            raise PreconditionFailed(msg)
        warnings.warn(msg + "; computing the truncated series anyway", RuntimeWarning,
                      stacklevel=2)
    if xi is None:
        xi = xi_series(Q, n, d_max, R, window, tol)
    tensor_cap = 2 * xi.d_max
    if degree_cap is None:
        degree_cap = tensor_cap + 1
    with warnings.catch_warnings():
        if not strict:
            warnings.simplefilter("ignore", RuntimeWarning)
        inv, _ = xi_inverse(xi, R, tensor_cap, m_max, strict)
    eta = invol_star(inv)
    return dstar(eta, n, Series.var(n), QTrace(Q), xi_tensor=xi.value, degree_cap=degree_cap)


def conjugate_bound(Q: StructureArray, n, R, xi_norm):
    """``(R + 2 ||Xi_n(T)|| / (R - sup ||X^Q||)) pi / (1 - pi)`` (``inf`` when vacuous)."""
    p = pi_bound(Q, n, R)
    sup = Q.sup_x_norm_bound()
    if not p < 1 or not R > sup:
        return math.inf
    return (R + 2 * xi_norm / (R - sup)) * p / (1 - p)


def conjugate_defect(Q: StructureArray, n, xi_n: Series, max_degree=3):
    """Largest relative mismatch of ``tau(P^* xi_n) = (tau (x) tau)(d_n P)`` over words ``P``."""
    import itertools
    tau = QTrace(Q)
    size = _finite_size(Q) or n
    worst = 0.0
    for d in range(0, max_degree + 1):
        for w in itertools.product(range(1, size + 1), repeat=d):
            rw = tuple(reversed(w))
            lhs = sum(float(c) * float(tau(rw + u)) for u, c in xi_n.terms.items())
            rhs = sum(float(tau(w[:k])) * float(tau(w[k + 1:]))
                      for k, letter in enumerate(w) if letter == n)
            scale = max(1.0, abs(rhs))
            worst = max(worst, abs(lhs - rhs) / scale)
    return worst


# the potential W

@dataclass
class PotentialReport:
    W: Series
    conjugates: dict
    xi_norms: dict
    tails: dict
    gradient_defect: dict = field(default_factory=dict)
    W_norm_R: float = 0.0
    W_bound: float = math.inf
    self_adjoint_defect: float = 0.0


def build_W(Q: StructureArray, R, d_max=2, degree_cap=None, window=None, strict=True,
            tol=1e-12, return_report=False):
    """``W = Sigma(1/2 sum_n T_n (xi_n - T_n) + (xi_n - T_n) T_n)`` over the retained indices.

    With ``return_report`` also returns a ``PotentialReport`` holding the
    coefficient defect of ``D_n W = xi_n - T_n`` (on degrees below the
    truncation edge), the norm of ``W`` at ``R`` and the closed-form bound.
    """
    size = _finite_size(Q)
    if size is None:
        N, _ = choose_window(Q, 1, R, d_max, tol, window)
    else:
        N = size
    acc = Series.zero()
    conj, xi_norms, tails = {}, {}, {}
    total_pi = 0.0
    win = window if window is not None or size is not None else N
    for n in range(1, N + 1):
        xi = xi_series(Q, n, d_max, R, win, tol)
        xi_norms[n] = tnorm_upper(xi.value, R)
        tails[n] = xi.tail_bound
        p = pi_bound(Q, n, R)
        total_pi += p / (1 - p) if p < 1 else math.inf
        xn = conjugate_series(Q, n, R, d_max, degree_cap, window=xi.window, strict=strict,
                              tol=tol, xi=xi)
        conj[n] = xn
        dev = add(xn, Series.var(n), -1)
        T = Series.var(n)
        acc = add(acc, add(T * dev, dev * T))
    W = sigma(acc * 0.5)
    if not return_report:
        return W
    edge = max((s.degree() for s in conj.values()), default=0)
    defect = {}
    for n, xn in conj.items():
        diff = add(cyc_diff(W, n), add(xn, Series.var(n), -1), -1).restrict(edge - 2)
        defect[n] = max_abs_coeff(diff)
    sup = Q.sup_x_norm_bound()
    bound = (0.5 * R * (R + 4 / (R - sup)) * total_pi) if R > sup else math.inf
    report = PotentialReport(W, conj, xi_norms, tails, defect, norm_R(W, R), bound,
                             max_abs_coeff(add(star(W), W, -1)))
    return W, report


# the isomorphism criterion

@dataclass
class IsoReport:
    R: float
    per_n: list
    sum: float
    tail: float
    threshold: float
    sup_norm_bound: float
    verdict: bool
    margin: float
    margin_ratio: float
    structure: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "R": self.R,
            "per_n": self.per_n,
            "sum": self.sum,
            "tail": self.tail,
            "threshold": self.threshold,
            "sup_norm_bound": self.sup_norm_bound,
            "verdict": "pass" if self.verdict else "fail",
            "margin": self.margin,
            "margin_ratio": self.margin_ratio,
            "structure": self.structure,
        }


def iso_threshold(R, sup_norm):
    """``e log(R/5) / (R (R + 4 / (R - sup_norm)))``; ``-inf`` when ``R <= sup_norm``."""
    if not R > sup_norm:
        return -math.inf
    return math.e * math.log(R / 5) / (R * (R + 4 / (R - sup_norm)))


def _pi_terms(Q: StructureArray, R, cutoff=1e-18, n_limit=10000):
    """``[(n, pi_n)]`` until the remaining sum is negligible, and a bound for the rest."""
    size = _finite_size(Q)
    if size is not None:
        return [(n, pi_bound(Q, n, R)) for n in range(1, size + 1)], 0.0
    if Q.kind == "constant":
        if Q.q_value == 0:
            return [(1, 0.0)], 0.0
        return [(1, math.inf)], math.inf
    out = []
    for n in range(1, n_limit + 1):
        p = pi_bound(Q, n, R)
        out.append((n, p))
        if p == 0:
            return out, 0.0
        if not p < 1:
            return out, math.inf
        if p < cutoff:
            break
    # geometric kind: x_m^2 shrinks by |q| per step, so pi_m / (1 - pi_m) over m > n
    # is at most x_(n+1)^2 / ((1 - |q|)(D - x_(n+1)^2)(1 - pi_(n+1)))
    qi = float(Q.q_inf)
    a = abs(float(Q.q_value))
    x2 = ((R * (1 - qi) + 1) * Q.Q_n(n + 1, 0.5)) ** 2
    den = (1 - 2 * qi) ** 2 - x2
    p_next = pi_bound(Q, n + 1, R)
    tail = x2 / ((1 - a) * den * (1 - p_next))
    return out, tail


def check_iso(Q: StructureArray, R) -> IsoReport:
    """Evaluate the smallness criterion for ``Gamma_Q`` to be a free group factor.

    Passes when every ``pi(Q, n, R) < 1`` and ``sum_n pi / (1 - pi)`` (plus
    its tail bound) is below ``iso_threshold(R, sup_n ||X_n^Q||)``.  A
    vanishing ``pi`` counts as passing (the free case).
    """
    if not R > 5:
        raise DomainError(f"need R > 5, got R={R}")
    terms, tail = _pi_terms(Q, R)
    sup = Q.sup_x_norm_bound()
    thr = iso_threshold(R, sup)
    per_n = []
    total = 0.0
    ok = True
    for n, p in terms:
        per_n.append({"n": n, "pi": p, "margin": 1 - p})
        if p < 1:
            total += p / (1 - p)
        else:
            ok = False
            total = math.inf
    whole = total + tail
    verdict = bool(ok and whole < thr)
    margin = thr - whole if math.isfinite(whole) else -math.inf
    ratio = math.inf if whole == 0 else (thr / whole if math.isfinite(whole) else 0.0)
    return IsoReport(R, per_n, total, tail, thr, sup, verdict, margin, ratio, Q.to_config())


def geometric_crossover(R=6.7, lo=0.0, hi=0.01, rel_tol=1e-10, max_iter=200):
    """Bisection for the largest ``q`` with ``q_ij = q^(i+j-1)`` passing ``check_iso``."""
    if not check_iso(StructureArray.geometric(lo), R).verdict:
        raise DomainError("lower end of the bracket does not pass")
    if check_iso(StructureArray.geometric(hi), R).verdict:
        raise DomainError("upper end of the bracket passes")
    for _ in range(max_iter):
        mid = (lo + hi) / 2
        if check_iso(StructureArray.geometric(mid), R).verdict:
            lo = mid
        else:
            hi = mid
        if hi - lo <= rel_tol * hi:
            break
    return (lo + hi) / 2


def dagger_defect(xi: XiSeries) -> float:
    """Largest coefficient of ``Xi_n(T)^dagger - Xi_n(T)``."""
    d = tensor_add(invol_dagger(xi.value), xi.value, -1)
    return max((abs(float(c)) for c in d.terms.values()), default=0.0)
