"""Free difference quotients, cyclic gradients, Jacobians and their adjoints.

A trace oracle is any callable ``tau(word) -> scalar`` giving a tracial
state on the generated algebra; it may carry a ``sup_norm`` attribute (an
upper bound on the generator norms) used by the bound constants.
"""
from __future__ import annotations

import math

from .errors import DomainError
from .ncpoly import Series, SeriesSeq, min_cap
from .nctensor import (
    MatTensor,
    TensorElem,
    hash_apply,
    invol_diamond,
    mul_map,
)


def diff(P: Series, n: int) -> TensorElem:
    """``d_n(u) = sum_{k: u_k = n} u_<k (x) u_>k``."""
    out = {}
    for w, c in P.terms.items():
        for k, letter in enumerate(w):
            if letter == n:
                key = (w[:k], w[k + 1:])
                out[key] = out.get(key, 0) + c
    cap = None if P.degree_cap is None else P.degree_cap - 1
    return TensorElem({k: c for k, c in out.items() if c != 0}, cap)


def cyc_diff(P: Series, n: int) -> Series:
    """Cyclic derivative ``D_n = m o diamond o d_n``: sum of ``u_>k u_<k``."""
    out = {}
    for w, c in P.terms.items():
        for k, letter in enumerate(w):
            if letter == n:
                key = w[k + 1:] + w[:k]
                out[key] = out.get(key, 0) + c
    cap = None if P.degree_cap is None else P.degree_cap - 1
    return Series({k: c for k, c in out.items() if c != 0}, cap)


def cyc_diff_via_tensor(P: Series, n: int) -> Series:
    return mul_map(invol_diamond(diff(P, n)))


def grad(P: Series, kind="1") -> SeriesSeq:
    """Cyclic gradient ``(D_n P)_n`` over the variables that occur in ``P``."""
    return SeriesSeq({n: cyc_diff(P, n) for n in P.variables()}, kind)


def jacobian(F: SeriesSeq) -> MatTensor:
    """``J F (i, j) = d_j F_i``."""
    entries = {}
    for i, p in F:
        for j in p.variables():
            entries[(i, j)] = diff(p, j)
    return MatTensor(entries)


def dstar(eta: TensorElem, n: int, xi_n: Series, tau, xi_tensor: TensorElem | None = None,
          degree_cap=None) -> Series:
    """Adjoint of the (deformed) difference quotient applied to ``eta``.

    For ``eta = sum c A (x) B`` this is

        eta # xi_n - sum c [ (1 (x) tau)(d A) B + A (tau (x) 1)(d B) ],

    where ``d = d_n`` or, when ``xi_tensor`` is given, ``d = d_n(.) # Xi``.
    """
    # eta's own cap bounds its total degree, not the degree of the output
    cap = degree_cap
    out = dict(hash_apply(TensorElem._raw(eta.terms), Series._raw(xi_n.terms), cap).terms)

    right_cache = {}
    left_cache = {}

    def right_piece(a2):
        # sum over Xi terms c (x) d of tau(d a2) c ; plain case: tau(a2) * 1
        hit = right_cache.get(a2)
        if hit is None:
            if xi_tensor is None:
                t = tau(a2)
                hit = {(): t} if t else {}
            else:
                hit = {}
                for (c, d), x in xi_tensor.terms.items():
                    t = tau(d + a2)
                    if t:
                        hit[c] = hit.get(c, 0) + x * t
            right_cache[a2] = hit
        return hit

    def left_piece(b1):
        # sum over Xi terms c (x) d of tau(b1 c) d ; plain case: tau(b1) * 1
        hit = left_cache.get(b1)
        if hit is None:
            if xi_tensor is None:
                t = tau(b1)
                hit = {(): t} if t else {}
            else:
                hit = {}
                for (c, d), x in xi_tensor.terms.items():
                    t = tau(b1 + c)
                    if t:
                        hit[d] = hit.get(d, 0) + x * t
            left_cache[b1] = hit
        return hit

    get = out.get
    for (A, B), coef in eta.terms.items():
        # (1 (x) tau)(d A) . B : A = a1 X_n a2 -> a1 * piece(a2) * B
        for k, letter in enumerate(A):
            if letter != n:
                continue
            a1, a2 = A[:k], A[k + 1:]
            for mid, t in right_piece(a2).items():
                w = a1 + mid + B
                if cap is not None and len(w) > cap:
                    continue
                out[w] = get(w, 0) - coef * t
        # A . (tau (x) 1)(d B) : B = b1 X_n b2 -> A * piece(b1) * b2
        for k, letter in enumerate(B):
            if letter != n:
                continue
            b1, b2 = B[:k], B[k + 1:]
            for mid, t in left_piece(b1).items():
                w = A + mid + b2
                if cap is not None and len(w) > cap:
                    continue
                out[w] = get(w, 0) - coef * t
    return Series({w: c for w, c in out.items() if c != 0}, cap)


def jstar(H: MatTensor, xi: SeriesSeq, tau, degree_cap=None) -> SeriesSeq:
    """``J*(H)_i = sum_j d_j*(H(i, j))`` with conjugate variables ``xi``."""
    rows = {}
    for (i, j), t in H.items():
        if j not in xi.entries:
            raise KeyError(f"no conjugate variable supplied for column {j}")
        rows.setdefault(i, []).append(dstar(t, j, xi[j], tau, degree_cap=degree_cap))
    out = {}
    for i, parts in rows.items():
        acc = {}
        for s in parts:
            for w, c in s.terms.items():
                acc[w] = acc.get(w, 0) + c
        out[i] = Series(acc, min_cap(degree_cap, *(s.degree_cap for s in parts)))
    return SeriesSeq(out, "inf")


def script_C(R, S) -> float:
    """``sup_{t>0} t S^(t-1) / R^t = 1 / (e S log(R/S))``."""
    if not R > S > 0:
        raise DomainError(f"need R > S > 0, got R={R}, S={S}")
    return 1.0 / (math.e * S * math.log(R / S))


def inverse_C(R, S) -> float:
    """Radius gain constant for the inverse-function iteration.

    Solves ``C / (1 - C * script_C(R, T)) = (R - S) / 4`` with ``T = (R + S) / 2``.
    """
    if not R > S > 0:
        raise DomainError(f"need R > S > 0, got R={R}, S={S}")
    T = (R + S) / 2
    q = (R - S) / 4
    return q / (1 + q * script_C(R, T))
