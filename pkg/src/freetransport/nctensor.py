"""Tensors ``P (x) P^op`` in the monomial-pair basis and matrices over them.

A :class:`TensorElem` maps pairs of words ``(u, v)`` to coefficients and
stands for ``sum c u (x) v``.  The algebra product is

    (a (x) b) # (c (x) d) = ac (x) db,

and a tensor acts on a series by ``(a (x) b) # P = a P b``.  A
:class:`MatTensor` is a finitely supported matrix of tensors with the
product ``[GH](i, j) = sum_k G(i, k) # H(k, j)``.
"""
from __future__ import annotations

import math
from fractions import Fraction
from numbers import Number

from .errors import NormTooLarge
from .ncpoly import Series, SeriesSeq, format_scalar, min_cap, parse_scalar, word_key


def _clean(terms):
    return {k: c for k, c in terms.items() if c != 0}


class TensorElem:
    __slots__ = ("terms", "degree_cap")

    def __init__(self, terms=None, degree_cap=None):
        clean = {}
        for (u, v), c in (terms or {}).items():
            u, v = tuple(u), tuple(v)
            if degree_cap is not None and len(u) + len(v) > degree_cap:
                continue
            clean[(u, v)] = clean.get((u, v), 0) + c
        self.terms = _clean(clean)
        self.degree_cap = degree_cap

    @classmethod
    def _raw(cls, terms, degree_cap=None):
        t = cls.__new__(cls)
        t.terms = terms
        t.degree_cap = degree_cap
        return t

    @classmethod
    def one(cls, c=1, degree_cap=None):
        return cls({((), ()): c}, degree_cap)

    @classmethod
    def zero(cls, degree_cap=None):
        return cls._raw({}, degree_cap)

    @classmethod
    def pure(cls, a: Series, b: Series, degree_cap=None):
        """``a (x) b`` expanded in the monomial-pair basis."""
        out = {}
        for u, c in a.terms.items():
            for v, d in b.terms.items():
                out[(u, v)] = out.get((u, v), 0) + c * d
        return cls(out, min_cap(degree_cap, a.degree_cap, b.degree_cap))

    def __bool__(self):
        return bool(self.terms)

    def __len__(self):
        return len(self.terms)

    def coeff(self, u, v):
        return self.terms.get((tuple(u), tuple(v)), 0)

    def degree(self):
        return max((len(u) + len(v) for u, v in self.terms), default=-1)

    def with_cap(self, degree_cap):
        cap = min_cap(self.degree_cap, degree_cap)
        if cap is None:
            return self
        return TensorElem._raw(
            {k: c for k, c in self.terms.items() if len(k[0]) + len(k[1]) <= cap}, cap)

    def to_float(self):
        return TensorElem._raw({k: float(c) for k, c in self.terms.items()}, self.degree_cap)

    def __add__(self, other):
        if isinstance(other, Number):
            other = TensorElem.one(other)
        return tensor_add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Number):
            other = TensorElem.one(other)
        return tensor_add(self, other, -1)

    def __neg__(self):
        return tensor_scale(self, -1)

    def __mul__(self, c):
        if isinstance(c, Number):
            return tensor_scale(self, c)
        return NotImplemented

    __rmul__ = __mul__

    def __matmul__(self, other):
        return tensor_mul(self, other)

    def __eq__(self, other):
        if isinstance(other, Number):
            other = TensorElem.one(other)
        if not isinstance(other, TensorElem):
            return NotImplemented
        return self.terms == other.terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def __repr__(self):
        if not self.terms:
            return "TensorElem(0)"
        parts = []
        for u, v in sorted(self.terms, key=lambda k: (word_key(k[0]), word_key(k[1]))):
            parts.append(f"{format_scalar(self.terms[(u, v)])}*[{_w(u)}|{_w(v)}]")
        return "TensorElem(" + " + ".join(parts) + ")"


def _w(w):
    return ".".join(f"x{i}" for i in w) or "1"


def tensor_add(a: TensorElem, b: TensorElem, sign=1) -> TensorElem:
    out = dict(a.terms)
    for k, c in b.terms.items():
        v = out.get(k, 0) + sign * c
        if v == 0:
            out.pop(k, None)
        else:
            out[k] = v
    t = TensorElem._raw(out)
    return t.with_cap(min_cap(a.degree_cap, b.degree_cap))


def tensor_scale(a: TensorElem, c) -> TensorElem:
    if c == 0:
        return TensorElem.zero(a.degree_cap)
    return TensorElem._raw({k: c * v for k, v in a.terms.items()}, a.degree_cap)


def tensor_sum(items, degree_cap=None) -> TensorElem:
    out = {}
    caps = [degree_cap]
    for t in items:
        caps.append(t.degree_cap)
        for k, c in t.terms.items():
            out[k] = out.get(k, 0) + c
    return TensorElem(out, min_cap(*caps))


def _by_degree(terms):
    groups = {}
    for (u, v), c in terms.items():
        groups.setdefault(len(u) + len(v), []).append((u, v, c))
    return sorted(groups.items())


def tensor_mul(eta: TensorElem, zeta: TensorElem, degree_cap=None) -> TensorElem:
    """The ``#`` product ``(A (x) B)#(C (x) D) = AC (x) DB``."""
    cap = min_cap(eta.degree_cap, zeta.degree_cap, degree_cap)
    out = {}
    get = out.get
    if cap is None:
        for (a, b), x in eta.terms.items():
            for (c, d), y in zeta.terms.items():
                k = (a + c, d + b)
                out[k] = get(k, 0) + x * y
    else:
        groups = _by_degree(zeta.terms)
        for (a, b), x in eta.terms.items():
            room = cap - len(a) - len(b)
            if room < 0:
                continue
            for deg, items in groups:
                if deg > room:
                    break
                for c, d, y in items:
                    k = (a + c, d + b)
                    out[k] = get(k, 0) + x * y
    return TensorElem._raw(_clean(out), cap)


def hash_apply(eta: TensorElem, P: Series, degree_cap=None) -> Series:
    """``(a (x) b) # P = a P b`` extended linearly."""
    cap = min_cap(eta.degree_cap, P.degree_cap, degree_cap)
    out = {}
    get = out.get
    for (a, b), x in eta.terms.items():
        for w, y in P.terms.items():
            if cap is not None and len(a) + len(w) + len(b) > cap:
                continue
            k = a + w + b
            out[k] = get(k, 0) + x * y
    return Series._raw(_clean(out), cap)


def left_mul(P: Series, eta: TensorElem, degree_cap=None) -> TensorElem:
    """Bimodule action ``P . (a (x) b) = Pa (x) b``."""
    cap = min_cap(eta.degree_cap, P.degree_cap, degree_cap)
    out = {}
    for w, y in P.terms.items():
        for (a, b), x in eta.terms.items():
            if cap is not None and len(w) + len(a) + len(b) > cap:
                continue
            k = (w + a, b)
            out[k] = out.get(k, 0) + x * y
    return TensorElem._raw(_clean(out), cap)


def right_mul(eta: TensorElem, P: Series, degree_cap=None) -> TensorElem:
    """Bimodule action ``(a (x) b) . P = a (x) bP``."""
    cap = min_cap(eta.degree_cap, P.degree_cap, degree_cap)
    out = {}
    for (a, b), x in eta.terms.items():
        for w, y in P.terms.items():
            if cap is not None and len(w) + len(a) + len(b) > cap:
                continue
            k = (a, b + w)
            out[k] = out.get(k, 0) + x * y
    return TensorElem._raw(_clean(out), cap)


def invol_star(eta: TensorElem) -> TensorElem:
    """``(a (x) b)* = a* (x) b*``."""
    return TensorElem._raw({(a[::-1], b[::-1]): c for (a, b), c in eta.terms.items()},
                           eta.degree_cap)


def invol_dagger(eta: TensorElem) -> TensorElem:
    """``(a (x) b)^dagger = b* (x) a*``."""
    return TensorElem._raw({(b[::-1], a[::-1]): c for (a, b), c in eta.terms.items()},
                           eta.degree_cap)


def invol_diamond(eta: TensorElem) -> TensorElem:
    """``(a (x) b)^diamond = b (x) a``."""
    return TensorElem._raw({(b, a): c for (a, b), c in eta.terms.items()}, eta.degree_cap)


def tnorm_upper(eta: TensorElem, R) -> float:
    """Monomial-decomposition upper bound for the projective tensor norm."""
    return float(sum(abs(c) * R ** (len(a) + len(b)) for (a, b), c in eta.terms.items()))


def partial_trace_right(eta: TensorElem, tau) -> Series:
    """``(1 (x) tau)(a (x) b) = tau(b) a``."""
    out = {}
    for (a, b), c in eta.terms.items():
        t = tau(b)
        if t:
            out[a] = out.get(a, 0) + c * t
    return Series._raw(_clean(out), eta.degree_cap)


def partial_trace_left(eta: TensorElem, tau) -> Series:
    """``(tau (x) 1)(a (x) b) = tau(a) b``."""
    out = {}
    for (a, b), c in eta.terms.items():
        t = tau(a)
        if t:
            out[b] = out.get(b, 0) + c * t
    return Series._raw(_clean(out), eta.degree_cap)


def partial_trace_both(eta: TensorElem, tau) -> Series:
    """``(1 (x) tau + tau (x) 1)(eta)``."""
    out = {}
    for (a, b), c in eta.terms.items():
        t = tau(b)
        if t:
            out[a] = out.get(a, 0) + c * t
        t = tau(a)
        if t:
            out[b] = out.get(b, 0) + c * t
    return Series._raw(_clean(out), eta.degree_cap)


def mul_map(eta: TensorElem) -> Series:
    """Multiplication ``a (x) b -> ab``."""
    out = {}
    for (a, b), c in eta.terms.items():
        k = a + b
        out[k] = out.get(k, 0) + c
    return Series._raw(_clean(out), eta.degree_cap)


def tau_tensor(eta: TensorElem, tau):
    """``(tau (x) tau)(eta) = sum c tau(a) tau(b)``."""
    return sum((c * tau(a) * tau(b) for (a, b), c in eta.terms.items()), 0)


class MatTensor:
    """Finitely supported matrix ``(i, j) -> TensorElem`` (indices 1-based)."""

    __slots__ = ("entries",)

    def __init__(self, entries=None):
        self.entries = {(int(i), int(j)): t for (i, j), t in (entries or {}).items() if t}

    @classmethod
    def identity(cls, indices, degree_cap=None):
        return cls({(i, i): TensorElem.one(1, degree_cap) for i in indices})

    def __getitem__(self, key):
        return self.entries.get(key, TensorElem.zero())

    def __bool__(self):
        return bool(self.entries)

    def indices(self):
        return sorted({i for k in self.entries for i in k})

    def rows(self):
        return sorted({i for i, _ in self.entries})

    def items(self):
        return sorted(self.entries.items())

    def map(self, fn):
        return MatTensor({k: fn(t) for k, t in self.entries.items()})

    def __add__(self, other):
        return mat_add(self, other)

    def __sub__(self, other):
        return mat_add(self, other, -1)

    def __neg__(self):
        return self.map(lambda t: tensor_scale(t, -1))

    def __mul__(self, c):
        if isinstance(c, Number):
            return self.map(lambda t: tensor_scale(t, c))
        return NotImplemented

    __rmul__ = __mul__

    def __matmul__(self, other):
        return mat_mul(self, other)

    def __eq__(self, other):
        if not isinstance(other, MatTensor):
            return NotImplemented
        keys = set(self.entries) | set(other.entries)
        return all(self[k] == other[k] for k in keys)

    def __repr__(self):
        return "MatTensor({" + ", ".join(f"{k}: {t!r}" for k, t in self.items()) + "})"


def mat_add(G: MatTensor, H: MatTensor, sign=1) -> MatTensor:
    keys = set(G.entries) | set(H.entries)
    return MatTensor({k: tensor_add(G[k], H[k], sign) for k in keys})


def mat_mul(G: MatTensor, H: MatTensor, degree_cap=None) -> MatTensor:
    by_row = {}
    for (k, j), t in H.entries.items():
        by_row.setdefault(k, []).append((j, t))
    acc = {}
    for (i, k), g in G.entries.items():
        for j, h in by_row.get(k, ()):
            acc.setdefault((i, j), []).append(tensor_mul(g, h, degree_cap))
    return MatTensor({key: tensor_sum(parts) for key, parts in acc.items()})


def mat_norm(H: MatTensor, R, p) -> float:
    """``p = inf``: sup over rows of row sums; ``p = 1``: sum over all entries."""
    if p in (1, "1"):
        return sum((tnorm_upper(t, R) for t in H.entries.values()), 0.0)
    if p in (math.inf, "inf"):
        rows = {}
        for (i, _), t in H.entries.items():
            rows[i] = rows.get(i, 0.0) + tnorm_upper(t, R)
        return max(rows.values(), default=0.0)
    raise ValueError("p must be 1 or inf")


def mat_trace(H: MatTensor) -> TensorElem:
    return tensor_sum(t for (i, j), t in H.entries.items() if i == j)


def mat_star(H: MatTensor) -> MatTensor:
    """``[H*](i, j) = H(j, i)*``."""
    return MatTensor({(j, i): invol_star(t) for (i, j), t in H.entries.items()})


def mat_dagger(H: MatTensor) -> MatTensor:
    """``[H^dagger](i, j) = H(i, j)^dagger`` (no transpose)."""
    return MatTensor({k: invol_dagger(t) for k, t in H.entries.items()})


def mat_diamond(H: MatTensor) -> MatTensor:
    """``[H^diamond](i, j) = H(j, i)^diamond``."""
    return MatTensor({(j, i): invol_diamond(t) for (i, j), t in H.entries.items()})


def mat_entrywise(H: MatTensor, fn) -> MatTensor:
    return MatTensor({k: fn(t) for k, t in H.entries.items()})


def mat_apply(H: MatTensor, P: SeriesSeq, degree_cap=None) -> SeriesSeq:
    """``(H # P)_i = sum_j H(i, j) # P_j``."""
    rows = {}
    for (i, j), t in H.entries.items():
        if j in P.entries:
            rows.setdefault(i, []).append(hash_apply(t, P[j], degree_cap))
    out = {}
    for i, parts in rows.items():
        acc = {}
        caps = []
        for s in parts:
            caps.append(s.degree_cap)
            for w, c in s.terms.items():
                acc[w] = acc.get(w, 0) + c
        out[i] = Series(acc, min_cap(*caps))
    return SeriesSeq(out, P.kind)


def mat_max_abs(H: MatTensor) -> float:
    return float(max((abs(c) for t in H.entries.values() for c in t.terms.values()), default=0))


_KINDS = ("log1p", "neumann_inv", "xi_over_1p", "sq_over_1p")


def mat_analytic(H: MatTensor, kind: str, m_max: int, R, degree_cap=None, indices=None):
    """Truncated power series of an analytic function of ``H``.

    Returns ``(value, tail_bound)`` where ``tail_bound`` bounds the
    ``||.||_{R,1,1}`` norm of the dropped powers ``m > m_max`` by the
    geometric series in ``h = mat_norm(H, R, 1)``.  The identity matrix
    needed by ``neumann_inv`` lives on ``indices`` (default: H's indices).
    ``R=None`` skips the norm check and reports an infinite tail (formal
    summation of the truncated series).
    """
    if kind not in _KINDS:
        raise ValueError(f"kind must be one of {_KINDS}")
    h = 0.0 if R is None else mat_norm(H, R, 1)
    if h >= 1:
        raise NormTooLarge(f"||H||_(R,1,1) = {h:.6g} >= 1 at R = {R}")
    if indices is None:
        indices = H.indices()
    if kind == "log1p":
        coeff = lambda m: (1 if m % 2 else -1) * _recip(m, H)
        first = 1
        tail = h ** (m_max + 1) / ((m_max + 1) * (1 - h))
    elif kind == "neumann_inv":
        coeff = lambda m: 1 if m % 2 == 0 else -1
        first = 0
        tail = h ** (m_max + 1) / (1 - h)
    elif kind == "xi_over_1p":
        coeff = lambda m: 1 if m % 2 else -1
        first = 1
        tail = h ** (m_max + 1) / (1 - h)
    else:
        coeff = lambda m: 1 if m % 2 == 0 else -1
        first = 2
        tail = h ** (max(m_max, 1) + 1) / (1 - h)

    total = MatTensor()
    power = MatTensor.identity(indices, degree_cap)
    for m in range(0, m_max + 1):
        if m > 0:
            power = mat_mul(power, H, degree_cap)
            if not power:
                tail = 0.0
                break
        if m >= first:
            total = mat_add(total, power * coeff(m))
    else:
        if R is None:
            tail = math.inf
    return total, float(tail)


def _recip(m, H):
    is_float = any(isinstance(c, float) for t in H.entries.values() for c in t.terms.values())
    return 1.0 / m if is_float else Fraction(1, m)


def tensor_to_json(eta: TensorElem) -> list:
    keys = sorted(eta.terms, key=lambda k: (word_key(k[0]), word_key(k[1])))
    return [{"left": list(u), "right": list(v), "coeff": format_scalar(eta.terms[(u, v)])}
            for u, v in keys]


def tensor_from_json(data, mode=None) -> TensorElem:
    return TensorElem({(tuple(d["left"]), tuple(d["right"])): parse_scalar(str(d["coeff"]), mode)
                       for d in data})


def mat_to_json(H: MatTensor) -> list:
    return [{"row": i, "col": j, "terms": tensor_to_json(t)} for (i, j), t in H.items()]


def mat_from_json(data, mode=None) -> MatTensor:
    return MatTensor({(d["row"], d["col"]): tensor_from_json(d["terms"], mode) for d in data})
