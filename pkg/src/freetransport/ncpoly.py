"""Sparse noncommutative power series in self-adjoint indeterminates.

A series is a finite map from words (tuples of positive variable indices)
to scalar coefficients.  Coefficients are either exact (``int`` /
``Fraction``) or ``float``; a single computation should stick to one mode.
An optional ``degree_cap`` records the degree up to which a truncated value
is exact, and travels with the value through products.
"""
from __future__ import annotations

import re
from fractions import Fraction
from numbers import Number

Word = tuple

FLOAT_TOL = 1e-12


def min_cap(*caps):
    """Smallest of the given caps, ignoring ``None``."""
    vals = [c for c in caps if c is not None]
    return min(vals) if vals else None


def to_scalar(value, mode="exact"):
    """Coerce ``value`` (number or string) to the scalar type of ``mode``."""
    if mode == "float":
        if isinstance(value, str):
            return float(Fraction(value)) if "/" in value else float(value)
        return float(value)
    if mode != "exact":
        raise ValueError(f"unknown scalar mode {mode!r}")
    if isinstance(value, (str, float)):
        v = Fraction(str(value))
    else:
        v = Fraction(value)
    return v.numerator if v.denominator == 1 else v


def format_scalar(c) -> str:
    if isinstance(c, float):
        return repr(c)
    if isinstance(c, Fraction):
        return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"
    return str(c)


def parse_scalar(text: str, mode=None):
    """Parse a coefficient string.  Without a mode, decimals become floats."""
    text = text.strip()
    if mode is None:
        mode = "float" if re.search(r"[.eEn]", text) else "exact"
    return to_scalar(text, mode)


def word_key(w):
    return (len(w), w)


def _by_length(terms):
    groups = {}
    for w, c in terms.items():
        groups.setdefault(len(w), []).append((w, c))
    return sorted(groups.items())


class Series:
    """Finitely supported noncommutative series ``sum c_w X_w``."""

    __slots__ = ("terms", "degree_cap")

    def __init__(self, terms=None, degree_cap=None):
        clean = {}
        if terms:
            for w, c in terms.items():
                w = tuple(int(i) for i in w)
                if any(i < 1 for i in w):
                    raise ValueError(f"variable indices must be >= 1, got {w}")
                if degree_cap is not None and len(w) > degree_cap:
                    continue
                if c != 0:
                    clean[w] = clean.get(w, 0) + c
            clean = {w: c for w, c in clean.items() if c != 0}
        self.terms = clean
        self.degree_cap = degree_cap

    @classmethod
    def _raw(cls, terms, degree_cap=None):
        s = cls.__new__(cls)
        s.terms = terms
        s.degree_cap = degree_cap
        return s

    @classmethod
    def const(cls, c=1, degree_cap=None):
        return cls({(): c}, degree_cap)

    @classmethod
    def var(cls, n, coeff=1, degree_cap=None):
        return cls({(n,): coeff}, degree_cap)

    @classmethod
    def word(cls, w, coeff=1, degree_cap=None):
        return cls({tuple(w): coeff}, degree_cap)

    @classmethod
    def zero(cls, degree_cap=None):
        return cls._raw({}, degree_cap)

    # basic queries
    def __bool__(self):
        return bool(self.terms)

    def __len__(self):
        return len(self.terms)

    def __iter__(self):
        return iter(self.terms.items())

    def coeff(self, w):
        return self.terms.get(tuple(w), 0)

    def degree(self):
        return max((len(w) for w in self.terms), default=-1)

    def min_degree(self):
        return min((len(w) for w in self.terms), default=-1)

    def variables(self):
        return sorted({i for w in self.terms for i in w})

    def constant(self):
        return self.terms.get((), 0)

    def with_cap(self, degree_cap):
        """Truncate to ``degree_cap`` and record it."""
        cap = min_cap(self.degree_cap, degree_cap)
        if cap is None:
            return self
        return Series._raw({w: c for w, c in self.terms.items() if len(w) <= cap}, cap)

    def restrict(self, max_degree):
        """Terms of degree at most ``max_degree`` (cap left unchanged)."""
        return Series._raw({w: c for w, c in self.terms.items() if len(w) <= max_degree},
                           self.degree_cap)

    def homogeneous(self, d):
        return Series._raw({w: c for w, c in self.terms.items() if len(w) == d},
                           self.degree_cap)

    def map_coeffs(self, fn):
        return Series({w: fn(c) for w, c in self.terms.items()}, self.degree_cap)

    def to_float(self):
        return Series._raw({w: float(c) for w, c in self.terms.items()}, self.degree_cap)

    def to_exact(self):
        return Series({w: to_scalar(c) for w, c in self.terms.items()}, self.degree_cap)

    # arithmetic
    def __add__(self, other):
        if isinstance(other, Number):
            other = Series.const(other)
        if not isinstance(other, Series):
            return NotImplemented
        return add(self, other)

    __radd__ = __add__

    def __neg__(self):
        return Series._raw({w: -c for w, c in self.terms.items()}, self.degree_cap)

    def __sub__(self, other):
        if isinstance(other, Number):
            other = Series.const(other)
        if not isinstance(other, Series):
            return NotImplemented
        return add(self, other, -1)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Series):
            return mul(self, other)
        if isinstance(other, Number):
            return scale(self, other)
        return NotImplemented

    def __rmul__(self, other):
        if isinstance(other, Number):
            return scale(self, other)
        return NotImplemented

    def __pow__(self, k):
        out = Series.const(1, self.degree_cap)
        for _ in range(k):
            out = mul(out, self)
        return out

    def __eq__(self, other):
        if isinstance(other, Number):
            other = Series.const(other)
        if not isinstance(other, Series):
            return NotImplemented
        return self.terms == other.terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def __repr__(self):
        return f"Series({to_text(self)!r})"

    def __str__(self):
        return to_text(self)


def add(a: Series, b: Series, sign=1) -> Series:
    out = dict(a.terms)
    for w, c in b.terms.items():
        v = out.get(w, 0) + sign * c
        if v == 0:
            out.pop(w, None)
        else:
            out[w] = v
    cap = min_cap(a.degree_cap, b.degree_cap)
    s = Series._raw(out, None)
    return s.with_cap(cap) if cap is not None else s


def scale(a: Series, c) -> Series:
    if c == 0:
        return Series.zero(a.degree_cap)
    return Series._raw({w: c * v for w, v in a.terms.items()}, a.degree_cap)


def linear_combination(pairs, degree_cap=None) -> Series:
    """``sum c_k P_k`` for an iterable of ``(c, P)``."""
    out = {}
    caps = [degree_cap]
    for c, p in pairs:
        caps.append(p.degree_cap)
        for w, v in p.terms.items():
            out[w] = out.get(w, 0) + c * v
    return Series(out, min_cap(*caps))


def mul(a: Series, b: Series, degree_cap=None) -> Series:
    """Product by word concatenation, truncated at the smallest cap."""
    cap = min_cap(a.degree_cap, b.degree_cap, degree_cap)
    out = {}
    get = out.get
    if cap is None:
        for u, c in a.terms.items():
            for v, d in b.terms.items():
                w = u + v
                out[w] = get(w, 0) + c * d
    else:
        groups = _by_length(b.terms)
        for u, c in a.terms.items():
            room = cap - len(u)
            if room < 0:
                continue
            for length, items in groups:
                if length > room:
                    break
                for v, d in items:
                    w = u + v
                    out[w] = get(w, 0) + c * d
    return Series._raw({w: c for w, c in out.items() if c != 0}, cap)


def star(a: Series) -> Series:
    """Adjoint: reverse every word (real coefficients are their own conjugates)."""
    return Series._raw({w[::-1]: c for w, c in a.terms.items()}, a.degree_cap)


def norm_R(a: Series, R) -> float:
    if R <= 0:
        raise ValueError("radius must be positive")
    return float(sum(abs(c) * R ** len(w) for w, c in a.terms.items()))


def number_op(a: Series) -> Series:
    return Series._raw({w: len(w) * c for w, c in a.terms.items() if w}, a.degree_cap)


def _inv_len(w, c):
    n = len(w)
    if isinstance(c, float):
        return c / n
    return Fraction(c, n) if isinstance(c, int) else c / n


def sigma(a: Series) -> Series:
    """Divide each degree-d part by d; constants are killed."""
    return Series._raw({w: _inv_len(w, c) for w, c in a.terms.items() if w}, a.degree_cap)


def pi_proj(a: Series) -> Series:
    return Series._raw({w: c for w, c in a.terms.items() if w}, a.degree_cap)


def rotations(w):
    """All cyclic rotations of ``w`` (with multiplicity), ``len(w)`` of them."""
    return [w[k:] + w[:k] for k in range(len(w))] if w else [w]


def cyc_sym(a: Series) -> Series:
    """Average over cyclic rotations of each word."""
    out = {}
    for w, c in a.terms.items():
        if not w:
            out[w] = out.get(w, 0) + c
            continue
        share = _inv_len(w, c)
        for r in rotations(w):
            out[r] = out.get(r, 0) + share
    return Series._raw({w: c for w, c in out.items() if c != 0}, a.degree_cap)


class SeriesSeq:
    """Finitely supported sequence ``(P_n)`` of series.

    ``kind`` is ``"inf"`` (sup over entries) or ``"1"`` (sum over entries)
    and selects the default norm.  Zero entries are kept: ``Y_n = 0`` is a
    valid image in a substitution, unlike a missing index.
    """

    __slots__ = ("entries", "kind")

    def __init__(self, entries=None, kind="inf"):
        if kind not in ("inf", "1"):
            raise ValueError("kind must be 'inf' or '1'")
        self.entries = {int(n): p for n, p in (entries or {}).items()}
        self.kind = kind

    @classmethod
    def identity(cls, indices, degree_cap=None, kind="inf"):
        return cls({n: Series.var(n, degree_cap=degree_cap) for n in indices}, kind)

    def __getitem__(self, n):
        return self.entries.get(n, Series.zero())

    def indices(self):
        return sorted(self.entries)

    def __iter__(self):
        return iter(sorted(self.entries.items()))

    def __len__(self):
        return len(self.entries)

    def norm(self, R):
        return self.norm_1(R) if self.kind == "1" else self.norm_inf(R)

    def norm_inf(self, R):
        return max((norm_R(p, R) for p in self.entries.values()), default=0.0)

    def norm_1(self, R):
        return sum((norm_R(p, R) for p in self.entries.values()), 0.0)

    def map(self, fn):
        return SeriesSeq({n: fn(p) for n, p in self.entries.items()}, self.kind)

    def _combine(self, other, sign):
        keys = set(self.entries) | set(other.entries)
        return SeriesSeq({n: add(self[n], other[n], sign) for n in keys}, self.kind)

    def __add__(self, other):
        return self._combine(other, 1)

    def __sub__(self, other):
        return self._combine(other, -1)

    def __neg__(self):
        return self.map(lambda p: -p)

    def __mul__(self, c):
        return self.map(lambda p: scale(p, c))

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, SeriesSeq):
            return NotImplemented
        keys = set(self.entries) | set(other.entries)
        return all(self[n] == other[n] for n in keys)

    def __repr__(self):
        body = ", ".join(f"{n}: {to_text(p)}" for n, p in self)
        return f"SeriesSeq({{{body}}}, kind={self.kind!r})"


def seq_dot(F: SeriesSeq, G: SeriesSeq, degree_cap=None) -> Series:
    """``F # G = sum_n F_n G_n``."""
    out = Series.zero()
    first = True
    for n in sorted(set(F.entries) & set(G.entries)):
        term = mul(F[n], G[n], degree_cap)
        out = term if first else add(out, term)
        first = False
    return out


def substitute(P: Series, Y: SeriesSeq, degree_cap: int) -> Series:
    """Replace each ``X_n`` in ``P`` by ``Y_n`` and expand, truncated at ``degree_cap``."""
    from .errors import MissingVariable

    if degree_cap is None:
        raise ValueError("substitute needs an explicit degree cap")
    missing = [n for n in P.variables() if n not in Y.entries]
    if missing:
        raise MissingVariable(f"no image for variables {missing}")
    cap = min_cap(P.degree_cap, degree_cap)
    one = Series.const(1, cap)
    cache = {(): one}

    def product(w):
        hit = cache.get(w)
        if hit is None:
            hit = mul(Y[w[0]], product(w[1:]), cap)
            cache[w] = hit
        return hit

    out = {}
    for w, c in sorted(P.terms.items(), key=lambda t: word_key(t[0])):
        for v, d in product(w).terms.items():
            out[v] = out.get(v, 0) + c * d
    return Series({v: c for v, c in out.items()}, cap)


def substitute_seq(F: SeriesSeq, Y: SeriesSeq, degree_cap: int) -> SeriesSeq:
    return SeriesSeq({n: substitute(p, Y, degree_cap) for n, p in F}, F.kind)


def max_abs_coeff(a: Series) -> float:
    return float(max((abs(c) for c in a.terms.values()), default=0))


def allclose(a: Series, b: Series, tol=FLOAT_TOL) -> bool:
    return max_abs_coeff(add(a, b, -1)) <= tol


# text and JSON forms

def _word_text(w):
    return ".".join(f"x{i}" for i in w)


def to_text(a: Series) -> str:
    """Canonical text: ``coeff * x1.x2`` terms by degree, then lexicographically."""
    if not a.terms:
        return "0"
    parts = []
    for w in sorted(a.terms, key=word_key):
        c = format_scalar(a.terms[w])
        parts.append(c if not w else f"{c} * {_word_text(w)}")
    return " + ".join(parts)


def from_text(text: str, mode=None) -> Series:
    """Parse the canonical text form (also accepts ``a - b`` and bare words)."""
    text = text.strip()
    if text in ("", "0"):
        return Series.zero()
    # split at top-level + / - that start a new term
    chunks = re.split(r"\s+(?=[+-]\s)", text)
    terms = {}
    for chunk in chunks:
        chunk = chunk.strip()
        sign = 1
        if chunk[:1] in "+-" and chunk[1:2] == " ":
            sign = -1 if chunk[0] == "-" else 1
            chunk = chunk[1:].strip()
        m = re.fullmatch(r"([+-]?[0-9][0-9./eE+-]*)?\s*\*?\s*((?:x\d+)(?:\.x\d+)*)?", chunk)
        if not m or (m.group(1) is None and m.group(2) is None):
            raise ValueError(f"cannot parse series term {chunk!r}")
        coeff = parse_scalar(m.group(1), mode) if m.group(1) else to_scalar(1, mode or "exact")
        word = tuple(int(t[1:]) for t in m.group(2).split(".")) if m.group(2) else ()
        terms[word] = terms.get(word, 0) + sign * coeff
    return Series(terms)


def to_json(a: Series) -> list:
    return [{"word": list(w), "coeff": format_scalar(a.terms[w])}
            for w in sorted(a.terms, key=word_key)]


def from_json(data, mode=None) -> Series:
    terms = {}
    for item in data:
        w = tuple(int(i) for i in item["word"])
        c = item["coeff"]
        c = parse_scalar(c, mode) if isinstance(c, str) else to_scalar(c, mode or (
            "float" if isinstance(c, float) else "exact"))
        terms[w] = terms.get(w, 0) + c
    return Series(terms)


def seq_to_json(F: SeriesSeq) -> dict:
    return {str(n): to_json(p) for n, p in F}


def seq_from_json(data, mode=None, kind="inf") -> SeriesSeq:
    return SeriesSeq({int(n): from_json(v, mode) for n, v in data.items()}, kind)
