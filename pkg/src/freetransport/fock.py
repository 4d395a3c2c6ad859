"""Truncated mixed q-Gaussian Fock space.

Basis vectors ``e_{i1} (x) ... (x) e_{id}`` are stored as word tuples, the
vacuum is ``()``.  Sparse vectors are dicts ``word -> coeff``.  The left
annihilator acts by

    l_n* e_{i1..id} = sum_{k: i_k = n} q_{n i1} ... q_{n i(k-1)} e_{i1..^ik..id},

and the Q-inner product is computed through ``<e_i (x) x, y> = <x, l_i* y>``.
Operator matrices are scipy sparse matrices in the word basis, truncated at
a maximal tensor length ``depth``.
"""
from __future__ import annotations

import itertools
import math
from fractions import Fraction
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .errors import BasisTooLarge, ConfigError, DegreeExceedsDepth, SingularGram
from .ncpoly import Series

KINDS = ("explicit", "constant", "geometric")


class StructureArray:
    """Symmetric array ``(q_ij)`` of deformation parameters, indices from 1.

    ``explicit``: a finite symmetric matrix, zero outside its range.
    ``constant``: ``q_ij = q``, on ``n_vars`` indices if given, else on all of N.
    ``geometric``: ``q_ij = q^(i+j-1)`` on all of N.
    """

    def __init__(self, kind, q=None, matrix=None, n_vars=None):
        if kind not in KINDS:
            raise ConfigError(f"unknown structure-array kind {kind!r}")
        self.kind = kind
        self.n_vars = n_vars
        self._inner_cache = {}
        self._wick_cache = {}
        if kind == "explicit":
            if matrix is None:
                raise ConfigError("explicit structure array needs a matrix")
            m = [list(row) for row in matrix]
            size = len(m)
            if any(len(row) != size for row in m):
                raise ConfigError("structure matrix must be square")
            for i in range(size):
                for j in range(size):
                    if m[i][j] != m[j][i]:
                        raise ConfigError("structure matrix must be symmetric")
                    if not abs(m[i][j]) < 1:
                        raise ConfigError("structure entries must satisfy |q_ij| < 1")
            self.matrix = m
            self.q_value = None
            self.n_vars = size if n_vars is None else n_vars
        else:
            if q is None:
                raise ConfigError(f"{kind} structure array needs q")
            if not abs(q) < 1:
                raise ConfigError("need |q| < 1")
            self.q_value = q
            self.matrix = None

    @classmethod
    def explicit(cls, matrix):
        return cls("explicit", matrix=matrix)

    @classmethod
    def constant(cls, q, n_vars=None):
        return cls("constant", q=q, n_vars=n_vars)

    @classmethod
    def geometric(cls, q):
        return cls("geometric", q=q)

    @classmethod
    def zero(cls, n_vars=1):
        return cls("constant", q=0, n_vars=n_vars)

    @classmethod
    def from_config(cls, cfg: dict):
        kind = cfg.get("kind")
        return cls(kind, q=cfg.get("q"), matrix=cfg.get("matrix"), n_vars=cfg.get("n_vars"))

    def to_config(self):
        out = {"kind": self.kind}
        if self.matrix is not None:
            out["matrix"] = [[float(x) for x in row] for row in self.matrix]
        if self.q_value is not None:
            out["q"] = float(self.q_value)
        if self.n_vars is not None:
            out["n_vars"] = self.n_vars
        return out

    def __repr__(self):
        return f"StructureArray({self.to_config()})"

    def is_finite(self):
        """True when only finitely many indices carry nonzero entries."""
        return self.kind == "explicit" or (self.kind == "constant" and
                                           (self.n_vars is not None or self.q_value == 0))

    def q(self, i, j):
        if i < 1 or j < 1:
            raise IndexError("indices start at 1")
        if self.kind == "explicit":
            if i > len(self.matrix) or j > len(self.matrix):
                return 0
            return self.matrix[i - 1][j - 1]
        if self.kind == "constant":
            if self.n_vars is not None and (i > self.n_vars or j > self.n_vars):
                return 0
            return self.q_value
        return self.q_value ** (i + j - 1)

    @property
    def q_inf(self):
        if self.kind == "explicit":
            return max((abs(x) for row in self.matrix for x in row), default=0)
        return abs(self.q_value)

    def Q_n(self, n, p, window=None):
        """``sum_j |q_nj|^p``, over ``j <= window`` if given, else the full sum."""
        if window is not None:
            return sum(abs(self.q(n, j)) ** p for j in range(1, window + 1))
        if self.kind == "explicit":
            return sum(abs(x) ** p for x in self.matrix[n - 1]) if n <= len(self.matrix) else 0
        if self.kind == "constant":
            if self.q_value == 0:
                return 0
            if self.n_vars is None:
                return math.inf
            return self.n_vars * abs(self.q_value) ** p if n <= self.n_vars else 0
        a = abs(self.q_value) ** p
        return a ** n / (1 - a)

    def Q_n_tail(self, n, p, window):
        """``sum_{j > window} |q_nj|^p``."""
        if self.kind == "geometric":
            a = abs(self.q_value) ** p
            return a ** (n + window) / (1 - a)
        full = self.Q_n(n, p)
        if full == math.inf:
            return math.inf
        return max(full - self.Q_n(n, p, window), 0)

    def q_word(self, n, w):
        """``q_n(w) = prod_k q_{n w_k}`` (1 for the empty word)."""
        out = 1
        for i in w:
            out = out * self.q(n, i)
        return out

    def x_norm_bound(self, n):
        """Upper bound ``2 / sqrt(1 - q_nn)`` for ``q_nn >= 0``, else ``2``, on ``||X_n^Q||``."""
        qnn = float(self.q(n, n))
        return 2.0 / math.sqrt(1 - qnn) if qnn > 0 else 2.0

    def sup_x_norm_bound(self):
        """``2 / sqrt(1 - sup_n q_nn^+)``."""
        if self.kind == "explicit":
            top = max((float(self.matrix[i][i]) for i in range(len(self.matrix))), default=0.0)
        elif self.kind == "constant":
            top = float(self.q_value)
        else:
            q = float(self.q_value)
            # q_nn = q^(2n-1): largest at n = 1 when q > 0, never positive otherwise
            top = q
        top = max(top, 0.0)
        return 2.0 / math.sqrt(1 - top)


# sparse vector actions

def annihilate(Q: StructureArray, n: int, word) -> dict:
    """``l_n*`` applied to one basis word, as a sparse vector."""
    out = {}
    factor = 1
    for k, i in enumerate(word):
        if i == n:
            w = word[:k] + word[k + 1:]
            out[w] = out.get(w, 0) + factor
        factor = factor * Q.q(n, i)
        if factor == 0:
            break
    return {w: c for w, c in out.items() if c != 0}


def annihilate_vec(Q, n, vec: dict) -> dict:
    out = {}
    for word, c in vec.items():
        for w, a in annihilate(Q, n, word).items():
            out[w] = out.get(w, 0) + c * a
    return {w: c for w, c in out.items() if c != 0}


def create_left(n, vec: dict) -> dict:
    return {(n,) + w: c for w, c in vec.items()}


def create_right(n, vec: dict) -> dict:
    return {w + (n,): c for w, c in vec.items()}


def q_inner(Q: StructureArray, xi, eta):
    """``<e_xi, e_eta>_Q`` for basis words, by peeling the first letter of ``xi``."""
    xi, eta = tuple(xi), tuple(eta)
    if len(xi) != len(eta):
        return 0
    if not xi:
        return 1
    cache = Q._inner_cache
    key = (xi, eta)
    hit = cache.get(key)
    if hit is not None:
        return hit
    total = 0
    for w, a in annihilate(Q, xi[0], eta).items():
        total += a * q_inner(Q, xi[1:], w)
    cache[key] = total
    return total


def inner_vec(Q, x: dict, y: dict):
    total = 0
    for u, a in x.items():
        for v, b in y.items():
            if len(u) == len(v):
                total += a * b * q_inner(Q, u, v)
    return total


# equivalence classes of words (same multiset of letters)

class EquivClass:
    __slots__ = ("key", "members")

    def __init__(self, word):
        self.key = tuple(sorted(word))
        self.members = list(_distinct_permutations(self.key))

    def __len__(self):
        return len(self.members)

    def __repr__(self):
        return f"EquivClass({self.key})"


def _distinct_permutations(key):
    # lexicographic order; avoids the d! blow-up on repeated letters
    if not key:
        yield ()
        return
    for k, first in enumerate(key):
        if k and key[k - 1] == first:
            continue
        for rest in _distinct_permutations(key[:k] + key[k + 1:]):
            yield (first,) + rest


def classes(indices, d):
    """All classes of words of length ``d`` over ``indices``."""
    return [EquivClass(c) for c in itertools.combinations_with_replacement(sorted(indices), d)]


def gram_class(Q, cls: EquivClass) -> np.ndarray:
    m = cls.members
    G = np.empty((len(m), len(m)))
    for a, u in enumerate(m):
        for b in range(a, len(m)):
            G[a, b] = G[b, a] = float(q_inner(Q, u, m[b]))
    return G


def gram_inv(Q, cls: EquivClass, rcond=1e-12) -> np.ndarray:
    G = gram_class(Q, cls)
    evals = np.linalg.eigvalsh(G)
    if evals[0] <= rcond * max(1.0, evals[-1]):
        raise SingularGram(f"Gram matrix of class {cls.key} is numerically singular "
                           f"(smallest eigenvalue {evals[0]:.3g})")
    return np.linalg.inv(G)


def gram_inverse_bound(Q, d):
    """``((1 - q_inf) / (1 - 2 q_inf))^d``, valid for ``q_inf < 1/2``."""
    qi = float(Q.q_inf)
    if qi >= 0.5:
        return math.inf
    return ((1 - qi) / (1 - 2 * qi)) ** d


# dense-basis representation

class FockRep:
    """Word-basis matrices of ``l_i``, ``l_i*``, ``r_i`` and ``X_i = l_i + l_i*``."""

    def __init__(self, Q, n_vars, depth, basis, index, gram, l, lstar, r):
        self.Q = Q
        self.n_vars = n_vars
        self.depth = depth
        self.basis = basis
        self.index = index
        self.gram = gram
        self.l = l
        self.lstar = lstar
        self.r = r
        self.X = [a + b for a, b in zip(l, lstar)]

    @property
    def size(self):
        return len(self.basis)

    @property
    def max_trace_degree(self):
        # a word of length L returning to the vacuum never climbs above level L/2
        return 2 * self.depth + 1

    def level_mask(self, max_level):
        return np.array([len(w) <= max_level for w in self.basis])

    def vacuum(self):
        v = np.zeros(self.size)
        v[0] = 1.0
        return v

    def vector(self, sparse_vec: dict) -> np.ndarray:
        v = np.zeros(self.size)
        for w, c in sparse_vec.items():
            v[self.index[w]] += float(c)
        return v

    def inner(self, x, y):
        return float(x @ (self.gram @ y))

    def apply_word(self, w, v):
        for i in reversed(w):
            v = self.X[i - 1] @ v
        return v

    def apply_series(self, P: Series, v):
        out = np.zeros_like(v, dtype=float)
        for w, c in P.terms.items():
            out += float(c) * self.apply_word(w, v)
        return out

    def series_matrix(self, P: Series):
        out = sp.csr_matrix((self.size, self.size))
        ident = sp.identity(self.size, format="csr")
        for w, c in P.terms.items():
            m = ident
            for i in w:
                m = m @ self.X[i - 1]
            out = out + float(c) * m
        return out


def _basis(n_vars, depth):
    words = [()]
    for d in range(1, depth + 1):
        words.extend(itertools.product(range(1, n_vars + 1), repeat=d))
    return words


def build_rep(Q: StructureArray, n_vars: int, depth: int, max_basis: int = 20000) -> FockRep:
    size = sum(n_vars ** d for d in range(depth + 1))
    if size > max_basis:
        raise BasisTooLarge(f"basis of size {size} exceeds cap {max_basis}")
    basis = _basis(n_vars, depth)
    index = {w: k for k, w in enumerate(basis)}

    def assemble(triples):
        rows, cols, vals = zip(*triples) if triples else ((), (), ())
        return sp.csr_matrix((np.array(vals, dtype=float), (rows, cols)), shape=(size, size))

    l, lstar, r = [], [], []
    for n in range(1, n_vars + 1):
        lt, at, rt = [], [], []
        for col, w in enumerate(basis):
            if len(w) < depth:
                lt.append((index[(n,) + w], col, 1.0))
                rt.append((index[w + (n,)], col, 1.0))
            for u, c in annihilate(Q, n, w).items():
                at.append((index[u], col, float(c)))
        l.append(assemble(lt))
        lstar.append(assemble(at))
        r.append(assemble(rt))

    gram_triples = []
    for d in range(depth + 1):
        for cls in classes(range(1, n_vars + 1), d):
            G = gram_class(Q, cls)
            ids = [index[m] for m in cls.members]
            for a, ia in enumerate(ids):
                for b, ib in enumerate(ids):
                    gram_triples.append((ia, ib, G[a, b]))
    gram = assemble(gram_triples)
    return FockRep(Q, n_vars, depth, basis, index, gram, l, lstar, r)


def commutation_residual(rep: FockRep) -> float:
    """Max entry of ``l_i* l_j - q_ij l_j l_i* - delta_ij`` on levels below ``depth``."""
    mask = rep.level_mask(rep.depth - 1)
    ident = sp.identity(rep.size, format="csr")
    worst = 0.0
    for i in range(1, rep.n_vars + 1):
        for j in range(1, rep.n_vars + 1):
            M = (rep.lstar[i - 1] @ rep.l[j - 1]
                 - float(rep.Q.q(i, j)) * (rep.l[j - 1] @ rep.lstar[i - 1]))
            if i == j:
                M = M - ident
            block = M[:, mask]
            if block.nnz:
                worst = max(worst, float(abs(block).max()))
    return worst


def adjoint_residual(rep: FockRep) -> float:
    """Max entry of ``G l_i - (l_i*)^T G`` on levels below ``depth``."""
    mask = rep.level_mask(rep.depth - 1)
    worst = 0.0
    for i in range(rep.n_vars):
        M = (rep.l[i].T @ rep.gram - rep.gram @ rep.lstar[i])[mask][:, mask]
        if M.nnz:
            worst = max(worst, float(abs(M).max()))
    return worst


def trace_Q(rep: FockRep, w) -> float:
    """``<X_w Omega, Omega>_Q``."""
    w = tuple(w)
    if len(w) > rep.max_trace_degree:
        raise DegreeExceedsDepth(f"word of length {len(w)} needs depth >= {(len(w) + 1) // 2}")
    return float(rep.apply_word(w, rep.vacuum())[0])


class QTrace:
    """Sparse trace oracle ``w -> <X_w Omega, Omega>_Q``, exact at any degree.

    Propagates ``X_w Omega`` as a sparse vector and drops components that
    can no longer return to the vacuum.  Works with exact scalars when the
    structure array holds exact entries.
    """

    def __init__(self, Q: StructureArray):
        self.Q = Q
        self.sup_norm = Q.sup_x_norm_bound()
        self._cached = lru_cache(maxsize=None)(self._compute)

    def __call__(self, w):
        return self._cached(tuple(w))

    def _compute(self, w):
        if len(w) % 2:
            return 0
        vec = {(): 1}
        for k in range(len(w) - 1, -1, -1):
            n = w[k]
            new = {}
            for word, c in vec.items():
                if len(word) + 1 <= k:
                    key = (n,) + word
                    new[key] = new.get(key, 0) + c
                for u, a in annihilate(self.Q, n, word).items():
                    if len(u) <= k:
                        new[u] = new.get(u, 0) + c * a
            vec = {u: c for u, c in new.items() if c != 0}
            if not vec:
                return 0
        return vec.get((), 0)


# Wick words

def wick(Q: StructureArray, word) -> Series:
    """The series ``W`` with ``W(X^Q) Omega = e_word``.

    Built from ``W(e_i (x) x) = T_i W(x) - W(l_i* x)`` and ``W(Omega) = 1``.
    """
    return _wick(Q, tuple(word))


def _wick(Q, word):
    cache = Q._wick_cache
    hit = cache.get(word)
    if hit is not None:
        return hit
    if not word:
        out = Series.const(1)
    else:
        i, rest = word[0], word[1:]
        acc = {(i,) + w: c for w, c in _wick(Q, rest).terms.items()}
        for u, a in annihilate(Q, i, rest).items():
            for w, c in _wick(Q, u).terms.items():
                acc[w] = acc.get(w, 0) - a * c
        out = Series(acc)
    cache[word] = out
    return out


# the operators Xi_n

def xi_operator(rep: FockRep, n: int):
    """Diagonal matrix with ``q_n(w)`` on each basis word ``w``."""
    vals = np.array([float(rep.Q.q_word(n, w)) for w in rep.basis])
    return sp.diags(vals, format="csr")


def xi_hs_norm(rep: FockRep, n: int) -> float:
    """Hilbert-Schmidt norm of the truncated ``Xi_n``.

    ``Xi_n`` is Q-self-adjoint (it is constant on mutually orthogonal
    classes), so its squared HS norm is the trace of its square.
    """
    vals = np.array([float(rep.Q.q_word(n, w)) for w in rep.basis])
    return float(math.sqrt(np.sum(vals ** 2)))


def xi_commutator_residual(rep: FockRep) -> float:
    """Max entry of ``[X_i, r_j] - delta_ij Xi_j`` on levels below ``depth``."""
    mask = rep.level_mask(rep.depth - 1)
    worst = 0.0
    for i in range(1, rep.n_vars + 1):
        for j in range(1, rep.n_vars + 1):
            M = rep.X[i - 1] @ rep.r[j - 1] - rep.r[j - 1] @ rep.X[i - 1]
            if i == j:
                M = M - xi_operator(rep, j)
            block = M[:, mask]
            if block.nnz:
                worst = max(worst, float(abs(block).max()))
    return worst


def exact_q(value):
    """Convert a float structure parameter to an exact rational (decimal reading)."""
    return Fraction(str(value))
