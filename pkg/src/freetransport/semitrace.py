"""Moments of a free semicircular family with unit variance.

``tau_sc(w)`` counts non-crossing pairings of the positions of ``w`` that
only pair equal letters.  It is evaluated by the Schwinger-Dyson recursion

    tau(X_n u) = sum_{k : u_k = n} tau(u_<k) tau(u_>k),

memoized on words.
"""
from __future__ import annotations

from functools import lru_cache

from .nctensor import TensorElem


@lru_cache(maxsize=None)
def _tau(w: tuple) -> int:
    if not w:
        return 1
    if len(w) % 2:
        return 0
    n, rest = w[0], w[1:]
    total = 0
    # the partner of position 0 must split the rest into two even blocks
    for k in range(0, len(rest), 2):
        if rest[k] == n:
            left = _tau(rest[:k])
            if left:
                total += left * _tau(rest[k + 1:])
    return total


def tau_sc(w) -> int:
    return _tau(tuple(w))


def tau_tensor_sc(eta: TensorElem):
    """``(tau (x) tau)(eta)`` for the semicircular trace."""
    return sum((c * _tau(a) * _tau(b) for (a, b), c in eta.terms.items()), 0)


class SemicircularTrace:
    """Trace oracle for the free semicircular family (all generators have norm 2)."""

    sup_norm = 2.0

    def __call__(self, w):
        return _tau(tuple(w))

    def __repr__(self):
        return "SemicircularTrace()"


SEMICIRCULAR = SemicircularTrace()
