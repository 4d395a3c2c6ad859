"""Free monotone transport in truncated noncommutative power series.

Submodules: ``ncpoly`` (series), ``nctensor`` (tensor series and matrices of
them), ``freecalc`` (difference quotients and adjoints), ``semitrace`` and
``fock`` (trace oracles), ``transport`` (the fixed-point solver) and
``mixedq`` (mixed q-Gaussian conjugate variables and the isomorphism check).
"""
from .errors import (
    BasisTooLarge,
    ConfigError,
    DegreeExceedsDepth,
    DomainError,
    FreeTransportError,
    MissingVariable,
    NoConvergence,
    NormTooLarge,
    PreconditionFailed,
    SingularGram,
    WindowTooSmall,
)
from .ncpoly import Series, SeriesSeq
from .nctensor import MatTensor, TensorElem
from .fock import StructureArray, build_rep
from .semitrace import SEMICIRCULAR, tau_sc
from .transport import TransportProblem, TransportSolution, solve
from .mixedq import check_iso

__version__ = "0.1.0"
