from fractions import Fraction

from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from freetransport.ncpoly import Series, SeriesSeq
from freetransport.nctensor import MatTensor, TensorElem

settings.register_profile(
    "default", max_examples=60, deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


def words(n_vars=3, max_len=4, min_len=0):
    return st.lists(st.integers(1, n_vars), min_size=min_len, max_size=max_len).map(tuple)


exact_coeffs = st.fractions(min_value=-3, max_value=3, max_denominator=6).filter(lambda c: c != 0)
float_coeffs = st.floats(min_value=-1, max_value=1, allow_nan=False).filter(lambda c: abs(c) > 1e-6)


@st.composite
def series(draw, n_vars=3, max_len=4, max_terms=5, coeffs=exact_coeffs, min_len=0):
    terms = draw(st.dictionaries(words(n_vars, max_len, min_len), coeffs, max_size=max_terms))
    return Series(terms)


@st.composite
def tensors(draw, n_vars=2, max_len=2, max_terms=4, coeffs=exact_coeffs):
    keys = st.tuples(words(n_vars, max_len), words(n_vars, max_len))
    return TensorElem(draw(st.dictionaries(keys, coeffs, max_size=max_terms)))


@st.composite
def matrices(draw, size=2, max_terms=2, coeffs=exact_coeffs):
    entries = {}
    for i in range(1, size + 1):
        for j in range(1, size + 1):
            t = draw(tensors(n_vars=size, max_len=1, max_terms=max_terms, coeffs=coeffs))
            if t:
                entries[(i, j)] = t
    return MatTensor(entries)


def self_adjoint(P: Series) -> Series:
    from freetransport.ncpoly import add, scale, star
    return scale(add(P, star(P)), Fraction(1, 2))


def seq(entries, kind="inf"):
    return SeriesSeq(entries, kind)


# one summary line per acceptance criterion, printed after the run

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
