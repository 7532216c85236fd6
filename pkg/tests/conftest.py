import time

import pytest
from hypothesis import HealthCheck, settings, strategies as st

from krullwalk.ring import Coefficients, LaurentPolynomial

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

COEFF_SPECS = [
    Coefficients.rationals(),
    Coefficients.prime_field(2),
    Coefficients.prime_field(5),
    Coefficients.integers_mod(6),
    Coefficients.integers(),
]


def polynomials(coeffs: Coefficients, rank: int, radius: int = 3, max_terms: int = 4):
    exps = st.tuples(*[st.integers(-radius, radius)] * rank)
    vals = st.integers(-4, 4)
    return st.lists(st.tuples(exps, vals), max_size=max_terms).map(
        lambda items: LaurentPolynomial(items, coeffs, rank)
    )


def nonneg_polynomials(coeffs: Coefficients, rank: int, degree: int = 3, max_terms: int = 3):
    exps = st.tuples(*[st.integers(0, degree)] * rank)
    return st.lists(st.tuples(exps, st.integers(-3, 3)), min_size=1, max_size=max_terms).map(
        lambda items: LaurentPolynomial(items, coeffs, rank)
    )


@pytest.fixture
def QQ():
    return Coefficients.rationals()


@pytest.fixture
def F2():
    return Coefficients.prime_field(2)


# -- acceptance reporting ---------------------------------------------------

ACCEPTANCE: dict[int, tuple[bool, str, float, str]] = {}


class Criterion:
    """Record the outcome of one acceptance criterion; used as a context manager."""

    def __init__(self, number: int, title: str):
        self.number, self.title, self.detail = number, title, ""

    def __enter__(self):
        self._t0 = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        ok = exc_type is None
        detail = self.detail
        if not ok and exc is not None:
            detail = (detail + "; " if detail else "") + f"{exc_type.__name__}: {str(exc).splitlines()[0] if str(exc) else ''}"
        ACCEPTANCE[self.number] = (ok, self.title, time.perf_counter() - self._t0, detail)
        return False


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        ok, title, elapsed, detail = ACCEPTANCE[number]
        status = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"criterion {number}: {status}  {title} [{elapsed:.1f} s] {detail}")
