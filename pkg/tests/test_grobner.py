import itertools
import random

import pytest
from hypothesis import given, settings, strategies as st

from krullwalk.grobner import (
    GroebnerBasis,
    LaurentQuotient,
    MonomialOrder,
    PolyIdeal,
    UnsupportedCoefficients,
    buchberger,
    eliminate,
    groebner,
    ideal_dimension,
    laurent_contract,
    normal_form,
    saturate,
)
from krullwalk.krull import EMPTY
from krullwalk.ring import Coefficients, LaurentPolynomial, parse_polynomial

from conftest import nonneg_polynomials

QQ = Coefficients.rationals()
F2 = Coefficients.prime_field(2)
F3 = Coefficients.prime_field(3)


def P(text, coeffs=QQ, rank=2):
    return parse_polynomial(text, coeffs, rank)


def ideal(texts, coeffs=QQ, rank=2):
    return PolyIdeal([P(t, coeffs, rank) for t in texts], coeffs, rank)


def same_ideal(a: PolyIdeal, b: PolyIdeal) -> bool:
    ga, gb = buchberger(a), buchberger(b)
    return all(gb.contains(g) for g in ga.basis) and all(ga.contains(g) for g in gb.basis)


class TestBuchberger:
    def test_univariate_gcd(self):
        gb = buchberger(ideal(["X^2 - 1", "X^3 - 1"], rank=1))
        assert gb.basis == [P("X - 1", rank=1)]

    def test_zero_ideal(self):
        assert buchberger(PolyIdeal([], QQ, 2)).basis == []

    def test_unit_over_f2(self):
        gb = buchberger(ideal(["X*Y - 1", "X"], F2))
        assert gb.basis == [P("1", F2)]

    def test_requires_field(self):
        with pytest.raises(UnsupportedCoefficients):
            buchberger(PolyIdeal([P("X", Coefficients.integers())], Coefficients.integers(), 2))

    def test_negative_exponents_rejected(self):
        with pytest.raises(ValueError):
            ideal(["X^-1"])


class TestContractSaturateEliminate:
    def test_contract_shifts(self):
        got = laurent_contract([P("X^-1 - 1", rank=1)])
        assert same_ideal(got, ideal(["X - 1"], rank=1))

    def test_contract_empty(self):
        assert laurent_contract([], QQ, 2).generators == []

    def test_contract_already_saturated(self):
        assert same_ideal(laurent_contract([P("X*Y - 1")]), ideal(["X*Y - 1"]))

    def test_saturate_drops_factor(self):
        assert same_ideal(saturate(ideal(["X*Y"]), P("X")), ideal(["Y"]))

    def test_saturate_by_unit(self):
        I = ideal(["X^2 - Y", "X*Y"])
        assert same_ideal(saturate(I, P("1")), I)

    def test_saturate_to_whole_ring(self):
        assert buchberger(saturate(ideal(["X^2"]), P("X"))).is_unit()

    def test_saturate_zero_rejected(self):
        with pytest.raises(ValueError):
            saturate(ideal(["X"]), P("0"))

    def test_eliminate_to_zero(self):
        assert eliminate(ideal(["X - Y^2"]), [0]).generators == []

    def test_eliminate_substitution(self):
        out = eliminate(ideal(["X - Y^2", "X - 1"]), [0])
        assert same_ideal(out, ideal(["Y^2 - 1"]))

    def test_eliminate_zero_ideal(self):
        assert eliminate(PolyIdeal([], QQ, 3), [0, 1]).generators == []


class TestDimensionAndNormalForm:
    def test_dimensions(self):
        assert ideal_dimension(buchberger(PolyIdeal([], QQ, 2))) == 2
        assert ideal_dimension(buchberger(ideal(["X*Y - 1"]))) == 1
        assert ideal_dimension(buchberger(ideal(["1"]))) == EMPTY

    def test_normal_forms(self):
        gb1 = buchberger(ideal(["X - 1"], rank=1))
        assert normal_form(P("X^2", rank=1), gb1) == P("1", rank=1)
        gb = buchberger(ideal(["X*Y - 1"]))
        assert normal_form(P("X*Y"), gb) == P("1")
        for g in gb.basis:
            assert normal_form(g, gb).is_zero()

    @pytest.mark.parametrize("text,rank", [
        ("X^2 + Y^2 - 1", 2), ("X*Y - Z", 3), ("X^3 - Y^2", 2), ("X + Y + Z + 1", 3)])
    def test_irreducible_principal(self, text, rank):
        gb = buchberger(ideal([text], rank=rank))
        assert ideal_dimension(gb) == rank - 1

    def test_laurent_quotient_canonical(self):
        R = LaurentQuotient([P("Y - X^2", F2)], F2, 2)
        assert R.normal_form(P("Y", F2)) == R.normal_form(P("X^2", F2))
        assert R.normal_form(P("X^-1*Y", F2)) == R.normal_form(P("X", F2))
        assert R.dimension() == 1


def brute_dimension(gb: GroebnerBasis) -> int:
    # largest variable set avoided by every leading monomial, found from scratch
    lms = gb.leading_monomials()
    n = gb.rank
    if any(not any(lm) for lm in lms):
        return EMPTY
    best = 0
    for mask in range(1 << n):
        U = {i for i in range(n) if mask >> i & 1}
        if all(any(lm[i] and i not in U for i in range(n)) for lm in lms):
            best = max(best, len(U))
    return best


def test_dimension_matches_independent_set_search():
    assert ideal_dimension(buchberger(ideal(["X*Y - 1"]))) == brute_dimension(
        buchberger(ideal(["X*Y - 1"])))


@settings(max_examples=60)
@given(st.lists(nonneg_polynomials(F3, 2), min_size=1, max_size=3))
def test_reduced_basis_idempotent(gens):
    gb = buchberger(PolyIdeal(gens, F3, 2))
    again = buchberger(gb.to_ideal())
    assert again.basis == gb.basis
    assert ideal_dimension(gb) == brute_dimension(gb)


@settings(max_examples=40)
@given(st.lists(nonneg_polynomials(F2, 2), min_size=1, max_size=3), st.randoms(use_true_random=False))
def test_membership_soundness(gens, rnd):
    gb = buchberger(PolyIdeal(gens, F2, 2))
    for _ in range(13):
        r = LaurentPolynomial.zero(F2, 2)
        for g in gens:
            c = LaurentPolynomial(
                [((rnd.randint(0, 3), rnd.randint(0, 3)), rnd.randint(0, 1)) for _ in range(3)], F2, 2)
            r = r + c * g
        assert normal_form(r, gb).is_zero()


def test_membership_soundness_bulk():
    # 500 random combinations over a fixed ideal in three variables
    rnd = random.Random(7)
    gens = [P("X^2 - Y*Z", QQ, 3), P("X*Y - Z^2 + 1", QQ, 3)]
    gb = buchberger(PolyIdeal(gens, QQ, 3))
    for _ in range(500):
        r = LaurentPolynomial.zero(QQ, 3)
        for g in gens:
            c = LaurentPolynomial(
                [(tuple(rnd.randint(0, 2) for _ in range(3)), rnd.randint(-3, 3)) for _ in range(2)], QQ, 3)
            r = r + c * g
        assert normal_form(r, gb).is_zero()


@settings(max_examples=40)
@given(st.lists(nonneg_polynomials(F2, 3, degree=2, max_terms=3), min_size=1, max_size=2),
       nonneg_polynomials(F2, 3, degree=2, max_terms=3))
def test_dimension_monotone(gens, extra):
    base = ideal_dimension(buchberger(PolyIdeal(gens, F2, 3)))
    more = ideal_dimension(buchberger(PolyIdeal(gens + [extra], F2, 3)))
    as_int = lambda x: -1 if x == EMPTY else x
    assert as_int(more) <= as_int(base)


@settings(max_examples=25)
@given(st.lists(nonneg_polynomials(F3, 2, degree=2), min_size=1, max_size=2),
       nonneg_polynomials(F3, 2, degree=1, max_terms=2))
def test_saturation_idempotent(gens, f):
    if f.is_zero():
        return
    once = saturate(PolyIdeal(gens, F3, 2), f)
    twice = saturate(once, f)
    assert same_ideal(once, twice)


def test_order_determinism():
    gens = [P("X^2*Y - 1"), P("X*Y^2 - X")]
    for kind in ("grevlex", "lex"):
        a = groebner(gens, QQ, 2, MonomialOrder(kind))
        b = groebner(list(reversed(gens)), QQ, 2, MonomialOrder(kind))
        assert a.basis == b.basis
