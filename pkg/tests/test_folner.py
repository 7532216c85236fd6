import json
import math
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from krullwalk.folner import (
    BudgetExceeded,
    DegenerateInput,
    ExplicitSet,
    FolnerCouple,
    ModuleSpan,
    ProjectionMismatch,
    SplitGroup,
    SplitSet,
    TrivialGroup,
    ball,
    build_ring_couple,
    couple_from_json,
    couple_to_json,
    fit_growth,
    make_ring,
    n_boundary,
    noether_size_count,
    parse_size_function,
    product_couple,
    quotient_descent,
    verify_couple,
)
from krullwalk.groups import FreeAbelian
from krullwalk.ring import Coefficients, parse_polynomial

F2 = Coefficients.prime_field(2)
F3 = Coefficients.prime_field(3)

LAMP_RING = make_ring([], F2, 1)
PARABOLA = make_ring(["Y - X^2"], F2, 2)
PLANE = make_ring([], F2, 2)
FIELD4 = make_ring(["X^2 + X + 1"], F2, 1)  # F_4 with X acting as a cube root of unity


def lamplighter_V(m):
    return 2 ** (4 * m + 1) * (4 * m + 1)


class TestBuild:
    def test_counts_m1(self):
        c = build_ring_couple(LAMP_RING, 1)
        assert c.omega.size == 160 and c.omega_prime.size == 96
        assert c.c0 == Fraction(3, 5)

    @pytest.mark.parametrize("m", range(0, 7))
    def test_box_ratio(self, m):
        assert build_ring_couple(LAMP_RING, m).c0 == Fraction(2 * m + 1, 4 * m + 1)

    @pytest.mark.parametrize("m", [1, 2])
    def test_box_ratio_rank_two(self, m):
        assert build_ring_couple(PARABOLA, m).c0 == Fraction((2 * m + 1) ** 2, (4 * m + 1) ** 2)

    def test_residue_field(self):
        R = make_ring(["X - 1"], F2, 1)
        assert build_ring_couple(R, 1).omega.modules[0].size == 2

    def test_sources(self):
        from_text = make_ring("ring char=2 d=2 gens=1\nY - X^2\n")
        assert from_text.normal_form(parse_polynomial("Y", F2, 2)) == PARABOLA.normal_form(
            parse_polynomial("X^2", F2, 2))
        with pytest.raises(ValueError):
            make_ring([], Coefficients.rationals(), 1)
        with pytest.raises(ValueError):
            build_ring_couple(LAMP_RING, -1)

    def test_budget(self):
        with pytest.raises(BudgetExceeded):
            build_ring_couple(PLANE, 3, budget=10)


class TestNoether:
    @pytest.mark.parametrize("m", range(0, 6))
    def test_free_line(self, m):
        assert noether_size_count(LAMP_RING, m) == 2 ** (2 * m + 1)

    def test_unit_ideal(self):
        assert noether_size_count(make_ring(["1"], F2, 2), 3) == 1

    @pytest.mark.parametrize("ring,p,d", [(PARABOLA, 2, 2), (PLANE, 2, 2), (make_ring(["X*Y - 1", "X + Y"], F3, 2), 3, 2)])
    def test_monotone_and_bounded(self, ring, p, d):
        counts = [noether_size_count(ring, m) for m in range(5)]
        assert counts == sorted(counts)
        for m, c in enumerate(counts):
            assert c <= p ** ((2 * m + 1) ** d)

    def test_parabola_grows_linearly(self):
        # the normal forms of B_m for Y = X^2 are polynomials in X of degree <= 2m
        ms = list(range(1, 9))
        sizes = [noether_size_count(PARABOLA, m) for m in ms]
        assert abs(fit_growth(sizes, ms).k_hat - 1) < 0.3


class TestVerify:
    @pytest.mark.parametrize("m", range(1, 5))
    def test_lamplighter(self, m):
        rep = verify_couple(build_ring_couple(LAMP_RING, m), Fraction(1, 2), lamplighter_V)
        assert rep.passed and rep.method == "exhaustive-compiled"
        assert rep.sharp is True

    def test_corrupted(self):
        c = build_ring_couple(LAMP_RING, 2)
        bad = FolnerCouple(c.group, c.omega, c.omega, 2)
        rep = verify_couple(bad)
        assert rep.containment_ok is False and rep.witnesses and not rep.passed

    @pytest.mark.parametrize("ring,m", [(FIELD4, 1), (FIELD4, 2), (make_ring(["X - Y"], F2, 2), 1)])
    def test_methods_agree(self, ring, m):
        good = build_ring_couple(ring, m)
        bad = FolnerCouple(good.group, good.omega, good.omega, m)
        for method in ("exhaustive", "structured"):
            assert verify_couple(good, method=method).containment_ok is True
            assert verify_couple(bad, method=method).containment_ok is False

    def test_structured_rank_two(self):
        good = build_ring_couple(PARABOLA, 1)
        bad = FolnerCouple(good.group, good.omega, good.omega, 1)
        assert verify_couple(good, c0_required=Fraction(9, 25), method="structured").passed
        assert verify_couple(bad, method="structured").containment_ok is False

    def test_generic_agrees_with_packed(self):
        c = build_ring_couple(LAMP_RING, 2)
        packed = verify_couple(c, method="auto")
        other = verify_couple(c, method="structured")
        assert packed.containment_ok == other.containment_ok is True

    def test_singleton(self):
        G = FreeAbelian(1)
        c = FolnerCouple(G, ExplicitSet(frozenset({(0,)})), ExplicitSet(frozenset({(0,)})), 0, "explicit")
        rep = verify_couple(c, c0_required=1)
        assert rep.passed

    def test_size_bound(self):
        c = build_ring_couple(LAMP_RING, 1)
        rep = verify_couple(c, V=lambda m: 100)
        assert rep.size_bound_ok is False and not rep.passed

    def test_c0(self):
        c = build_ring_couple(LAMP_RING, 1)
        assert not verify_couple(c, c0_required=Fraction(2, 3)).passed

    def test_budget_indeterminate(self):
        c = build_ring_couple(PLANE, 1)
        bad = FolnerCouple(c.group, c.omega, c.omega, 1)
        rep = verify_couple(bad, method="exhaustive", budget=10)
        assert rep.indeterminate and not rep.passed

    def test_boundary_witnesses_really_escape(self):
        c = build_ring_couple(FIELD4, 2)
        bad = FolnerCouple(c.group, c.omega, c.omega, 2)
        rep = verify_couple(bad, method="exhaustive")
        assert rep.witnesses
        for elt, b in rep.witnesses:
            assert bad.omega.contains(elt)
            assert not bad.omega.contains(c.group.multiply(elt, b))


class TestProduct:
    @pytest.mark.parametrize("m", [1, 2, 3])
    def test_two_lamplighters(self, m):
        c = build_ring_couple(LAMP_RING, m)
        prod = product_couple(c, c)
        rep = verify_couple(prod)
        assert rep.passed
        box = 4 * m + 1
        assert prod.omega.size * box == c.omega.size ** 2

    def test_with_trivial(self):
        c = build_ring_couple(LAMP_RING, 2)
        t = build_ring_couple(make_ring(["1"], F2, 1), 2)
        prod = product_couple(c, t)
        assert prod.omega.size == c.omega.size and prod.omega_prime.size == c.omega_prime.size
        assert verify_couple(prod).passed

    def test_mismatch(self):
        with pytest.raises(ProjectionMismatch):
            product_couple(build_ring_couple(LAMP_RING, 1), build_ring_couple(LAMP_RING, 2))
        with pytest.raises(ProjectionMismatch):
            product_couple(build_ring_couple(LAMP_RING, 1), build_ring_couple(PARABOLA, 1))


class TestDescent:
    @pytest.mark.parametrize("m", [1, 2, 3])
    def test_to_z(self, m):
        res = quotient_descent(build_ring_couple(LAMP_RING, m), "cursor")
        c0 = 1 / (1 + res.ratio)
        rep = verify_couple(res.couple, c0_required=c0)
        assert rep.passed
        assert res.couple.omega_prime.size == 2 * m + 1

    def test_identity(self):
        c = build_ring_couple(LAMP_RING, 1)
        res = quotient_descent(c, "identity")
        members = res.couple.omega_prime.members
        assert all(w in members for w in c.omega_prime.elements())
        assert verify_couple(res.couple, c0_required=1 / (1 + res.ratio)).passed

    def test_trivial(self):
        res = quotient_descent(build_ring_couple(LAMP_RING, 1), "trivial")
        assert res.couple.omega.size == res.couple.omega_prime.size == 1
        assert res.ratio == 0

    def test_boundary_definition(self):
        G = FreeAbelian(1)
        A = {(x,) for x in range(-2, 3)}
        bd = n_boundary(G, A, 1)
        # elements one step from both A and its complement
        assert bd == {(-3,), (-2,), (2,), (3,)}

    def test_custom_projection(self):
        c = build_ring_couple(LAMP_RING, 1)
        G = FreeAbelian(1)
        res = quotient_descent(c, (lambda a: a.translation, G))
        assert res.couple.omega_prime.size == 3

    def test_unknown_projection(self):
        with pytest.raises(ValueError):
            quotient_descent(build_ring_couple(LAMP_RING, 1), "sideways")


class TestGrowth:
    def test_lamplighter_sizes(self):
        ms = list(range(1, 9))
        fit = fit_growth([lamplighter_V(m) for m in ms], ms)
        assert abs(fit.k_hat - 1) < 0.15

    def test_quadratic(self):
        ms = list(range(1, 9))
        fit = fit_growth([math.exp(m * m) for m in ms], ms)
        assert abs(fit.k_hat - 2) < 1e-3

    def test_constant(self):
        with pytest.raises(DegenerateInput):
            fit_growth([5, 5, 5, 5], [1, 2, 3, 4])

    def test_too_few(self):
        with pytest.raises(DegenerateInput):
            fit_growth([2, 4, 8], [1, 2, 3])

    def test_huge_integers(self):
        ms = list(range(1, 7))
        fit = fit_growth([2 ** (400 * m * m) for m in ms], ms)
        assert abs(fit.k_hat - 2) < 1e-3


@settings(max_examples=30)
@given(st.floats(0.3, 3.0), st.floats(0.2, 2.0), st.floats(-2, 2))
def test_growth_fit_exact_on_synthetic(k, rate, a):
    ms = list(range(1, 7))
    sizes = [math.exp(a + rate * m ** k) for m in ms]
    assert abs(fit_growth(sizes, ms).k_hat - k) < 1e-3


class TestSizeFunctions:
    def test_eval(self):
        V = parse_size_function("C*exp(C*m^k)", C=2, k=1)
        assert V(3) == pytest.approx(2 * math.exp(6))

    def test_overflow_is_infinite(self):
        assert parse_size_function("exp(m^5)")(100) == math.inf

    @pytest.mark.parametrize("expr", ["__import__('os')", "m.real", "open(m)", "[m]", "C*m"])
    def test_rejected(self, expr):
        with pytest.raises(ValueError):
            parse_size_function(expr)


class TestSerialisation:
    def test_ring_roundtrip(self):
        c = build_ring_couple(PARABOLA, 1)
        back = couple_from_json(json.loads(json.dumps(couple_to_json(c))))
        assert back.omega.size == c.omega.size and back.c0 == c.c0
        assert back.group == c.group

    def test_explicit_roundtrip(self):
        res = quotient_descent(build_ring_couple(LAMP_RING, 1), "cursor")
        back = couple_from_json(json.loads(json.dumps(couple_to_json(res.couple))))
        assert back.omega.members == res.couple.omega.members

    def test_trivial_roundtrip(self):
        res = quotient_descent(build_ring_couple(LAMP_RING, 1), "trivial")
        back = couple_from_json(couple_to_json(res.couple))
        assert isinstance(back.group, TrivialGroup) and back.omega.size == 1


def test_module_span_membership():
    span = ModuleSpan(PARABOLA, 1)
    assert span.contains(parse_polynomial("X*Y + X^-1", F2, 2))
    # X^3 = X*Y lies in the span, X^5 = X*Y^2 needs Y^2 outside [-1, 1]^2
    assert span.contains(parse_polynomial("X^3", F2, 2))
    assert not span.contains(parse_polynomial("X^5", F2, 2))
    assert sum(1 for _ in span.elements()) == span.size


def test_ball_sizes():
    assert len(ball(FreeAbelian(1), 3)) == 7
    assert len(ball(FreeAbelian(2), 2)) == 13
    G = SplitGroup([LAMP_RING])
    assert len(ball(G, 1)) == 4
