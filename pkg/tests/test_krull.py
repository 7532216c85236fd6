import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from krullwalk.krull import (
    EMPTY,
    NOT_COMPUTED,
    DimensionDeficit,
    ExactnessError,
    KrullReport,
    ModulePresentation,
    find_transcendental_monomials,
    fitting_ideal0,
    group_krull_dim,
    koszul_presentation,
    krull_report,
    module_krull_dim,
    monomials_independent,
    parse_presentation,
    special_subgroup_witness,
    torsion_split_dims,
)
from krullwalk.ring import Coefficients, LaurentPolynomial, parse_polynomial

from conftest import polynomials

QQ = Coefficients.rationals()
ZZ = Coefficients.integers()
F2 = Coefficients.prime_field(2)


def P(text, coeffs=QQ, rank=2):
    return parse_polynomial(text, coeffs, rank)


def cyclic(texts, coeffs, rank, torsion=None):
    return ModulePresentation.cyclic([P(t, coeffs, rank) for t in texts], coeffs, rank, torsion)


class TestFitting:
    def test_cyclic(self):
        assert fitting_ideal0(cyclic(["X - 1"], QQ, 1)) == [P("X - 1", rank=1)]

    def test_free(self):
        assert all(g.is_zero() for g in fitting_ideal0(cyclic([], QQ, 1)))

    def test_diagonal_determinant(self):
        z = P("0")
        pres = ModulePresentation(QQ, 2, 2, [[P("X - 1"), z], [z, P("Y - 1")]])
        assert fitting_ideal0(pres) == [P("X - 1") * P("Y - 1")]


class TestModuleDimension:
    def test_lamplighter_module(self):
        assert module_krull_dim(cyclic([], F2, 1)) == 1

    @pytest.mark.parametrize("d", [1, 2, 3])
    def test_free_fp_module(self, d):
        assert module_krull_dim(cyclic([], Coefficients.prime_field(3), d)) == d

    def test_residue_field(self):
        rels = [f"X{i} - 1" for i in range(1, 4)]
        assert module_krull_dim(cyclic(rels, Coefficients.prime_field(5), 3)) == 0

    def test_zero_module(self):
        assert module_krull_dim(cyclic(["1"], QQ, 2)) == EMPTY

    def test_integer_route_refused(self):
        with pytest.raises(ValueError):
            module_krull_dim(cyclic([], ZZ, 1))


class TestGroupDimension:
    def test_lamplighter(self):
        assert group_krull_dim(cyclic([], F2, 1), True) == 1

    def test_abelian_infinite(self):
        assert group_krull_dim(cyclic(["1"], QQ, 2), True) == 1

    def test_finite(self):
        assert group_krull_dim(cyclic(["1"], QQ, 2), False) == 0


class TestTorsionSplit:
    def test_free_integer_module(self):
        rep = torsion_split_dims(cyclic([], ZZ, 1))
        assert rep.krull0 == 2 and rep.krull_module == 2 and rep.status == "exact"

    def test_declared_torsion(self):
        rep = torsion_split_dims(cyclic([], ZZ, 1, torsion=7))
        assert rep.krullt == 1 and rep.krull0 == EMPTY and rep.status == "exact"

    @pytest.mark.parametrize("d", [1, 2, 3])
    def test_integer_group_ring(self, d):
        assert torsion_split_dims(cyclic([], ZZ, d)).krull_module == d + 1

    def test_free_metabelian_derived(self):
        rep = krull_report(koszul_presentation(2, ZZ))
        assert rep.krull_module == 3

    @pytest.mark.parametrize("p", [2, 3, 5])
    def test_bachmuth_derived(self, p):
        rep = krull_report(koszul_presentation(2, ZZ, torsion=p))
        assert rep.krullt == 2 and rep.krull_module == 2 and rep.krull_group == 2

    def test_koszul_d3(self):
        # kernel of Z[Z^3]^3 -> Z[Z^3] has full support, so dimension d + 1
        assert krull_report(koszul_presentation(3, ZZ)).krull_module == 4

    def test_upper_bound_flag(self):
        rep = torsion_split_dims(cyclic(["2*X - 2"], ZZ, 1), primes=[2])
        assert rep.status == "upper_bound"
        with pytest.raises(ExactnessError):
            special_subgroup_witness(rep, cyclic(["2*X - 2"], ZZ, 1))

    def test_no_primes(self):
        rep = torsion_split_dims(cyclic(["X - 2"], ZZ, 1))
        assert rep.krullt == NOT_COMPUTED

    def test_group_dimension_matches_module(self):
        rep = krull_report(cyclic([], F2, 2))
        assert rep.krull_group == rep.krull_module == 2


class TestTranscendental:
    def test_free_variables(self):
        fam = find_transcendental_monomials([], QQ, 2, rank=2)
        assert fam.monomials == [(1, 0), (0, 1)]

    def test_hyperbola(self):
        I = [P("X*Y - 1")]
        assert find_transcendental_monomials(I, QQ, 1).monomials == [(1, 0)]
        with pytest.raises(DimensionDeficit):
            find_transcendental_monomials(I, QQ, 2)

    def test_point(self):
        with pytest.raises(DimensionDeficit):
            find_transcendental_monomials([P("X - 1", rank=1)], QQ, 1)

    def test_dependent_pair_rejected(self):
        # X and X^2 are never independent
        assert not monomials_independent([(1, 0), (2, 0)], [], QQ, 2)
        assert not monomials_independent([(1, 0), (0, 2)], [P("Y^2 - X^3")], QQ, 2)


class TestWitness:
    def test_b2p(self):
        pres = koszul_presentation(2, ZZ, torsion=3)
        w = special_subgroup_witness(krull_report(pres), pres)
        assert w.kind == "B2p" and w.prime == 3 and len(w.monomials.monomials) == 2
        fp = Coefficients.prime_field(3)
        assert monomials_independent(w.monomials.monomials, [], fp, 2)

    def test_z_wr_z(self):
        pres = cyclic([], ZZ, 1)
        w = special_subgroup_witness(krull_report(pres), pres)
        assert w.kind == "Z_wr_Z"

    def test_abelian(self):
        pres = cyclic(["1"], ZZ, 2)
        w = special_subgroup_witness(krull_report(pres), pres)
        assert w.kind == "none"

    def test_lamplighter(self):
        pres = cyclic([], F2, 1)
        w = special_subgroup_witness(krull_report(pres), pres)
        assert w.kind == "lamplighter" and w.prime == 2


def test_presentation_text_roundtrip():
    text = "ring char=Z d=2 gens=2 torsion=3\nX1 - 1, 0\n0, X2 - 1\n"
    pres = parse_presentation(text)
    assert pres.declared_characteristic == 3
    assert parse_presentation(pres.to_text()) == pres


@pytest.mark.parametrize("text", [
    "", "gens=1", "ring d=1 gens=1", "ring char=2 d=1 gens=2\nX\n", "ring char=4 d=1 gens=1"])
def test_malformed_presentations(text):
    with pytest.raises(ValueError):
        parse_presentation(text)


# -- properties -------------------------------------------------------------

def row_ops(pres: ModulePresentation, rnd) -> ModulePresentation:
    rows = [list(r) for r in pres.relations]
    k, d = pres.coeffs, pres.rank
    for _ in range(3):
        i, j = rnd.randrange(len(rows)), rnd.randrange(len(rows))
        mono = LaurentPolynomial.monomial(tuple(rnd.randint(-1, 1) for _ in range(d)), k)
        if i != j:
            rows[j] = [a + mono * b for a, b in zip(rows[j], rows[i])]
        else:
            rows[i] = [mono * a for a in rows[i]]
    rnd.shuffle(rows)
    return ModulePresentation(k, d, pres.n_generators, rows)


def presentations(coeffs, rank, gens=2, rows=2):
    entry = polynomials(coeffs, rank, radius=1, max_terms=2)
    return st.lists(st.lists(entry, min_size=gens, max_size=gens), min_size=rows, max_size=rows).map(
        lambda rs: ModulePresentation(coeffs, rank, gens, rs))


@settings(max_examples=100)
@given(st.integers(1, 3).flatmap(lambda d: presentations(F2, d)), st.randoms(use_true_random=False))
def test_row_operation_invariance(pres, rnd):
    assert module_krull_dim(row_ops(pres, rnd)) == module_krull_dim(pres)


@settings(max_examples=40)
@given(presentations(F2, 2, gens=1, rows=1), presentations(F2, 2, gens=1, rows=2))
def test_direct_sum_is_max(a, b):
    val = lambda x: -1 if x == EMPTY else x
    s = module_krull_dim(a.direct_sum(b))
    assert val(s) == max(val(module_krull_dim(a)), val(module_krull_dim(b)))


@settings(max_examples=60)
@given(st.integers(1, 3).flatmap(
    lambda d: st.lists(st.tuples(*[st.integers(-2, 2)] * d), max_size=3).map(lambda vs: (d, vs))),
    st.sampled_from([QQ, F2]))
def test_lattice_rank_oracle(dv, coeffs):
    d, vecs = dv
    one = LaurentPolynomial.one(coeffs, d)
    gens = [LaurentPolynomial.monomial(v, coeffs) - one for v in vecs]
    pres = ModulePresentation.cyclic(gens, coeffs, d)
    rank = int(np.linalg.matrix_rank(np.array(vecs, dtype=float))) if vecs else 0
    assert module_krull_dim(pres) == d - rank


@settings(max_examples=30)
@given(st.integers(1, 2).flatmap(lambda d: presentations(F2, d, gens=1, rows=1)), st.booleans())
def test_group_dimension_floor(pres, infinite):
    m = module_krull_dim(pres)
    g = group_krull_dim(pres, infinite)
    assert g >= 0
    if m != EMPTY and m >= 1:
        assert g == m


@settings(max_examples=20)
@given(polynomials(F2, 2, radius=1, max_terms=3))
def test_families_recertify(f):
    ideal = [f] if not f.is_zero() else []
    from krullwalk.grobner import laurent_dimension
    dim = laurent_dimension(ideal, F2, 2)
    if dim == EMPTY or dim == 0:
        return
    fam = find_transcendental_monomials(ideal, F2, dim, rank=2)
    assert len(set(fam.monomials)) == dim
    assert monomials_independent(fam.monomials, ideal, F2, 2)
