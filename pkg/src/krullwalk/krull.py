"""Krull dimension of finitely presented modules over Laurent group rings.

The annihilator of a module is replaced by its 0th Fitting ideal: both have
the same radical, hence the same quotient dimension.  Dimensions are
integers; the zero module has dimension ``"empty"`` (minus infinity).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .grobner import EMPTY, MonomialOrder, PolyIdeal, eliminate, laurent_dimension
from .ring import Coefficients, ExponentVector, LaurentPolynomial, parse_polynomial, prime_factors

NOT_COMPUTED = "not computed"
Dim = "int | str"


class DimensionDeficit(ValueError):
    """Fewer transcendental monomials exist than were requested."""

    def __init__(self, msg: str, achieved: "MonomialFamily"):
        super().__init__(msg)
        self.achieved = achieved


class ExactnessError(ValueError):
    pass


def _val(d) -> float:
    """Order-compatible numeric value of a dimension (``"empty"`` -> -inf)."""
    if d == EMPTY:
        return -math.inf
    if d == NOT_COMPUTED:
        raise ValueError("dimension was not computed")
    return d


def dim_max(*dims):
    vals = [d for d in dims if d != NOT_COMPUTED]
    if not vals:
        return NOT_COMPUTED
    return max(vals, key=_val)


@dataclass
class ModulePresentation:
    """Cokernel of ``relations`` (rows) on ``n_generators`` free generators
    over ``coeffs[X_1^{+-1}..X_d^{+-1}]``."""

    coeffs: Coefficients
    rank: int
    n_generators: int
    relations: list[list[LaurentPolynomial]] = field(default_factory=list)
    declared_characteristic: int | None = None

    def __post_init__(self):
        if self.n_generators < 1:
            raise ValueError("a presentation needs at least one generator")
        for row in self.relations:
            if len(row) != self.n_generators:
                raise ValueError(f"relation row has {len(row)} entries, expected {self.n_generators}")
            for p in row:
                if p.rank != self.rank or p.coeffs != self.coeffs:
                    raise ValueError("relation entry does not live in the presentation's ring")
        if self.declared_characteristic is not None and self.declared_characteristic < 2:
            raise ValueError("declared characteristic must be >= 2")

    @classmethod
    def cyclic(cls, gens: Sequence[LaurentPolynomial], coeffs: Coefficients, rank: int,
               torsion: int | None = None) -> "ModulePresentation":
        """The ring coeffs[Z^d] / (gens) as a cyclic module."""
        return cls(coeffs, rank, 1, [[g] for g in gens], torsion)

    def reduce(self, coeffs: Coefficients) -> "ModulePresentation":
        """Same relation matrix read over another coefficient ring."""
        rows = [[p.change_coefficients(coeffs) for p in row] for row in self.relations]
        return ModulePresentation(coeffs, self.rank, self.n_generators, rows, None)

    def torsion_rows(self) -> list[list[LaurentPolynomial]]:
        """Relations k*e_i = 0 implied by the declared characteristic."""
        k = self.declared_characteristic
        if k is None:
            return []
        one = LaurentPolynomial.one(self.coeffs, self.rank)
        zero = LaurentPolynomial.zero(self.coeffs, self.rank)
        return [[one.scale(k) if j == i else zero for j in range(self.n_generators)]
                for i in range(self.n_generators)]

    def direct_sum(self, other: "ModulePresentation") -> "ModulePresentation":
        if other.coeffs != self.coeffs or other.rank != self.rank:
            raise ValueError("cannot sum presentations over different rings")
        zero = LaurentPolynomial.zero(self.coeffs, self.rank)
        n1, n2 = self.n_generators, other.n_generators
        rows = [row + [zero] * n2 for row in self.relations + self.torsion_rows()]
        rows += [[zero] * n1 + row for row in other.relations + other.torsion_rows()]
        return ModulePresentation(self.coeffs, self.rank, n1 + n2, rows, None)

    def to_text(self) -> str:
        char = {"QQ": "0", "ZZ": "Z"}.get(self.coeffs.kind, str(self.coeffs.modulus))
        head = f"ring char={char} d={self.rank} gens={self.n_generators}"
        if self.declared_characteristic:
            head += f" torsion={self.declared_characteristic}"
        lines = [head] + [", ".join(str(p) for p in row) for row in self.relations]
        return "\n".join(lines) + "\n"


def parse_presentation(text: str) -> ModulePresentation:
    """Read the ``ring char=<0|p|Z> d=<d> gens=<n> [torsion=<k>]`` format."""
    lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines or not lines[0].startswith("ring"):
        raise ValueError("presentation must start with a 'ring ...' header")
    fields = {}
    for tok in lines[0].split()[1:]:
        if "=" not in tok:
            raise ValueError(f"bad header token {tok!r}")
        k, v = tok.split("=", 1)
        fields[k] = v
    missing = {"char", "d", "gens"} - fields.keys()
    if missing:
        raise ValueError(f"header is missing {sorted(missing)}")
    char = fields["char"]
    if char in ("Z", "z"):
        coeffs = Coefficients.integers()
    else:
        coeffs = Coefficients.from_characteristic(int(char))
    rank = int(fields["d"])
    n = int(fields["gens"])
    torsion = int(fields["torsion"]) if "torsion" in fields else None
    rows = []
    for ln in lines[1:]:
        entries = [parse_polynomial(s, coeffs, rank) for s in ln.split(",")]
        rows.append(entries)
    return ModulePresentation(coeffs, rank, n, rows, torsion)


def load_presentation(path: str | Path) -> ModulePresentation:
    return parse_presentation(Path(path).read_text())


# -- Fitting ideal --------------------------------------------------------

def _det(rows: list[list[LaurentPolynomial]], coeffs: Coefficients, rank: int) -> LaurentPolynomial:
    n = len(rows)
    # Laplace expansion along rows, memoised on the set of used columns
    memo: dict[tuple[int, frozenset], LaurentPolynomial] = {}

    def minor(r: int, cols: frozenset) -> LaurentPolynomial:
        if r == n:
            return LaurentPolynomial.one(coeffs, rank)
        key = (r, cols)
        if key in memo:
            return memo[key]
        acc = LaurentPolynomial.zero(coeffs, rank)
        free = sorted(set(range(n)) - cols)
        for pos, c in enumerate(free):
            entry = rows[r][c]
            if entry.is_zero():
                continue
            sub = minor(r + 1, cols | {c})
            term = entry * sub
            acc = acc - term if pos % 2 else acc + term
        memo[key] = acc
        return acc

    return minor(0, frozenset())


def fitting_ideal0(pres: ModulePresentation) -> list[LaurentPolynomial]:
    """All maximal (n x n) minors of the relation matrix, zero ones dropped."""
    rows = pres.relations + pres.torsion_rows()
    n = pres.n_generators
    out = []
    seen = set()
    for choice in itertools.combinations(range(len(rows)), n):
        d = _det([rows[i] for i in choice], pres.coeffs, pres.rank)
        if not d.is_zero() and d not in seen:
            seen.add(d)
            out.append(d)
    return out


# -- dimensions -----------------------------------------------------------

def module_krull_dim(pres: ModulePresentation):
    """Krull dimension of a module over K[Z^d], K = Q or F_p."""
    if not pres.coeffs.is_field:
        raise ValueError("integer presentations go through torsion_split_dims")
    return laurent_dimension(fitting_ideal0(pres), pres.coeffs, pres.rank)


def group_krull_dim(pres: ModulePresentation, group_is_infinite: bool, primes: Sequence[int] = ()) -> int:
    if pres.coeffs.is_field:
        m = module_krull_dim(pres)
    else:
        m = torsion_split_dims(pres, primes).krull_module
    if m != EMPTY and m != NOT_COMPUTED and m > 0:
        return m
    return 1 if group_is_infinite else 0


@dataclass
class KrullReport:
    krull_module: object
    krull_group: int
    krull0: object = NOT_COMPUTED
    krullt: object = NOT_COMPUTED
    per_prime: dict[int, object] = field(default_factory=dict)
    status: str = "exact"
    rank: int = 0

    def to_dict(self) -> dict:
        return {
            "krull_module": self.krull_module,
            "krull_group": self.krull_group,
            "krull0": self.krull0,
            "krullt": self.krullt,
            "per_prime": {str(p): v for p, v in sorted(self.per_prime.items())},
            "status": self.status,
        }


def _is_unit_monomial(p: LaurentPolynomial) -> bool:
    return len(p.terms) == 1 and p.terms[0][1] in (1, -1)


def torsion_split_dims(pres: ModulePresentation, primes: Sequence[int] = ()) -> KrullReport:
    """Torsion-free and torsion Krull dimensions of a module over Z[Z^d].

    ``krull0`` is one more than the dimension of the rational reduction.
    ``krullt`` is exact only when a torsion characteristic is declared;
    otherwise the mod-p dimensions only bound the p-torsion from above and
    the report is flagged ``upper_bound`` (unless the free part already
    reaches the maximum d + 1).
    """
    if pres.coeffs.kind != "ZZ":
        raise ValueError("torsion_split_dims expects integer coefficients")
    d = pres.rank
    k = pres.declared_characteristic
    fit = fitting_ideal0(pres)

    if k is not None:
        krull0 = EMPTY
    else:
        dq = laurent_dimension([g.change_coefficients(Coefficients.rationals()) for g in fit],
                               Coefficients.rationals(), d)
        krull0 = EMPTY if dq == EMPTY else dq + 1

    primes = sorted(set(primes))
    if not primes and k is not None:
        primes = prime_factors(k)
    per_prime = {}
    for p in primes:
        fp = Coefficients.prime_field(p)
        if k is not None and k % p:
            per_prime[p] = EMPTY  # k-torsion with p not dividing k: M/pM = 0
            continue
        per_prime[p] = laurent_dimension([g.change_coefficients(fp) for g in fit], fp, d)

    zero_module = any(_is_unit_monomial(g) for g in fit)
    if zero_module:
        krull0 = EMPTY
        per_prime = {p: EMPTY for p in per_prime}
    krullt = dim_max(*per_prime.values()) if per_prime else NOT_COMPUTED
    if zero_module:
        krullt = EMPTY

    if k is not None or zero_module:
        status = "exact"
        module = dim_max(krull0, krullt)
    elif krull0 != EMPTY and krull0 == d + 1:
        # torsion parts have dimension <= d, so the free part decides
        status = "exact"
        module = krull0
    else:
        status = "upper_bound"
        module = dim_max(krull0, krullt)
    if module == NOT_COMPUTED:
        module = krull0
    group = module if module not in (EMPTY, NOT_COMPUTED) and module > 0 else (1 if d >= 1 else 0)
    return KrullReport(module, group, krull0, krullt, per_prime, status, d)


def krull_report(pres: ModulePresentation, primes: Sequence[int] = (), group_is_infinite: bool | None = None) -> KrullReport:
    """Report for any presentation: integer ones are split by torsion,
    field ones give a single dimension."""
    if group_is_infinite is None:
        group_is_infinite = pres.rank >= 1
    if pres.coeffs.kind == "ZZ":
        rep = torsion_split_dims(pres, primes)
        if not group_is_infinite and rep.krull_group == 1 and (rep.krull_module == EMPTY or rep.krull_module == 0):
            rep.krull_group = 0
        return rep
    if pres.coeffs.kind == "ZMOD":
        raise ValueError("presentations over Z/kZ with composite k: use char=Z with torsion=k")
    m = module_krull_dim(pres)
    group = m if m != EMPTY and m > 0 else (1 if group_is_infinite else 0)
    if pres.coeffs.kind == "GF":
        p = pres.coeffs.modulus
        return KrullReport(m, group, EMPTY, m, {p: m}, "exact", pres.rank)
    return KrullReport(m, group, NOT_COMPUTED, NOT_COMPUTED, {}, "exact", pres.rank)


# -- transcendental monomials ---------------------------------------------

@dataclass
class MonomialFamily:
    monomials: list[ExponentVector]
    characteristic: int

    def to_dict(self) -> dict:
        return {"monomials": [list(m) for m in self.monomials], "characteristic": self.characteristic}


def _shell(radius: int, rank: int) -> list[ExponentVector]:
    vecs = [v for v in itertools.product(range(-radius, radius + 1), repeat=rank)
            if max(map(abs, v), default=0) == radius]
    # sparse vectors first, then positive-leaning ones
    return sorted(vecs, key=lambda v: (sum(map(abs, v)), tuple(-x for x in v)))


def monomials_independent(family: Sequence[ExponentVector], ideal: Sequence[LaurentPolynomial],
                          coeffs: Coefficients, rank: int) -> bool:
    """Elimination certificate: the monomials X^{m_i} are algebraically
    independent modulo the Laurent ideal iff eliminating the X's from
    (I, X*Y - 1, T_i - X^{m_i}) leaves the zero ideal in K[T]."""
    j = len(family)
    n = 2 * rank + j
    one = LaurentPolynomial.one(coeffs, n)

    def lift(e: Sequence[int], extra=()) -> ExponentVector:
        return tuple(max(x, 0) for x in e) + tuple(max(-x, 0) for x in e) + tuple(extra)

    gens = []
    for g in ideal:
        if g.is_zero():
            continue
        gens.append(LaurentPolynomial({lift(e, (0,) * j): c for e, c in g.terms}, coeffs, n))
    for i in range(rank):
        e = [0] * n
        e[i] = 1
        e[rank + i] = 1
        gens.append(LaurentPolynomial.monomial(e, coeffs) - one)
    for t, m in enumerate(family):
        tv = [0] * j
        tv[t] = 1
        gens.append(LaurentPolynomial.monomial((0,) * (2 * rank) + tuple(tv), coeffs)
                    - LaurentPolynomial.monomial(lift(m, (0,) * j), coeffs))
    out = eliminate(PolyIdeal(gens, coeffs, n), range(2 * rank))
    return not out.generators


def find_transcendental_monomials(ideal: Sequence[LaurentPolynomial], coeffs: Coefficients, target: int,
                                  rank: int | None = None, max_radius: int = 2) -> MonomialFamily:
    """Greedy search for ``target`` monomials independent modulo ``ideal``.

    Candidates are scanned by increasing max-norm; each acceptance is
    certified by :func:`monomials_independent`.
    """
    if rank is None:
        if not ideal:
            raise ValueError("rank is required for the zero ideal")
        rank = ideal[0].rank
    if not coeffs.is_field:
        raise ValueError("transcendence is tested over Q or F_p")
    ideal = [g if g.coeffs == coeffs else g.change_coefficients(coeffs) for g in ideal]
    family = MonomialFamily([], coeffs.characteristic)
    dim = laurent_dimension(ideal, coeffs, rank)
    if dim == EMPTY:
        raise ValueError("the ideal is not proper")
    if dim < target:
        raise DimensionDeficit(
            f"quotient has dimension {dim} < {target}; no such family exists", family)
    for radius in range(1, max_radius + 1):
        for v in _shell(radius, rank):
            if len(family.monomials) == target:
                return family
            if monomials_independent(family.monomials + [v], ideal, coeffs, rank):
                family.monomials.append(v)
    if len(family.monomials) == target:
        return family
    raise DimensionDeficit(
        f"found only {len(family.monomials)} of {target} monomials up to max-norm {max_radius}", family)


# -- special subgroups ----------------------------------------------------

@dataclass
class SubgroupWitness:
    kind: str
    prime: int | None = None
    monomials: MonomialFamily | None = None

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "prime": self.prime,
            "monomials": self.monomials.to_dict() if self.monomials else None,
        }


def special_subgroup_witness(report: KrullReport, pres: ModulePresentation) -> SubgroupWitness:
    """Which of Z wr Z, B_2^(p) or a lamplighter the data certifies.

    ``pres`` is the source presentation the report was computed from; the
    relevant Fitting ideal is searched for transcendental monomials.
    """
    if report.status != "exact":
        raise ExactnessError("witnesses need an exact Krull report")
    fit = fitting_ideal0(pres)
    d = pres.rank

    def ge(x, n):
        return x not in (EMPTY, NOT_COMPUTED) and x >= n

    if ge(report.krull0, 2):
        qq = Coefficients.rationals()
        fam = find_transcendental_monomials([g.change_coefficients(qq) for g in fit], qq, 1, rank=d)
        return SubgroupWitness("Z_wr_Z", None, fam)
    tors = sorted(p for p, v in report.per_prime.items() if ge(v, 1))
    if ge(report.krullt, 2):
        p = next(p for p in tors if ge(report.per_prime[p], 2))
        fp = Coefficients.prime_field(p)
        fam = find_transcendental_monomials([g.change_coefficients(fp) for g in fit], fp, 2, rank=d)
        return SubgroupWitness("B2p", p, fam)
    if report.krullt == 1 and tors:
        p = tors[0]
        fp = Coefficients.prime_field(p)
        fam = find_transcendental_monomials([g.change_coefficients(fp) for g in fit], fp, 1, rank=d)
        return SubgroupWitness("lamplighter", p, fam)
    return SubgroupWitness("none")


# -- built-in presentations ------------------------------------------------

def koszul_presentation(d: int, coeffs: Coefficients, torsion: int | None = None) -> ModulePresentation:
    """Derived subgroup of the free (k-)metabelian group of rank d.

    Its Magnus image is the kernel of Z[Z^d]^d -> Z[Z^d], e_i -> X_i - 1,
    presented by the Koszul complex: generators are the commutators
    [s_i, s_j] (i < j), relations come from triples i < j < k.
    """
    if d < 2:
        # B_1 = Z has trivial derived subgroup
        return ModulePresentation(coeffs, d, 1, [[LaurentPolynomial.one(coeffs, d)]], torsion)
    pairs = list(itertools.combinations(range(d), 2))
    index = {p: i for i, p in enumerate(pairs)}
    one = LaurentPolynomial.one(coeffs, d)
    zero = LaurentPolynomial.zero(coeffs, d)
    xm1 = [LaurentPolynomial.variable(i, coeffs, d) - one for i in range(d)]
    rows = []
    for i, j, k in itertools.combinations(range(d), 3):
        row = [zero] * len(pairs)
        row[index[(j, k)]] = xm1[i]
        row[index[(i, k)]] = -xm1[j]
        row[index[(i, j)]] = xm1[k]
        rows.append(row)
    return ModulePresentation(coeffs, d, len(pairs), rows, torsion)
