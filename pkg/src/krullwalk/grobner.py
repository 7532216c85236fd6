"""Buchberger's algorithm over Q and F_p, with saturation and elimination.

Polynomials handed to this module are :class:`LaurentPolynomial` values whose
support is nonnegative.  Internally a polynomial is a plain ``dict`` from
exponent tuple to coefficient; every basis element is kept monic.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Iterable, Sequence

from .ring import Coefficients, ExponentVector, LaurentPolynomial, StructuralError

EMPTY = "empty"


class UnsupportedCoefficients(ValueError):
    pass


@dataclass(frozen=True)
class MonomialOrder:
    """``grevlex``, ``lex`` or ``block``; ``eliminate`` lists the variables of
    the first (larger) block of a block order."""

    kind: str = "grevlex"
    eliminate: tuple[int, ...] = ()

    def __post_init__(self):
        if self.kind not in ("grevlex", "lex", "block"):
            raise ValueError(f"unknown monomial order {self.kind!r}")
        if self.kind == "block" and not self.eliminate:
            raise ValueError("a block order needs a nonempty eliminated-variable set")

    def key(self, rank: int) -> Callable[[ExponentVector], tuple]:
        if self.kind == "lex":
            return lambda e: e
        if self.kind == "grevlex":
            return _grevlex_key
        elim = tuple(sorted(self.eliminate))
        rest = tuple(i for i in range(rank) if i not in elim)

        def block_key(e):
            a = tuple(e[i] for i in elim)
            b = tuple(e[i] for i in rest)
            return (_grevlex_key(a), _grevlex_key(b))

        return block_key

    def __str__(self):
        if self.kind == "block":
            return f"block{list(self.eliminate)}"
        return self.kind


def _grevlex_key(e: ExponentVector) -> tuple:
    return (sum(e), tuple(-x for x in reversed(e)))


@dataclass
class PolyIdeal:
    generators: list[LaurentPolynomial]
    coeffs: Coefficients
    rank: int
    order: MonomialOrder = field(default_factory=MonomialOrder)

    def __post_init__(self):
        gens = []
        for g in self.generators:
            if g.rank != self.rank or g.coeffs != self.coeffs:
                raise StructuralError("generator does not live in the ideal's ring")
            if any(x < 0 for e in g.support() for x in e):
                raise ValueError(f"generator {g} has negative exponents")
            if not g.is_zero():
                gens.append(g)
        self.generators = gens

    def with_order(self, order: MonomialOrder) -> "PolyIdeal":
        return PolyIdeal(list(self.generators), self.coeffs, self.rank, order)


@dataclass
class GroebnerBasis:
    basis: list[LaurentPolynomial]
    order: MonomialOrder
    source: PolyIdeal

    @property
    def coeffs(self) -> Coefficients:
        return self.source.coeffs

    @property
    def rank(self) -> int:
        return self.source.rank

    def leading_monomials(self) -> list[ExponentVector]:
        key = self.order.key(self.rank)
        return [max(g.term_map, key=key) for g in self.basis]

    def is_unit(self) -> bool:
        return any(all(x == 0 for x in lm) for lm in self.leading_monomials())

    def contains(self, p: LaurentPolynomial) -> bool:
        return normal_form(p, self).is_zero()

    def to_ideal(self) -> PolyIdeal:
        return PolyIdeal(list(self.basis), self.coeffs, self.rank, self.order)


# -- dict-level helpers ---------------------------------------------------

def _divides(a: ExponentVector, b: ExponentVector) -> bool:
    return all(x <= y for x, y in zip(a, b))


def _lcm(a: ExponentVector, b: ExponentVector) -> ExponentVector:
    return tuple(max(x, y) for x, y in zip(a, b))


def _monic(p: dict, lt: ExponentVector, k: Coefficients) -> dict:
    c = p[lt]
    if c == 1:
        return p
    inv = k.inv(c)
    return {e: k.mul(v, inv) for e, v in p.items()}


def _sub_scaled(f: dict, g: dict, c, shift: ExponentVector, k: Coefficients) -> None:
    """f -= c * x^shift * g, in place."""
    for e, v in g.items():
        m = tuple(a + b for a, b in zip(e, shift))
        s = k.add(f.get(m, 0), k.neg(k.mul(c, v)))
        if s == 0:
            f.pop(m, None)
        else:
            f[m] = s


def _reduce(f: dict, basis: Sequence[tuple[dict, ExponentVector]], key, k: Coefficients) -> dict:
    """Full reduction of f by monic (poly, leading monomial) pairs."""
    f = dict(f)
    rem: dict = {}
    while f:
        m = max(f, key=key)
        c = f[m]
        for g, lt in basis:
            if _divides(lt, m):
                _sub_scaled(f, g, c, tuple(a - b for a, b in zip(m, lt)), k)
                break
        else:
            rem[m] = c
            del f[m]
    return rem


def _spoly(f: dict, lf: ExponentVector, g: dict, lg: ExponentVector, k: Coefficients) -> dict:
    l = _lcm(lf, lg)
    out: dict = {}
    _sub_scaled(out, f, k.neg(1), tuple(a - b for a, b in zip(l, lf)), k)
    _sub_scaled(out, g, 1, tuple(a - b for a, b in zip(l, lg)), k)
    return out


def _to_dict(p: LaurentPolynomial) -> dict:
    return dict(p.terms)


def _from_dict(d: dict, k: Coefficients, rank: int) -> LaurentPolynomial:
    return LaurentPolynomial._raw({e: c for e, c in d.items() if c != 0}, k, rank)


def _require_field(k: Coefficients) -> None:
    if not k.is_field:
        raise UnsupportedCoefficients(f"Groebner bases need a field, got {k}")


# -- Buchberger -----------------------------------------------------------

def buchberger(ideal: PolyIdeal) -> GroebnerBasis:
    """Reduced Groebner basis of ``ideal`` under ``ideal.order``.

    Pairs are discarded with the Gebauer-Moeller criteria and selected by
    the normal strategy (smallest lcm degree, ties broken lexicographically
    on the lcm exponent), so runs are deterministic.
    """
    k = ideal.coeffs
    _require_field(k)
    key = ideal.order.key(ideal.rank)

    polys: list[dict] = []
    lts: list[ExponentVector] = []
    active: set[int] = set()
    pairs: set[tuple[int, int]] = set()

    def update(h: int) -> None:
        nonlocal active, pairs
        lh = lts[h]
        cand = sorted(active)
        C = [(g, _lcm(lh, lts[g])) for g in cand]
        D: list[tuple[int, ExponentVector]] = []
        for idx, (g1, l1) in enumerate(C):
            coprime = l1 == tuple(a + b for a, b in zip(lh, lts[g1]))
            if coprime:
                D.append((g1, l1))
                continue
            others = [l for _, l in C[idx + 1:]] + [l for _, l in D]
            if not any(_divides(l2, l1) for l2 in others):
                D.append((g1, l1))
        E = {(g, h) for g, l in D if l != tuple(a + b for a, b in zip(lh, lts[g]))}
        kept = set()
        for (g1, g2) in pairs:
            l12 = _lcm(lts[g1], lts[g2])
            if (_divides(lh, l12) and _lcm(lts[g1], lh) != l12 and _lcm(lh, lts[g2]) != l12):
                continue
            kept.add((g1, g2))
        pairs = kept | E
        active = {g for g in active if not _divides(lh, lts[g])} | {h}

    def add(p: dict) -> None:
        lt = max(p, key=key)
        polys.append(_monic(p, lt, k))
        lts.append(lt)
        update(len(polys) - 1)

    for g in ideal.generators:
        d = _to_dict(g)
        red = _reduce(d, [(polys[i], lts[i]) for i in sorted(active)], key, k)
        if red:
            add(red)

    def pair_key(pr):
        l = _lcm(lts[pr[0]], lts[pr[1]])
        return (sum(l), l, pr)

    while pairs:
        pr = min(pairs, key=pair_key)
        pairs.discard(pr)
        i, j = pr
        s = _spoly(polys[i], lts[i], polys[j], lts[j], k)
        if not s:
            continue
        basis = [(polys[a], lts[a]) for a in sorted(active)]
        h = _reduce(s, basis, key, k)
        if h:
            add(h)

    basis = _reduced_basis([(polys[i], lts[i]) for i in sorted(active)], key, k)
    return GroebnerBasis(
        [_from_dict(p, k, ideal.rank) for p, _ in basis], ideal.order, ideal
    )


def _reduced_basis(G: list[tuple[dict, ExponentVector]], key, k) -> list[tuple[dict, ExponentVector]]:
    # minimalize
    G = sorted(G, key=lambda t: key(t[1]))
    minimal = []
    for idx, (p, lt) in enumerate(G):
        if any(_divides(lt2, lt) and (lt2 != lt or j < idx) for j, (_, lt2) in enumerate(G) if j != idx):
            continue
        minimal.append((p, lt))
    out = []
    for idx, (p, lt) in enumerate(minimal):
        others = [t for j, t in enumerate(minimal) if j != idx]
        tail = {e: c for e, c in p.items() if e != lt}
        red = _reduce(tail, others, key, k)
        red[lt] = p[lt]
        out.append((_monic(red, lt, k), lt))
    out.sort(key=lambda t: key(t[1]), reverse=True)
    return out


def groebner(gens: Iterable[LaurentPolynomial], coeffs: Coefficients, rank: int,
             order: MonomialOrder | None = None) -> GroebnerBasis:
    return buchberger(PolyIdeal(list(gens), coeffs, rank, order or MonomialOrder()))


def normal_form(p: LaurentPolynomial, gb: GroebnerBasis) -> LaurentPolynomial:
    """Remainder of ``p`` on division by ``gb``; zero iff ``p`` is in the ideal."""
    if p.rank != gb.rank or p.coeffs != gb.coeffs:
        raise StructuralError("polynomial and basis live in different rings")
    key = gb.order.key(gb.rank)
    basis = [(_to_dict(g), lm) for g, lm in zip(gb.basis, gb.leading_monomials())]
    return _from_dict(_reduce(_to_dict(p), basis, key, gb.coeffs), gb.coeffs, gb.rank)


def ideal_dimension(gb: GroebnerBasis) -> int | str:
    """Krull dimension of the quotient ring, read off the leading monomials.

    The answer is the size of the largest variable set U such that no
    leading monomial is a product of variables from U alone; a unit ideal
    gives ``"empty"``.
    """
    lms = gb.leading_monomials()
    if any(all(x == 0 for x in lm) for lm in lms):
        return EMPTY
    supports = [frozenset(i for i, x in enumerate(lm) if x) for lm in lms]
    n = gb.rank
    for size in range(n, -1, -1):
        for U in combinations(range(n), size):
            Us = set(U)
            if not any(s <= Us for s in supports):
                return size
    return 0  # pragma: no cover - the empty set always qualifies


def _embed(p: LaurentPolynomial, rank: int, positions: Sequence[int]) -> LaurentPolynomial:
    terms = {}
    for e, c in p.terms:
        new = [0] * rank
        for i, x in zip(positions, e):
            new[i] = x
        terms[tuple(new)] = c
    return LaurentPolynomial._raw(terms, p.coeffs, rank)


def _project(p: LaurentPolynomial, positions: Sequence[int]) -> LaurentPolynomial:
    return LaurentPolynomial._raw(
        {tuple(e[i] for i in positions): c for e, c in p.terms}, p.coeffs, len(positions)
    )


def eliminate(ideal: PolyIdeal, variables: Iterable[int]) -> PolyIdeal:
    """Intersection of ``ideal`` with the subring on the other variables.

    The result keeps the ambient rank; its generators simply avoid the
    eliminated variables.
    """
    elim = tuple(sorted(set(variables)))
    if any(not 0 <= v < ideal.rank for v in elim):
        raise ValueError(f"variables {elim} out of range for rank {ideal.rank}")
    if not elim or not ideal.generators:
        return PolyIdeal(list(ideal.generators), ideal.coeffs, ideal.rank)
    gb = buchberger(ideal.with_order(MonomialOrder("block", elim)))
    keep = [g for g in gb.basis if all(e[v] == 0 for e, _ in g.terms for v in elim)]
    return PolyIdeal(keep, ideal.coeffs, ideal.rank)


def saturate(ideal: PolyIdeal, f: LaurentPolynomial) -> PolyIdeal:
    """(I : f^oo) via an extra variable t, the relation t*f - 1 and
    elimination of t."""
    if f.is_zero():
        raise ValueError("cannot saturate by the zero polynomial")
    n = ideal.rank
    k = ideal.coeffs
    pos = list(range(n))
    big = [_embed(g, n + 1, pos) for g in ideal.generators]
    t = LaurentPolynomial.variable(n, k, n + 1)
    big.append(t * _embed(f, n + 1, pos) - LaurentPolynomial.one(k, n + 1))
    out = eliminate(PolyIdeal(big, k, n + 1), [n])
    return PolyIdeal([_project(g, pos) for g in out.generators], k, n, ideal.order)


def laurent_contract(gens: Sequence[LaurentPolynomial], coeffs: Coefficients | None = None,
                     rank: int | None = None) -> PolyIdeal:
    """Polynomial ideal J with J * K[X^{+-1}] = (gens) and J saturated by
    X_1...X_d, i.e. J is the contraction of the Laurent ideal."""
    if gens:
        coeffs = coeffs or gens[0].coeffs
        rank = gens[0].rank if rank is None else rank
    if coeffs is None or rank is None:
        raise ValueError("an empty generator list needs explicit coeffs and rank")
    shifted = []
    for g in gens:
        if g.rank != rank or g.coeffs != coeffs:
            raise StructuralError("generators do not share one ring")
        if g.is_zero():
            continue
        shifted.append(g.shift(tuple(-x for x in g.min_exponents())))
    ideal = PolyIdeal(shifted, coeffs, rank)
    if not shifted or rank == 0:
        return ideal
    prod = LaurentPolynomial.monomial((1,) * rank, coeffs)
    return saturate(ideal, prod)


def laurent_dimension(gens: Sequence[LaurentPolynomial], coeffs: Coefficients, rank: int) -> int | str:
    """Krull dimension of K[X_1^{+-1},...,X_d^{+-1}] / (gens)."""
    return ideal_dimension(buchberger(laurent_contract(gens, coeffs, rank)))


class LaurentQuotient:
    """Canonical normal forms in K[X^{+-1}] / I.

    Works in K[x_1..x_d, y_1..y_d] modulo the contraction of I plus the
    relations x_i y_i - 1; a Laurent monomial X^e maps to x^{e+} y^{e-}.
    Normal forms never contain x_i y_i, so the map back is injective and
    equal classes give identical Laurent polynomials.
    """

    def __init__(self, gens: Sequence[LaurentPolynomial], coeffs: Coefficients, rank: int):
        _require_field(coeffs)
        self.coeffs = coeffs
        self.rank = rank
        self.generators = [g for g in gens if not g.is_zero()]
        n = 2 * rank
        rels = [self._lift(g) for g in self.generators]
        one = LaurentPolynomial.one(coeffs, n)
        for i in range(rank):
            e = [0] * n
            e[i] = 1
            e[rank + i] = 1
            rels.append(LaurentPolynomial.monomial(e, coeffs) - one)
        self.gb = buchberger(PolyIdeal(rels, coeffs, n))
        self._basis = [(_to_dict(g), lm) for g, lm in zip(self.gb.basis, self.gb.leading_monomials())]
        self._key = self.gb.order.key(n)

    def _lift(self, p: LaurentPolynomial) -> LaurentPolynomial:
        d = self.rank
        terms = {}
        for e, c in p.terms:
            terms[tuple(max(x, 0) for x in e) + tuple(max(-x, 0) for x in e)] = c
        return LaurentPolynomial._raw(terms, self.coeffs, 2 * d)

    def _drop(self, d: dict) -> LaurentPolynomial:
        r = self.rank
        return LaurentPolynomial._raw(
            {tuple(e[i] - e[r + i] for i in range(r)): c for e, c in d.items() if c != 0},
            self.coeffs, r,
        )

    def normal_form(self, p: LaurentPolynomial) -> LaurentPolynomial:
        if p.coeffs != self.coeffs:
            p = p.change_coefficients(self.coeffs)
        lifted = _to_dict(self._lift(p))
        return self._drop(_reduce(lifted, self._basis, self._key, self.coeffs))

    def is_zero_ring(self) -> bool:
        return self.gb.is_unit()

    def dimension(self) -> int | str:
        return laurent_dimension(self.generators, self.coeffs, self.rank)
