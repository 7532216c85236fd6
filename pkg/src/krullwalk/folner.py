"""Folner couples: construction, exhaustive verification, products and
descent to quotients.

A couple (Omega, Omega') certifies a return-probability lower bound when
#Omega' >= c0 #Omega, Omega' S^m lies inside Omega, and #Omega <= V(m).
Couples over split groups A x| Z^d are stored as boxes times images of
bounded polynomials, never as element lists.
"""

from __future__ import annotations

import ast
import itertools
import json
import math
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np

from ._backend import kernels
from .grobner import LaurentQuotient
from .groups import FreeAbelian, GroupSpec, SpecMismatch
from .krull import ModulePresentation, parse_presentation
from .ring import Coefficients, LaurentPolynomial, parse_polynomial


class BudgetExceeded(RuntimeError):
    def __init__(self, msg: str, partial=None):
        super().__init__(msg)
        self.partial = partial


class DegenerateInput(ValueError):
    pass


class ProjectionMismatch(ValueError):
    pass


DEFAULT_BUDGET = 50_000_000


# -- rings and split groups --------------------------------------------------

def make_ring(source, coeffs: Coefficients | None = None, rank: int | None = None) -> LaurentQuotient:
    """A cyclic ring F_p[Z^d]/I from a LaurentQuotient, a cyclic presentation,
    presentation text, or a list of generators (strings or polynomials)."""
    if isinstance(source, LaurentQuotient):
        ring = source
    else:
        if isinstance(source, str):
            source = parse_presentation(source)
        if isinstance(source, ModulePresentation):
            if source.n_generators != 1:
                raise ValueError("ring couples need a cyclic presentation")
            coeffs, rank = source.coeffs, source.rank
            gens = [row[0] for row in source.relations]
        else:
            if coeffs is None or rank is None:
                raise ValueError("coefficients and rank are required for a generator list")
            gens = [parse_polynomial(g, coeffs, rank) if isinstance(g, str) else g for g in source]
        ring = LaurentQuotient(gens, coeffs, rank)
    if ring.coeffs.kind != "GF":
        raise ValueError("ring couples need coefficients in a prime field F_p")
    return ring


def ring_text(ring: LaurentQuotient) -> str:
    return ModulePresentation(ring.coeffs, ring.rank, 1, [[g] for g in ring.generators]).to_text()


@dataclass(frozen=True)
class SplitElement:
    mods: tuple[LaurentPolynomial, ...]
    translation: tuple[int, ...]


class SplitGroup(GroupSpec):
    """(A_1 x ... x A_r) x| Z^d, every factor a cyclic ring F_p[Z^d]/I_j with
    Z^d acting diagonally by monomial shift.  One factor gives A x| Z^d."""

    def __init__(self, rings: Sequence[LaurentQuotient]):
        if not rings:
            raise ValueError("need at least one ring")
        ranks = {r.rank for r in rings}
        if len(ranks) != 1:
            raise SpecMismatch("all factors must share the translation rank")
        self.rings = tuple(rings)
        self.rank = rings[0].rank
        self.texts = tuple(ring_text(r) for r in rings)
        self.name = "split[" + " | ".join(t.strip().replace("\n", "; ") for t in self.texts) + "]"

    def __eq__(self, other):
        return isinstance(other, SplitGroup) and self.texts == other.texts

    def __hash__(self):
        return hash(self.texts)

    def __str__(self):
        return self.name

    def identity(self):
        return SplitElement(tuple(LaurentPolynomial.zero(r.coeffs, r.rank) for r in self.rings),
                            (0,) * self.rank)

    def element(self, polys, translation=None) -> SplitElement:
        t = tuple(translation) if translation is not None else (0,) * self.rank
        return SplitElement(tuple(r.normal_form(p) for r, p in zip(self.rings, polys)), t)

    def multiply(self, a: SplitElement, b: SplitElement) -> SplitElement:
        mods = tuple(r.normal_form(f + g.shift(a.translation))
                     for r, f, g in zip(self.rings, a.mods, b.mods))
        return SplitElement(mods, tuple(x + y for x, y in zip(a.translation, b.translation)))

    def inverse(self, a: SplitElement) -> SplitElement:
        t = tuple(-x for x in a.translation)
        return SplitElement(tuple(r.normal_form(-(f.shift(t))) for r, f in zip(self.rings, a.mods)), t)

    def _gens(self):
        out = []
        for i in range(self.rank):
            for s in (1, -1):
                t = [0] * self.rank
                t[i] = s
                zero = self.identity().mods
                out.append((f"t{i + 1}{'' if s > 0 else '^-1'}", SplitElement(zero, tuple(t))))
        e = self.identity()
        for j, r in enumerate(self.rings):
            if r.is_zero_ring():
                continue
            for s in (1, -1):
                polys = [LaurentPolynomial.zero(q.coeffs, q.rank) for q in self.rings]
                polys[j] = LaurentPolynomial.one(r.coeffs, r.rank).scale(s)
                g = self.element(polys)
                if g == e or any(g == h for _, h in out):
                    continue
                label = f"u{j + 1}" if len(self.rings) > 1 else "u"
                out.append((label + ("" if s > 0 else "^-1"), g))
        return out

    def generators(self):
        return [g for _, g in self._gens()]

    def generator_labels(self):
        return [lab for lab, _ in self._gens()]

    def named_generators(self):
        return self.generators()

    def named_labels(self):
        return self.generator_labels()

    def cursor(self, a: SplitElement):
        return a.translation

    def to_json(self, a: SplitElement) -> dict:
        return {"translation": list(a.translation),
                "mods": [[[list(e), int(c)] for e, c in f.terms] for f in a.mods]}

    def from_json(self, obj: dict) -> SplitElement:
        polys = []
        for r, terms in zip(self.rings, obj["mods"]):
            p = LaurentPolynomial.zero(r.coeffs, r.rank)
            for e, c in terms:
                p = p + LaurentPolynomial.monomial(tuple(e), r.coeffs, c)
            polys.append(p)
        return self.element(polys, obj["translation"])

    def serialize(self, a: SplitElement) -> str:
        return json.dumps(self.to_json(a), separators=(",", ":"))


class TrivialGroup(GroupSpec):
    name = "trivial"
    rank = 0

    def identity(self):
        return ()

    def multiply(self, a, b):
        return ()

    def inverse(self, a):
        return ()

    def generators(self):
        return []

    def generator_labels(self):
        return []

    def cursor(self, a):
        return ()

    def to_json(self, a):
        return []

    def serialize(self, a):
        return "e"

    def __str__(self):
        return "trivial"


# -- structured sets ---------------------------------------------------------

def _box_points(box) -> Iterator[tuple[int, ...]]:
    return itertools.product(*[range(lo, hi + 1) for lo, hi in box])


def _box_size(box) -> int:
    return math.prod(hi - lo + 1 for lo, hi in box)


def _in_box(t, box) -> bool:
    return all(lo <= x <= hi for x, (lo, hi) in zip(t, box))


class ModuleSpan:
    """pi(B_R): the image in A = F_p[Z^d]/I of polynomials supported in
    [-R, R]^d.  An F_p-subspace, kept in reduced row echelon form over the
    normal-form monomials."""

    def __init__(self, ring: LaurentQuotient, radius: int, budget: int | None = DEFAULT_BUDGET):
        self.ring = ring
        self.radius = radius
        self.p = ring.coeffs.modulus
        box = [(-radius, radius)] * ring.rank
        if budget is not None and _box_size(box) > budget:
            raise BudgetExceeded(f"{_box_size(box)} monomials exceed the budget {budget}")
        self.rows: list[tuple[tuple, dict]] = []
        if ring.is_zero_ring():
            return
        processed = 0
        for e in _box_points(box):
            nf = ring.normal_form(LaurentPolynomial.monomial(e, ring.coeffs))
            self._insert({m: int(c) % self.p for m, c in nf.terms})
            processed += 1
            if budget is not None and processed * max(1, len(self.rows)) > budget * 50:
                raise BudgetExceeded("row reduction exceeds the budget", self.size)

    def _reduce(self, v: dict) -> dict:
        p = self.p
        v = dict(v)
        for piv, row in self.rows:
            c = v.get(piv, 0)
            if c:
                for mono, a in row.items():
                    nv = (v.get(mono, 0) - c * a) % p
                    if nv:
                        v[mono] = nv
                    else:
                        v.pop(mono, None)
        return v

    def _insert(self, v: dict) -> None:
        v = self._reduce(v)
        if not v:
            return
        p = self.p
        piv = max(v)
        inv = pow(v[piv], -1, p)
        v = {m: (a * inv) % p for m, a in v.items()}
        # keep the echelon form reduced: clear the new pivot from older rows
        new_rows = []
        for q, row in self.rows:
            c = row.get(piv, 0)
            if c:
                row = dict(row)
                for mono, a in v.items():
                    nv = (row.get(mono, 0) - c * a) % p
                    if nv:
                        row[mono] = nv
                    else:
                        row.pop(mono, None)
            new_rows.append((q, row))
        new_rows.append((piv, v))
        self.rows = new_rows

    @property
    def dimension(self) -> int:
        return len(self.rows)

    @property
    def size(self) -> int:
        return self.p ** len(self.rows)

    def contains(self, poly: LaurentPolynomial, normalised: bool = False) -> bool:
        nf = poly if normalised else self.ring.normal_form(poly)
        return not self._reduce({m: int(c) % self.p for m, c in nf.terms})

    def elements(self) -> Iterator[LaurentPolynomial]:
        coeffs, rank, p = self.ring.coeffs, self.ring.rank, self.p
        for combo in itertools.product(range(p), repeat=len(self.rows)):
            acc: dict = {}
            for c, (_, row) in zip(combo, self.rows):
                if c:
                    for mono, a in row.items():
                        acc[mono] = (acc.get(mono, 0) + c * a) % p
            yield LaurentPolynomial._raw({m: a for m, a in acc.items() if a}, coeffs, rank)

    def __eq__(self, other):
        return (isinstance(other, ModuleSpan) and self.ring is other.ring and self.radius == other.radius)

    def __hash__(self):
        return hash((id(self.ring), self.radius))


@dataclass
class SplitSet:
    """M_1 x ... x M_r x box inside a SplitGroup."""

    modules: tuple[ModuleSpan, ...]
    box: tuple[tuple[int, int], ...]

    @property
    def size(self) -> int:
        return math.prod(m.size for m in self.modules) * _box_size(self.box)

    def contains(self, a: SplitElement) -> bool:
        return _in_box(a.translation, self.box) and all(
            m.contains(f, normalised=True) for m, f in zip(self.modules, a.mods))

    def elements(self) -> Iterator[SplitElement]:
        for t in _box_points(self.box):
            for mods in itertools.product(*[m.elements() for m in self.modules]):
                yield SplitElement(tuple(mods), t)


@dataclass
class ExplicitSet:
    members: frozenset

    @property
    def size(self) -> int:
        return len(self.members)

    def contains(self, a) -> bool:
        return a in self.members

    def elements(self):
        return iter(sorted(self.members, key=repr))


@dataclass
class FolnerCouple:
    group: GroupSpec
    omega: SplitSet | ExplicitSet
    omega_prime: SplitSet | ExplicitSet
    m: int
    kind: str = "ring"

    def __post_init__(self):
        if self.omega.size == 0 or self.omega_prime.size == 0:
            raise ValueError("couple sets must be nonempty")

    @property
    def split(self) -> bool:
        return isinstance(self.omega, SplitSet) and isinstance(self.omega_prime, SplitSet)

    @property
    def c0(self) -> Fraction:
        return Fraction(self.omega_prime.size, self.omega.size)


# -- construction ---------------------------------------------------------------

def build_ring_couple(ring, m: int, budget: int | None = DEFAULT_BUDGET) -> FolnerCouple:
    """Omega_m = pi(B_2m) x| [-2m, 2m]^d and Omega'_m = pi(B_2m) x| [-m, m]^d."""
    if m < 0:
        raise ValueError("m must be nonnegative")
    ring = make_ring(ring)
    span = ModuleSpan(ring, 2 * m, budget)
    d = ring.rank
    outer = tuple([(-2 * m, 2 * m)] * d)
    inner = tuple([(-m, m)] * d)
    return FolnerCouple(SplitGroup([ring]), SplitSet((span,), outer), SplitSet((span,), inner), m, "ring")


def noether_size_count(ring, m: int, budget: int | None = DEFAULT_BUDGET) -> int:
    """#pi(B_m) = p^(dimension of the span of normal forms of monomials in [-m, m]^d)."""
    return ModuleSpan(make_ring(ring), m, budget).size


def product_couple(c1: FolnerCouple, c2: FolnerCouple) -> FolnerCouple:
    """Componentwise product over the diagonal-action group; the shared
    translation box is counted once."""
    if not (c1.split and c2.split):
        raise ProjectionMismatch("product couples need split couples")
    if c1.group.rank != c2.group.rank:
        raise ProjectionMismatch("couples live over different translation ranks")
    if c1.omega.box != c2.omega.box or c1.omega_prime.box != c2.omega_prime.box or c1.m != c2.m:
        raise ProjectionMismatch("projection couples to Z^d differ")
    group = SplitGroup(list(c1.group.rings) + list(c2.group.rings))
    omega = SplitSet(c1.omega.modules + c2.omega.modules, c1.omega.box)
    omega_p = SplitSet(c1.omega_prime.modules + c2.omega_prime.modules, c1.omega_prime.box)
    return FolnerCouple(group, omega, omega_p, c1.m, "product")


# -- balls ------------------------------------------------------------------------

def ball(group: GroupSpec, radius: int, gens: Sequence | None = None) -> list:
    """Elements of word length at most ``radius``, by breadth-first search."""
    gens = list(group.generators() if gens is None else gens)
    e = group.identity()
    seen = {e}
    frontier = [e]
    out = [e]
    for _ in range(radius):
        nxt = []
        for a in frontier:
            for g in gens:
                b = group.multiply(a, g)
                if b not in seen:
                    seen.add(b)
                    nxt.append(b)
        out.extend(nxt)
        frontier = nxt
    return out


# -- verification ----------------------------------------------------------------

@dataclass
class CoupleReport:
    c0: Fraction
    c0_required: Fraction | float
    c0_ok: bool
    containment_ok: bool | None
    size: int
    size_bound: float | None
    size_bound_ok: bool | None
    witnesses: list = field(default_factory=list)
    violations: int = 0
    method: str = ""
    pairs_checked: int = 0
    ball_size: int = 0
    sharp: bool | None = None

    @property
    def passed(self) -> bool:
        return bool(self.c0_ok and self.containment_ok and self.size_bound_ok is not False)

    @property
    def indeterminate(self) -> bool:
        return self.containment_ok is None

    def to_dict(self, group: GroupSpec | None = None) -> dict:
        def enc(w):
            if group is None:
                return repr(w)
            elt, b = w
            return {"element": group.to_json(elt), "ball_element": group.to_json(b)}
        return {"c0": str(self.c0), "c0_float": float(self.c0), "c0_required": str(self.c0_required),
                "c0_ok": self.c0_ok, "containment_ok": self.containment_ok, "size": str(self.size),
                "size_bound": self.size_bound, "size_bound_ok": self.size_bound_ok,
                "violations": self.violations, "witnesses": [enc(w) for w in self.witnesses],
                "method": self.method, "pairs_checked": self.pairs_checked,
                "ball_size": self.ball_size, "sharp": self.sharp, "passed": self.passed}


def _packable(c: FolnerCouple) -> bool:
    if not c.split or not isinstance(c.group, SplitGroup) or len(c.group.rings) != 1:
        return False
    ring = c.group.rings[0]
    if ring.rank != 1 or ring.coeffs.modulus != 2 or ring.generators:
        return False
    mo, mi = c.omega.modules[0], c.omega_prime.modules[0]
    return mo.radius == mi.radius


def _mask(poly: LaurentPolynomial, offset: int) -> int:
    out = 0
    for (e,), c in poly.terms:
        if int(c) % 2:
            out |= 1 << (e + offset)
    return out


def _unmask(mask: int, offset: int, ring: LaurentQuotient) -> LaurentPolynomial:
    terms = {}
    i = 0
    while mask:
        if mask & 1:
            terms[(i - offset,)] = 1
        mask >>= 1
        i += 1
    return LaurentPolynomial._raw(terms, ring.coeffs, 1)


def _check_packed(c: FolnerCouple, B: list, max_witnesses: int, threads: int):
    ring = c.group.rings[0]
    R = c.omega.modules[0].radius
    (ilo, ihi), = c.omega_prime.box
    (lo, hi), = c.omega.box
    reach = max((max((abs(e[0]) for e, _ in b.mods[0].terms), default=0) for b in B), default=0)
    offset = max(abs(ilo), abs(ihi)) + max(reach, R) + 1
    if 2 * offset + 2 * R + 1 > 62:
        return None
    bm = np.array([_mask(b.mods[0], offset) for b in B], dtype=np.int64)
    bc = np.array([b.translation[0] for b in B], dtype=np.int64)

    def run(x):
        return kernels.ball_containment_packed(bm, bc, lo, hi, -R, R, x, x, offset, max_witnesses)

    xs = list(range(ilo, ihi + 1))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, xs))
    else:
        parts = [run(x) for x in xs]
    checked = sum(p[0] for p in parts)
    found = sum(p[1] for p in parts)
    wit = []
    for p in parts:
        for pm, x, j in p[2]:
            if len(wit) < max_witnesses:
                wit.append((SplitElement((_unmask(pm, offset, ring),), (x,)), B[j]))
    return checked, found, wit


def _check_generic(c: FolnerCouple, B: list, max_witnesses: int):
    mul = c.group.multiply
    checked = found = 0
    wit = []
    for w in c.omega_prime.elements():
        for b in B:
            checked += 1
            if not c.omega.contains(mul(w, b)):
                found += 1
                if len(wit) < max_witnesses:
                    wit.append((w, b))
    return checked, found, wit


def _check_structured(c: FolnerCouple, B: list, max_witnesses: int):
    """Split couples with subgroup module parts: (f, x) * (g, y) lies in Omega
    iff x + y is in the box and X^x g lies in M, whatever f in M' is."""
    for mi, mo in zip(c.omega_prime.modules, c.omega.modules):
        if not (mi.ring is mo.ring and mi.radius <= mo.radius):
            raise ValueError("structured check needs M' inside M")
    zero = c.group.identity().mods
    checked = found = 0
    wit = []
    cache: dict = {}
    for x in _box_points(c.omega_prime.box):
        for b in B:
            checked += 1
            y = tuple(u + v for u, v in zip(x, b.translation))
            ok = _in_box(y, c.omega.box)
            if ok:
                for k, (mo, g) in enumerate(zip(c.omega.modules, b.mods)):
                    key = (k, x, g)
                    if key not in cache:
                        cache[key] = mo.contains(g.shift(x))
                    if not cache[key]:
                        ok = False
                        break
            if not ok:
                found += 1
                if len(wit) < max_witnesses:
                    wit.append((SplitElement(zero, x), b))
    return checked, found, wit


def verify_couple(couple: FolnerCouple, c0_required=Fraction(1, 2), V: Callable[[int], float] | None = None,
                  method: str = "auto", budget: int = 2_000_000, threads: int = 1,
                  max_witnesses: int = 10, sharpness: bool = True) -> CoupleReport:
    """Check the three couple conditions.

    Containment is checked for every omega in Omega' and every element of
    the ball S^m, which is the set of values of all words of length <= m.
    ``method``: ``exhaustive`` (every pair, compiled for F_2 wr Z),
    ``structured`` (exact reduction for split couples), or ``auto``, which
    runs the exhaustive check when the pair count fits in ``budget`` and
    falls back to the structured check otherwise.
    """
    c0 = couple.c0
    c0_ok = c0 >= c0_required
    size = couple.omega.size
    bound = None
    bound_ok = None
    if V is not None:
        bound = V(couple.m)
        bound_ok = size <= bound
    B = ball(couple.group, couple.m)
    pairs = couple.omega_prime.size * len(B)
    res = None
    used = ""
    if method in ("auto", "exhaustive"):
        if _packable(couple):
            res = _check_packed(couple, B, max_witnesses, threads)
            used = "exhaustive-compiled"
        if res is None and pairs <= budget:
            res = _check_generic(couple, B, max_witnesses)
            used = "exhaustive"
        if res is None and method == "exhaustive":
            return CoupleReport(c0, c0_required, c0_ok, None, size, bound, bound_ok,
                                method="exhaustive (budget exceeded)", ball_size=len(B))
    if res is None:
        if method not in ("auto", "structured"):
            raise ValueError(f"unknown method {method!r}")
        if not couple.split:
            return CoupleReport(c0, c0_required, c0_ok, None, size, bound, bound_ok,
                                method="indeterminate", ball_size=len(B))
        res = _check_structured(couple, B, max_witnesses)
        used = "structured"
    checked, found, wit = res
    sharp = None
    if sharpness and couple.split and found == 0:
        B1 = ball(couple.group, couple.m + 1)
        sharp = _check_structured(couple, B1, 1)[1] > 0
    return CoupleReport(c0, c0_required, c0_ok, found == 0, size, bound, bound_ok, wit, found,
                        used, checked, len(B), sharp)


# -- quotient descent ---------------------------------------------------------------

@dataclass
class DescentResult:
    couple: FolnerCouple
    threshold: int
    ratio: Fraction
    levels: dict  # threshold -> (#{f > t}, boundary ratio)

    def to_dict(self) -> dict:
        return {"threshold": self.threshold, "ratio": str(self.ratio), "ratio_float": float(self.ratio),
                "omega_size": self.couple.omega.size, "omega_prime_size": self.couple.omega_prime.size}


def _projection(couple: FolnerCouple, projection):
    if callable(projection):
        fn, target = projection
        return fn, target
    if projection == "cursor":
        return couple.group.cursor, FreeAbelian(couple.group.rank)
    if projection == "identity":
        return (lambda a: a), couple.group
    if projection == "trivial":
        return (lambda a: ()), TrivialGroup()
    raise ValueError(f"unknown projection {projection!r}")


def n_boundary(group: GroupSpec, A: set, n: int, B: list | None = None) -> set:
    """AS^n intersected with A^c S^n."""
    B = ball(group, n) if B is None else B
    mul = group.multiply
    reach = {mul(a, b) for a in A for b in B}
    # y lies in A^c S^n iff y b is outside A for some b (the ball is symmetric)
    return {y for y in reach if any(mul(y, b) not in A for b in B)}


def quotient_descent(couple: FolnerCouple, projection="cursor", n: int | None = None,
                     budget: int = DEFAULT_BUDGET) -> DescentResult:
    """Push Omega' down to Q, sweep the level sets {f > t} of the fibre count
    f(q) = #(Omega' over q), keep the one with the smallest n-boundary ratio
    (ties to the larger set) and return ({f > t} + boundary, {f > t})."""
    n = couple.m if n is None else n
    if isinstance(projection, tuple):
        fn, target = projection
    else:
        fn, target = _projection(couple, projection)
    f: dict = {}
    if couple.split and projection == "cursor":
        per = math.prod(mod.size for mod in couple.omega_prime.modules)
        for x in _box_points(couple.omega_prime.box):
            f[x] = per
    else:
        if couple.omega_prime.size > budget:
            raise BudgetExceeded("Omega' is too large to enumerate", couple.omega_prime.size)
        for w in couple.omega_prime.elements():
            q = fn(w)
            f[q] = f.get(q, 0) + 1
    values = sorted(set(f.values()))
    B = ball(target, n)
    best = None
    levels = {}
    for t in [0] + values:
        A = {q for q, v in f.items() if v > t}
        if not A:
            continue
        bd = n_boundary(target, A, n, B)
        ratio = Fraction(len(bd), len(A))
        levels[t] = (len(A), ratio)
        if best is None or ratio < best[1] or (ratio == best[1] and len(A) > len(best[2])):
            best = (t, ratio, A, bd)
    if best is None:
        raise DegenerateInput("every level set is empty")
    t, ratio, A, bd = best
    q_couple = FolnerCouple(target, ExplicitSet(frozenset(A | bd)), ExplicitSet(frozenset(A)), n, "explicit")
    return DescentResult(q_couple, t, ratio, levels)


# -- growth fits ---------------------------------------------------------------------

@dataclass
class GrowthFit:
    k_hat: float
    log_C: float
    rate: float
    ms: list
    sizes: list
    residual_norm: float

    def to_dict(self) -> dict:
        return {"k_hat": self.k_hat, "log_C": self.log_C, "rate": self.rate,
                "ms": list(self.ms), "sizes": [str(s) for s in self.sizes],
                "residual_norm": self.residual_norm}


def fit_growth(sizes: Sequence, ms: Sequence) -> GrowthFit:
    """Least-squares fit of log size = a + b m^k, k by one-dimensional search."""
    if len(sizes) != len(ms) or len(ms) < 4:
        raise DegenerateInput("need at least 4 (m, size) pairs")
    if any(b <= a for a, b in zip(ms, ms[1:])):
        raise DegenerateInput("m values must increase")
    if any(s <= 0 for s in sizes):
        raise DegenerateInput("sizes must be positive")
    y = np.array([math.log(s) if not isinstance(s, int) else _log_int(s) for s in sizes])
    m = np.array(ms, dtype=float)
    if np.ptp(y) < 1e-12:
        raise DegenerateInput("constant sizes")
    if np.any(m <= 0):
        raise DegenerateInput("m values must be positive")
    logm = np.log(m)

    def solve(k):
        A = np.column_stack([np.ones_like(m), np.exp(k * logm)])
        coef, *_ = np.linalg.lstsq(A, y, rcond=None)
        r = y - A @ coef
        return coef, float(r @ r)

    grid = np.linspace(0.02, 6.0, 600)
    vals = [solve(k)[1] for k in grid]
    i = int(np.argmin(vals))
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    g = (math.sqrt(5) - 1) / 2
    x1, x2 = b - g * (b - a), a + g * (b - a)
    f1, f2 = solve(x1)[1], solve(x2)[1]
    while b - a > 1e-12:
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - g * (b - a)
            f1 = solve(x1)[1]
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + g * (b - a)
            f2 = solve(x2)[1]
    k = (a + b) / 2
    coef, rss = solve(k)
    if coef[1] <= 0:
        raise DegenerateInput("sizes do not grow")
    return GrowthFit(float(k), float(coef[0]), float(coef[1]), list(ms), list(sizes), math.sqrt(rss))


def _log_int(n: int) -> float:
    # exact-ish log of a big integer without float overflow
    if n < 1 << 1000:
        return math.log(n)
    shift = n.bit_length() - 60
    return math.log(n >> shift) + shift * math.log(2)


# -- size functions --------------------------------------------------------------------

_ALLOWED_FUNCS = {"exp": math.exp, "log": math.log, "sqrt": math.sqrt}


def parse_size_function(expr: str, **params) -> Callable[[int], float]:
    """Turn ``"C*exp(C*m^k)"``-style text into V(m).  Free names other than
    ``m`` must be supplied in ``params``; ``^`` means power."""
    tree = ast.parse(expr.replace("^", "**"), mode="eval")
    names = set()
    for node in ast.walk(tree):
        if isinstance(node, ast.Name):
            names.add(node.id)
        elif isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.func.id not in _ALLOWED_FUNCS:
                raise ValueError("only exp, log and sqrt may be called")
        elif not isinstance(node, (ast.Expression, ast.BinOp, ast.UnaryOp, ast.Constant, ast.Load,
                                   ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow, ast.USub, ast.UAdd)):
            raise ValueError(f"unsupported syntax in size function: {type(node).__name__}")
    free = names - set(_ALLOWED_FUNCS) - {"m"} - set(params)
    if free:
        raise ValueError(f"size function needs values for {sorted(free)}")
    code = compile(tree, "<size>", "eval")

    def V(m):
        env = dict(_ALLOWED_FUNCS)
        env.update(params)
        env["m"] = m
        try:
            return eval(code, {"__builtins__": {}}, env)
        except OverflowError:
            return math.inf
    return V


# -- couple files --------------------------------------------------------------------

def couple_to_json(couple: FolnerCouple) -> dict:
    if couple.split:
        return {"kind": couple.kind, "group": str(couple.group),
                "rings": list(couple.group.texts), "m": couple.m,
                "module_radius": [mod.radius for mod in couple.omega.modules],
                "module_radius_prime": [mod.radius for mod in couple.omega_prime.modules],
                "boxes": {"omega": [list(b) for b in couple.omega.box],
                          "omega_prime": [list(b) for b in couple.omega_prime.box]},
                "sizes": {"omega": str(couple.omega.size), "omega_prime": str(couple.omega_prime.size)}}
    g = couple.group
    enc = g.to_json if not isinstance(g, FreeAbelian) else (lambda a: list(a))
    return {"kind": "explicit", "group": "trivial" if isinstance(g, TrivialGroup) else str(g),
            "rings": list(g.texts) if isinstance(g, SplitGroup) else None, "m": couple.m,
            "omega": [enc(a) for a in couple.omega.elements()],
            "omega_prime": [enc(a) for a in couple.omega_prime.elements()]}


def couple_from_json(obj: dict) -> FolnerCouple:
    kind = obj.get("kind", "ring")
    m = int(obj["m"])
    if kind == "explicit":
        gname = obj["group"]
        if obj.get("rings"):
            group = SplitGroup([make_ring(t) for t in obj["rings"]])
            dec = group.from_json
        elif gname == "trivial":
            group, dec = TrivialGroup(), (lambda a: ())
        else:
            from .groups import parse_group_spec
            group = parse_group_spec(gname)
            if not isinstance(group, FreeAbelian):
                raise ValueError("explicit couples are supported over Z^d and split groups")
            dec = tuple
        om = ExplicitSet(frozenset(dec(a) for a in obj["omega"]))
        omp = ExplicitSet(frozenset(dec(a) for a in obj["omega_prime"]))
        return FolnerCouple(group, om, omp, m, "explicit")
    rings = [make_ring(t) for t in (obj.get("rings") or [obj["ring"]])]
    group = SplitGroup(rings)
    boxes = obj.get("boxes")
    d = rings[0].rank
    if boxes is None:
        boxes = {"omega": [[-2 * m, 2 * m]] * d, "omega_prime": [[-m, m]] * d}
    radii = obj.get("module_radius") or [2 * m] * len(rings)
    radii_p = obj.get("module_radius_prime") or radii
    spans = {}

    def span(r, R):
        key = (id(r), R)
        if key not in spans:
            spans[key] = ModuleSpan(r, R)
        return spans[key]
    om = SplitSet(tuple(span(r, R) for r, R in zip(rings, radii)), tuple(tuple(b) for b in boxes["omega"]))
    omp = SplitSet(tuple(span(r, R) for r, R in zip(rings, radii_p)),
                   tuple(tuple(b) for b in boxes["omega_prime"]))
    return FolnerCouple(group, om, omp, m, kind)


def load_couple(path) -> FolnerCouple:
    with open(path) as fh:
        return couple_from_json(json.load(fh))
