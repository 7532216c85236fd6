"""Exact arithmetic in the metabelian families used throughout the package.

Every family exposes the same small contract: ``identity()``,
``multiply(a, b)``, ``inverse(a)``, ``generators()`` (the canonical finite
symmetric generating set) and ``serialize(a)`` (a canonical string key).
Elements are frozen dataclasses, so equal elements hash equally.
"""
from __future__ import annotations

import random
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .grobner import LaurentQuotient
from .ring import Coefficients, ExponentVector, LaurentPolynomial, is_prime

Lamps = tuple  # tuple[(site, values), ...] sorted by site


class SpecMismatch(ValueError):
    pass


def _vadd(a: Sequence[int], b: Sequence[int]) -> tuple[int, ...]:
    return tuple(x + y for x, y in zip(a, b))


def _vneg(a: Sequence[int]) -> tuple[int, ...]:
    return tuple(-x for x in a)


def _unit(d: int, i: int, sign: int = 1) -> tuple[int, ...]:
    return tuple(sign if j == i else 0 for j in range(d))


@dataclass(frozen=True)
class LampProgram:
    """A generator written as lamp updates followed by a cursor move.

    ``updates`` holds ``(colour, offset, delta)``: add ``delta`` to lamp
    ``colour`` at ``cursor + offset``.  Right multiplication by the generator
    applies the updates, then moves the cursor.  Used by the compiled walk
    kernels.
    """

    updates: tuple[tuple[int, tuple[int, ...], int], ...]
    move: tuple[int, ...]


class GroupSpec:
    name = "group"
    rank = 0  # rank of the free abelian quotient the cursor lives in

    def identity(self):
        raise NotImplementedError

    def multiply(self, a, b):
        raise NotImplementedError

    def inverse(self, a):
        raise NotImplementedError

    def generators(self) -> list:
        raise NotImplementedError

    def generator_labels(self) -> list[str]:
        raise NotImplementedError

    def named_generators(self) -> list:
        """Non-symmetric basis used by :func:`word_evaluate` (1-based)."""
        raise NotImplementedError

    def named_labels(self) -> list[str]:
        raise NotImplementedError

    def serialize(self, a) -> str:
        raise NotImplementedError

    def to_json(self, a) -> dict:
        raise NotImplementedError

    def cursor(self, a) -> tuple[int, ...]:
        raise NotImplementedError

    def lamp_programs(self) -> tuple[int, int, list[LampProgram]] | None:
        """``(colours, modulus, programs)`` aligned with ``generators()``, or
        None when the family has no lamp encoding."""
        return None

    element_type: type = object

    def check(self, a):
        """Raise :class:`SpecMismatch` unless ``a`` is an element of this family."""
        if not isinstance(a, self.element_type):
            raise SpecMismatch(f"{type(a).__name__} is not an element of {self.name}")
        cur = self.cursor(a)
        if len(cur) != self.rank:
            raise SpecMismatch(f"element of rank {len(cur)} used in {self.name}")
        return a

    def __eq__(self, other):
        return type(self) is type(other) and self.__dict__ == other.__dict__

    def __hash__(self):
        return hash((type(self).__name__, str(self)))

    def __str__(self):
        return self.name


# -- Z^d ------------------------------------------------------------------

class FreeAbelian(GroupSpec):
    element_type = tuple

    def __init__(self, d: int):
        if d < 1:
            raise ValueError("d must be >= 1")
        self.rank = d
        self.name = f"zd:{d}"

    def identity(self):
        return (0,) * self.rank

    def multiply(self, a, b):
        return _vadd(a, b)

    def inverse(self, a):
        return _vneg(a)

    def generators(self):
        return [_unit(self.rank, i, s) for i in range(self.rank) for s in (1, -1)]

    def generator_labels(self):
        return [f"e{i + 1}{'' if s > 0 else '^-1'}" for i in range(self.rank) for s in (1, -1)]

    def named_generators(self):
        return [_unit(self.rank, i) for i in range(self.rank)]

    def named_labels(self):
        return [f"e{i + 1}" for i in range(self.rank)]

    def serialize(self, a):
        return "Z|" + ",".join(map(str, a))

    def to_json(self, a):
        return {"cursor": list(a)}

    def cursor(self, a):
        return tuple(a)

    def lamp_programs(self):
        return 1, 0, [LampProgram((), g) for g in self.generators()]


# -- wreath products K wr Z^d ----------------------------------------------

@dataclass(frozen=True)
class WreathElement:
    lamps: Lamps
    cursor: tuple[int, ...]


class Wreath(GroupSpec):
    """(K^r) wr Z^d with K = Z/kZ (``modulus`` k >= 2) or Z (``modulus`` 0)."""

    element_type = WreathElement

    def __init__(self, d: int, modulus: int, colors: int = 1, name: str | None = None):
        if d < 1:
            raise ValueError("d must be >= 1")
        if modulus == 1 or modulus < 0:
            raise ValueError("lamp modulus must be 0 (integers) or >= 2")
        self.rank = d
        self.modulus = modulus
        self.colors = colors
        self.name = name or (f"lamplighter:p={modulus},d={d}" if modulus else f"wreath-z:d={d}")

    def _norm(self, v: int) -> int:
        return v % self.modulus if self.modulus else v

    def _combine(self, f: Lamps, g: Lamps, shift: Sequence[int], sign: int = 1) -> Lamps:
        acc = dict(f)
        for site, vals in g:
            s = _vadd(site, shift)
            old = acc.get(s, (0,) * self.colors)
            new = tuple(self._norm(a + sign * b) for a, b in zip(old, vals))
            if any(new):
                acc[s] = new
            else:
                acc.pop(s, None)
        return tuple(sorted(acc.items()))

    def identity(self):
        return WreathElement((), (0,) * self.rank)

    def multiply(self, a: WreathElement, b: WreathElement) -> WreathElement:
        # (f, h)(f', h') = (f + f'(. - h), h + h')
        return WreathElement(self._combine(a.lamps, b.lamps, a.cursor), _vadd(a.cursor, b.cursor))

    def inverse(self, a: WreathElement) -> WreathElement:
        c = _vneg(a.cursor)
        return WreathElement(self._combine((), a.lamps, c, -1), c)

    def lamp(self, color: int = 0, value: int = 1, site=None) -> WreathElement:
        site = tuple(site) if site is not None else (0,) * self.rank
        vals = tuple(self._norm(value) if j == color else 0 for j in range(self.colors))
        return WreathElement(((site, vals),) if any(vals) else (), (0,) * self.rank)

    def step(self, i: int, sign: int = 1) -> WreathElement:
        return WreathElement((), _unit(self.rank, i, sign))

    def generators(self):
        gens = [self.step(i, s) for i in range(self.rank) for s in (1, -1)]
        for c in range(self.colors):
            gens.append(self.lamp(c, 1))
            if self.modulus != 2:
                gens.append(self.lamp(c, -1))
        return gens

    def generator_labels(self):
        labels = [f"t{i + 1}{'' if s > 0 else '^-1'}" for i in range(self.rank) for s in (1, -1)]
        for c in range(self.colors):
            a = "a" if self.colors == 1 else f"a{c + 1}"
            labels.append(a)
            if self.modulus != 2:
                labels.append(a + "^-1")
        return labels

    def named_generators(self):
        return [self.step(i) for i in range(self.rank)] + [self.lamp(c) for c in range(self.colors)]

    def named_labels(self):
        return [f"t{i + 1}" for i in range(self.rank)] + (
            ["a"] if self.colors == 1 else [f"a{c + 1}" for c in range(self.colors)])

    def serialize(self, a: WreathElement) -> str:
        body = ";".join(",".join(map(str, s)) + ":" + ",".join(map(str, v)) for s, v in a.lamps)
        return f"W|{','.join(map(str, a.cursor))}|{len(a.lamps)}|{body}"

    def to_json(self, a: WreathElement) -> dict:
        return {"cursor": list(a.cursor), "lamps": [[list(s), list(v)] for s, v in a.lamps]}

    def cursor(self, a: WreathElement):
        return a.cursor

    def lamp_programs(self):
        progs = [LampProgram((), _unit(self.rank, i, s)) for i in range(self.rank) for s in (1, -1)]
        zero = (0,) * self.rank
        for c in range(self.colors):
            progs.append(LampProgram(((c, zero, 1),), zero))
            if self.modulus != 2:
                progs.append(LampProgram(((c, zero, -1),), zero))
        return self.colors, self.modulus, progs


# -- Magnus / Bachmuth matrices -------------------------------------------

@dataclass(frozen=True)
class MagnusElement:
    """The matrix (X^b, m; 0, 1) with b in Z^d and m in the free module of rank d."""

    abelian_part: tuple[int, ...]
    module_part: tuple[LaurentPolynomial, ...]


class Magnus(GroupSpec):
    """Free metabelian group B_d (modulus 0) or free k-metabelian B_d^(k)."""

    element_type = MagnusElement

    def __init__(self, d: int, modulus: int = 0):
        if d < 1:
            raise ValueError("d must be >= 1")
        if modulus == 1 or modulus < 0:
            raise ValueError("modulus must be 0 or >= 2")
        self.rank = d
        self.modulus = modulus
        self.coeffs = Coefficients.integers_mod(modulus) if modulus else Coefficients.integers()
        self.name = f"p-metabelian:d={d},p={modulus}" if modulus else f"free-metabelian:d={d}"

    def identity(self):
        z = LaurentPolynomial.zero(self.coeffs, self.rank)
        return MagnusElement((0,) * self.rank, (z,) * self.rank)

    def multiply(self, a: MagnusElement, b: MagnusElement) -> MagnusElement:
        # (b, m)(b', m') = (b + b', m + X^b m')
        mod = tuple(x + y.shift(a.abelian_part) for x, y in zip(a.module_part, b.module_part))
        return MagnusElement(_vadd(a.abelian_part, b.abelian_part), mod)

    def inverse(self, a: MagnusElement) -> MagnusElement:
        nb = _vneg(a.abelian_part)
        return MagnusElement(nb, tuple(-(m.shift(nb)) for m in a.module_part))

    def generator(self, i: int) -> MagnusElement:
        """s_i for 1 <= i <= d: abelian part a_i, module part e_i."""
        if not 1 <= i <= self.rank:
            raise IndexError(f"generator index {i} out of range 1..{self.rank}")
        z = LaurentPolynomial.zero(self.coeffs, self.rank)
        one = LaurentPolynomial.one(self.coeffs, self.rank)
        mod = tuple(one if j == i - 1 else z for j in range(self.rank))
        return MagnusElement(_unit(self.rank, i - 1), mod)

    def generators(self):
        out = []
        for i in range(1, self.rank + 1):
            g = self.generator(i)
            out += [g, self.inverse(g)]
        return out

    def generator_labels(self):
        return [f"s{i}{'' if s > 0 else '^-1'}" for i in range(1, self.rank + 1) for s in (1, -1)]

    def named_generators(self):
        return [self.generator(i) for i in range(1, self.rank + 1)]

    def named_labels(self):
        return [f"s{i}" for i in range(1, self.rank + 1)]

    def serialize(self, a: MagnusElement) -> str:
        parts = []
        for m in a.module_part:
            parts.append(f"{len(m.terms)}:" + ";".join(",".join(map(str, e)) + "=" + str(c) for e, c in m.terms))
        return f"M|{','.join(map(str, a.abelian_part))}|" + "|".join(parts)

    def to_json(self, a: MagnusElement) -> dict:
        return {
            "abelian_part": list(a.abelian_part),
            "terms": [[[list(e), int(c)] for e, c in m.terms] for m in a.module_part],
        }

    def cursor(self, a: MagnusElement):
        return a.abelian_part

    def lamp_programs(self):
        zero = (0,) * self.rank
        progs = []
        for i in range(self.rank):
            ai = _unit(self.rank, i)
            progs.append(LampProgram(((i, zero, 1),), ai))
            progs.append(LampProgram(((i, _vneg(ai), -1),), _vneg(ai)))
        return self.rank, self.modulus, progs


def magnus_generator(spec: Magnus, i: int) -> MagnusElement:
    return spec.generator(i)


# -- split extensions (F_p[Z^d]/I) x| Z^d ----------------------------------

@dataclass(frozen=True)
class SemidirectElement:
    module_elt: LaurentPolynomial
    translation: tuple[int, ...]


class RingSemidirect(GroupSpec):
    """A x| Z^d for the cyclic ring A = F_p[Z^d]/I acting by monomial shift."""

    element_type = SemidirectElement

    def __init__(self, ring: LaurentQuotient, name: str | None = None):
        if ring.coeffs.kind != "GF":
            raise ValueError("ring_semidirect needs a prime field F_p")
        self.ring = ring
        self.rank = ring.rank
        self.coeffs = ring.coeffs
        rels = ";".join(str(g) for g in ring.generators) or "0"
        self.name = name or f"ring-semidirect:p={ring.coeffs.modulus},d={ring.rank},I=({rels})"

    def __eq__(self, other):
        return isinstance(other, RingSemidirect) and self.name == other.name

    def __hash__(self):
        return hash(self.name)

    def element(self, poly: LaurentPolynomial, translation=None) -> SemidirectElement:
        t = tuple(translation) if translation is not None else (0,) * self.rank
        return SemidirectElement(self.ring.normal_form(poly), t)

    def identity(self):
        return SemidirectElement(LaurentPolynomial.zero(self.coeffs, self.rank), (0,) * self.rank)

    def multiply(self, a: SemidirectElement, b: SemidirectElement) -> SemidirectElement:
        m = self.ring.normal_form(a.module_elt + b.module_elt.shift(a.translation))
        return SemidirectElement(m, _vadd(a.translation, b.translation))

    def inverse(self, a: SemidirectElement) -> SemidirectElement:
        t = _vneg(a.translation)
        return SemidirectElement(self.ring.normal_form(-(a.module_elt.shift(t))), t)

    def unit(self, sign: int = 1) -> SemidirectElement:
        return self.element(LaurentPolynomial.one(self.coeffs, self.rank).scale(sign))

    def translation(self, i: int, sign: int = 1) -> SemidirectElement:
        return SemidirectElement(LaurentPolynomial.zero(self.coeffs, self.rank), _unit(self.rank, i, sign))

    def generators(self):
        gens = [self.translation(i, s) for i in range(self.rank) for s in (1, -1)]
        u, v = self.unit(1), self.unit(-1)
        if u != self.identity():
            gens.append(u)
            if v != u:
                gens.append(v)
        return gens

    def generator_labels(self):
        labels = [f"t{i + 1}{'' if s > 0 else '^-1'}" for i in range(self.rank) for s in (1, -1)]
        u, v = self.unit(1), self.unit(-1)
        if u != self.identity():
            labels.append("u")
            if v != u:
                labels.append("u^-1")
        return labels

    def named_generators(self):
        return [self.translation(i) for i in range(self.rank)] + [self.unit()]

    def named_labels(self):
        return [f"t{i + 1}" for i in range(self.rank)] + ["u"]

    def serialize(self, a: SemidirectElement) -> str:
        m = a.module_elt
        body = ";".join(",".join(map(str, e)) + "=" + str(c) for e, c in m.terms)
        return f"S|{','.join(map(str, a.translation))}|{len(m.terms)}|{body}"

    def to_json(self, a: SemidirectElement) -> dict:
        return {"translation": list(a.translation),
                "terms": [[list(e), int(c)] for e, c in a.module_elt.terms]}

    def cursor(self, a: SemidirectElement):
        return a.translation

    def lamp_programs(self):
        # only the free ring F_p[Z^d] is a plain wreath product
        if self.ring.generators:
            return None
        p = self.coeffs.modulus
        progs = [LampProgram((), _unit(self.rank, i, s)) for i in range(self.rank) for s in (1, -1)]
        zero = (0,) * self.rank
        progs.append(LampProgram(((0, zero, 1),), zero))
        if p != 2:
            progs.append(LampProgram(((0, zero, -1),), zero))
        return 1, p, progs


# -- cocycle extensions and the Kaloujinine-Krasner embedding -----------------

class LaurentModule:
    """Z^d-module coeffs[Z^d] with the shift action."""

    def __init__(self, coeffs: Coefficients, rank: int):
        self.coeffs = coeffs
        self.rank = rank

    def zero(self):
        return LaurentPolynomial.zero(self.coeffs, self.rank)

    def add(self, a, b):
        return a + b

    def neg(self, a):
        return -a

    def act(self, q, m):
        return m.shift(q)

    def random(self, rng: random.Random, radius: int = 2, terms: int = 3):
        t = {}
        for _ in range(terms):
            e = tuple(rng.randint(-radius, radius) for _ in range(self.rank))
            t[e] = rng.randint(-3, 3)
        return LaurentPolynomial(t, self.coeffs, self.rank)


class TrivialModule:
    """Z^r (or (Z/k)^r) with trivial Z^d-action."""

    def __init__(self, r: int = 1, modulus: int = 0):
        self.r = r
        self.modulus = modulus

    def _n(self, v):
        return tuple(x % self.modulus for x in v) if self.modulus else tuple(v)

    def zero(self):
        return (0,) * self.r

    def add(self, a, b):
        return self._n(_vadd(a, b))

    def neg(self, a):
        return self._n(_vneg(a))

    def act(self, q, m):
        return m

    def random(self, rng: random.Random, radius: int = 2, terms: int = 3):
        return self._n(tuple(rng.randint(-5, 5) for _ in range(self.r)))


@dataclass(frozen=True)
class CocycleExtElement:
    m: object
    q: tuple[int, ...]


class CocycleExtension(GroupSpec):
    """Extension of a Z^d-module M by Q = Z^d defined by a 2-cocycle.

    Multiplication: (m, q)(m', q') = (m + q.m' + sigma(q, q'), q + q').
    ``cocycle`` must be normalised (sigma(0, q) = sigma(q, 0) = 0).
    """

    element_type = CocycleExtElement

    def __init__(self, module, rank: int, cocycle: Callable, generators: Sequence | None = None,
                 name: str = "cocycle-extension"):
        self.module = module
        self.rank = rank
        self.cocycle = cocycle
        self.name = name
        self._gens = list(generators) if generators is not None else None

    def identity(self):
        return CocycleExtElement(self.module.zero(), (0,) * self.rank)

    def multiply(self, a, b):
        M = self.module
        m = M.add(M.add(a.m, M.act(a.q, b.m)), self.cocycle(a.q, b.q))
        return CocycleExtElement(m, _vadd(a.q, b.q))

    def inverse(self, a):
        # (a, r)^{-1} = (-r^{-1}.(a + sigma(r, r^{-1})), r^{-1})
        M = self.module
        r_inv = _vneg(a.q)
        m = M.neg(M.act(r_inv, M.add(a.m, self.cocycle(a.q, r_inv))))
        return CocycleExtElement(m, r_inv)

    def section(self, q) -> CocycleExtElement:
        return CocycleExtElement(self.module.zero(), tuple(q))

    def generators(self):
        if self._gens is None:
            raise ValueError("this extension has no generating set attached")
        out = []
        for g in self._gens:
            out += [g, self.inverse(g)]
        return out

    def generator_labels(self):
        return [f"g{i + 1}{'' if s > 0 else '^-1'}" for i in range(len(self._gens or [])) for s in (1, -1)]

    def named_generators(self):
        return list(self._gens or [])

    def named_labels(self):
        return [f"g{i + 1}" for i in range(len(self._gens or []))]

    def serialize(self, a):
        return f"C|{','.join(map(str, a.q))}|{a.m}"

    def to_json(self, a):
        return {"q": list(a.q), "m": str(a.m)}

    def cursor(self, a):
        return a.q

    def random_element(self, rng: random.Random, radius: int = 3):
        q = tuple(rng.randint(-radius, radius) for _ in range(self.rank))
        return CocycleExtElement(self.module.random(rng), q)

    def cocycle_defect(self, q1, q2, q3):
        """q1.s(q2, q3) - s(q1 + q2, q3) + s(q1, q2 + q3) - s(q1, q2); zero for a cocycle."""
        M, s = self.module, self.cocycle
        a = M.add(M.act(q1, s(q2, q3)), M.neg(s(_vadd(q1, q2), q3)))
        b = M.add(s(q1, _vadd(q2, q3)), M.neg(s(q1, q2)))
        return M.add(a, b)


def heisenberg_extension() -> CocycleExtension:
    """Z central by Z^2 with sigma(q, q') = q_1 q'_2 (the Heisenberg group)."""
    M = TrivialModule(1)
    ext = CocycleExtension(M, 2, lambda q, r: (q[0] * r[1],), name="heisenberg")
    ext._gens = [ext.section((1, 0)), ext.section((0, 1))]
    return ext


@dataclass
class KKImage:
    """Finite window of the function f_g : Q -> M together with the image of g in Q."""

    table: dict
    cursor: tuple[int, ...]


def kk_value(ext: CocycleExtension, g: CocycleExtElement, q) -> object:
    """f_g(q) = s(gq)^{-1} g s(q) with the section s(q) = (0, q)."""
    q = tuple(q)
    gq = _vadd(g.q, q)
    prod = ext.multiply(ext.inverse(ext.section(gq)), ext.multiply(g, ext.section(q)))
    if any(prod.q):
        raise AssertionError("section product left the kernel")  # pragma: no cover
    return prod.m


def kk_embed(ext: CocycleExtension, g: CocycleExtElement, support: Iterable) -> KKImage:
    return KKImage({tuple(q): kk_value(ext, g, q) for q in support}, tuple(g.q))


def kk_product(ext: CocycleExtension, g: CocycleExtElement, h: CocycleExtElement, support: Iterable) -> KKImage:
    """Window of kk(g) * kk(h) in the unrestricted wreath product.

    With f_g(q) = s(gq)^{-1} g s(q) the law is
    (f_g * f_h)(q) = f_g(hbar q) + f_h(q).
    """
    M = ext.module
    table = {}
    for q in support:
        q = tuple(q)
        table[q] = M.add(kk_value(ext, g, _vadd(h.q, q)), kk_value(ext, h, q))
    return KKImage(table, _vadd(g.q, h.q))


# -- words and relations ----------------------------------------------------

def word_evaluate(spec: GroupSpec, word: Sequence[int]):
    """Left-to-right product; index i > 0 is the i-th named generator, -i its inverse."""
    named = spec.named_generators()
    out = spec.identity()
    for idx in word:
        if idx == 0 or abs(idx) > len(named):
            raise IndexError(f"generator index {idx} out of range 1..{len(named)}")
        g = named[abs(idx) - 1]
        out = spec.multiply(out, g if idx > 0 else spec.inverse(g))
    return out


def power(spec: GroupSpec, a, n: int):
    if n < 0:
        a, n = spec.inverse(a), -n
    out = spec.identity()
    while n:
        if n & 1:
            out = spec.multiply(out, a)
        a = spec.multiply(a, a)
        n >>= 1
    return out


def commutator(spec: GroupSpec, a, b):
    """[a, b] = a b a^-1 b^-1."""
    return spec.multiply(spec.multiply(a, b), spec.multiply(spec.inverse(a), spec.inverse(b)))


_TOKEN = re.compile(r"\s*(\[|\]|,|\^|\*|\(|\)|-?\d+|[A-Za-z_][A-Za-z_0-9]*(?:\^-1)?)")


def _tokenize(text: str) -> list[str]:
    pos, out = 0, []
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ValueError(f"cannot parse law {text!r} at {pos}")
        out.append(m.group(1))
        pos = m.end()
    return out


def evaluate_law(spec: GroupSpec, law: str, env: dict):
    """Evaluate a word law such as ``[[w1,w2],[w3,w4]]`` or ``[w1,w2]^3``.

    Names starting with ``w`` are looked up in ``env``; other names are the
    family's named generators (``t1``, ``a``, ``s2``, ...).
    """
    toks = _tokenize(law)
    pos = 0
    named = dict(zip(spec.named_labels(), spec.named_generators()))

    def peek():
        return toks[pos] if pos < len(toks) else None

    def eat(t=None):
        nonlocal pos
        tok = peek()
        if tok is None or (t is not None and tok != t):
            raise ValueError(f"expected {t!r} in law {law!r}")
        pos += 1
        return tok

    def term():
        x = factor()
        while peek() == "*":
            eat("*")
            x = spec.multiply(x, factor())
        return x

    def factor():
        x = atom()
        if peek() == "^":
            eat("^")
            x = power(spec, x, int(eat()))
        return x

    def atom():
        tok = peek()
        if tok == "[":
            eat("[")
            a = term()
            eat(",")
            b = term()
            eat("]")
            return commutator(spec, a, b)
        if tok == "(":
            eat("(")
            x = term()
            eat(")")
            return x
        if tok is None:
            raise ValueError(f"unexpected end of law {law!r}")
        eat()
        inv = tok.endswith("^-1")
        name = tok[:-3] if inv else tok
        if name in env:
            x = env[name]
        elif name in named:
            x = named[name]
        elif name == "e":
            x = spec.identity()
        else:
            raise ValueError(f"unknown name {name!r} in law {law!r}")
        return spec.inverse(x) if inv else x

    val = term()
    if pos != len(toks):
        raise ValueError(f"trailing input in law {law!r}")
    return val


@dataclass
class RelationReport:
    trials: int
    checked: int = 0
    violations: list[dict] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {"trials": self.trials, "checked": self.checked, "passed": self.passed,
                "violations": self.violations}


def random_word(rng: random.Random, n_named: int, max_len: int) -> list[int]:
    length = rng.randint(0, max_len)
    return [rng.choice([1, -1]) * rng.randint(1, n_named) for _ in range(length)]


def verify_relations(spec: GroupSpec, relations: Sequence[str], trials: int = 100, seed: int = 0,
                     max_len: int = 8) -> RelationReport:
    """Instantiate the ``w`` variables of each law by random words of length
    <= ``max_len`` and check that the law evaluates to the identity."""
    rng = random.Random(seed)
    rep = RelationReport(trials)
    e = spec.identity()
    n_named = len(spec.named_generators())
    for law in relations:
        names = sorted(set(re.findall(r"\bw\d+\b", law)))
        for _ in range(trials if names else 1):
            words = {w: random_word(rng, n_named, max_len) for w in names}
            env = {w: word_evaluate(spec, wd) for w, wd in words.items()}
            rep.checked += 1
            if evaluate_law(spec, law, env) != e:
                rep.violations.append({"law": law, "words": words})
    return rep


# -- spec strings -------------------------------------------------------------

def _kv(body: str) -> dict:
    out = {}
    for part in body.split(","):
        if not part:
            continue
        if "=" not in part:
            raise ValueError(f"bad group parameter {part!r}")
        k, v = part.split("=", 1)
        out[k.strip()] = int(v)
    return out


def parse_group_spec(text: str) -> GroupSpec:
    """``zd:<d>``, ``lamplighter:p=<p>,d=<d>``, ``wreath-z:d=<d>``,
    ``free-metabelian:d=<d>``, ``p-metabelian:d=<d>,p=<p>`` or
    ``ring-semidirect:<presentation-file>``."""
    if ":" not in text:
        raise ValueError(f"unknown group spec {text!r}")
    family, body = text.split(":", 1)
    if family == "zd":
        return FreeAbelian(int(body))
    if family == "ring-semidirect":
        from .krull import load_presentation
        pres = load_presentation(body)
        if pres.coeffs.kind != "GF" or pres.n_generators != 1:
            raise ValueError("ring-semidirect needs a cyclic presentation over F_p")
        ring = LaurentQuotient([row[0] for row in pres.relations], pres.coeffs, pres.rank)
        return RingSemidirect(ring, name=f"ring-semidirect:{Path(body).name}")
    kv = _kv(body)
    if family == "lamplighter":
        p = kv.get("p", 2)
        if not is_prime(p):
            raise ValueError(f"lamplighter needs a prime p, got {p}")
        return Wreath(kv.get("d", 1), p)
    if family == "wreath-z":
        return Wreath(kv.get("d", 1), 0)
    if family == "free-metabelian":
        return Magnus(kv["d"], 0)
    if family == "p-metabelian":
        return Magnus(kv["d"], kv["p"])
    raise ValueError(f"unknown group family {family!r}")


def multiply(spec: GroupSpec, a, b):
    """Checked product: both factors must belong to ``spec``."""
    return spec.multiply(spec.check(a), spec.check(b))


def inverse(spec: GroupSpec, a):
    return spec.inverse(spec.check(a))
