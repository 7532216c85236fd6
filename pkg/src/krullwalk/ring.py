"""Laurent polynomials over Q, F_p, Z and Z/kZ.

Polynomials are immutable.  Terms are stored as a tuple of
``(exponent_vector, coefficient)`` pairs sorted lexicographically by
exponent, with no zero coefficients, so structural equality is ideal
equality of the underlying elements.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

ExponentVector = tuple[int, ...]


class StructuralError(ValueError):
    """Operands live in different rings (rank or coefficient mismatch)."""


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    f = 3
    while f * f <= n:
        if n % f == 0:
            return False
        f += 2
    return True


def prime_factors(n: int) -> list[int]:
    out = []
    f = 2
    while f * f <= n:
        if n % f == 0:
            out.append(f)
            while n % f == 0:
                n //= f
        f += 1
    if n > 1:
        out.append(n)
    return out


@dataclass(frozen=True)
class Coefficients:
    """Coefficient ring: ``"QQ"``, ``"GF"`` (prime p), ``"ZZ"`` or ``"ZMOD"`` (k >= 2)."""

    kind: str
    modulus: int = 0

    def __post_init__(self):
        if self.kind == "GF":
            if not is_prime(self.modulus):
                raise ValueError(f"GF needs a prime modulus, got {self.modulus}")
        elif self.kind == "ZMOD":
            if self.modulus < 2:
                raise ValueError(f"Z/kZ needs k >= 2, got {self.modulus}")
        elif self.kind in ("QQ", "ZZ"):
            if self.modulus != 0:
                raise ValueError(f"{self.kind} takes no modulus")
        else:
            raise ValueError(f"unknown coefficient kind {self.kind!r}")

    @classmethod
    def rationals(cls) -> "Coefficients":
        return cls("QQ")

    @classmethod
    def integers(cls) -> "Coefficients":
        return cls("ZZ")

    @classmethod
    def prime_field(cls, p: int) -> "Coefficients":
        return cls("GF", p)

    @classmethod
    def integers_mod(cls, k: int) -> "Coefficients":
        if is_prime(k):
            return cls("GF", k)
        return cls("ZMOD", k)

    @classmethod
    def from_characteristic(cls, char: int) -> "Coefficients":
        """0 -> Q, p -> F_p."""
        return cls.rationals() if char == 0 else cls.prime_field(char)

    @property
    def is_field(self) -> bool:
        return self.kind in ("QQ", "GF")

    @property
    def characteristic(self) -> int:
        return self.modulus

    def convert(self, c) -> int | Fraction:
        if self.kind == "QQ":
            return Fraction(c)
        if isinstance(c, Fraction):
            if self.kind == "ZZ":
                if c.denominator != 1:
                    raise ValueError(f"{c} is not an integer")
                return int(c)
            return c.numerator * pow(c.denominator, -1, self.modulus) % self.modulus
        c = int(c)
        if self.kind == "ZZ":
            return c
        return c % self.modulus

    def add(self, a, b):
        if self.modulus:
            return (a + b) % self.modulus
        return a + b

    def mul(self, a, b):
        if self.modulus:
            return (a * b) % self.modulus
        return a * b

    def neg(self, a):
        if self.modulus:
            return (-a) % self.modulus
        return -a

    def inv(self, a):
        if self.kind == "QQ":
            return 1 / Fraction(a)
        if self.kind == "GF":
            return pow(a, -1, self.modulus)
        raise StructuralError(f"division is not available over {self}")

    def __str__(self) -> str:
        if self.kind == "QQ":
            return "QQ"
        if self.kind == "ZZ":
            return "ZZ"
        return f"{'GF' if self.kind == 'GF' else 'Z/'}({self.modulus})"


class LaurentPolynomial:
    """Finitely supported map Z^d -> coefficients, read as a Laurent polynomial."""

    __slots__ = ("terms", "coeffs", "rank", "_hash")

    def __init__(self, terms: Mapping[ExponentVector, object] | Iterable, coeffs: Coefficients, rank: int):
        items = terms.items() if isinstance(terms, Mapping) else terms
        acc: dict[ExponentVector, object] = {}
        for exp, c in items:
            exp = tuple(int(e) for e in exp)
            if len(exp) != rank:
                raise StructuralError(f"exponent {exp} does not have length {rank}")
            c = coeffs.convert(c)
            if exp in acc:
                c = coeffs.add(acc[exp], c)
            acc[exp] = c
        self.terms: tuple[tuple[ExponentVector, object], ...] = tuple(
            sorted((e, c) for e, c in acc.items() if c != 0)
        )
        self.coeffs = coeffs
        self.rank = rank
        self._hash = None

    @classmethod
    def _raw(cls, terms: dict, coeffs: Coefficients, rank: int) -> "LaurentPolynomial":
        # terms already reduced and nonzero
        obj = cls.__new__(cls)
        obj.terms = tuple(sorted(terms.items()))
        obj.coeffs = coeffs
        obj.rank = rank
        obj._hash = None
        return obj

    @classmethod
    def zero(cls, coeffs: Coefficients, rank: int) -> "LaurentPolynomial":
        return cls._raw({}, coeffs, rank)

    @classmethod
    def one(cls, coeffs: Coefficients, rank: int) -> "LaurentPolynomial":
        return cls.monomial((0,) * rank, coeffs)

    @classmethod
    def monomial(cls, exp: Sequence[int], coeffs: Coefficients, c=1) -> "LaurentPolynomial":
        return cls({tuple(exp): c}, coeffs, len(exp))

    @classmethod
    def variable(cls, i: int, coeffs: Coefficients, rank: int) -> "LaurentPolynomial":
        """X_{i+1} (0-based index)."""
        e = [0] * rank
        e[i] = 1
        return cls.monomial(e, coeffs)

    @property
    def term_map(self) -> dict[ExponentVector, object]:
        return dict(self.terms)

    def is_zero(self) -> bool:
        return not self.terms

    def support(self) -> list[ExponentVector]:
        return [e for e, _ in self.terms]

    def coefficient(self, exp: Sequence[int]):
        return self.term_map.get(tuple(exp), 0)

    def _check(self, other: "LaurentPolynomial"):
        if not isinstance(other, LaurentPolynomial):
            raise StructuralError(f"expected LaurentPolynomial, got {type(other).__name__}")
        if other.rank != self.rank:
            raise StructuralError(f"rank mismatch: {self.rank} vs {other.rank}")
        if other.coeffs != self.coeffs:
            raise StructuralError(f"coefficient mismatch: {self.coeffs} vs {other.coeffs}")

    def __add__(self, other: "LaurentPolynomial") -> "LaurentPolynomial":
        self._check(other)
        k = self.coeffs
        acc = dict(self.terms)
        for e, c in other.terms:
            s = k.add(acc.get(e, 0), c)
            if s == 0:
                acc.pop(e, None)
            else:
                acc[e] = s
        return LaurentPolynomial._raw(acc, k, self.rank)

    def __neg__(self) -> "LaurentPolynomial":
        k = self.coeffs
        return LaurentPolynomial._raw({e: k.neg(c) for e, c in self.terms}, k, self.rank)

    def __sub__(self, other: "LaurentPolynomial") -> "LaurentPolynomial":
        return self + (-other)

    def __mul__(self, other) -> "LaurentPolynomial":
        if not isinstance(other, LaurentPolynomial):
            return self.scale(other)
        self._check(other)
        k = self.coeffs
        acc: dict[ExponentVector, object] = {}
        for e1, c1 in self.terms:
            for e2, c2 in other.terms:
                e = tuple(a + b for a, b in zip(e1, e2))
                acc[e] = k.add(acc.get(e, 0), k.mul(c1, c2))
        return LaurentPolynomial._raw({e: c for e, c in acc.items() if c != 0}, k, self.rank)

    def __rmul__(self, other) -> "LaurentPolynomial":
        return self.scale(other)

    def __pow__(self, n: int) -> "LaurentPolynomial":
        if n < 0:
            if len(self.terms) != 1 or not self.coeffs.is_field and self.terms[0][1] not in (1, -1):
                raise ValueError("only monomials with unit coefficient can be inverted")
            (e, c), = self.terms
            inv = self.coeffs.inv(c) if self.coeffs.is_field else c
            return LaurentPolynomial.monomial(tuple(-x for x in e), self.coeffs, inv) ** (-n)
        out = LaurentPolynomial.one(self.coeffs, self.rank)
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def scale(self, c) -> "LaurentPolynomial":
        k = self.coeffs
        c = k.convert(c)
        if c == 0:
            return LaurentPolynomial.zero(k, self.rank)
        acc = {e: k.mul(v, c) for e, v in self.terms}
        return LaurentPolynomial._raw({e: v for e, v in acc.items() if v != 0}, k, self.rank)

    def shift(self, v: Sequence[int]) -> "LaurentPolynomial":
        """Multiply by the monomial X^v."""
        if len(v) != self.rank:
            raise StructuralError(f"shift vector {tuple(v)} does not have length {self.rank}")
        return LaurentPolynomial._raw(
            {tuple(a + b for a, b in zip(e, v)): c for e, c in self.terms}, self.coeffs, self.rank
        )

    def change_coefficients(self, coeffs: Coefficients) -> "LaurentPolynomial":
        return LaurentPolynomial(self.terms, coeffs, self.rank)

    def min_exponents(self) -> ExponentVector:
        if not self.terms:
            return (0,) * self.rank
        return tuple(min(e[i] for e, _ in self.terms) for i in range(self.rank))

    def max_norm(self) -> int:
        return max((max(map(abs, e), default=0) for e, _ in self.terms), default=0)

    def __eq__(self, other) -> bool:
        if not isinstance(other, LaurentPolynomial):
            return NotImplemented
        return self.rank == other.rank and self.coeffs == other.coeffs and self.terms == other.terms

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self.rank, self.coeffs, self.terms))
        return self._hash

    def __repr__(self) -> str:
        return f"LaurentPolynomial({format_polynomial(self)!r}, {self.coeffs}, rank={self.rank})"

    def __str__(self) -> str:
        return format_polynomial(self)


def lp_add(a: LaurentPolynomial, b: LaurentPolynomial) -> LaurentPolynomial:
    return a + b


def lp_mul(a: LaurentPolynomial, b: LaurentPolynomial) -> LaurentPolynomial:
    return a * b


def lp_shift(a: LaurentPolynomial, v: Sequence[int]) -> LaurentPolynomial:
    return a.shift(v)


# -- text format ----------------------------------------------------------

_TERM_RE = re.compile(r"([+-]?)([^+-]+)")
_VAR_RE = re.compile(r"^(?:X(\d*)|([A-Za-z]))(?:\^(-?\d+))?$")
_LETTERS = "XYZUVW"


def _var_index(num: str | None, letter: str | None, rank: int) -> int:
    if letter is not None:
        if letter not in _LETTERS:
            raise ValueError(f"unknown variable {letter!r}")
        idx = _LETTERS.index(letter)
    elif num == "":
        idx = 0
    else:
        idx = int(num) - 1
    if not 0 <= idx < rank:
        raise ValueError(f"variable index {idx + 1} out of range for rank {rank}")
    return idx


def parse_polynomial(text: str, coeffs: Coefficients, rank: int) -> LaurentPolynomial:
    """Parse ``3*X1^2*X2^-1 + 1``; also accepts ``X``, ``Y``, ``Z`` for X1..X3.

    >>> str(parse_polynomial("X1^-1 - 2*X2", Coefficients.rationals(), 2))
    '-2*X2 + X1^-1'
    """
    s = text.replace(" ", "").replace("**", "^")
    if not s:
        raise ValueError("empty polynomial string")
    # protect negative exponents from the term splitter
    s = s.replace("^-", "^~")
    if s[0] not in "+-":
        s = "+" + s
    terms = {}
    pos = 0
    for m in _TERM_RE.finditer(s):
        if m.start() != pos:
            raise ValueError(f"cannot parse {text!r}")
        pos = m.end()
        sign = -1 if m.group(1) == "-" else 1
        coef: Fraction = Fraction(sign)
        exp = [0] * rank
        for factor in m.group(2).replace("^~", "^-").split("*"):
            if not factor:
                raise ValueError(f"cannot parse {text!r}")
            if re.fullmatch(r"\d+(/\d+)?", factor):
                coef *= Fraction(factor)
                continue
            vm = _VAR_RE.match(factor)
            if vm is None:
                raise ValueError(f"bad factor {factor!r} in {text!r}")
            idx = _var_index(vm.group(1), vm.group(2), rank)
            exp[idx] += int(vm.group(3)) if vm.group(3) is not None else 1
        e = tuple(exp)
        terms[e] = terms.get(e, 0) + coef
    if pos != len(s):
        raise ValueError(f"cannot parse {text!r}")
    return LaurentPolynomial(terms, coeffs, rank)


def _format_coeff(c) -> str:
    return str(c)


def format_polynomial(p: LaurentPolynomial) -> str:
    """Inverse of :func:`parse_polynomial`; terms in descending lex order."""
    if p.is_zero():
        return "0"
    parts = []
    for e, c in reversed(p.terms):
        mono = "*".join(
            f"X{i + 1}" if x == 1 else f"X{i + 1}^{x}" for i, x in enumerate(e) if x != 0
        )
        neg = c < 0 if p.coeffs.kind in ("QQ", "ZZ") else False
        mag = -c if neg else c
        if not mono:
            body = _format_coeff(mag)
        elif mag == 1:
            body = mono
        else:
            body = f"{_format_coeff(mag)}*{mono}"
        parts.append(("-", body) if neg else ("+", body))
    out = ("-" if parts[0][0] == "-" else "") + parts[0][1]
    for sign, body in parts[1:]:
        out += f" {sign} {body}"
    return out
