"""Exact arithmetic for the affine Hecke pairs ``(Gamma, Lambda)``.

Two flavours of the field fragment ``Xi`` are supported, both with residue
field of prime order ``q`` and uniformizer ``w``:

* ``carry``   -- ``Xi = Z[1/q]`` inside ``Q_q`` (``w = q``), stored as a reduced
  :class:`fractions.Fraction` whose denominator is a power of ``q``;
* ``modular`` -- ``Xi = (+)_Z F_q`` inside ``F_q((t))`` (``w = t``), stored as a
  sorted tuple of ``(position, digit)`` pairs with nonzero digits.

``Gamma = Xi x| <w>`` acts on ``Xi`` (and on the completion ``K``) by
``(x, n) . y = x + w**n * y`` and ``Lambda = Xi_o x| {1}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from typing import Iterator, Union

CARRY = "carry"
MODULAR = "modular"

Digits = tuple[tuple[int, int], ...]


class ContextMismatchError(ValueError):
    """Operands live in different field contexts."""


class InvariantViolation(AssertionError):
    """An internal consistency check failed."""


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    return all(n % d for d in range(2, math.isqrt(n) + 1))


def _vq(n: int, q: int) -> int:
    """q-adic valuation of a nonzero integer."""
    v = 0
    while n % q == 0:
        n //= q
        v += 1
    return v


@dataclass(frozen=True, slots=True)
class FieldContext:
    """The pair ``(q, mode)``; fixes ``K``, ``O``, the uniformizer and digits."""

    q: int
    mode: str = CARRY

    def __post_init__(self):
        if not _is_prime(self.q):
            raise ValueError(f"q must be prime, got {self.q}")
        if self.mode not in (CARRY, MODULAR):
            raise ValueError(f"unknown mode {self.mode!r}")

    @property
    def digit_set(self) -> tuple[int, ...]:
        # x_o = 1, so S = {0, x_o, ..., (q-1) x_o} is literally {0, ..., q-1}
        return tuple(range(self.q))

    def zero(self) -> XiElem:
        return XiElem(self, Fraction(0) if self.mode == CARRY else ())

    def one(self) -> XiElem:
        return self.from_int(1)

    def from_int(self, a: int) -> XiElem:
        if self.mode == CARRY:
            return XiElem(self, Fraction(a))
        return self.from_digits({0: a})

    def uniformizer_pow(self, k: int) -> XiElem:
        return self.one().shift(k)

    def from_fraction(self, value) -> XiElem:
        if self.mode != CARRY:
            raise ValueError("from_fraction is only meaningful in carry mode")
        value = Fraction(value)
        den = value.denominator
        while den % self.q == 0:
            den //= self.q
        if den != 1:
            raise ValueError(f"{value} is not in Z[1/{self.q}]")
        return XiElem(self, value)

    def from_digits(self, digits) -> XiElem:
        """Build ``sum d_j w**j`` from a mapping position -> digit."""
        items = digits.items() if hasattr(digits, "items") else digits
        if self.mode == CARRY:
            total = Fraction(0)
            for j, d in items:
                total += d * Fraction(self.q) ** j
            return XiElem(self, total)
        acc: dict[int, int] = {}
        for j, d in items:
            acc[j] = (acc.get(j, 0) + d) % self.q
        return XiElem(self, tuple(sorted((j, d) for j, d in acc.items() if d)))

    def parse(self, text: str) -> XiElem:
        """Inverse of :meth:`XiElem.encode`."""
        text = text.strip()
        if self.mode == CARRY:
            return self.from_fraction(Fraction(text))
        if text in ("", "0"):
            return self.zero()
        digits = {}
        for part in text.split(";"):
            j, c = part.split(":")
            j, c = int(j), int(c)
            if j in digits or not 0 <= c < self.q:
                raise ValueError(f"bad modular encoding {text!r}")
            digits[j] = c
        return self.from_digits(digits)

    def parse_group(self, text: str) -> GroupElem:
        body = text.strip()
        if not (body.startswith("(") and body.endswith(")")):
            raise ValueError(f"bad group element {text!r}")
        x, n = body[1:-1].split("|")
        return GroupElem(self.parse(x), int(n))

    def parse_coset(self, text: str) -> CosetKey:
        body = text.strip()
        if not (body.startswith("[") and body.endswith("]")):
            raise ValueError(f"bad coset key {text!r}")
        n, r = body[1:-1].split("|")
        return CosetKey(self, int(n), self.parse(r))

    def identity(self) -> GroupElem:
        return GroupElem(self.zero(), 0)


@dataclass(frozen=True, slots=True)
class XiElem:
    ctx: FieldContext
    value: Union[Fraction, Digits]

    def _check(self, other: XiElem):
        if not isinstance(other, XiElem):
            raise TypeError(f"expected XiElem, got {type(other).__name__}")
        if other.ctx != self.ctx:
            raise ContextMismatchError(f"{self.ctx} vs {other.ctx}")

    # -- ring operations ------------------------------------------------
    def __add__(self, other: XiElem) -> XiElem:
        self._check(other)
        if self.ctx.mode == CARRY:
            return XiElem(self.ctx, self.value + other.value)
        q = self.ctx.q
        acc = dict(self.value)
        for j, d in other.value:
            acc[j] = (acc.get(j, 0) + d) % q
        return XiElem(self.ctx, tuple(sorted((j, d) for j, d in acc.items() if d)))

    def __neg__(self) -> XiElem:
        if self.ctx.mode == CARRY:
            return XiElem(self.ctx, -self.value)
        q = self.ctx.q
        return XiElem(self.ctx, tuple((j, (-d) % q) for j, d in self.value))

    def __sub__(self, other: XiElem) -> XiElem:
        return self + (-other)

    def __mul__(self, other: XiElem) -> XiElem:
        self._check(other)
        if self.ctx.mode == CARRY:
            return XiElem(self.ctx, self.value * other.value)
        q = self.ctx.q
        acc: dict[int, int] = {}
        for i, a in self.value:
            for j, b in other.value:
                acc[i + j] = (acc.get(i + j, 0) + a * b) % q
        return XiElem(self.ctx, tuple(sorted((j, d) for j, d in acc.items() if d)))

    def shift(self, k: int) -> XiElem:
        """Multiply by ``w**k``."""
        if self.ctx.mode == CARRY:
            return XiElem(self.ctx, self.value * Fraction(self.ctx.q) ** k)
        return XiElem(self.ctx, tuple((j + k, d) for j, d in self.value))

    # -- valuation and digits ------------------------------------------
    def is_zero(self) -> bool:
        return not self.value

    def valuation(self) -> float:
        """``v(x)``; ``math.inf`` for zero."""
        if self.is_zero():
            return math.inf
        if self.ctx.mode == CARRY:
            q = self.ctx.q
            return _vq(self.value.numerator, q) - _vq(self.value.denominator, q)
        return self.value[0][0]

    def abs(self) -> Fraction:
        v = self.valuation()
        return Fraction(0) if v == math.inf else Fraction(self.ctx.q) ** (-v)

    def is_integral(self) -> bool:
        return self.valuation() >= 0

    def residue(self, n: int) -> XiElem:
        """Canonical representative of ``x mod w**n Xi_o`` (support below ``n``)."""
        if self.ctx.mode == CARRY:
            m = Fraction(self.ctx.q) ** n
            return XiElem(self.ctx, self.value - m * math.floor(self.value / m))
        return XiElem(self.ctx, tuple((j, d) for j, d in self.value if j < n))

    def digit_window(self, lo: int, hi: int) -> tuple[tuple[int, ...], bool]:
        """Digits at positions ``lo..hi-1`` and whether any digit sits below ``lo``.

        In carry mode the digits are those of the residue of ``x`` modulo
        ``q**hi Z``, which is the q-adic expansion truncated at ``hi``.
        """
        q = self.ctx.q
        if self.ctx.mode == CARRY:
            y = self.residue(hi).value * Fraction(q) ** (-lo)
            below = y.denominator != 1
            code = math.floor(y)
            out = []
            for _ in range(hi - lo):
                code, d = divmod(code, q)
                out.append(d)
            return tuple(out), below
        out = [0] * (hi - lo)
        below = False
        for j, d in self.value:
            if j < lo:
                below = True
            elif j < hi:
                out[j - lo] = d
        return tuple(out), below

    def digit_map(self) -> dict[int, int]:
        """Finite digit expansion; carry mode needs a nonnegative element."""
        if self.ctx.mode == MODULAR:
            return dict(self.value)
        if self.value < 0:
            raise ValueError("negative elements of Z[1/q] have no finite expansion")
        if self.is_zero():
            return {}
        lo = int(min(self.valuation(), 0))
        hi = lo + 1
        while Fraction(self.ctx.q) ** hi <= self.value:
            hi += 1
        digits, _ = self.digit_window(lo, hi)
        return {lo + i: d for i, d in enumerate(digits) if d}

    # -- text ---------------------------------------------------------------
    def encode(self) -> str:
        if self.ctx.mode == CARRY:
            return str(self.value)
        if not self.value:
            return "0"
        return ";".join(f"{j}:{d}" for j, d in self.value)

    def sort_key(self):
        if self.ctx.mode == CARRY:
            return (self.value,)
        return self.value

    def __repr__(self) -> str:
        return f"Xi({self.encode()})"


@dataclass(frozen=True, slots=True)
class GroupElem:
    """``(x, w**n)`` in ``Gamma``; ``n`` is ``pr_Z``."""

    x: XiElem
    n: int

    @property
    def ctx(self) -> FieldContext:
        return self.x.ctx

    def __mul__(self, other: GroupElem) -> GroupElem:
        return GroupElem(self.x + other.x.shift(self.n), self.n + other.n)

    def inverse(self) -> GroupElem:
        return GroupElem((-self.x).shift(-self.n), -self.n)

    def act(self, y: XiElem) -> XiElem:
        return self.x + y.shift(self.n)

    def is_identity(self) -> bool:
        return self.n == 0 and self.x.is_zero()

    def in_lambda(self) -> bool:
        return self.n == 0 and self.x.is_integral()

    def encode(self) -> str:
        return f"({self.x.encode()} | {self.n})"

    def sort_key(self):
        return (self.n, self.x.sort_key())

    def __repr__(self) -> str:
        return self.encode()


@dataclass(frozen=True, slots=True)
class CosetKey:
    """A left coset ``g Lambda``, equivalently ``h L`` in ``H/L``.

    ``r`` is the canonical residue of ``x`` modulo ``w**n Xi_o``.
    """

    ctx: FieldContext
    n: int
    r: XiElem

    def representative(self) -> GroupElem:
        """The section ``beta(g Lambda) = (r, n)``."""
        return GroupElem(self.r, self.n)

    def orbit_id(self) -> tuple:
        """Label shared by exactly the keys in one ``Lambda``-orbit."""
        if self.n <= 0:
            return (self.n, self.r)
        return (self.n, self.r.residue(0))

    def orbit_size(self) -> int:
        return self.ctx.q ** max(self.n, 0)

    def encode(self) -> str:
        return f"[{self.n} | {self.r.encode()}]"

    def sort_key(self):
        return (self.n, self.r.sort_key())

    def __repr__(self) -> str:
        return self.encode()


# -- module-level operations ----------------------------------------------

def xi_add(a: XiElem, b: XiElem) -> XiElem:
    return a + b


def xi_scale_pow(a: XiElem, k: int) -> XiElem:
    return a.shift(k)


def g_mul(g1: GroupElem, g2: GroupElem) -> GroupElem:
    if g1.ctx != g2.ctx:
        raise ContextMismatchError(f"{g1.ctx} vs {g2.ctx}")
    return g1 * g2


def act_point(g: GroupElem, y: XiElem) -> XiElem:
    return g.act(y)


def coset_of(g: GroupElem) -> CosetKey:
    return CosetKey(g.ctx, g.n, g.x.residue(g.n))


def _residues(ctx: FieldContext, lo: int, hi: int) -> Iterator[XiElem]:
    """All elements with digits only at positions ``lo..hi-1``."""
    for digits in product(range(ctx.q), repeat=max(hi - lo, 0)):
        yield ctx.from_digits({lo + i: d for i, d in enumerate(digits) if d})


def lambda_orbit(c: CosetKey) -> frozenset[CosetKey]:
    """The ``Lambda``-orbit of ``c``: residues agreeing with ``r`` below position 0."""
    if c.n <= 0:
        return frozenset([c])
    low = c.r.residue(0)
    return frozenset(CosetKey(c.ctx, c.n, low + t) for t in _residues(c.ctx, 0, c.n))


def decompose(g: GroupElem) -> tuple[GroupElem, GroupElem]:
    """Split ``g = beta(g Lambda) * lam`` with ``lam`` in ``Lambda``."""
    key = coset_of(g)
    beta = key.representative()
    lam = beta.inverse() * g
    if not lam.in_lambda() or beta * lam != g:
        raise InvariantViolation(f"decompose failed for {g}")
    return beta, lam


def lambda_generators(ctx: FieldContext, n_max: int) -> list[XiElem]:
    """Additive generators of ``Xi_o`` that act nontrivially on keys of level <= ``n_max``."""
    if ctx.mode == CARRY:
        return [ctx.one()]
    return [ctx.uniformizer_pow(j) for j in range(max(n_max, 0))]
