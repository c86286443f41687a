"""Additive characters of ``K`` and exact correlation integrals of ``F_z(x) = lambda(x z) 1_O(x)``.

Values live in ``Q(zeta_{q**R})`` and are stored sparsely in the power basis
``1, zeta, ..., zeta**(phi-1)`` with ``phi = (q-1) q**(R-1)``, reduced by
``sum_{i<q} zeta**(i q**(R-1)) = 0`` and pushed down to the smallest ``R``
that holds them.  The representation is canonical, so zero tests and
equality are exact.
"""

from __future__ import annotations

import cmath
import math
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

from .algebra import CARRY, FieldContext, XiElem, _residues

MAX_ORDER = 10 ** 12


class OrderBudgetError(ValueError):
    """A root of unity of order above the configured budget was requested."""


def _reduce_into(acc: dict[int, Fraction], q: int, R: int, e: int, c) -> None:
    if R == 0:
        acc[0] = acc.get(0, 0) + c
        return
    m = q ** (R - 1)
    phi = (q - 1) * m
    e %= q * m
    if e < phi:
        acc[e] = acc.get(e, 0) + c
        return
    r = e - phi
    for i in range(q - 1):
        k = i * m + r
        acc[k] = acc.get(k, 0) - c


@dataclass(frozen=True)
class CycloValue:
    q: int
    R: int
    terms: tuple[tuple[int, Fraction], ...]

    @classmethod
    def _canonical(cls, q: int, R: int, acc: Mapping[int, object]) -> CycloValue:
        items = {e: Fraction(c) for e, c in acc.items() if c}
        while R > 0 and all(e % q == 0 for e in items):
            items = {e // q: c for e, c in items.items()}
            R -= 1
        return cls(q, R, tuple(sorted(items.items())))

    @classmethod
    def zero(cls, q: int) -> CycloValue:
        return cls(q, 0, ())

    @classmethod
    def rational(cls, q: int, c) -> CycloValue:
        return cls._canonical(q, 0, {0: c})

    @classmethod
    def from_root(cls, q: int, R: int, e: int, coef=1) -> CycloValue:
        acc: dict[int, Fraction] = {}
        _reduce_into(acc, q, R, e, Fraction(coef))
        return cls._canonical(q, R, acc)

    @classmethod
    def root_sum(cls, q: int, R: int, counts: Mapping[int, object]) -> CycloValue:
        """``sum_e counts[e] zeta_{q**R}**e``."""
        acc: dict[int, Fraction] = {}
        for e, c in counts.items():
            if c:
                _reduce_into(acc, q, R, e, c)
        return cls._canonical(q, R, acc)

    @property
    def order(self) -> int:
        return self.q ** self.R

    def _lift(self, R: int) -> dict[int, Fraction]:
        s = self.q ** (R - self.R)
        return {e * s: c for e, c in self.terms}

    def _pair(self, other: CycloValue):
        if other.q != self.q:
            raise ValueError("values from different cyclotomic towers")
        R = max(self.R, other.R)
        return R, self._lift(R), other._lift(R)

    def __add__(self, other: CycloValue) -> CycloValue:
        R, a, b = self._pair(other)
        for e, c in b.items():
            a[e] = a.get(e, 0) + c
        return CycloValue._canonical(self.q, R, a)

    def __neg__(self) -> CycloValue:
        return CycloValue(self.q, self.R, tuple((e, -c) for e, c in self.terms))

    def __sub__(self, other: CycloValue) -> CycloValue:
        return self + (-other)

    def __mul__(self, other: CycloValue) -> CycloValue:
        R, a, b = self._pair(other)
        acc: dict[int, Fraction] = {}
        for e1, c1 in a.items():
            for e2, c2 in b.items():
                _reduce_into(acc, self.q, R, e1 + e2, c1 * c2)
        return CycloValue._canonical(self.q, R, acc)

    def scale(self, a) -> CycloValue:
        a = Fraction(a)
        return CycloValue._canonical(self.q, self.R, {e: c * a for e, c in self.terms})

    def times_root(self, R: int, e: int) -> CycloValue:
        """Multiply by ``zeta_{q**R}**e``; cheap for sparse values."""
        if self.is_zero():
            return self
        top = max(R, self.R)
        shift = e * self.q ** (top - R)
        acc: dict[int, Fraction] = {}
        for k, c in self._lift(top).items():
            _reduce_into(acc, self.q, top, k + shift, c)
        return CycloValue._canonical(self.q, top, acc)

    def conj(self) -> CycloValue:
        acc: dict[int, Fraction] = {}
        for e, c in self.terms:
            _reduce_into(acc, self.q, self.R, -e, c)
        return CycloValue._canonical(self.q, self.R, acc)

    def is_zero(self) -> bool:
        return not self.terms

    def is_one(self) -> bool:
        return self.terms == ((0, Fraction(1)),)

    def to_complex(self) -> complex:
        n = self.order
        re = math.fsum(float(c) * math.cos(2 * math.pi * e / n) for e, c in self.terms)
        im = math.fsum(float(c) * math.sin(2 * math.pi * e / n) for e, c in self.terms)
        return complex(re, im)

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        return " + ".join(str(c) if e == 0 else f"{c}*z{self.order}^{e}" for e, c in self.terms)


@dataclass(frozen=True)
class CharacterSpec:
    """``lambda(x) = lambda'(x w**-(N+1))`` with the standard character ``lambda'``."""

    ctx: FieldContext
    N: int = 1
    max_order: int = MAX_ORDER

    @property
    def shift(self) -> int:
        return -(self.N + 1)


def char_exponent(spec: CharacterSpec, x: XiElem) -> tuple[int, int]:
    """``(R, e)`` with ``lambda(x) = zeta_{q**R}**e``."""
    ctx = spec.ctx
    y = x.shift(spec.shift)
    if ctx.mode == CARRY:
        frac = y.value - math.floor(y.value)
        if frac == 0:
            return 0, 0
        den = frac.denominator
        R = 0
        while den > 1:
            den //= ctx.q
            R += 1
        if ctx.q ** R > spec.max_order:
            raise OrderBudgetError(f"lambda({x.encode()}) needs a root of order {ctx.q}**{R}")
        return R, frac.numerator
    digit = dict(y.value).get(-1, 0)
    return (1, digit) if digit else (0, 0)


def eval_character(spec: CharacterSpec, x: XiElem) -> CycloValue:
    R, e = char_exponent(spec, x)
    return CycloValue.from_root(spec.ctx.q, R, e)


def nontrivial_witness(spec: CharacterSpec) -> XiElem | None:
    """An ``x`` in ``w O`` with ``lambda(x) != 1``, searched over ``w**j``, ``1 <= j <= N + 1``."""
    for j in range(1, spec.N + 2):
        x = spec.ctx.uniformizer_pow(j)
        if not eval_character(spec, x).is_one():
            return x
    return None


# -- correlation integrals ------------------------------------------------------

@dataclass(frozen=True)
class DecoupleResult:
    value: CycloValue
    case: str
    domain: tuple[XiElem, int] | None
    w_valuation: float
    level: int
    bound_ok: bool


def _ball_meet(c1: XiElem, l1: int, c2: XiElem, l2: int):
    if (c1 - c2).valuation() < min(l1, l2):
        return None
    return (c1, l1) if l1 >= l2 else (c2, l2)


def decouple_integral(spec: CharacterSpec, z1: XiElem, z2: XiElem, y: XiElem, m: int) -> DecoupleResult:
    """``int_K F_{z1}(y + w**m x) conj(F_{z2}(x)) dm_K(x)`` with ``m_K(O) = 1``.

    The integrand is ``lambda(y z1) lambda(w_m x)`` with ``w_m = w**m z1 - z2``
    on ``O_{y,m} = (w**-m (O - y)) & O``.  On that ball ``x -> lambda(w_m x)``
    is constant on cosets of ``w**R O`` once ``v(w_m) + R >= N + 1``, so the
    integral is an exact finite root sum.
    """
    ctx = spec.ctx
    if not (z1.is_integral() and z2.is_integral()):
        raise ValueError("z1 and z2 must lie in O")
    q = ctx.q
    w = z1.shift(m) - z2
    vw = w.valuation()
    case = "I" if m >= 0 else "II"
    bound_ok = vw <= 1 if m >= 0 else vw <= m + 1
    meet = _ball_meet((-y).shift(-m), -m, ctx.zero(), 0)
    if meet is None:
        return DecoupleResult(CycloValue.zero(q), "empty", None, vw, 0, bound_ok)
    c0, ell = meet
    R = ell if w.is_zero() else max(ell, int(spec.N + 1 - vw))
    counts: dict[tuple[int, int], int] = defaultdict(int)
    for u in _residues(ctx, ell, R):
        counts[char_exponent(spec, w * (c0 + u))] += 1
    top = max(r for r, _ in counts)
    lifted: dict[int, int] = defaultdict(int)
    for (r, e), n in counts.items():
        lifted[e * q ** (top - r)] += n
    total = CycloValue.root_sum(q, top, lifted).scale(Fraction(1, q ** R))
    r_y, e_y = char_exponent(spec, y * z1)
    return DecoupleResult(total.times_root(r_y, e_y), case, (c0, ell), vw, R, bound_ok)


@dataclass
class GridReport:
    entries: list[dict] = field(default_factory=list)
    hypotheses: dict = field(default_factory=dict)
    all_zero: bool = True
    soundness_ok: bool = True
    bounds_ok: bool = True

    @property
    def passed(self) -> bool:
        return self.all_zero

    def to_dict(self) -> dict:
        return {
            "hypotheses": self.hypotheses,
            "all_zero": self.all_zero,
            "soundness_ok": self.soundness_ok,
            "bounds_ok": self.bounds_ok,
            "entries": self.entries,
        }


def grid_points(spec: CharacterSpec, m: int) -> list[XiElem]:
    """Representatives of ``y`` for which the integral can differ.

    Integrals are invariant under ``y -> y + w**(N+1) O``; they vanish for
    ``y`` outside ``w**min(0,m) O``.  One representative per digit is added
    just outside that ball to exercise the empty-domain branch.
    """
    ctx = spec.ctx
    floor_ = min(0, m)
    pts = list(_residues(ctx, floor_, spec.N + 1))
    pts += [ctx.from_int(d).shift(floor_ - 1) for d in range(1, ctx.q)]
    return pts


def verify_decoupled_grid(spec: CharacterSpec, z1: XiElem, z2: XiElem, m_range: tuple[int, int],
                          reps_per_m: int | None = None) -> GridReport:
    """Evaluate every grid integral for ``m_range[0] <= m <= m_range[1]``."""
    witness = nontrivial_witness(spec)
    sep = (z1 - z2).valuation() <= 1
    report = GridReport(hypotheses={
        "separation": sep,
        "nontrivial_on_wO": witness is not None,
        "witness": None if witness is None else witness.encode(),
        "status": "ok" if sep and witness is not None else "hypotheses violated",
    })
    for m in range(m_range[0], m_range[1] + 1):
        pts = grid_points(spec, m)
        if reps_per_m is not None:
            pts = pts[:reps_per_m]
        for y in pts:
            res = decouple_integral(spec, z1, z2, y, m)
            approx = res.value.to_complex()
            zero = res.value.is_zero()
            sound = (abs(approx) < 1e-9) == zero
            report.entries.append({
                "m": m,
                "y": y.encode(),
                "value": str(res.value),
                "value_float": [approx.real, approx.imag],
                "exact_zero": zero,
                "case": res.case,
                "w_valuation": res.w_valuation if res.w_valuation != math.inf else "inf",
                "bound_ok": res.bound_ok,
            })
            report.all_zero &= zero
            report.soundness_ok &= sound
            report.bounds_ok &= res.bound_ok
    return report
