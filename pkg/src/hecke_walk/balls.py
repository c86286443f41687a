"""Measures on ``K`` at finite ball resolution.

A window ``(lo, M)`` tracks the balls ``c + w**M O`` whose center ``c`` has
digits only at positions ``lo..M-1``.  A ball key is the tuple of those
digits, position ``lo`` first.  Everything that falls outside the window is
booked as ``escape_mass`` rather than dropped.

Images of balls under ``(x, w**n)`` with ``n < 0`` are coarser than the
window; their mass is split uniformly over the ``q**(-n)`` sub-balls.  This
is exact for measures that are ``O``-invariant, which is the case of
interest (stationary measures of absorbing walks, ``m_O``, ...).
"""

from __future__ import annotations

import csv
import io
import math
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import Iterable, Mapping

from .algebra import FieldContext, XiElem

Key = tuple[int, ...]


class PreconditionError(ValueError):
    """An operation was called outside its domain; ``witness`` explains why."""

    def __init__(self, message: str, witness=None):
        super().__init__(message)
        self.witness = witness


@dataclass(frozen=True)
class Ball:
    center: XiElem
    level: int

    def contains(self, y: XiElem) -> bool:
        return (y - self.center).valuation() >= self.level


@dataclass(frozen=True, eq=False)
class BallMeasure:
    ctx: FieldContext
    lo: int
    level: int
    masses: Mapping[Key, object]
    escape_mass: object = 0
    n_samples: int | None = None
    _prefix_cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.lo >= self.level:
            raise ValueError(f"empty window [{self.lo}, {self.level})")
        width = self.level - self.lo
        clean = {}
        for k, m in self.masses.items():
            k = tuple(k)
            if len(k) != width or any(not 0 <= d < self.ctx.q for d in k):
                raise ValueError(f"bad ball key {k} for window {self.window}")
            if m < 0:
                raise ValueError(f"negative mass at {k}")
            if m:
                clean[k] = m
        object.__setattr__(self, "masses", clean)

    def __eq__(self, other):
        if not isinstance(other, BallMeasure):
            return NotImplemented
        return (self.ctx, self.lo, self.level, self.masses, self.escape_mass) == (
            other.ctx, other.lo, other.level, other.masses, other.escape_mass)

    @property
    def window(self) -> tuple[int, int]:
        return (self.lo, self.level)

    @property
    def width(self) -> int:
        return self.level - self.lo

    def total(self):
        return sum(self.masses.values(), 0) + self.escape_mass

    def in_window_mass(self):
        return sum(self.masses.values(), 0)

    def __getitem__(self, key: Key):
        return self.masses.get(tuple(key), 0)

    # -- keys and centers ------------------------------------------------
    def center(self, key: Key) -> XiElem:
        return self.ctx.from_digits({self.lo + i: d for i, d in enumerate(key) if d})

    def key_of(self, y: XiElem) -> Key | None:
        """Key of the window ball containing ``y``; ``None`` if it escapes."""
        digits, below = y.digit_window(self.lo, self.level)
        return None if below else digits

    def all_keys(self) -> Iterable[Key]:
        return product(range(self.ctx.q), repeat=self.width)

    def o_keys(self) -> list[Key]:
        """Keys of the balls inside ``O`` (digits below position 0 vanish)."""
        self._need_o_window()
        lead = (0,) * (-self.lo)
        return [lead + tail for tail in product(range(self.ctx.q), repeat=self.level)]

    def coset_of_key(self, key: Key) -> Key:
        """Digits below position 0: labels the ``O``-coset of the ball."""
        self._need_o_window()
        return key[: -self.lo] if self.lo < 0 else ()

    def _need_o_window(self):
        if not self.lo <= 0 <= self.level:
            raise PreconditionError(f"window {self.window} does not contain [0, {self.level})")

    # -- constructors ----------------------------------------------------
    @classmethod
    def haar_o(cls, ctx: FieldContext, level: int, lo: int = 0, exact: bool = True):
        """Normalized Haar measure ``m_O`` at ball resolution."""
        w = Fraction(1, ctx.q ** level) if exact else ctx.q ** (-level)
        lead = (0,) * (-lo)
        masses = {lead + t: w for t in product(range(ctx.q), repeat=level)}
        return cls(ctx, lo, level, masses)

    @classmethod
    def point(cls, ctx: FieldContext, y: XiElem, window: tuple[int, int]):
        lo, level = window
        probe = cls(ctx, lo, level, {})
        key = probe.key_of(y)
        if key is None:
            return cls(ctx, lo, level, {}, escape_mass=Fraction(1))
        return cls(ctx, lo, level, {key: Fraction(1)})

    def replace(self, masses, escape_mass=None) -> BallMeasure:
        esc = self.escape_mass if escape_mass is None else escape_mass
        return BallMeasure(self.ctx, self.lo, self.level, masses, esc, self.n_samples)

    # -- resolution ------------------------------------------------------
    def coarsen(self) -> BallMeasure:
        """Sum ``q``-tuples of sibling balls: window ``(lo, M-1)``."""
        if self.level - 1 <= self.lo:
            raise ValueError("cannot coarsen below the window floor")
        out: dict[Key, object] = defaultdict(int)
        for k, m in self.masses.items():
            out[k[:-1]] += m
        return BallMeasure(self.ctx, self.lo, self.level - 1, dict(out), self.escape_mass, self.n_samples)

    def _prefix_masses(self, depth: int) -> dict[Key, object]:
        if depth not in self._prefix_cache:
            out: dict[Key, object] = defaultdict(int)
            for k, m in self.masses.items():
                out[k[:depth]] += m
            self._prefix_cache[depth] = dict(out)
        return self._prefix_cache[depth]

    def mass_of_ball(self, center: XiElem, level: int):
        """Mass of ``center + w**level O`` as seen at this resolution.

        Balls finer than the window get the uniform share of their parent;
        coarser balls collect the window balls they contain.  Escaped mass is
        never attributed.
        """
        q = self.ctx.q
        if level >= self.level:
            key = self.key_of(center)
            if key is None:
                return 0
            m = self.masses.get(key, 0)
            share = level - self.level
            return m / q ** share if share else m
        if level <= self.lo:
            # window centers are all in w**lo O, hence in the ball iff center is
            return self.in_window_mass() if center.valuation() >= level else 0
        digits, below = center.digit_window(self.lo, level)
        if below:
            return 0
        return self._prefix_masses(level - self.lo).get(digits, 0)

    # -- invariance ------------------------------------------------------
    def is_l_invariant(self) -> tuple[bool, object]:
        """Exact test: equal masses on all same-level balls of each ``O``-coset."""
        self._need_o_window()
        per_coset: dict[Key, dict[Key, object]] = defaultdict(dict)
        for k, m in self.masses.items():
            per_coset[self.coset_of_key(k)][k] = m
        full = self.ctx.q ** self.level
        for coset, balls in per_coset.items():
            values = set(balls.values())
            if len(balls) < full:
                present = next(iter(balls))
                missing = next(
                    coset + t for t in product(range(self.ctx.q), repeat=self.level)
                    if coset + t not in balls)
                return False, {present: balls[present], missing: 0}
            if len(values) > 1:
                a, b = sorted(balls.items(), key=lambda kv: kv[1])[:: len(balls) - 1]
                return False, {a[0]: a[1], b[0]: b[1]}
        return True, None

    # -- serialization ---------------------------------------------------
    def key_text(self, key: Key) -> str:
        return ",".join(map(str, key))

    def to_csv(self) -> str:
        exact = all(isinstance(m, (int, Fraction)) for m in self.masses.values())
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if exact:
            w.writerow(["ball_key", "mass_num", "mass_den"])
            for k in sorted(self.masses):
                m = Fraction(self.masses[k])
                w.writerow([self.key_text(k), m.numerator, m.denominator])
            e = Fraction(self.escape_mass)
            w.writerow(["escape", e.numerator, e.denominator])
        else:
            w.writerow(["ball_key", "mass_float"])
            for k in sorted(self.masses):
                w.writerow([self.key_text(k), format(float(self.masses[k]), ".17g")])
            w.writerow(["escape", format(float(self.escape_mass), ".17g")])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, ctx: FieldContext, window: tuple[int, int]) -> BallMeasure:
        rows = list(csv.reader(io.StringIO(text)))
        header, body = rows[0], rows[1:]
        exact = header == ["ball_key", "mass_num", "mass_den"]
        if not exact and header != ["ball_key", "mass_float"]:
            raise ValueError(f"unrecognized header {header}")
        masses, escape = {}, 0
        for row in body:
            m = Fraction(int(row[1]), int(row[2])) if exact else float(row[1])
            if row[0] == "escape":
                escape = m
            else:
                masses[tuple(int(d) for d in row[0].split(","))] = m
        return cls(ctx, window[0], window[1], masses, escape)


def total_variation(a: Mapping[Key, object], b: Mapping[Key, object]):
    keys = set(a) | set(b)
    return sum((abs(a.get(k, 0) - b.get(k, 0)) for k in keys), 0) / 2


def max_relative_spread(values: list[float]) -> float:
    top = max(values)
    return 0.0 if top == 0 else (top - min(values)) / top


def log_ratio(num, den) -> float:
    """``log(num/den)`` for exact or float positive values, without overflow."""
    if isinstance(num, Fraction) or isinstance(den, Fraction):
        r = Fraction(num) / Fraction(den)
        return math.log(r.numerator) - math.log(r.denominator)
    return math.log(num) - math.log(den)
