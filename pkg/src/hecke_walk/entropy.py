"""Furstenberg entropy at ball resolution and Shannon entropy of convolution powers."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction

from .balls import BallMeasure, PreconditionError
from .measures import SparseMeasure, convolve


class PositivityError(PreconditionError):
    """A ball of positive mass is sent to a ball of zero mass."""


def _factor(n: int) -> dict[int, int]:
    out: dict[int, int] = {}
    d = 2
    while d * d <= n:
        while n % d == 0:
            out[d] = out.get(d, 0) + 1
            n //= d
        d += 1
    if n > 1:
        out[n] = out.get(n, 0) + 1
    return out


@dataclass(frozen=True)
class LogCombination:
    """``sum_p c_p log p`` over primes with rational ``c_p``; equality is exact."""

    coeffs: tuple[tuple[int, Fraction], ...]

    @classmethod
    def from_terms(cls, terms: dict[Fraction, Fraction]) -> LogCombination:
        """``sum coef * log(ratio)`` for positive rational ratios."""
        acc: dict[int, Fraction] = defaultdict(Fraction)
        for ratio, coef in terms.items():
            ratio = Fraction(ratio)
            for p, e in _factor(ratio.numerator).items():
                acc[p] += coef * e
            for p, e in _factor(ratio.denominator).items():
                acc[p] -= coef * e
        return cls(tuple(sorted((p, c) for p, c in acc.items() if c)))

    @classmethod
    def log_of(cls, r, coef=1) -> LogCombination:
        return cls.from_terms({Fraction(r): Fraction(coef)})

    def __add__(self, other: LogCombination) -> LogCombination:
        acc = dict(self.coeffs)
        for p, c in other.coeffs:
            acc[p] = acc.get(p, 0) + c
        return LogCombination(tuple(sorted((p, c) for p, c in acc.items() if c)))

    def scale(self, a) -> LogCombination:
        return LogCombination(tuple((p, c * a) for p, c in self.coeffs if c * a))

    def __float__(self) -> float:
        return math.fsum(float(c) * math.log(p) for p, c in self.coeffs)

    def __str__(self) -> str:
        if not self.coeffs:
            return "0"
        return " + ".join(f"{c}*log({p})" for p, c in self.coeffs)


@dataclass
class EntropyEstimate:
    value: float
    refinement_error: float
    truncation_mass: float
    exact: LogCombination | None = None

    @property
    def bound(self) -> float:
        return self.refinement_error


def _neg_log(num, den) -> float:
    if isinstance(num, Fraction) or isinstance(den, Fraction):
        r = Fraction(num) / Fraction(den)
        return math.log(r.denominator) - math.log(r.numerator)
    return math.log(den) - math.log(num)


def _terms_at(t: SparseMeasure, nu: BallMeasure):
    """Weighted log-ratio terms, truncated mass, and whether all inputs were exact."""
    terms: dict = defaultdict(int)
    truncated = 0
    exact = t.is_exact() and all(isinstance(m, (int, Fraction)) for m in nu.masses.values())
    for g, w in t.sorted_items():
        for key, m in sorted(nu.masses.items()):
            image = g.act(nu.center(key))
            level = nu.level + g.n
            if level > nu.lo and nu.key_of(image) is None and image.valuation() < nu.lo:
                truncated += w * m
                continue
            mg = nu.mass_of_ball(image, level)
            if mg == 0:
                raise PositivityError(
                    f"ball {key} has mass {m} but its image under {g.encode()} has mass 0",
                    {"ball": key, "element": g.encode()})
            ratio = Fraction(mg) / Fraction(m) if exact else float(mg) / float(m)
            terms[ratio] += w * m
    return terms, truncated, exact


def _value(terms) -> float:
    return math.fsum(float(c) * _neg_log(r, 1) for r, c in terms.items()) if terms else 0.0


def furstenberg_entropy(t: SparseMeasure, nu_hat: BallMeasure, level: int | None = None) -> EntropyEstimate:
    """``sum_g t(g) sum_B nu(B) (-log nu(g B) / nu(B))`` over window balls ``B``.

    The refinement error is the change from the next coarser level; balls
    whose image leaves the window are skipped and their weight reported as
    ``truncation_mass``.  When all inputs are exact the value is also given
    as an exact combination of logarithms of primes.
    """
    nu = nu_hat
    while level is not None and nu.level > level:
        nu = nu.coarsen()
    terms, truncated, exact = _terms_at(t, nu)
    value = _value(terms)
    refinement = 0.0
    if nu.level - 1 > nu.lo:
        coarse_terms, _, _ = _terms_at(t, nu.coarsen())
        refinement = abs(value - _value(coarse_terms))
    combo = None
    if exact:
        combo = LogCombination.from_terms(terms).scale(-1)
        if len(terms) == 1:
            (r, c), = terms.items()
            value = float(c) * _neg_log(r, 1)
    return EntropyEstimate(value, refinement, float(truncated), combo)


@dataclass
class ConvPowerEntropy:
    rows: list[tuple[int, float, float]]
    complete: bool

    def increments(self) -> list[float]:
        return [inc for _, _, inc in self.rows[1:]]


def shannon(weights) -> float:
    return math.fsum(-float(p) * (math.log(p.numerator) - math.log(p.denominator))
                     if isinstance(p, Fraction) else -p * math.log(p) for p in weights if p)


def conv_power_entropy(t: SparseMeasure, n_max: int, budget: int = 2_000_000) -> ConvPowerEntropy:
    """Exact ``H(t^{*n})`` for ``n = 0..n_max`` with increments; stops early past ``budget`` elements."""
    if not t.is_exact():
        raise ValueError("conv_power_entropy needs exact weights")
    cur = SparseMeasure.delta(t.ctx.identity())
    rows = [(0, 0.0, 0.0)]
    prev = 0.0
    for n in range(1, n_max + 1):
        if len(cur) * len(t) > budget:
            return ConvPowerEntropy(rows, False)
        cur = convolve(cur, t)
        h = shannon(cur.weights.values())
        rows.append((n, h, h - prev))
        prev = h
    return ConvPowerEntropy(rows, True)


def extrapolated_rate(result: ConvPowerEntropy, tail: int = 7) -> float:
    """Entropy rate from the last ``tail`` increments, fitted as ``h + a/n + b/n**2``.

    Raw increments of ``H(t^{*n})`` approach the rate from above with an
    ``O(1/n)`` excess, so a plain tail average is biased at desk-scale ``n``.
    """
    import numpy as np

    rows = [r for r in result.rows[1:]][-tail:]
    if len(rows) < 3:
        raise ValueError("need at least three increments to extrapolate")
    n = np.array([r[0] for r in rows], dtype=float)
    inc = np.array([r[2] for r in rows])
    design = np.stack([np.ones_like(n), 1 / n, 1 / n ** 2], axis=1)
    return float(np.linalg.lstsq(design, inc, rcond=None)[0][0])
