"""Subsum sets ``{sum_{n in S} beta_n : S subset of N}`` of positive summable sequences."""

from __future__ import annotations

import math
from bisect import bisect_left, bisect_right
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .balls import PreconditionError

ENUM_BUDGET = 24

INTERVAL = "interval"
CANTOR = "cantor"
UNDETERMINED = "finite-union-or-cantorval-undetermined"


@dataclass(frozen=True)
class Beta:
    """A finite prefix followed by an optional geometric tail ``a, a*rho, a*rho**2, ...``."""

    prefix: tuple[Fraction, ...] = ()
    tail: tuple[Fraction, Fraction] | None = None

    def __post_init__(self):
        object.__setattr__(self, "prefix", tuple(Fraction(b) for b in self.prefix))
        if any(b <= 0 for b in self.prefix):
            raise ValueError("terms must be positive")
        if self.tail is not None:
            a, rho = (Fraction(v) for v in self.tail)
            if a <= 0 or not 0 < rho < 1:
                raise ValueError(f"geometric tail needs a > 0 and 0 < rho < 1, got a={a}, rho={rho}")
            object.__setattr__(self, "tail", (a, rho))

    @classmethod
    def geometric(cls, a, rho) -> Beta:
        return cls((), (a, rho))

    @classmethod
    def finite(cls, terms) -> Beta:
        return cls(tuple(terms), None)

    @classmethod
    def parse(cls, text: str) -> Beta:
        """``geometric:a=<r>,rho=<r>``, ``list:<r>,<r>,...`` or ``file:<path>``."""
        kind, _, body = text.strip().partition(":")
        if kind == "geometric":
            fields = dict(part.split("=", 1) for part in body.split(","))
            if set(fields) != {"a", "rho"}:
                raise ValueError(f"geometric descriptor needs a and rho, got {sorted(fields)}")
            return cls.geometric(_rational(fields["a"]), _rational(fields["rho"]))
        if kind == "list":
            return cls.finite(_rational(p) for p in body.split(",") if p.strip())
        if kind == "file":
            content = Path(body).read_text().strip()
            if content.startswith(("geometric:", "list:")):
                return cls.parse(content)
            return cls.finite(_rational(p) for p in content.replace(",", " ").split())
        raise ValueError(f"unknown beta descriptor {text!r}")

    def describe(self) -> str:
        if not self.prefix and self.tail:
            return f"geometric:a={self.tail[0]},rho={self.tail[1]}"
        body = "list:" + ",".join(str(b) for b in self.prefix)
        return body if self.tail is None else f"{body}+geometric:a={self.tail[0]},rho={self.tail[1]}"

    @property
    def is_finite(self) -> bool:
        return self.tail is None

    def term(self, k: int) -> Fraction:
        """``beta_k`` for ``k >= 1``."""
        if k < 1:
            raise IndexError(k)
        if k <= len(self.prefix):
            return self.prefix[k - 1]
        if self.tail is None:
            return Fraction(0)
        a, rho = self.tail
        return a * rho ** (k - 1 - len(self.prefix))

    def terms(self, n: int) -> list[Fraction]:
        return [self.term(k) for k in range(1, n + 1)]

    def tail_sum(self, n: int) -> Fraction:
        """``B_n = sum_{k > n} beta_k``."""
        L = len(self.prefix)
        total = sum(self.prefix[n:], Fraction(0)) if n < L else Fraction(0)
        if self.tail is not None:
            a, rho = self.tail
            j = max(n - L, 0)
            total += a * rho ** j / (1 - rho)
        return total

    @property
    def B0(self) -> Fraction:
        return self.tail_sum(0)


def _rational(text: str) -> Fraction:
    return Fraction(text.strip())


class SumSet(Sequence):
    """Sorted distinct subset sums kept as integer numerators over one denominator."""

    def __init__(self, numerators, denominator: int):
        self.num = numerators
        self.den = denominator

    def __len__(self):
        return len(self.num)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [Fraction(int(v), self.den) for v in self.num[i]]
        return Fraction(int(self.num[i]), self.den)

    def __iter__(self) -> Iterator[Fraction]:
        return (Fraction(int(v), self.den) for v in self.num)

    def as_set(self) -> set[Fraction]:
        return set(self)

    def nearest_distance(self, x: Fraction) -> Fraction:
        nums = self.num
        scaled = x * self.den
        i = bisect_left(_IntView(nums), math.floor(scaled))
        best = None
        for j in (i - 1, i, i + 1):
            if 0 <= j < len(nums):
                d = abs(Fraction(int(nums[j]), self.den) - x)
                best = d if best is None or d < best else best
        return best

    def covers(self, x: Fraction, width: Fraction) -> bool:
        """Whether ``x`` lies in some ``[s, s + width]``."""
        scaled = x * self.den
        j = bisect_right(_IntView(self.num), math.floor(scaled)) - 1
        return j >= 0 and x - Fraction(int(self.num[j]), self.den) <= width


class _IntView:
    def __init__(self, arr):
        self.arr = arr

    def __len__(self):
        return len(self.arr)

    def __getitem__(self, i):
        return int(self.arr[i])


def subsum_enumerate(beta: Beta, N: int) -> SumSet:
    """All ``2**N`` subset sums of ``beta_1..beta_N``, sorted and deduplicated."""
    if not 0 <= N <= ENUM_BUDGET:
        raise ValueError(f"N must lie in [0, {ENUM_BUDGET}]")
    terms = beta.terms(N)
    den = math.lcm(*(b.denominator for b in terms)) if terms else 1
    ints = [int(b * den) for b in terms]
    if sum(ints) < 1 << 62:
        sums = np.zeros(1, dtype=np.int64)
        for b in ints:
            sums = np.unique(np.concatenate([sums, sums + b]))
        return SumSet(sums, den)
    acc = {0}
    for b in ints:
        acc |= {s + b for s in acc}
    return SumSet(sorted(acc), den)


@dataclass
class SubsumReport:
    classification: str
    B0: Fraction
    measure_limit: object
    truncation_level: int
    truncated_sums: list[Fraction] = field(default_factory=list)
    interval: tuple[Fraction, Fraction] | None = None

    def to_dict(self) -> dict:
        return {
            "classification": self.classification,
            "B0": _frac(self.B0),
            "measure_limit": _frac(self.measure_limit) if isinstance(self.measure_limit, Fraction)
            else self.measure_limit,
            "truncation_level": self.truncation_level,
            "truncated_sums": [_frac(s) for s in self.truncated_sums],
            "interval": None if self.interval is None else [_frac(v) for v in self.interval],
        }


def _frac(x: Fraction) -> str:
    x = Fraction(x)
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def _check_monotone(beta: Beta, upto: int):
    for k in range(1, upto):
        if beta.term(k + 1) > beta.term(k):
            raise PreconditionError(f"beta is not non-increasing at k={k}",
                                    {"k": k, "beta_k": beta.term(k), "beta_k+1": beta.term(k + 1)})


def subsum_classify(beta: Beta, truncation_level: int = 10) -> SubsumReport:
    """Apply the dichotomy ``beta_n > B_n`` for all ``n`` (Cantor) versus ``beta_n <= B_n`` (interval).

    On the geometric tail both comparisons reduce to ``rho`` against ``1/2``,
    so checking the prefix and one tail index decides every ``n``.
    """
    L = len(beta.prefix)
    _check_monotone(beta, L + 2)
    sums = list(subsum_enumerate(beta, min(truncation_level, ENUM_BUDGET)))
    if beta.is_finite:
        return SubsumReport(UNDETERMINED, beta.B0, Fraction(0), truncation_level, sums)
    checked = range(1, L + 2)
    above = all(beta.term(n) > beta.tail_sum(n) for n in checked)
    below = all(beta.term(n) <= beta.tail_sum(n) for n in checked)
    rho = beta.tail[1]
    if above and rho < Fraction(1, 2):
        # 2**n B_n = const * (2 rho)**n -> 0
        return SubsumReport(CANTOR, beta.B0, Fraction(0), truncation_level, sums)
    if below and rho >= Fraction(1, 2):
        return SubsumReport(INTERVAL, beta.B0, beta.B0, truncation_level, sums, (Fraction(0), beta.B0))
    return SubsumReport(UNDETERMINED, beta.B0, "unknown", truncation_level, sums)


@dataclass
class MemberResult:
    verdict: str
    tolerance: Fraction
    witness: tuple[int, ...] | None = None


def subsum_member(beta: Beta, target, N: int) -> MemberResult:
    """Decide ``target`` against the level-``N`` cover ``union [s, s + B_N]`` of the subsum set.

    ``in``: the greedy choice of terms leaves a remainder in ``[0, B_N]``.
    ``out``: no subset sum ``s`` of the first ``N`` terms has
    ``s <= target <= s + B_N``, which excludes ``target`` from the set.
    ``boundary``: covered, but not by the greedy certificate.
    """
    _check_monotone(beta, N + 1)
    target = Fraction(target)
    tol = beta.tail_sum(N)
    terms = beta.terms(N)
    r = target
    chosen = []
    for k, b in enumerate(terms, 1):
        if b <= r:
            r -= b
            chosen.append(k)
    if 0 <= r <= tol:
        return MemberResult("in", tol, tuple(chosen))
    if target < 0 or target > beta.B0:
        return MemberResult("out", tol)
    found = _cover_search(terms, [beta.tail_sum(k) for k in range(N + 1)], target)
    if found is None:
        return MemberResult("out", tol)
    return MemberResult("boundary", tol, found)


def _cover_search(terms, tails, target):
    """Depth-first search for a subset whose cover interval contains ``target``."""
    N = len(terms)
    stack = [(0, Fraction(0), ())]
    while stack:
        k, partial, chosen = stack.pop()
        if not partial <= target <= partial + tails[k]:
            continue
        if k == N:
            return chosen
        stack.append((k + 1, partial, chosen))
        stack.append((k + 1, partial + terms[k], chosen + (k + 1,)))
    return None
