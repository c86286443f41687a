"""Boundary entropy spectra realized as subsum sets.

Given a positive summable ``beta`` and the entropy ``h_o`` of a base measure,
:func:`plan_spectrum` builds weights ``w_k`` increasing like
``1/sqrt(B_{k-1})`` and from them ``p_k = beta_k w_k``, ``q_k = w_1 / w_k``
and ``h_sigma = 1 / w_1`` so that ``beta_k = p_k q_k h_sigma`` exactly.  The
mixture ``sum_n alpha_n sigma_1 x ... x sigma_n`` with
``alpha_n = q_n - q_{n+1}`` then has the entropy ``sum_{k in I} beta_k`` on
the quotient indexed by ``I``.

The entropy computations and subsum tools live in :mod:`hecke_walk.entropy`
and :mod:`hecke_walk.subsum` and are re-exported here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import product as iproduct
from typing import Iterable

from .balls import PreconditionError
from .entropy import (  # noqa: F401
    ConvPowerEntropy,
    EntropyEstimate,
    LogCombination,
    PositivityError,
    conv_power_entropy,
    extrapolated_rate,
    furstenberg_entropy,
)
from .measures import SparseMeasure, convolution_power
from .subsum import (  # noqa: F401
    Beta,
    MemberResult,
    SubsumReport,
    subsum_classify,
    subsum_enumerate,
    subsum_member,
)

DEFAULT_TERMS = 64


def _sqrt_below(x: Fraction) -> Fraction:
    """Dyadic rational ``s`` with ``s**2 <= x`` and relative error about ``2**-40``."""
    P = 40 + x.denominator.bit_length()
    return Fraction(math.isqrt(math.floor(x * 4 ** P)), 2 ** P)


@dataclass(frozen=True)
class SpectrumPlan:
    beta: Beta
    h_sigma_o: Fraction
    w: tuple[Fraction, ...]
    p: tuple[Fraction, ...]
    q_seq: tuple[Fraction, ...]
    alpha: tuple[Fraction, ...]
    h_sigma: Fraction
    eps: Fraction
    N: int

    @property
    def K(self) -> int:
        return len(self.p)

    def p_k(self, k: int) -> Fraction:
        return self.p[k - 1]

    def q_k(self, k: int) -> Fraction:
        return self.q_seq[k - 1]

    def alpha_n(self, n: int) -> Fraction:
        return self.alpha[n - 1]

    def h_k(self, k: int) -> Fraction:
        return self.p[k - 1] * self.h_sigma

    def check(self) -> dict[str, bool]:
        """Exact verification of every structural identity on the materialized terms."""
        K = self.K
        return {
            "q1_is_one": self.q_seq[0] == 1,
            "product_identity": all(self.beta.term(k) == self.p[k - 1] * self.q_seq[k - 1] * self.h_sigma
                                    for k in range(1, K + 1)),
            "q_strictly_decreasing": all(a > b > 0 for a, b in zip(self.q_seq, self.q_seq[1:])),
            "w_strictly_increasing": all(a < b for a, b in zip(self.w, self.w[1:])),
            "p_in_unit_interval": all(0 < p < 1 for p in self.p),
            "telescoping": all(sum(self.alpha[:M], Fraction(0)) == 1 - self.q_seq[M]
                               for M in range(1, K)),
            "alpha_positive": all(a > 0 for a in self.alpha),
            "eps_in_unit_interval": 0 < self.eps < 1,
            "h_sigma_identity": self.eps * self.N * self.h_sigma_o == self.h_sigma,
        }

    def weighted_sum_bound(self) -> Fraction:
        """Partial sum of ``beta_k w_k`` over the materialized terms."""
        return sum((self.beta.term(k) * self.w[k - 1] for k in range(1, self.K + 1)), Fraction(0))


def plan_spectrum(beta: Beta, h_sigma_o, terms: int = DEFAULT_TERMS) -> SpectrumPlan:
    """Materialize ``terms + 1`` levels of the plan for ``beta`` and base entropy ``h_sigma_o``."""
    h_o = Fraction(h_sigma_o)
    if h_o <= 0:
        raise ValueError("h_sigma_o must be positive")
    if beta.is_finite:
        raise PreconditionError("the planner needs an infinite sequence with a closed-form tail")
    K = terms + 1
    s = [_sqrt_below(beta.tail_sum(k - 1)) for k in range(1, K + 1)]
    if not all(a > b > 0 for a, b in zip(s, s[1:])):
        raise PreconditionError("square-root approximations are not strictly decreasing; raise precision")
    c = 1 / (2 * s[0])
    while True:
        w = [c / sk for sk in s]
        p = [beta.term(k) * w[k - 1] for k in range(1, K + 1)]
        if all(0 < pk < 1 for pk in p):
            break
        c /= 2
    q_seq = [w[0] / wk for wk in w]
    h_sigma = 1 / w[0]
    N = math.floor(h_sigma / h_o) + 1
    eps = h_sigma / (N * h_o)
    alpha = [q_seq[n] - q_seq[n + 1] for n in range(K - 1)]
    return SpectrumPlan(beta, h_o, tuple(w), tuple(p), tuple(q_seq), tuple(alpha), h_sigma, eps, N)


# -- measures of the construction ----------------------------------------------

def sigma_k_measure(plan: SpectrumPlan, k: int, sigma: SparseMeasure) -> SparseMeasure:
    """``(1 - p_k) delta_e + p_k sigma``."""
    if not sigma.is_probability():
        raise ValueError("sigma must be a probability measure")
    pk = plan.p_k(k)
    if not 0 < pk < 1:
        raise PreconditionError(f"p_{k} = {pk} is outside (0, 1)")
    e = sigma.ctx.identity()
    return SparseMeasure.delta(e).scaled(1 - pk) + sigma.scaled(pk)


def sigma_eps_N(plan: SpectrumPlan, sigma_o: SparseMeasure, budget: int = 1 << 18) -> SparseMeasure:
    """``(1 - eps) delta_e + eps sigma_o^{*N}``, whose entropy is ``eps N h(sigma_o)``."""
    if len(sigma_o) ** plan.N > budget:
        raise ValueError(f"sigma_o^*{plan.N} may exceed the support budget {budget}")
    e = sigma_o.ctx.identity()
    return SparseMeasure.delta(e).scaled(1 - plan.eps) + convolution_power(sigma_o, plan.N).scaled(plan.eps)


def tau_beta_truncate(plan: SpectrumPlan, M: int, sigma: SparseMeasure,
                      budget: int = 1 << 20) -> tuple[dict[tuple, Fraction], Fraction]:
    """``sum_{n <= M} alpha_n sigma_1 x ... x sigma_n`` on ``Gamma**M`` with identity padding.

    Returns the weights keyed by ``M``-tuples and the untruncated mass ``q_{M+1}``.
    """
    if M < 1 or M >= plan.K:
        raise ValueError(f"M must lie in [1, {plan.K - 1}]")
    e = sigma.ctx.identity()
    factors = [sorted(sigma_k_measure(plan, k, sigma).items(), key=lambda kv: kv[0].sort_key())
               for k in range(1, M + 1)]
    size = 1
    for f in factors:
        size *= len(f)
    if size > budget:
        raise ValueError(f"product support {size} exceeds budget {budget}")
    out: dict[tuple, Fraction] = {}
    for n in range(1, M + 1):
        pad = (e,) * (M - n)
        a = plan.alpha_n(n)
        for combo in iproduct(*factors[:n]):
            key = tuple(g for g, _ in combo) + pad
            w = a
            for _, x in combo:
                w *= x
            out[key] = out.get(key, Fraction(0)) + w
    return out, plan.q_k(M + 1)


# -- spectrum values ---------------------------------------------------------------

@dataclass(frozen=True)
class SpectrumValue:
    value: Fraction
    cross_check: Fraction

    @property
    def agrees(self) -> bool:
        return self.value == self.cross_check


def spectrum_value(plan: SpectrumPlan, I: Iterable[int], M: int, tail_from: int | None = None) -> SpectrumValue:
    """Entropy ``sum_{k in I} beta_k`` and the mixture double sum it must equal.

    The cross-check evaluates ``sum_{n<=M} alpha_n sum_{k in I, k<=n} h_k``
    with ``h_k = p_k h_sigma`` and adds the untruncated remainder
    ``q_{M+1} sum_{k in I, k<=M} h_k``.  ``tail_from`` adds all ``k >= tail_from``
    to ``I``; terms beyond ``M`` enter both sides through the closed-form tail.
    """
    I = sorted(set(I))
    if M < 1 or M >= plan.K:
        raise ValueError(f"M must lie in [1, {plan.K - 1}]")
    if any(k < 1 for k in I):
        raise ValueError("indices start at 1")
    beta = plan.beta
    if tail_from is not None:
        I = [k for k in I if k < tail_from]
    value = sum((beta.term(k) for k in I), Fraction(0))
    outside = [k for k in I if k > M]
    extra = sum((beta.term(k) for k in outside), Fraction(0))
    if tail_from is not None:
        value += beta.tail_sum(tail_from - 1)
        head = [k for k in range(tail_from, M + 1)]
        I = I + head
        extra += beta.tail_sum(max(M, tail_from - 1))
    inside = set(k for k in I if k <= M)
    cross = _double_sum(plan, inside, M) + extra
    return SpectrumValue(value, cross)


def _double_sum(plan: SpectrumPlan, inside: set[int], M: int) -> Fraction:
    prefix = Fraction(0)
    total = Fraction(0)
    for n in range(1, M + 1):
        if n in inside:
            prefix += plan.h_k(n)
        total += plan.alpha_n(n) * prefix
    return total + plan.q_k(M + 1) * prefix


class _IntegerPlan:
    """The plan's ``alpha_n``, ``h_k`` and ``q_{M+1}`` over one common denominator."""

    def __init__(self, plan: SpectrumPlan, M: int):
        h = [plan.h_k(k) for k in range(1, M + 1)]
        alpha = [plan.alpha_n(n) for n in range(1, M + 1)]
        qM = plan.q_k(M + 1)
        self.dh = math.lcm(*(x.denominator for x in h))
        self.da = math.lcm(*(x.denominator for x in alpha + [qM]))
        self.h = [int(x * self.dh) for x in h]
        self.alpha = [int(x * self.da) for x in alpha]
        self.qM = int(qM * self.da)
        self.M = M

    def double_sum(self, mask: int) -> Fraction:
        prefix = 0
        total = 0
        for n in range(self.M):
            if mask >> n & 1:
                prefix += self.h[n]
            total += self.alpha[n] * prefix
        return Fraction(total + self.qM * prefix, self.da * self.dh)


def spectrum_set(plan: SpectrumPlan, M: int, check: bool = True) -> tuple[set[Fraction], int]:
    """``{spectrum_value(plan, I) : I subset of {1..M}}`` and the number of cross-check failures."""
    beta_den = math.lcm(*(plan.beta.term(k).denominator for k in range(1, M + 1)))
    beta_int = [int(plan.beta.term(k) * beta_den) for k in range(1, M + 1)]
    ip = _IntegerPlan(plan, M) if check else None
    values = set()
    failures = 0
    for mask in range(1 << M):
        v = Fraction(sum(b for i, b in enumerate(beta_int) if mask >> i & 1), beta_den)
        values.add(v)
        if ip is not None and ip.double_sum(mask) != v:
            failures += 1
    return values, failures
