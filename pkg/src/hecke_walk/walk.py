"""Seeded random walks on ``Gamma`` and their boundary in ``K``.

The boundary point of a path ``z_k = g_1 ... g_k`` with ``g_j = (x_j, n_j)``
is the limit of ``z_k . 0 = x_1 + w**M_1 x_2 + w**M_2 x_3 + ...`` where
``M_k = n_1 + ... + n_k``.  It exists when the exponent drift is positive.
A digit at position ``p`` can only be touched again while ``M_k + A <= p``,
``A`` being the lowest valuation in the step law, so the sampler stops once
the exponent path has stayed high enough for long enough and a Chernoff
bound on a later dip is below ``guard.eps``.

All randomness comes from :mod:`hecke_walk.rng`: sample ``i`` of a run with
seed ``s`` uses the stream ``child_seed(s, i)`` and step ``k`` consumes its
``(k-1)``-th uniform, so the scalar and vectorized samplers agree exactly.
"""

from __future__ import annotations

import math
import os
from bisect import bisect_right
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple

import numpy as np
from scipy import optimize, stats

from . import rng
from .algebra import CARRY, GroupElem, XiElem
from .balls import Ball, BallMeasure, PreconditionError, max_relative_spread, total_variation
from .measures import SparseMeasure, act_ball, z_drift

DEFAULT_WINDOW = (-4, 8)
CHUNK = 1 << 16


class BudgetError(RuntimeError):
    """The step budget ran out before the window froze; ``report`` has the partial state."""

    def __init__(self, message: str, report: dict):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True)
class Guard:
    patience: int = 8
    eps: float = 1e-9
    max_steps: int = 100_000


@dataclass(frozen=True)
class WalkRecord:
    seed: int
    steps: tuple[GroupElem, ...]
    products: tuple[GroupElem, ...]

    @property
    def exponents(self) -> tuple[int, ...]:
        return tuple(z.n for z in self.products)

    @property
    def final(self) -> GroupElem:
        return self.products[-1]


@dataclass(frozen=True)
class BoundaryDiagnostics:
    stop_time: int
    dip_bound: float
    theta_star: float
    threshold: int
    escaped: bool

    def to_dict(self) -> dict:
        return {"stop_time": self.stop_time, "dip_bound": self.dip_bound,
                "escape_mass": 1.0 if self.escaped else 0.0}


class _StepTable:
    """Inverse-CDF sampler over the support in ``GroupElem.sort_key`` order."""

    def __init__(self, t: SparseMeasure):
        items = t.sorted_items()
        if not items:
            raise ValueError("empty step law")
        total = sum((Fraction(w) for _, w in items), Fraction(0))
        if abs(float(total) - 1.0) > 1e-12:
            raise ValueError(f"step law has total mass {float(total)}, expected 1")
        self.elems = [g for g, _ in items]
        acc = Fraction(0)
        cum = []
        for _, w in items:
            acc += Fraction(w)
            cum.append(float(acc / total))
        self.cum = cum
        self.cum_np = np.array(cum)
        self.last = len(cum) - 1

    def draw(self, u: float) -> int:
        return min(bisect_right(self.cum, u), self.last)

    def draw_np(self, u: np.ndarray) -> np.ndarray:
        return np.minimum(np.searchsorted(self.cum_np, u, side="right"), self.last)


def sample_path(t: SparseMeasure, steps: int, seed: int) -> WalkRecord:
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    table = _StepTable(t)
    z = t.ctx.identity()
    incs, prods = [], [z]
    for k in range(steps):
        g = table.elems[table.draw(rng.uniform(seed, k))]
        z = z * g
        incs.append(g)
        prods.append(z)
    return WalkRecord(seed, tuple(incs), tuple(prods))


# -- boundary sampling --------------------------------------------------------

def dip_rate(t: SparseMeasure) -> float:
    """Positive root ``theta*`` of ``E[exp(-theta n)] = 1``; ``inf`` without negative steps."""
    law: dict[int, float] = defaultdict(float)
    for g, w in t.items():
        law[g.n] += float(w)
    ns = np.array(sorted(law), dtype=float)
    ps = np.array([law[n] for n in sorted(law)])
    if (ns >= 0).all():
        return math.inf

    def f(th):
        return float(np.dot(ps, np.expm1(-th * ns)))

    hi = 1.0
    while f(hi) <= 0:
        hi *= 2
    lo = hi / 2
    while f(lo) >= 0:
        lo /= 2
    return optimize.brentq(f, lo, hi, xtol=1e-15, rtol=1e-14)


@dataclass(frozen=True)
class _BoundaryParams:
    table: _StepTable
    A: float
    threshold: int
    theta: float
    h_req: int
    guard: Guard

    def dip_bound(self, m: int) -> float:
        if self.theta == math.inf:
            return 0.0
        return math.exp(-self.theta * (m - self.threshold + 1))


def _boundary_params(t: SparseMeasure, level: int, guard: Guard) -> _BoundaryParams:
    drift = z_drift(t)
    if drift <= 0:
        raise PreconditionError(
            f"exponent drift {drift} is not positive; the boundary series does not converge",
            {"drift": drift})
    vals = [g.x.valuation() for g in t.support() if not g.x.is_zero()]
    A = min(vals) if vals else math.inf
    theta = dip_rate(t)
    threshold = level - A if vals else 0
    if theta == math.inf:
        h_req = 0
    else:
        h_req = max(0, math.ceil(math.log(1 / guard.eps) / theta - 1))
    return _BoundaryParams(_StepTable(t), A, int(threshold), theta, h_req, guard)


def sample_boundary(t: SparseMeasure, window=DEFAULT_WINDOW, seed: int = 0,
                    guard: Guard | None = None) -> tuple[tuple[int, ...] | None, BoundaryDiagnostics]:
    """Frozen digits on ``window`` of one boundary draw; ``None`` if digits fall below ``lo``."""
    guard = guard or Guard()
    lo, level = window
    p = _boundary_params(t, level, guard)
    ctx = t.ctx
    if p.A == math.inf:
        digits, _ = ctx.zero().digit_window(lo, level)
        return digits, BoundaryDiagnostics(0, 0.0, p.theta, p.threshold, False)
    x = ctx.zero()
    m = 0
    run = 0
    for k in range(1, guard.max_steps + 1):
        g = p.table.elems[p.table.draw(rng.uniform(seed, k - 1))]
        x = x + g.x.shift(m)
        m += g.n
        run = run + 1 if m >= p.threshold else 0
        if run >= guard.patience and m - p.threshold >= p.h_req:
            digits, below = x.digit_window(lo, level)
            diag = BoundaryDiagnostics(k, p.dip_bound(m), p.theta, p.threshold, below)
            return (None if below else digits), diag
    raise BudgetError(
        f"window did not freeze within {guard.max_steps} steps",
        {"seed": seed, "steps": guard.max_steps, "exponent": m,
         "frozen_below": m + p.A, "partial": x.encode()})


class _VectorPlan:
    """Fixed-width integer encoding of the boundary accumulator.

    Carry mode keeps ``Y = X * q**D mod q**W`` as an int64 with ``D = W - M``;
    a term ``q**M_{k-1} x_j`` with ``x_j = a_j q**e_j`` adds
    ``(a_j mod q**(W-s)) q**s`` where ``s = M_{k-1} + D + e_j``.  Modular mode
    keeps the digits on positions ``[M-W, M)`` directly.  A term reaching
    below position ``M-W`` marks the walk as deep; deep walks are redone by
    the exact scalar sampler.
    """

    def __init__(self, t: SparseMeasure, window, guard: Guard):
        self.t = t
        self.ctx = t.ctx
        self.window = window
        lo, level = window
        self.p = _boundary_params(t, level, guard)
        q = self.ctx.q
        self.q = q
        self.width = level - lo
        elems = self.p.table.elems
        self.n = np.array([g.n for g in elems], dtype=np.int64)
        self.nonzero = np.array([not g.x.is_zero() for g in elems])
        if self.ctx.mode == CARRY:
            w_max = 0
            while q ** (w_max + 1) <= 1 << 62:
                w_max += 1
            self.W = min(w_max, self.width + 40)
            if self.W <= self.width:
                raise ValueError("window too wide for the vectorized sampler")
            self.D = self.W - level
            self.qW = q ** self.W
            self.e = np.zeros(len(elems), dtype=np.int64)
            table = np.zeros((len(elems), self.W + 1), dtype=np.int64)
            for j, g in enumerate(elems):
                if g.x.is_zero():
                    continue
                v = int(g.x.valuation())
                a = g.x.value * Fraction(q) ** (-v)
                assert a.denominator == 1
                self.e[j] = v
                for s in range(self.W):
                    table[j, s] = (a.numerator % q ** (self.W - s)) * q ** s
            self.table = table
            self.low_div = q ** (lo + self.D)
        else:
            self.W = self.width + 40
            self.base = level - self.W
            slots = max((len(g.x.value) for g in elems), default=0)
            self.pos = np.zeros((len(elems), max(slots, 1)), dtype=np.int64)
            self.coef = np.zeros((len(elems), max(slots, 1)), dtype=np.int64)
            for j, g in enumerate(elems):
                for i, (pos, c) in enumerate(g.x.value):
                    self.pos[j, i] = pos
                    self.coef[j, i] = c
        self.powers = np.array([q ** i for i in range(self.width)], dtype=np.int64)

    def code_of(self, digits) -> int:
        return -1 if digits is None else int(sum(d * q for d, q in zip(digits, self.powers.tolist())))

    def run_chunk(self, seeds: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        p = self.p
        guard = p.guard
        B = len(seeds)
        codes = np.zeros(B, dtype=np.int64)
        stop = np.zeros(B, dtype=np.int64)
        if p.A == math.inf:
            return codes, stop
        carry = self.ctx.mode == CARRY
        idx = np.arange(B)
        act_seeds = seeds.copy()
        M = np.zeros(B, dtype=np.int64)
        run = np.zeros(B, dtype=np.int64)
        Y = np.zeros(B, dtype=np.int64) if carry else np.zeros((B, self.W), dtype=np.int64)
        deep_rows: list[int] = []
        for k in range(1, guard.max_steps + 1):
            if len(idx) == 0:
                break
            j = p.table.draw_np(rng.uniforms_np(act_seeds, k - 1))
            if carry:
                s = M + self.D + self.e[j]
                deep = self.nonzero[j] & (s < 0)
                Y = (Y + self.table[j, np.clip(s, 0, self.W)]) % self.qW
            else:
                deep = np.zeros(len(idx), dtype=bool)
                rows = np.arange(len(idx))
                for slot in range(self.pos.shape[1]):
                    c = self.coef[j, slot]
                    col = M + self.pos[j, slot] - self.base
                    valid = (c > 0) & (col < self.W)
                    deep |= valid & (col < 0)
                    valid &= col >= 0
                    r, cc = rows[valid], col[valid]
                    Y[r, cc] = (Y[r, cc] + c[valid]) % self.q
            M = M + self.n[j]
            run = np.where(M >= p.threshold, run + 1, 0)
            done = (run >= guard.patience) & (M - p.threshold >= p.h_req)
            if deep.any():
                deep_rows.extend(idx[deep].tolist())
                done = done & ~deep
            if done.any():
                sel = idx[done]
                stop[sel] = k
                codes[sel] = self._codes(Y[done])
            keep = ~(done | deep)
            if not keep.all():
                idx, act_seeds, M, run, Y = idx[keep], act_seeds[keep], M[keep], run[keep], Y[keep]
        else:
            if len(idx):
                raise BudgetError(
                    f"window did not freeze within {guard.max_steps} steps",
                    {"seed": int(act_seeds[0]), "steps": guard.max_steps,
                     "exponent": int(M[0]), "frozen_below": float(M[0] + p.A)})
        for i in deep_rows:
            digits, diag = sample_boundary(self.t, self.window, int(seeds[i]), guard)
            codes[i] = self.code_of(digits)
            stop[i] = diag.stop_time
        return codes, stop

    def _codes(self, Y: np.ndarray) -> np.ndarray:
        lo, _ = self.window
        if self.ctx.mode == CARRY:
            escaped = (Y % self.low_div) != 0
            code = Y // self.low_div
        else:
            cut = lo - self.base
            escaped = (Y[:, :cut] != 0).any(axis=1)
            code = Y[:, cut:] @ self.powers
        return np.where(escaped, -1, code)


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("HECKE_WALK_THREADS", "1")))
    except ValueError:
        return 1


def boundary_codes(t: SparseMeasure, n_samples: int, window=DEFAULT_WINDOW, seed: int = 0,
                   guard: Guard | None = None, vectorized: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Window codes (``-1`` for escape) and stop times of ``n_samples`` boundary draws.

    Code ``c`` encodes the ball key ``d`` by ``c = sum d_i q**i``.
    """
    guard = guard or Guard()
    if not vectorized:
        codes = np.empty(n_samples, dtype=np.int64)
        stops = np.empty(n_samples, dtype=np.int64)
        plan_w = (window[1] - window[0])
        powers = [t.ctx.q ** i for i in range(plan_w)]
        for i in range(n_samples):
            digits, diag = sample_boundary(t, window, rng.child_seed(seed, i), guard)
            codes[i] = -1 if digits is None else sum(d * w for d, w in zip(digits, powers))
            stops[i] = diag.stop_time
        return codes, stops
    plan = _VectorPlan(t, window, guard)
    bounds = [(a, min(a + CHUNK, n_samples)) for a in range(0, n_samples, CHUNK)]

    def work(b):
        return plan.run_chunk(rng.child_seeds_np(seed, b[0], b[1]))

    threads = min(_threads(), max(len(bounds), 1))
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(work, bounds))
    else:
        parts = [work(b) for b in bounds]
    if not parts:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    return np.concatenate([c for c, _ in parts]), np.concatenate([s for _, s in parts])


def key_of_code(code: int, q: int, width: int) -> tuple[int, ...]:
    out = []
    for _ in range(width):
        code, d = divmod(code, q)
        out.append(d)
    return tuple(out)


def stationary_run(t: SparseMeasure, n_samples: int, window=DEFAULT_WINDOW, seed: int = 0,
                   guard: Guard | None = None, vectorized: bool = True) -> tuple[BallMeasure, dict]:
    guard = guard or Guard()
    codes, stops = boundary_codes(t, n_samples, window, seed, guard, vectorized)
    lo, level = window
    values, counts = np.unique(codes, return_counts=True)
    masses = {}
    escape = Fraction(0)
    for c, n in zip(values.tolist(), counts.tolist()):
        if c < 0:
            escape = Fraction(n, n_samples)
        else:
            masses[key_of_code(c, t.ctx.q, level - lo)] = Fraction(n, n_samples)
    nu = BallMeasure(t.ctx, lo, level, masses, escape, n_samples)
    p = _boundary_params(t, level, guard)
    diag = {
        "stop_time": float(stops.mean()) if len(stops) else 0.0,
        "max_stop_time": int(stops.max()) if len(stops) else 0,
        "dip_bound": p.dip_bound(p.threshold + p.h_req),
        "escape_mass": float(escape),
    }
    return nu, diag


def empirical_stationary(t: SparseMeasure, n_samples: int, window=DEFAULT_WINDOW, seed: int = 0,
                         guard: Guard | None = None, vectorized: bool = True) -> BallMeasure:
    """Histogram of boundary draws at ball resolution, escape mass included."""
    return stationary_run(t, n_samples, window, seed, guard, vectorized)[0]


# -- statistics --------------------------------------------------------------

class Residual(NamedTuple):
    tv: object
    escape_delta: object


def stationarity_residual(t, nu_hat: BallMeasure) -> Residual:
    """Total variation between ``nu_hat`` and ``t * nu_hat`` on window balls."""
    image = act_ball(t, nu_hat)
    return Residual(total_variation(nu_hat.masses, image.masses),
                    image.escape_mass - nu_hat.escape_mass)


@dataclass
class InvarianceReport:
    deviation: float
    max_deviation: float
    min_mass: float
    chi_square: float | None
    dof: int | None
    p_value: float | None
    per_coset: dict = field(default_factory=dict)


def invariance_stats(nu_hat: BallMeasure, mass_floor: float = 1e-3) -> InvarianceReport:
    """``O``-invariance and positivity statistics of a ball measure.

    ``deviation`` is ``(max - min) / max`` over the balls of ``O`` itself;
    ``max_deviation`` is the largest such spread over ``O``-cosets carrying
    at least ``mass_floor`` of mass.  The chi-square needs ``n_samples``.
    """
    nu_hat._need_o_window()
    q = nu_hat.ctx.q
    tails = list(nu_hat.o_keys())
    suffixes = [k[-nu_hat.level:] if nu_hat.level else () for k in tails]
    cosets: set = {nu_hat.coset_of_key(k) for k in nu_hat.masses}
    cosets.add(nu_hat.coset_of_key(tails[0]))
    per_coset = {}
    chi, dof = 0.0, 0
    for c in sorted(cosets):
        vals = [float(nu_hat[c + s]) for s in suffixes]
        per_coset[c] = {"mass": math.fsum(vals), "deviation": max_relative_spread(vals)}
        if nu_hat.n_samples and per_coset[c]["mass"] > 0:
            counts = np.array(vals) * nu_hat.n_samples
            expected = counts.mean()
            chi += float(((counts - expected) ** 2).sum() / expected)
            dof += len(vals) - 1
    o_coset = nu_hat.coset_of_key(tails[0])
    heavy = [v["deviation"] for v in per_coset.values() if v["mass"] >= mass_floor]
    min_mass = min(float(nu_hat[k]) for k in tails)
    p_value = float(stats.chi2.sf(chi, dof)) if dof else None
    return InvarianceReport(
        deviation=per_coset[o_coset]["deviation"],
        max_deviation=max(heavy, default=0.0),
        min_mass=min_mass,
        chi_square=chi if dof else None,
        dof=dof or None,
        p_value=p_value,
        per_coset=per_coset,
    )


# -- contraction and coupling -------------------------------------------------

@dataclass
class ContractionCurve:
    steps: np.ndarray
    values: np.ndarray
    stderr: np.ndarray
    diam0: float
    method: str

    def fit_ratio(self, start: int, stop: int) -> float:
        """Least-squares slope of ``log value`` against ``n`` on ``start..stop``, exponentiated."""
        sel = (self.steps >= start) & (self.steps <= stop) & (self.values > 0)
        slope = np.polyfit(self.steps[sel], np.log(self.values[sel]), 1)[0]
        return float(np.exp(slope))


def _exponent_law(t: SparseMeasure) -> tuple[np.ndarray, np.ndarray]:
    law: dict[int, Fraction] = defaultdict(Fraction)
    for g, w in t.items():
        law[g.n] += Fraction(w)
    ns = sorted(law)
    return np.array(ns, dtype=np.int64), np.array([float(law[n]) for n in ns])


def _pairwise_valuation(codes: np.ndarray, q: int, width: int) -> np.ndarray:
    """Lowest differing digit index between window codes; ``width`` when equal."""
    out = np.full(codes.shape[:-1], width, dtype=np.int64)
    k = codes.shape[-1]
    for a in range(k):
        for b in range(a + 1, k):
            x, y = codes[..., a].copy(), codes[..., b].copy()
            v = np.full(out.shape, width, dtype=np.int64)
            for i in range(width):
                diff = (x % q != y % q) & (v == width)
                v[diff] = i
                x //= q
                y //= q
            out = np.minimum(out, v)
    return out


def _draw_codes(nu: BallMeasure, n: int, seed: int) -> np.ndarray:
    keys = sorted(nu.masses)
    weights = [Fraction(nu.masses[k]) for k in keys]
    total = sum(weights, Fraction(0))
    cum, acc = [], Fraction(0)
    for w in weights:
        acc += w
        cum.append(float(acc / total))
    idx = np.minimum(np.searchsorted(np.array(cum), rng.uniforms_np(rng.child_seeds_np(seed, 0, n), 0),
                                     side="right"), len(keys) - 1)
    q = nu.ctx.q
    codes = np.array([sum(d * q ** i for i, d in enumerate(k)) for k in keys], dtype=np.int64)
    return codes[idx]


def contraction_stat(t: SparseMeasure, n: int, k: int, n_trials: int, seed: int = 0,
                     window=(-8, 16), importance: bool = True,
                     guard: Guard | None = None, nu_hat: BallMeasure | None = None) -> ContractionCurve:
    """``E[max_{i<j} |z_m y_i - z_m y_j|]`` for ``m = 0..n`` with ``y_i`` i.i.d. boundary draws.

    For the affine action the diameter scales by ``q**-M_m`` exactly, so each
    trial contributes ``q**-(M_m + v_min)`` where ``v_min`` is the lowest
    valuation of a pairwise difference (capped at the window top).  With
    ``importance=True`` the exponents are drawn from the law tilted by
    ``q**-n`` and reweighted by the likelihood ratio; plain sampling of
    ``q**-M_m`` has variance growing like ``(E[q**-2n] / E[q**-n]**2)**m``.
    The points come from ``nu_hat`` (ball centers) when given, otherwise
    from boundary draws of ``t`` on ``window``.
    """
    if k < 2:
        raise ValueError("k must be at least 2")
    q = t.ctx.q
    if nu_hat is not None:
        window = nu_hat.window
        codes = _draw_codes(nu_hat, n_trials * k, rng.child_seed(seed, 0))
    else:
        codes, _ = boundary_codes(t, n_trials * k, window, rng.child_seed(seed, 0), guard)
    lo, level = window
    codes = codes.reshape(n_trials, k)
    vmin = lo + _pairwise_valuation(np.where(codes < 0, 0, codes), q, level - lo)
    d0 = np.power(float(q), -vmin.astype(float))
    ns, ps = _exponent_law(t)
    if importance:
        tilt = ps * np.power(float(q), -ns.astype(float))
        Z = tilt.sum()
        law = tilt / Z
    else:
        Z, law = 1.0, ps
    cum = np.cumsum(law)
    cum[-1] = 1.0
    walk_seeds = rng.child_seeds_np(rng.child_seed(seed, 1), 0, n_trials)
    M = np.zeros(n_trials, dtype=np.int64)
    logw = np.zeros(n_trials)
    values, errs = [], []
    for m in range(n + 1):
        if m:
            j = np.minimum(np.searchsorted(cum, rng.uniforms_np(walk_seeds, m - 1), side="right"), len(ns) - 1)
            M += ns[j]
            if importance:
                logw += math.log(Z) + ns[j] * math.log(q)
        sample = d0 * np.exp(logw - M * math.log(q))
        values.append(sample.mean())
        errs.append(sample.std(ddof=1) / math.sqrt(n_trials) if n_trials > 1 else 0.0)
    return ContractionCurve(np.arange(n + 1), np.array(values), np.array(errs),
                            float(d0.mean()), "tilted" if importance else "plain")


def contraction_stat_exact(t: SparseMeasure, n: int, points: list[XiElem], seed: int = 0) -> list[Fraction]:
    """One trajectory: exact ``max_{i<j} |z_m y_i - z_m y_j|`` for ``m = 0..n`` via the group action."""
    rec = sample_path(t, n, seed)
    out = []
    for z in rec.products:
        imgs = [z.act(y) for y in points]
        out.append(max((a - b).abs() for i, a in enumerate(imgs) for b in imgs[i + 1:]))
    return out


def coupling_moment(t: SparseMeasure, n: int, A: Ball, B: Ball, n_trials: int, seed: int,
                    nu_hat: BallMeasure):
    """Monte Carlo ``E[nu_hat(z_n^-1 A) nu_hat(z_n^-1 B)]``.

    ``z_n^-1 (c + w**l O) = z_n^-1 c + w**(l - M_n) O``; masses of balls
    coarser or finer than the window come from :meth:`BallMeasure.mass_of_ball`.
    The estimate is an exact rational when ``nu_hat`` is exact.
    """
    total = 0
    for i in range(n_trials):
        z = sample_path(t, n, rng.child_seed(seed, i)).final
        zi = z.inverse()
        a = nu_hat.mass_of_ball(zi.act(A.center), A.level - z.n)
        b = nu_hat.mass_of_ball(zi.act(B.center), B.level - z.n)
        total += a * b
    return total / n_trials if isinstance(total, float) else Fraction(total) / n_trials
