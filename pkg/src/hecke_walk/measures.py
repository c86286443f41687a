"""Finitely supported measures on ``Gamma`` and on ``Gamma/Lambda = H/L``."""

from __future__ import annotations

import json
from collections import defaultdict
from fractions import Fraction
from typing import Iterable, Mapping

from .algebra import (
    CosetKey,
    FieldContext,
    GroupElem,
    XiElem,
    coset_of,
    decompose,
    lambda_orbit,
)
from .balls import BallMeasure, PreconditionError

ORBIT_BUDGET = 1 << 16


class _FiniteMeasure:
    __slots__ = ("ctx", "weights")

    def __init__(self, ctx: FieldContext, weights: Mapping):
        clean = {}
        for k, w in weights.items():
            if k.ctx != ctx:
                raise ValueError(f"{k} does not live in {ctx}")
            if w < 0:
                raise ValueError(f"negative weight at {k}")
            if w:
                clean[k] = w
        self.ctx = ctx
        self.weights = clean

    def __eq__(self, other):
        return type(other) is type(self) and self.ctx == other.ctx and self.weights == other.weights

    def __hash__(self):
        return hash((self.ctx, frozenset(self.weights.items())))

    def __len__(self):
        return len(self.weights)

    def __getitem__(self, key):
        return self.weights.get(key, 0)

    def items(self):
        return self.weights.items()

    def support(self):
        return set(self.weights)

    def total(self):
        return sum(self.weights.values(), 0)

    def is_probability(self) -> bool:
        return self.total() == 1

    def is_exact(self) -> bool:
        return all(isinstance(w, (int, Fraction)) for w in self.weights.values())

    def scaled(self, a):
        return type(self)(self.ctx, {k: a * w for k, w in self.weights.items()})

    def __add__(self, other):
        if type(other) is not type(self) or other.ctx != self.ctx:
            return NotImplemented
        out = dict(self.weights)
        for k, w in other.weights.items():
            out[k] = out.get(k, 0) + w
        return type(self)(self.ctx, out)

    def to_float(self):
        return type(self)(self.ctx, {k: float(w) for k, w in self.weights.items()})

    def sorted_items(self):
        return sorted(self.weights.items(), key=lambda kv: kv[0].sort_key())

    def __repr__(self):
        body = ", ".join(f"{k.encode()}: {w}" for k, w in self.sorted_items())
        return f"{type(self).__name__}({{{body}}})"


class SparseMeasure(_FiniteMeasure):
    """Weights on ``Gamma`` keyed by :class:`GroupElem`."""

    __slots__ = ()

    @classmethod
    def delta(cls, g: GroupElem) -> SparseMeasure:
        return cls(g.ctx, {g: Fraction(1)})

    @classmethod
    def uniform(cls, elems: Iterable[GroupElem]) -> SparseMeasure:
        elems = list(elems)
        w = Fraction(1, len(elems))
        out: dict = defaultdict(Fraction)
        for g in elems:
            out[g] += w
        return cls(elems[0].ctx, out)

    def to_json(self) -> str:
        rows = [{"x": g.x.encode(), "n": g.n, "w": _frac_text(w)} for g, w in self.sorted_items()]
        return json.dumps(rows, indent=1)

    @classmethod
    def from_json(cls, text: str, ctx: FieldContext) -> SparseMeasure:
        out: dict = defaultdict(int)
        for row in json.loads(text):
            if set(row) != {"x", "n", "w"}:
                raise ValueError(f"bad measure row {row}")
            out[GroupElem(ctx.parse(row["x"]), int(row["n"]))] += _parse_weight(row["w"])
        return cls(ctx, out)


class CosetMeasure(_FiniteMeasure):
    """Weights on ``Gamma/Lambda`` keyed by :class:`CosetKey`.

    Read on ``H/L`` this is ``theta-bar``; the measure on ``H`` is obtained by
    spreading each coset's mass with Haar measure on ``L``.
    """

    __slots__ = ()

    @classmethod
    def delta(cls, c: CosetKey) -> CosetMeasure:
        return cls(c.ctx, {c: Fraction(1)})

    def to_json(self) -> str:
        rows = [{"r": c.r.encode(), "n": c.n, "w": _frac_text(w)} for c, w in self.sorted_items()]
        return json.dumps(rows, indent=1)

    @classmethod
    def from_json(cls, text: str, ctx: FieldContext) -> CosetMeasure:
        out: dict = defaultdict(int)
        for row in json.loads(text):
            if set(row) != {"r", "n", "w"}:
                raise ValueError(f"bad coset row {row}")
            r = ctx.parse(row["r"])
            n = int(row["n"])
            if r.residue(n) != r:
                raise ValueError(f"{row['r']} is not a canonical residue at level {n}")
            out[CosetKey(ctx, n, r)] += _parse_weight(row["w"])
        return cls(ctx, out)


def _frac_text(w) -> str:
    if isinstance(w, (int, Fraction)):
        w = Fraction(w)
        return f"{w.numerator}/{w.denominator}"
    return format(float(w), ".17g")


def _parse_weight(text):
    text = str(text)
    if "." in text or "e" in text.lower():
        return float(text)
    return Fraction(text)


def _same_ctx(a: _FiniteMeasure, b: _FiniteMeasure):
    from .algebra import ContextMismatchError

    if a.ctx != b.ctx:
        raise ContextMismatchError(f"{a.ctx} vs {b.ctx}")


# -- basic operations -------------------------------------------------------

def convolve(t1: SparseMeasure, t2: SparseMeasure) -> SparseMeasure:
    _same_ctx(t1, t2)
    out: dict = defaultdict(int)
    for g, a in t1.items():
        for h, b in t2.items():
            out[g * h] += a * b
    return SparseMeasure(t1.ctx, out)


def convolution_power(t: SparseMeasure, n: int) -> SparseMeasure:
    out = SparseMeasure.delta(t.ctx.identity())
    for _ in range(n):
        out = convolve(out, t)
    return out


def pushforward_coset(t: SparseMeasure) -> CosetMeasure:
    out: dict = defaultdict(int)
    for g, w in t.items():
        out[coset_of(g)] += w
    return CosetMeasure(t.ctx, out)


def _orbit_groups(m: CosetMeasure) -> dict:
    groups: dict = defaultdict(dict)
    for c, w in m.items():
        groups[c.orbit_id()][c] = w
    return groups


def invariance_witness(m: CosetMeasure):
    """``None`` if ``m`` is constant on every ``Lambda``-orbit, else a witness orbit.

    The witness maps keys of the orbit to their masses; for large orbits only
    two keys with distinct masses are listed.
    """
    for members in _orbit_groups(m).values():
        c0 = next(iter(members))
        size = c0.orbit_size()
        if len(members) == size and len(set(members.values())) == 1:
            continue
        if size <= ORBIT_BUDGET:
            return {c: members.get(c, 0) for c in sorted(lambda_orbit(c0), key=CosetKey.sort_key)}
        lo_c = min(members, key=members.get)
        if len(members) < size:
            other = next(c for c in _iter_orbit(c0) if c not in members)
            return {c0: members[c0], other: 0}
        hi_c = max(members, key=members.get)
        return {lo_c: members[lo_c], hi_c: members[hi_c]}
    return None


def _iter_orbit(c: CosetKey):
    from .algebra import _residues

    low = c.r.residue(0)
    for t in _residues(c.ctx, 0, c.n):
        yield CosetKey(c.ctx, c.n, low + t)


def is_lambda_invariant(m: CosetMeasure) -> bool:
    return invariance_witness(m) is None


def is_absorbing(t: SparseMeasure) -> tuple[bool, object]:
    witness = invariance_witness(pushforward_coset(t))
    return witness is None, witness


def coset_convolve(a: CosetMeasure, b: CosetMeasure) -> CosetMeasure:
    """``sum_eta a(eta) b(eta^-1 gamma)`` computed through the canonical section."""
    _same_ctx(a, b)
    witness = invariance_witness(b)
    if witness is not None:
        raise PreconditionError("right factor is not Lambda-invariant", witness)
    out: dict = defaultdict(int)
    for c1, w1 in a.items():
        eta = c1.representative()
        for c2, w2 in b.items():
            out[coset_of(eta * c2.representative())] += w1 * w2
    return CosetMeasure(a.ctx, out)


def orbit_average(m: CosetMeasure) -> CosetMeasure:
    """Affine retraction onto ``Lambda``-invariant measures."""
    out: dict = defaultdict(int)
    for members in _orbit_groups(m).values():
        c0 = next(iter(members))
        size = c0.orbit_size()
        if size > ORBIT_BUDGET:
            raise ValueError(f"orbit of {c0} has {size} cosets, over budget")
        avg = sum(members.values(), 0) / size
        for c in lambda_orbit(c0):
            out[c] += avg
    return CosetMeasure(m.ctx, out)


# -- constructors of absorbing measures ---------------------------------------

def absorb_lift(t: SparseMeasure, domain: Iterable[GroupElem] | None = None) -> SparseMeasure:
    """Orbit-average the coset image of ``t``, then lift it back along the section.

    ``domain`` is the finite set ``S`` of the construction (defaults to the
    support of ``t``); the internal measure on ``Lambda`` is uniform on
    ``{lam_g : g in S}`` so the map is affine on measures supported in ``S``.
    """
    domain = set(t.support()) if domain is None else set(domain)
    if not t.support() <= domain:
        raise ValueError("t is not supported in the given domain")
    lams = sorted({decompose(g)[1] for g in domain}, key=GroupElem.sort_key)
    r = Fraction(1, len(lams))
    hat = orbit_average(pushforward_coset(t))
    out: dict = defaultdict(int)
    for c, w in hat.items():
        beta = c.representative()
        for lam in lams:
            out[beta * lam] += w * r
    return SparseMeasure(t.ctx, out)


def commuting_average(t: SparseMeasure) -> SparseMeasure:
    """Average ``t(a g)`` over representatives ``a`` of ``Xi_o / w**max(n,0) Xi_o``."""
    from .algebra import _residues

    out: dict = defaultdict(int)
    reps_cache: dict[int, list[XiElem]] = {}
    for g, w in t.items():
        k = max(g.n, 0)
        if k not in reps_cache:
            if t.ctx.q ** k > ORBIT_BUDGET:
                raise ValueError(f"level {k} exceeds the orbit budget")
            reps_cache[k] = list(_residues(t.ctx, 0, k))
        reps = reps_cache[k]
        share = w / len(reps)
        for a in reps:
            out[GroupElem(g.x - a, g.n)] += share
    return SparseMeasure(t.ctx, out)


def affine_step_measure(kappa: Mapping[XiElem, object], t_minus: Mapping[XiElem, object],
                        delta) -> SparseMeasure:
    """Two-level step law: ``tau_1 * delta`` at ``w**1`` and ``t_minus * (1-delta)`` at ``w**-1``.

    ``tau_1(x) = mean_{s in S} kappa(x - s)``, i.e. the averaging set is the
    negated digit set, so ``kappa = delta_0`` gives ``tau_1`` uniform on ``S``.
    """
    delta = Fraction(delta) if not isinstance(delta, float) else delta
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    ctx = next(iter(kappa)).ctx
    for name, m in (("kappa", kappa), ("t_minus", t_minus)):
        if sum(m.values(), 0) != 1 or any(w < 0 for w in m.values()):
            raise ValueError(f"{name} must be a probability measure on Xi")
    out: dict = defaultdict(int)
    digits = [ctx.from_int(s) for s in ctx.digit_set]
    for x, w in kappa.items():
        for s in digits:
            out[GroupElem(x + s, 1)] += w * delta / len(digits)
    for x, w in t_minus.items():
        out[GroupElem(x, -1)] += w * (1 - delta)
    return SparseMeasure(ctx, out)


# -- Hecke completion ---------------------------------------------------------

def theta_of(t: SparseMeasure) -> CosetMeasure:
    """``theta-bar`` of an absorbing ``t`` (the completion measure on ``H`` at coset resolution)."""
    ok, witness = is_absorbing(t)
    if not ok:
        raise PreconditionError("theta is only defined on Lambda-absorbing measures", witness)
    return pushforward_coset(t)


def z_drift(t: _FiniteMeasure):
    return sum((w * k.n for k, w in t.items()), 0)


def lambda_saturation(keys: Iterable[CosetKey]) -> set[CosetKey]:
    out: set[CosetKey] = set()
    for c in keys:
        out |= lambda_orbit(c)
    return out


def spread_out_certificate(t: SparseMeasure, radius: int) -> tuple[bool, dict]:
    """Bounded search for the generators ``(+-1, 0)`` and ``(0, w**+-1)`` among products.

    Finding all four proves the support generates ``Gamma`` as a semigroup.
    Not finding them is inconclusive.
    """
    ctx = t.ctx
    one = ctx.one()
    targets = {
        "(1,0)": GroupElem(one, 0),
        "(-1,0)": GroupElem(-one, 0),
        "(0,w)": GroupElem(ctx.zero(), 1),
        "(0,w^-1)": GroupElem(ctx.zero(), -1),
    }
    seen = set(t.support())
    frontier = set(seen)
    for _ in range(radius - 1):
        frontier = {g * s for g in frontier for s in t.support()} - seen
        seen |= frontier
    found = {name: g in seen for name, g in targets.items()}
    return all(found.values()), found


# -- action on ball measures --------------------------------------------------

def _push_ball_mixture(pairs, xi: BallMeasure) -> BallMeasure:
    from .algebra import _residues

    q = xi.ctx.q
    lo, level = xi.window
    out: dict = defaultdict(int)
    escape = 0
    centers = {k: xi.center(k) for k in xi.masses}
    for g, w in pairs:
        escape += w * xi.escape_mass
        if g.n >= 0:
            for k, m in xi.masses.items():
                key = xi.key_of(g.act(centers[k]))
                if key is None:
                    escape += w * m
                else:
                    out[key] += w * m
            continue
        coarse = level + g.n
        fill = list(_residues(xi.ctx, coarse, level))
        share = q ** (-g.n)
        for k, m in xi.masses.items():
            base = g.act(centers[k]).residue(coarse)
            part = w * m / share
            for f in fill:
                key = xi.key_of(base + f)
                if key is None:
                    escape += part
                else:
                    out[key] += part
    return xi.replace(dict(out), escape)


def act_ball(t, xi: BallMeasure) -> BallMeasure:
    """``t * xi`` at ball resolution for a :class:`SparseMeasure` or a :class:`CosetMeasure`.

    The coset form acts through the section ``beta`` and requires ``xi`` to be
    ``L``-invariant.
    """
    if t.ctx != xi.ctx:
        from .algebra import ContextMismatchError

        raise ContextMismatchError(f"{t.ctx} vs {xi.ctx}")
    if isinstance(t, CosetMeasure):
        ok, witness = xi.is_l_invariant()
        if not ok:
            raise PreconditionError("coset form needs an L-invariant ball measure", witness)
        pairs = [(c.representative(), w) for c, w in t.sorted_items()]
    else:
        pairs = t.sorted_items()
    return _push_ball_mixture(pairs, xi)


# -- reference measures used across the package ------------------------------

def e_lamp(q: int = 2) -> SparseMeasure:
    """Uniform on ``{(s, w) : s in S}`` in the lamplighter group ``F_q wr Z``."""
    ctx = FieldContext(q, "modular")
    return SparseMeasure.uniform(GroupElem(ctx.from_int(s), 1) for s in ctx.digit_set)


def e_bs(q: int = 2, delta=Fraction(3, 4)) -> SparseMeasure:
    """``delta * uniform{(s, w)} + (1 - delta) * delta_{(0, w^-1)}`` in ``BS(1, q)``."""
    ctx = FieldContext(q, "carry")
    return affine_step_measure({ctx.zero(): Fraction(1)}, {ctx.zero(): Fraction(1)}, delta)
