from __future__ import annotations

import cmath
import math
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hecke_walk.algebra import FieldContext, _residues
from hecke_walk.characters import (
    CharacterSpec,
    CycloValue,
    OrderBudgetError,
    decouple_integral,
    eval_character,
    nontrivial_witness,
    verify_decoupled_grid,
)

CTXS = [FieldContext(q, m) for q in (2, 3, 5) for m in ("carry", "modular")]


def rand_xi(ctx, rnd):
    if ctx.mode == "carry":
        return ctx.from_fraction(Fraction(rnd.randint(-200, 200), ctx.q ** rnd.randint(0, 3)))
    return ctx.from_digits({j: rnd.randrange(ctx.q) for j in range(-3, 4)})


def rand_o(ctx, rnd):
    if ctx.mode == "carry":
        return ctx.from_int(rnd.randint(-30, 30))
    return ctx.from_digits({j: rnd.randrange(ctx.q) for j in range(3)})


def char_float(spec, x):
    """Standard character evaluated numerically from the definition."""
    y = x.shift(spec.shift)
    if spec.ctx.mode == "carry":
        frac = y.value - math.floor(y.value)
        return cmath.exp(2j * math.pi * float(frac))
    return cmath.exp(2j * math.pi * dict(y.value).get(-1, 0) / spec.ctx.q)


def integral_oracle(spec, z1, z2, y, m):
    """Riemann sum over ``O`` at a level where every factor is locally constant."""
    ctx = spec.ctx
    L = spec.N + 2 + abs(m)
    total = 0j
    for x in _residues(ctx, 0, L):
        u = y + x.shift(m)
        if not u.is_integral():
            continue
        total += char_float(spec, u * z1) * char_float(spec, x * z2).conjugate()
    return total / ctx.q ** L


def test_character_examples():
    m2 = CharacterSpec(FieldContext(2, "modular"))
    c2 = CharacterSpec(FieldContext(2))
    assert eval_character(m2, m2.ctx.zero()).is_one()
    assert eval_character(m2, m2.ctx.uniformizer_pow(1)) == CycloValue.rational(2, -1)
    i = eval_character(c2, c2.ctx.one())
    assert i == CycloValue.from_root(2, 2, 1) and i.to_complex() == pytest.approx(1j)
    assert nontrivial_witness(m2) is not None and nontrivial_witness(c2) is not None


@pytest.mark.parametrize("ctx", CTXS, ids=lambda c: f"{c.mode}{c.q}")
def test_character_homomorphism(ctx):
    spec = CharacterSpec(ctx)
    rnd = random.Random(ctx.q)
    for _ in range(300):
        x, y = rand_xi(ctx, rnd), rand_xi(ctx, rnd)
        assert eval_character(spec, x + y) == eval_character(spec, x) * eval_character(spec, y)
        assert eval_character(spec, x).to_complex() == pytest.approx(char_float(spec, x), abs=1e-12)
        assert eval_character(spec, -x) == eval_character(spec, x).conj()


def test_order_budget():
    spec = CharacterSpec(FieldContext(2), max_order=2 ** 5)
    with pytest.raises(OrderBudgetError):
        eval_character(spec, spec.ctx.parse("1/64"))


@settings(max_examples=150, deadline=None)
@given(st.sampled_from([2, 3, 5]), st.integers(0, 3),
       st.dictionaries(st.integers(0, 150), st.integers(-3, 3), max_size=4),
       st.dictionaries(st.integers(0, 150), st.integers(-3, 3), max_size=4))
def test_cyclo_ring_matches_complex(q, R, a_raw, b_raw):
    a = CycloValue.root_sum(q, R, a_raw)
    b = CycloValue.root_sum(q, R, b_raw)
    za, zb = a.to_complex(), b.to_complex()
    assert (a + b).to_complex() == pytest.approx(za + zb, abs=1e-9)
    assert (a * b).to_complex() == pytest.approx(za * zb, abs=1e-8)
    assert a.conj().to_complex() == pytest.approx(za.conjugate(), abs=1e-9)
    assert (a - a).is_zero()
    assert a.is_zero() == (abs(za) < 1e-9)


def test_cyclo_canonical_zero():
    for q in (2, 3, 5):
        assert CycloValue.root_sum(q, 2, {e: 1 for e in range(q * q)}).is_zero()
        assert CycloValue.root_sum(q, 1, {e: 1 for e in range(q)}).is_zero()
        assert CycloValue.from_root(q, 3, q * q) == CycloValue.from_root(q, 1, 1)


def test_decouple_examples():
    ctx = FieldContext(2, "modular")
    spec = CharacterSpec(ctx)
    one = ctx.one()
    assert decouple_integral(spec, one, one, ctx.zero(), 0).value.is_one()
    z2 = one + ctx.uniformizer_pow(1)
    assert decouple_integral(spec, one, z2, ctx.zero(), 0).value.is_zero()
    far = ctx.uniformizer_pow(-3)
    res = decouple_integral(spec, one, z2, far, -2)
    assert res.case == "empty" and res.value.is_zero()
    with pytest.raises(ValueError):
        decouple_integral(spec, ctx.uniformizer_pow(-1), one, ctx.zero(), 0)


@pytest.mark.parametrize("ctx", CTXS, ids=lambda c: f"{c.mode}{c.q}")
def test_decouple_matches_riemann_sum(ctx):
    spec = CharacterSpec(ctx)
    rnd = random.Random(7)
    budget = 3 if ctx.q == 5 else 4
    for _ in range(30):
        z1, z2 = rand_o(ctx, rnd), rand_o(ctx, rnd)
        m = rnd.randint(-budget + 2, budget - 2)
        y = rand_xi(ctx, rnd)
        exact = decouple_integral(spec, z1, z2, y, m).value
        assert exact.to_complex() == pytest.approx(integral_oracle(spec, z1, z2, y, m), abs=1e-9)


@pytest.mark.parametrize("ctx", CTXS, ids=lambda c: f"{c.mode}{c.q}")
def test_grid_all_zero(ctx):
    spec = CharacterSpec(ctx)
    z1 = ctx.one()
    z2 = z1 + ctx.uniformizer_pow(1)
    rep = verify_decoupled_grid(spec, z1, z2, (-3, 3))
    assert rep.hypotheses["status"] == "ok"
    assert rep.all_zero and rep.soundness_ok and rep.bounds_ok and rep.passed
    assert {e["case"] for e in rep.entries} >= {"I", "II", "empty"}


def test_grid_control_and_empty():
    ctx = FieldContext(2, "modular")
    spec = CharacterSpec(ctx)
    one = ctx.one()
    rep = verify_decoupled_grid(spec, one, one, (-3, 3))
    assert rep.hypotheses["status"] == "hypotheses violated"
    assert not rep.all_zero and rep.soundness_ok
    hit = [e for e in rep.entries if e["m"] == 0 and e["y"] == ctx.zero().encode()]
    assert hit and hit[0]["value"] == "1"
    empty = verify_decoupled_grid(spec, one, one + ctx.uniformizer_pow(1), (1, 0))
    assert empty.entries == [] and empty.passed
