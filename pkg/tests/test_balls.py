from __future__ import annotations

from fractions import Fraction

import pytest

from hecke_walk.algebra import FieldContext
from hecke_walk.balls import Ball, BallMeasure, PreconditionError, max_relative_spread, total_variation

M2 = FieldContext(2, "modular")
C3 = FieldContext(3)


def test_haar_and_point():
    h = BallMeasure.haar_o(M2, 3)
    assert len(h.masses) == 8 and h.total() == 1
    assert h.is_l_invariant() == (True, None)
    p = BallMeasure.point(M2, M2.one(), (0, 2))
    assert p.masses == {(1, 0): 1}
    ok, witness = p.is_l_invariant()
    assert not ok and set(witness.values()) == {0, 1}
    far = BallMeasure.point(M2, M2.from_digits({-3: 1}), (-2, 2))
    assert far.masses == {} and far.escape_mass == 1


def test_key_of_and_center():
    xi = BallMeasure(C3, -1, 2, {})
    y = C3.parse("-1/3")
    key = xi.key_of(y)
    assert Ball(xi.center(key), 2).contains(y)
    assert xi.key_of(C3.parse("1/9")) is None


def test_mass_of_ball_levels():
    h = BallMeasure.haar_o(M2, 3, lo=-1)
    assert h.mass_of_ball(M2.zero(), 0) == 1
    assert h.mass_of_ball(M2.zero(), 2) == Fraction(1, 4)
    assert h.mass_of_ball(M2.one(), 5) == Fraction(1, 32)
    assert h.mass_of_ball(M2.from_digits({-1: 1}), 0) == 0
    assert h.mass_of_ball(M2.zero(), -4) == 1


def test_coarsen_preserves_mass():
    h = BallMeasure.haar_o(C3, 2, lo=-1)
    c = h.coarsen()
    assert c.window == (-1, 1) and c.total() == 1
    assert all(m == Fraction(1, 3) for m in c.masses.values())


@pytest.mark.parametrize("exact", [True, False])
def test_csv_round_trip(exact):
    h = BallMeasure.haar_o(C3, 2, lo=-1, exact=exact)
    text = h.to_csv()
    assert text.splitlines()[0] == ("ball_key,mass_num,mass_den" if exact else "ball_key,mass_float")
    back = BallMeasure.from_csv(text, C3, h.window)
    assert back == h


def test_bad_keys_rejected():
    with pytest.raises(ValueError):
        BallMeasure(M2, 0, 2, {(2, 0): 1})
    with pytest.raises(ValueError):
        BallMeasure(M2, 0, 0, {})
    with pytest.raises(PreconditionError):
        BallMeasure(M2, 1, 3, {}).o_keys()


def test_helpers():
    assert total_variation({(0,): Fraction(1)}, {(1,): Fraction(1)}) == 1
    assert total_variation({(0,): Fraction(1, 2)}, {(0,): Fraction(1, 2)}) == 0
    assert max_relative_spread([1.0, 1.0]) == 0
    assert max_relative_spread([1.0, 0.0]) == 1
