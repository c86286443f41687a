from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hecke_walk.balls import PreconditionError
from hecke_walk.subsum import CANTOR, INTERVAL, UNDETERMINED, Beta, subsum_classify, subsum_enumerate, subsum_member

THIRD = Beta.geometric(1, Fraction(1, 3))


def in_scaled_cantor(x: Fraction) -> bool:
    """Membership in ``{sum e_k 3**(1-k)} = (3/2) C`` through the ternary digits of ``2x/3``."""
    y = Fraction(2, 3) * Fraction(x)
    if not 0 <= y <= 1:
        return False
    seen = set()
    while y not in seen:
        seen.add(y)
        if Fraction(1, 3) < y < Fraction(2, 3):
            return False
        y = 3 * y if y <= Fraction(1, 3) else 3 * y - 2
    return True


def test_enumerate_examples():
    assert list(subsum_enumerate(Beta.finite([Fraction(1, 2), Fraction(1, 4)]), 2)) == [
        0, Fraction(1, 4), Fraction(1, 2), Fraction(3, 4)]
    assert list(subsum_enumerate(Beta.geometric(1, Fraction(1, 2)), 3)) == [Fraction(k, 4) for k in range(8)]
    for beta in (THIRD, Beta.geometric(Fraction(2, 3), Fraction(3, 5))):
        for N in (0, 5, 12):
            sums = subsum_enumerate(beta, N)
            assert sums[-1] == beta.B0 - beta.tail_sum(N)
            assert len(sums) == len(set(sums))
    with pytest.raises(ValueError):
        subsum_enumerate(THIRD, 25)


def test_classify_examples():
    rep = subsum_classify(THIRD)
    assert rep.classification == CANTOR and rep.measure_limit == 0
    rep = subsum_classify(Beta.geometric(1, Fraction(1, 2)))
    assert rep.classification == INTERVAL and rep.interval == (0, 2)
    rep = subsum_classify(Beta.geometric(Fraction(1, 2), Fraction(1, 2)))
    assert rep.interval == (0, 1)
    mixed = Beta((Fraction(1), Fraction(1, 10)), (Fraction(1, 20), Fraction(1, 2)))
    assert subsum_classify(mixed).classification == UNDETERMINED
    with pytest.raises(PreconditionError):
        subsum_classify(Beta((Fraction(1, 4), Fraction(1, 2)), (Fraction(1, 8), Fraction(1, 2))))


def test_cantor_cover_is_disjoint():
    """For beta_n > B_n the level-N intervals ``[s, s + B_N]`` are pairwise disjoint."""
    for N in (4, 10, 16):
        sums = subsum_enumerate(THIRD, N)
        tol = THIRD.tail_sum(N)
        assert len(sums) == 2 ** N
        assert all(b - a > tol for a, b in zip(sums, sums[1:]))


def test_member_examples():
    assert subsum_member(THIRD, 0, 20).verdict == "in"
    assert subsum_member(THIRD, THIRD.B0 + 1, 20).verdict == "out"
    assert subsum_member(THIRD, Fraction(3, 4), 20).verdict == "out"
    # 1/2 = sum_{k>=2} 3**(1-k) lies in the set
    res = subsum_member(THIRD, Fraction(1, 2), 20)
    assert in_scaled_cantor(Fraction(1, 2)) and res.verdict == "in"


@settings(max_examples=300, deadline=None)
@given(st.fractions(min_value=0, max_value=Fraction(3, 2), max_denominator=3 ** 7))
def test_member_agrees_with_cantor_oracle(x):
    verdict = subsum_member(THIRD, x, 20).verdict
    truth = in_scaled_cantor(x)
    if verdict == "in":
        assert truth
    if verdict == "out":
        assert not truth
    if truth:
        assert verdict in ("in", "boundary")


@settings(max_examples=200, deadline=None)
@given(st.sampled_from([Fraction(1, 2), Fraction(2, 3), Fraction(9, 10)]), st.fractions(0, 1))
def test_interval_case_everything_is_in(rho, u):
    beta = Beta.geometric(1, rho)
    assert subsum_member(beta, u * beta.B0, 24).verdict == "in"


def test_beta_parse_and_describe():
    b = Beta.parse("geometric:a=1,rho=1/3")
    assert b == THIRD and Beta.parse(b.describe()) == b
    f = Beta.parse("list:1/2, 1/4")
    assert f.is_finite and f.B0 == Fraction(3, 4) and Beta.parse(f.describe()) == f
    with pytest.raises(ValueError):
        Beta.parse("geometric:a=1")
    with pytest.raises(ValueError):
        Beta.geometric(1, 1)
