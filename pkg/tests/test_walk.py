from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest

from hecke_walk import rng
from hecke_walk.algebra import FieldContext, GroupElem
from hecke_walk.balls import Ball, BallMeasure, PreconditionError
from hecke_walk.measures import SparseMeasure, affine_step_measure, e_bs, e_lamp
from hecke_walk.walk import (
    CHUNK,
    BudgetError,
    Guard,
    boundary_codes,
    contraction_stat,
    contraction_stat_exact,
    coupling_moment,
    dip_rate,
    empirical_stationary,
    invariance_stats,
    sample_boundary,
    sample_path,
    stationarity_residual,
)

M2 = FieldContext(2, "modular")
C2 = FieldContext(2)


def test_rng_matches_reference_splitmix64():
    # first three outputs of the reference SplitMix64 generator seeded with 0
    assert [rng.output(0, k) for k in range(3)] == [
        0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F]
    seeds = np.array([0, 1, 2 ** 64 - 1], dtype=np.uint64)
    assert rng.outputs_np(seeds, 5).tolist() == [rng.output(int(s), 5) for s in seeds]
    assert rng.uniforms_np(seeds, 2).tolist() == [rng.uniform(int(s), 2) for s in seeds]
    assert rng.child_seeds_np(7, 3, 6).tolist() == [rng.child_seed(7, i) for i in range(3, 6)]
    assert all(0 <= rng.uniform(9, k) < 1 for k in range(1000))


def test_sample_path_examples():
    t = e_bs()
    assert sample_path(t, 0, 1).final == C2.identity()
    g = GroupElem(C2.parse("1/2"), 1)
    rec = sample_path(SparseMeasure.delta(g), 5, 3)
    assert rec.final == g * g * g * g * g
    assert sample_path(t, 50, 11) == sample_path(t, 50, 11)
    assert sample_path(t, 50, 11) != sample_path(t, 50, 12)


def test_sample_path_frequencies():
    rec = sample_path(e_bs(), 20000, 5)
    up = sum(1 for s in rec.steps if s.n == 1) / 20000
    assert abs(up - 0.75) < 4 * math.sqrt(0.75 * 0.25 / 20000)


def test_dip_rate():
    assert dip_rate(e_bs()) == pytest.approx(math.log(3), rel=1e-12)
    assert dip_rate(e_lamp()) == math.inf


def test_boundary_trivial_and_lamp():
    t = SparseMeasure.delta(GroupElem(C2.zero(), 1))
    for seed in range(5):
        digits, _ = sample_boundary(t, (-2, 4), seed)
        assert digits == (0,) * 6
    lamp = e_lamp()
    M = 10
    for seed in range(20):
        digits, _ = sample_boundary(lamp, (0, M), seed)
        steps = sample_path(lamp, M, seed).steps
        assert digits == tuple(dict(s.x.value).get(0, 0) for s in steps)


def test_boundary_matches_long_path():
    """The returned window agrees with the partial product ``z_K.x`` for ``K`` well past the stop."""
    t = e_bs()
    window = (-2, 6)
    for seed in range(30):
        digits, diag = sample_boundary(t, window, seed)
        x = sample_path(t, diag.stop_time + 300, seed).final.x
        win, below = x.digit_window(*window)
        assert (None if below else win) == digits


def test_boundary_patience_stability():
    t = e_bs()
    for seed in range(40):
        a, _ = sample_boundary(t, (-2, 6), seed, Guard(patience=8))
        b, _ = sample_boundary(t, (-2, 6), seed, Guard(patience=40))
        assert a == b


def test_boundary_errors():
    with pytest.raises(PreconditionError):
        sample_boundary(SparseMeasure.delta(C2.identity()), (0, 2), 0)
    with pytest.raises(PreconditionError):
        sample_boundary(affine_step_measure({C2.zero(): 1}, {C2.zero(): 1}, Fraction(1, 2)), (0, 2), 0)
    with pytest.raises(BudgetError) as err:
        sample_boundary(e_bs(), (-2, 6), 0, Guard(max_steps=3))
    assert err.value.report["steps"] == 3


@pytest.mark.parametrize("t", [e_bs(), e_lamp(), e_bs(3, Fraction(2, 3)), e_lamp(3)],
                         ids=["bs2", "lamp2", "bs3", "lamp3"])
def test_vectorized_matches_scalar(t):
    window = (-3, 5)
    a, sa = boundary_codes(t, 3000, window, 42, vectorized=True)
    b, sb = boundary_codes(t, 3000, window, 42, vectorized=False)
    assert a.tolist() == b.tolist()
    assert sa.tolist() == sb.tolist()


def test_threads_do_not_change_output(monkeypatch):
    t = e_bs()
    n = 2 * CHUNK + 17
    base, _ = boundary_codes(t, n, (-2, 4), 3)
    monkeypatch.setenv("HECKE_WALK_THREADS", "4")
    threaded, _ = boundary_codes(t, n, (-2, 4), 3)
    assert base.tolist() == threaded.tolist()


def test_empirical_lamp_is_uniform():
    n = 200_000
    nu = empirical_stationary(e_lamp(), n, (0, 3), seed=1)
    band = 4 * math.sqrt(7 / 8 * 1 / 8 / n)
    assert len(nu.masses) == 8 and nu.escape_mass == 0
    assert all(abs(float(m) - 1 / 8) < band for m in nu.masses.values())


def test_empirical_trivial_contraction():
    nu = empirical_stationary(SparseMeasure.delta(GroupElem(C2.zero(), 1)), 100, (0, 3))
    assert nu.masses == {(0, 0, 0): 1}


def test_stationarity_residual_examples():
    lamp = e_lamp()
    for level in range(1, 9):
        r = stationarity_residual(lamp, BallMeasure.haar_o(M2, level))
        assert r.tv == 0 and r.escape_delta == 0
    shift = SparseMeasure.delta(GroupElem(M2.one(), 1))
    r = stationarity_residual(shift, BallMeasure.point(M2, M2.zero(), (0, 2)))
    assert r.tv == 1


def test_invariance_stats_examples():
    rep = invariance_stats(BallMeasure.haar_o(M2, 3))
    assert rep.deviation == 0 and rep.min_mass == 1 / 8
    rep = invariance_stats(BallMeasure.point(M2, M2.zero(), (0, 3)))
    assert rep.deviation == 1 and rep.min_mass == 0


def test_invariance_stats_chi_square_on_uniform_sample():
    nu = empirical_stationary(e_lamp(), 50_000, (0, 3), seed=2)
    rep = invariance_stats(nu)
    assert rep.dof == 7 and rep.p_value > 1e-4


def test_contraction_lamp_exact():
    for importance in (True, False):
        curve = contraction_stat(e_lamp(), 8, 3, 500, seed=1, window=(0, 12), importance=importance)
        expected = curve.diam0 * 2.0 ** -np.arange(9)
        assert np.allclose(curve.values, expected, rtol=1e-12, atol=0)
    pts = [M2.zero(), M2.one(), M2.from_digits({2: 1})]
    exact = contraction_stat_exact(e_lamp(), 6, pts, seed=4)
    assert exact == [Fraction(1, 2 ** m) for m in range(7)]


def test_contraction_identity_is_flat():
    nu = BallMeasure.haar_o(M2, 4)
    curve = contraction_stat(SparseMeasure.delta(M2.identity()), 5, 4, 400, seed=2, nu_hat=nu)
    assert np.all(curve.values == curve.values[0])


def test_contraction_bs_tilted_ratio():
    curve = contraction_stat(e_bs(), 12, 4, 2000, seed=3, window=(-6, 10))
    assert curve.fit_ratio(1, 12) == pytest.approx(7 / 8, rel=1e-9)


def test_coupling_moment_examples():
    nu = BallMeasure.haar_o(M2, 4)
    A = Ball(M2.zero(), 1)
    B = Ball(M2.one(), 1)
    assert coupling_moment(e_lamp(), 0, A, B, 10, 0, nu) == Fraction(1, 4)
    same = coupling_moment(e_lamp(), 20, A, A, 4000, 1, nu)
    assert abs(float(same) - 0.5) < 4 * math.sqrt(0.25 / 4000)
    assert coupling_moment(e_lamp(), 20, A, B, 500, 2, nu) == 0
