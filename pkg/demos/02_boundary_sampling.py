"""Sampling the stationary measure on the field from boundary draws.

With positive exponent drift the products of the walk converge to a point of
the field.  Each draw is frozen once the walk has moved far enough above the
window.  The histogram of many draws estimates the stationary measure at
ball resolution.
"""

from __future__ import annotations

import time

from hecke_walk import BallMeasure, FieldContext, e_bs, e_lamp, invariance_stats, sample_boundary
from hecke_walk import stationarity_residual
from hecke_walk.walk import stationary_run

lamp = e_lamp()
ctx = FieldContext(2, "modular")

# For the lamplighter the stationary measure is Haar measure on O, exactly.
for level in (1, 4, 8):
    r = stationarity_residual(lamp, BallMeasure.haar_o(ctx, level))
    print(f"level {level}: exact residual tv={r.tv}, escape delta={r.escape_delta}")

digits, diag = sample_boundary(lamp, (0, 8), seed=2024)
print("\none lamplighter boundary draw on [0, 8):", digits, "stopped after", diag.stop_time, "steps")

t0 = time.perf_counter()
nu, info = stationary_run(e_bs(), 1_000_000, (-2, 3), seed=1)
print(f"\nBaumslag-Solitar: 10^6 draws in {time.perf_counter() - t0:.1f}s,"
      f" mean stop time {info['stop_time']:.1f}, escape mass {float(nu.escape_mass):.4f}")
rep = invariance_stats(nu)
print(f"O-invariance deviation {rep.deviation:.4f}, smallest ball in O {rep.min_mass:.4f}")
for coset, row in sorted(rep.per_coset.items(), key=lambda kv: -kv[1]["mass"])[:4]:
    print(f"  coset {coset}: mass {row['mass']:.4f}, spread {row['deviation']:.4f}")
res = stationarity_residual(e_bs(), nu)
print(f"stationarity residual tv {float(res.tv):.4f} (escape delta {float(res.escape_delta):.4f})")
