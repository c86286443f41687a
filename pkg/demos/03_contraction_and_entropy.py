"""Contraction of boundary points and two independent entropy estimates.

The diameter of k boundary points shrinks by q**-n per step of exponent n,
so its expectation decays like E[q**-n]**m.  Entropy is computed once from
the stationary measure and once from Shannon entropies of convolution
powers.
"""

from __future__ import annotations

from hecke_walk import BallMeasure, FieldContext, contraction_stat, e_bs, e_lamp, furstenberg_entropy
from hecke_walk import conv_power_entropy, extrapolated_rate
from hecke_walk.walk import stationary_run

bs = e_bs()
tilted = contraction_stat(bs, 40, 4, 10_000, seed=3)
plain = contraction_stat(bs, 40, 4, 10_000, seed=3, importance=False)
print("contraction ratio, tilted sampler:", round(tilted.fit_ratio(5, 40), 6))
print("contraction ratio, plain sampler: ", round(plain.fit_ratio(5, 40), 6), "(biased by rare large terms)")
for m in (0, 10, 20, 40):
    print(f"  step {m:2d}: {tilted.values[m]:.3e} +- {tilted.stderr[m]:.1e}")

ctx = FieldContext(2, "modular")
est = furstenberg_entropy(e_lamp(), BallMeasure.haar_o(ctx, 5))
print("\nlamplighter entropy on Haar measure:", est.exact, "=", est.value)

nu, _ = stationary_run(bs, 1_000_000, (-4, 4), seed=7)
mc = furstenberg_entropy(bs, nu)
print(f"Baumslag-Solitar Monte Carlo entropy {mc.value:.4f} (refinement change {mc.refinement_error:.4f})")
powers = conv_power_entropy(bs, 16)
for n, h, inc in powers.rows[-4:]:
    print(f"  H(t^{n}) = {h:.4f}, increment {inc:.4f}")
print(f"extrapolated increment rate {extrapolated_rate(powers):.4f}")
