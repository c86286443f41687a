"""Subsum sets and realizing them as spectra of boundary entropies.

A positive summable sequence beta is split as beta_k = p_k q_k h with
mixing weights p_k and survival probabilities q_k.  Summing over any index
set recovers the corresponding subsum exactly.
"""

from __future__ import annotations

from fractions import Fraction

from hecke_walk import Beta, plan_spectrum, spectrum_set, spectrum_value, subsum_classify, subsum_enumerate
from hecke_walk import subsum_member

third = Beta.geometric(1, Fraction(1, 3))
half = Beta.geometric(1, Fraction(1, 2))
for beta in (third, half):
    rep = subsum_classify(beta)
    print(f"{beta.describe():28} -> {rep.classification}, total {rep.B0}")

for target in (Fraction(1, 2), Fraction(3, 4), Fraction(9, 8)):
    res = subsum_member(third, target, 20)
    print(f"  {target} in SubSum(1, 1/3, 1/9, ...)? {res.verdict} (witness indices {res.witness})")

plan = plan_spectrum(Beta.geometric(Fraction(1, 2), Fraction(1, 2)), Fraction(1, 3))
print("\nplan checks:", all(plan.check().values()))
print("h_sigma =", float(plan.h_sigma), " N =", plan.N, " eps =", float(plan.eps))
print("p_1..p_4:", [float(p) for p in plan.p[:4]])
v = spectrum_value(plan, [1, 3], 8)
print("entropy for I = {1, 3}:", v.value, " mixture double sum:", v.cross_check)

values, failures = spectrum_set(plan, 12)
print("spectrum at level 12 equals the subsums:", values == subsum_enumerate(plan.beta, 12).as_set(),
      f"({len(values)} values, {failures} disagreements)")
