"""Absorbing step measures and their completions.

A measure on the affine group is absorbing when its image on cosets of the
integral subgroup is constant along orbits of that subgroup.  This script
builds a few, repairs one that is not, and pushes them to the completion.
"""

from __future__ import annotations

from fractions import Fraction

from hecke_walk import (
    FieldContext,
    GroupElem,
    SparseMeasure,
    absorb_lift,
    commuting_average,
    convolve,
    coset_convolve,
    e_bs,
    e_lamp,
    is_absorbing,
    pushforward_coset,
    theta_of,
    z_drift,
)

lamp = e_lamp()
print("lamplighter step law:", lamp)
print("absorbing:", is_absorbing(lamp)[0], " drift:", z_drift(lamp))

# A single lamp flip followed by a shift is not absorbing: the orbit
# {[1 | 0], [1 | 1]} receives masses 1 and 0.
ctx = FieldContext(2, "modular")
flip = SparseMeasure.delta(GroupElem(ctx.one(), 1))
ok, witness = is_absorbing(flip)
print("\nsingle flip absorbing:", ok)
for key, mass in witness.items():
    print(f"  {key.encode():>10}  mass {mass}")

# Both repair maps recover the lamplighter measure from it.
print("absorb_lift(flip) == E-LAMP:", absorb_lift(flip) == lamp)
print("commuting_average(flip) == E-LAMP:", commuting_average(flip) == lamp)

# The completion map is a monoid homomorphism.
bs = e_bs()
two = convolve(bs, bs)
print("\nBaumslag-Solitar step law drift:", z_drift(bs))
print("theta(t * t) == theta(t) * theta(t):", theta_of(two) == coset_convolve(theta_of(bs), theta_of(bs)))
print("coset image of t * t:")
for key, mass in pushforward_coset(two).sorted_items():
    print(f"  {key.encode():>12}  {mass}")

# Mixing is affine on both sides.
a = Fraction(1, 3)
mix = bs.scaled(a) + two.scaled(1 - a)
print("theta is affine:", theta_of(mix) == theta_of(bs).scaled(a) + theta_of(two).scaled(1 - a))
