"""Exact correlation integrals of twisted characters.

For z1, z2 in O at distance 1/q, every translate-and-scale correlation of
x -> lambda(x z1) 1_O(x) against x -> lambda(x z2) 1_O(x) vanishes.  The
integrals are finite sums of roots of unity, so zero is decided exactly.
"""

from __future__ import annotations

from collections import Counter

from hecke_walk import CharacterSpec, FieldContext, decouple_integral, verify_decoupled_grid

for q in (2, 3, 5):
    for mode in ("carry", "modular"):
        ctx = FieldContext(q, mode)
        spec = CharacterSpec(ctx)
        z1 = ctx.one()
        rep = verify_decoupled_grid(spec, z1, z1 + ctx.uniformizer_pow(1), (-3, 3))
        cases = Counter(e["case"] for e in rep.entries)
        print(f"q={q} {mode:8}: {len(rep.entries):4d} integrals, all zero={rep.all_zero}, cases {dict(cases)}")

ctx = FieldContext(3, "modular")
spec = CharacterSpec(ctx)
one = ctx.one()
print("\ncontrol pair (1, 1), y = 0, m = 0:", decouple_integral(spec, one, one, ctx.zero(), 0).value)
res = decouple_integral(spec, one, ctx.from_int(2), ctx.uniformizer_pow(-1), 1)
print("pair (1, 2), also at distance 1, y = w^-1, m = 1:", res.value, "~", res.value.to_complex())
