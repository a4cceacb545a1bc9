#!/usr/bin/env python3
"""Write the system corpus to corpus/.

Constructed systems come from a chosen rational invariant I = A/B and a
polynomial vector field V:

    (f, g, h) = (B grad A - A grad B) x V

which is polynomial and satisfies D[I] = 0 by construction, since
D[I] = grad I . (grad I x V) B^2 = 0.
"""

import json
from pathlib import Path

import sympy as sp

from sfunc3d import kernel

x, y, z = sp.symbols("x y z")
OUT = Path(__file__).resolve().parents[1] / "corpus"

HAND = {
    "lorenz": {"params": ["s", "r", "b"], "f": "s*(y-x)", "g": "r*x-x*z-y", "h": "-b*z+x*y",
               "seed_invariant": None,
               "constraints": ["b = 1", "r = 0", "s = 1/2"],
               "reference_invariant": "(x^4-2*x^2*z-y^2)/(2*(x^4-2*x^2*z+z^2))"},
    "trivial": {"params": [], "f": "1", "g": "1", "h": "0", "seed_invariant": "z"},
    "toy_scaling": {"params": [], "f": "x", "g": "y", "h": "2*z", "seed_invariant": "x*y/z"},
}

# (name, I, V).  Chosen so the seeded invariant is the only rational one the
# pipeline meets first; see corpus/README.md for candidates that were dropped.
CONSTRUCTED = [
    ("cons_ratio", (y + z) / x, (1, 1, 0)),
    ("cons_parabolic", z - y**2 + x, (1, x, 0)),
    ("cons_bilinear", x * z + y, (0, 0, 1)),
    ("cons_mobius", (x + y) / (z + x), (0, 1, 1)),
    ("cons_quadric", y**2 + x * z, (1, 1, 1)),
]


def construct(I, V):
    A, B = sp.fraction(sp.together(I))
    grad = [sp.expand(B * sp.diff(A, v) - A * sp.diff(B, v)) for v in (x, y, z)]
    V = [sp.sympify(c) for c in V]
    cross = [grad[1] * V[2] - grad[2] * V[1],
             grad[2] * V[0] - grad[0] * V[2],
             grad[0] * V[1] - grad[1] * V[0]]
    return [sp.expand(c) for c in cross]


def main():
    OUT.mkdir(exist_ok=True)
    for name, doc in HAND.items():
        doc = {"vars": ["x", "y", "z"], **doc}
        (OUT / f"{name}.json").write_text(json.dumps(doc, indent=2) + "\n")
    for name, I, V in CONSTRUCTED:
        f, g, h = construct(I, V)
        D = f * sp.diff(I, x) + g * sp.diff(I, y) + h * sp.diff(I, z)
        assert kernel.is_zero(D), name
        doc = {"vars": ["x", "y", "z"], "params": [],
               "f": kernel.to_text(f), "g": kernel.to_text(g), "h": kernel.to_text(h),
               "seed_invariant": kernel.to_text(I), "generator": {"V": [kernel.to_text(sp.sympify(c)) for c in V]}}
        (OUT / f"{name}.json").write_text(json.dumps(doc, indent=2) + "\n")
        print(name, doc["f"], "|", doc["g"], "|", doc["h"])


if __name__ == "__main__":
    main()
