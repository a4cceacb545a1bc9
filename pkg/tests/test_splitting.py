import sympy as sp
from hypothesis import given, strategies as st
from sympy import QQ
from sympy.polys.rings import ring

from sfunc3d.splitting import SplittingSolver

R, a, b, c, d = ring("a b c d", QQ)
GENS = (a, b, c, d)

small = st.integers(-3, 3)
monomial = st.tuples(small.filter(bool), st.lists(st.integers(0, 2), min_size=4, max_size=4))


@st.composite
def polys(draw):
    p = R.zero
    for coef, exps in draw(st.lists(monomial, min_size=1, max_size=3)):
        m = R(coef)
        for g, k in zip(GENS, exps):
            m *= g**k
        p += m
    return p


def canon(fs):
    out = set()
    for f in fs:
        _, f = f.primitive()
        out.add(-f if f.LC < 0 else f)
    return out


@given(st.lists(polys(), min_size=1, max_size=3))
def test_irreducible_matches_full_factorization(parts):
    e = R.one
    for p in parts:
        e *= p
    if e.is_zero or e.is_ground:
        return
    solver = SplittingSolver(R, list(GENS))
    _, e = e.primitive()
    got = canon(solver._irreducible(e))
    want = canon(f for f, _ in e.factor_list()[1] if not f.is_ground)
    assert got == want


def test_linear_and_nonlinear_components():
    solver = SplittingSolver(R, [a, b])
    comps = solver.solve([a * b, a + b - 1])
    vals = sorted(sorted((str(k), str(v)) for k, v in comp.values(R).items()) for comp in comps)
    assert vals == [[("a", "0"), ("b", "1")], [("a", "1"), ("b", "0")]]


def test_inconsistent_system_has_no_component():
    solver = SplittingSolver(R, [a])
    assert solver.solve([a, a - 1]) == []


def test_nonzero_hint_prunes_branch():
    solver = SplittingSolver(R, [a, b])
    comps = solver.solve([a * b], nonzero=[a])
    assert [comp.values(R) for comp in comps] == [{sp.Symbol("b"): 0}]
