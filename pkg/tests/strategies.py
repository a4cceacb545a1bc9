"""Hypothesis strategies shared by the test modules."""

import sympy as sp
from hypothesis import strategies as st

x, y, z = sp.symbols("x y z")

coeff = st.integers(-9, 9)


@st.composite
def exponents(draw, max_degree=4):
    i = draw(st.integers(0, max_degree))
    j = draw(st.integers(0, max_degree - i))
    k = draw(st.integers(0, max_degree - i - j))
    return (i, j, k)



@st.composite
def polynomials(draw, max_terms=6):
    terms = draw(st.lists(st.tuples(coeff, exponents()), min_size=0, max_size=max_terms))
    return sp.Add(*[c * x**i * y**j * z**k for c, (i, j, k) in terms])


@st.composite
def rational_points(draw, lo=-5, hi=5):
    return {v: sp.Rational(draw(st.integers(lo, hi)), draw(st.integers(1, 3))) for v in (x, y, z)}


@st.composite
def expressions(draw, depth=3):
    """Random expression trees in the text grammar's image."""
    if depth == 0:
        return draw(st.sampled_from([x, y, z, sp.Integer(2), sp.Rational(1, 3), sp.Integer(-5)]))
    kind = draw(st.sampled_from(["add", "mul", "pow", "div", "exp", "ln", "leaf"]))
    a = draw(expressions(depth=depth - 1))
    if kind == "leaf" or (a.is_number and kind in ("exp", "ln", "pow")):
        # constant arguments would evaluate to numbers outside the grammar (I, pi)
        return a
    if kind == "exp":
        return sp.exp(a)
    if kind == "ln":
        return sp.log(a)
    if kind == "pow":
        return a ** draw(st.sampled_from([2, 3, -1, sp.Rational(1, 2)]))
    bb = draw(expressions(depth=depth - 1))
    if kind == "add":
        return a + bb
    if kind == "mul":
        return a * bb
    return a / bb if bb != 0 else a
