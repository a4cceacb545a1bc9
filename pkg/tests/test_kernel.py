import random
from fractions import Fraction

import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from sfunc3d import kernel
from sfunc3d.kernel import NonDifferentiableError, NotPolynomialError, PoleError

from strategies import polynomials, rational_points

x, y, z, s = sp.symbols("x y z s")


def test_normalize_cancels_gcd():
    assert kernel.normalize((x**2 - z**2) / (x - z)) == x + z


def test_normalize_recognizes_square():
    assert kernel.equal(x**4 - 2 * x**2 * z + z**2, (x**2 - z) ** 2)


def test_normalize_zero_over_poly():
    assert kernel.normalize(0 / (x + 1)) == 0


def test_normalize_sign_convention():
    e = kernel.normalize(1 / (z - x))
    num, den = sp.fraction(e)
    assert sp.Poly(den, x, y, z).LC(order="grlex") > 0
    assert e == -1 / (x - z)


def test_differentiate_examples():
    assert kernel.differentiate((x**2 - z) * y, z) == -y
    assert kernel.differentiate(x**4 - 2 * x**2 * z - y**2, x) == 4 * x**3 - 4 * x * z
    assert kernel.differentiate(s * (y - x), y) == s


def test_differentiate_integral_rule():
    q = sp.Integral(sp.exp(-y**2), y)
    assert kernel.differentiate(q, y) == sp.exp(-y**2)
    assert kernel.differentiate(q, x) == 0
    with pytest.raises(NonDifferentiableError):
        kernel.differentiate(sp.Integral(sp.exp(-x * y**2), y), x)
    with pytest.raises(NonDifferentiableError):
        kernel.differentiate(sp.Function("u")(x), x)


def test_collect_examples():
    assert kernel.collect_coefficients(x**2 * z + y**2, (x, y, z)) == {(2, 0, 1): 1, (0, 2, 0): 1}
    assert kernel.collect_coefficients(s * (y - x), (x, y, z)) == {(0, 1, 0): s, (1, 0, 0): -s}
    assert kernel.collect_coefficients((x + y) ** 2, (x, y, z)) == {(2, 0, 0): 1, (1, 1, 0): 2, (0, 2, 0): 1}


def test_collect_rejects_non_polynomial():
    with pytest.raises(NotPolynomialError):
        kernel.collect_coefficients(1 / x, (x, y, z))
    with pytest.raises(NotPolynomialError):
        kernel.collect_coefficients(sp.exp(x), (x, y, z))


def test_eval_examples():
    I = sp.Rational(1, 2) * (x**4 - 2 * x**2 * z - y**2) / (x**4 - 2 * x**2 * z + z**2)
    assert kernel.eval_rational(I, {x: 2, y: 1, z: 1}) == Fraction(7, 18)
    with pytest.raises(PoleError):
        kernel.eval_rational(x / (x - 2), {x: 2})
    assert kernel.eval_rational(s * (y - x), {s: Fraction(1, 2), x: 2, y: 1}) == Fraction(-1, 2)


@settings(max_examples=100)
@given(polynomials(), polynomials())
def test_collect_is_additive(p, q):
    V = (x, y, z)
    cp, cq = kernel.collect_coefficients(p, V), kernel.collect_coefficients(q, V)
    expected = {m: cp.get(m, 0) + cq.get(m, 0) for m in set(cp) | set(cq)}
    expected = {m: c for m, c in expected.items() if c != 0}
    assert kernel.collect_coefficients(p + q, V) == expected
    assert kernel.equal(kernel.from_coefficients(expected, V), p + q)


@given(polynomials(), polynomials())
def test_normalize_idempotent(p, q):
    e = kernel.normalize(p / (q + 1))
    assert kernel.normalize(e) == e


@given(polynomials(), polynomials(), st.sampled_from([x, y, z]))
def test_differentiate_matches_finite_differences(p, q, v):
    e = p / (q**2 + 1)
    d = kernel.differentiate(e, v)
    rng = random.Random(0)
    for _ in range(20):
        pt = {w: sp.Rational(rng.randint(-20, 20), 7) for w in (x, y, z)}
        h = 1e-6
        fl = {w: float(c) for w, c in pt.items()}
        f = sp.lambdify((x, y, z), e)
        up, dn = dict(fl), dict(fl)
        up[v] += h
        dn[v] -= h
        fd = (f(*up.values()) - f(*dn.values())) / (2 * h)
        exact = float(kernel.eval_rational(d, pt))
        assert abs(fd - exact) <= 1e-6 * max(1.0, abs(exact)) + 1e-5


@given(polynomials(), polynomials(), polynomials(), rational_points())
def test_equality_soundness(p, q, u, pt):
    a = p / (q**2 + 1)
    b = (p * u) / ((q**2 + 1) * u) if u != 0 else a
    assert kernel.is_zero(a - b)
    assert kernel.eval_rational(a, pt) == kernel.eval_rational(kernel.normalize(b), pt)


def test_equality_detects_difference_by_points():
    a, b = (x + y) ** 2, x**2 + y**2
    assert not kernel.equal(a, b)
    rng = random.Random(3)
    diffs = 0
    for _ in range(10):
        pt = {v: Fraction(rng.randint(-5, 5)) for v in (x, y, z)}
        diffs += kernel.eval_rational(a, pt) != kernel.eval_rational(b, pt)
    assert diffs > 0


def test_polynomial_classification():
    assert kernel.is_polynomial_in(s * x**2 / 3, (x, y, z))
    assert not kernel.is_polynomial_in(x / y, (x, y, z))
    assert kernel.is_polynomial_in(x / s, (x, y, z))
    assert kernel.total_degree(x**2 * z + y, (x, y, z)) == 3
