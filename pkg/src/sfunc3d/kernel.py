"""Exact symbolic layer: normalization, differentiation, coefficient
extraction and exact rational evaluation.

Expressions are plain sympy objects built from ``sympy.Symbol`` (no
assumptions), exact rationals, ``exp``, ``log`` and unevaluated
``Integral`` placeholders.  Everything here is exact; floats never enter.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Mapping, Sequence

import sympy as sp

from .grammar import ParseError, parse, to_text

__all__ = [
    "KernelError",
    "NotPolynomialError",
    "NonDifferentiableError",
    "PoleError",
    "NotRationalError",
    "ParseError",
    "parse",
    "to_text",
    "normalize",
    "differentiate",
    "collect_coefficients",
    "from_coefficients",
    "eval_rational",
    "is_zero",
    "equal",
    "is_polynomial_in",
    "total_degree",
    "sort_symbols",
]


class KernelError(ValueError):
    pass


class NotPolynomialError(KernelError):
    pass


class NonDifferentiableError(KernelError):
    pass


class PoleError(KernelError, ZeroDivisionError):
    """A denominator vanished at the evaluation point."""


class NotRationalError(KernelError):
    """The value at the point is not a rational number (e.g. ``exp(1)``)."""


def sort_symbols(syms) -> list[sp.Symbol]:
    return sorted(syms, key=lambda s: s.name)


def _has_transcendental(e: sp.Expr) -> bool:
    return e.has(sp.Integral, sp.exp, sp.log) or any(
        isinstance(a, sp.Function) for a in sp.preorder_traversal(e))


def _sign_fix(num: sp.Expr, den: sp.Expr) -> tuple[sp.Expr, sp.Expr]:
    gens = sort_symbols(den.free_symbols)
    if not gens:
        if den.is_number and den.is_negative:
            return -num, -den
        return num, den
    try:
        lc = sp.Poly(den, *gens).LC(order="grlex")
    except sp.PolynomialError:
        return num, den
    if lc.is_number and lc.is_negative:
        return sp.expand(-num), sp.expand(-den)
    return num, den


def _normalize_args(e: sp.Expr) -> sp.Expr:
    if e.is_Atom:
        return e
    if isinstance(e, sp.Integral):
        return sp.Integral(normalize(e.function), *e.limits)
    if isinstance(e, sp.Function):
        return e.func(*[normalize(a) for a in e.args])
    return e.func(*[_normalize_args(a) for a in e.args])


def normalize(e) -> sp.Expr:
    """Canonical form: a reduced quotient of expanded polynomials.

    Function and integral nodes are treated as opaque generators after
    their arguments have been normalized.  The denominator's leading
    coefficient (grlex, symbols ordered by name) is made positive.
    """
    e = sp.sympify(e)
    if e.is_Atom:
        return e
    if _has_transcendental(e):
        e = _normalize_args(e)
    num, den = sp.fraction(sp.cancel(sp.together(e)))
    num, den = _sign_fix(sp.expand(num), sp.expand(den))
    if den == 1:
        return num
    return num / den


def is_zero(e) -> bool:
    return normalize(e) == 0


def equal(a, b) -> bool:
    return is_zero(sp.sympify(a) - sp.sympify(b))


def differentiate(e, v: sp.Symbol) -> sp.Expr:
    """Exact partial derivative, normalized.

    ``Integral(f, t)`` differentiates to ``f`` in ``t``.  In any other
    symbol the integrand must not depend on it, otherwise the node is
    rejected.  Unknown function nodes raise as well.
    """
    e = sp.sympify(e)
    for node in sp.preorder_traversal(e):
        if isinstance(node, sp.Function) and not isinstance(node, (sp.exp, sp.log, sp.atan)):
            raise NonDifferentiableError(f"non-differentiable node: {node}")
        if isinstance(node, sp.Integral):
            if any(len(lim) > 1 for lim in node.limits):
                raise NonDifferentiableError(f"non-differentiable node: {node}")
            if v not in node.variables and node.function.has(v):
                raise NonDifferentiableError(f"non-differentiable node: {node}")
    return normalize(sp.diff(e, v))


def is_polynomial_in(e, variables: Sequence[sp.Symbol]) -> bool:
    e = normalize(e)
    num, den = sp.fraction(e)
    if den.free_symbols & set(variables):
        return False
    if _has_transcendental(e):
        for node in sp.preorder_traversal(e):
            if isinstance(node, (sp.Function, sp.Integral)) and node.free_symbols & set(variables):
                return False
    return True


def collect_coefficients(p, variables: Sequence[sp.Symbol]) -> dict[tuple[int, ...], sp.Expr]:
    """Exponent tuple -> nonzero coefficient for ``p`` polynomial in ``variables``.

    Coefficients may be rational in other symbols (parameters, unknowns).
    """
    e = normalize(p)
    num, den = sp.fraction(e)
    vs = set(variables)
    if den.free_symbols & vs:
        raise NotPolynomialError("not polynomial in collection variables")
    for node in sp.preorder_traversal(num):
        if isinstance(node, (sp.Function, sp.Integral)) and node.free_symbols & vs:
            raise NotPolynomialError("not polynomial in collection variables")
    if num == 0:
        return {}
    poly = sp.Poly(num, *variables)
    out = {}
    for monom, c in poly.terms():
        c = normalize(c / den)
        if c != 0:
            out[monom] = c
    return out


def from_coefficients(cmap: Mapping[tuple[int, ...], sp.Expr], variables: Sequence[sp.Symbol]) -> sp.Expr:
    terms = [c * sp.Mul(*[v**k for v, k in zip(variables, m)]) for m, c in cmap.items()]
    return normalize(sp.Add(*terms))


def total_degree(p, variables: Sequence[sp.Symbol]) -> int:
    cm = collect_coefficients(p, variables)
    return max((sum(m) for m in cm), default=-1)


# -- exact evaluation ------------------------------------------------------

def _rational_root(q: Fraction, n: int) -> Fraction | None:
    if q < 0 and n % 2 == 0:
        return None
    sign = -1 if q < 0 else 1
    num, den = abs(q.numerator), q.denominator
    rn, rd = round(num ** (1.0 / n)), round(den ** (1.0 / n))
    for a in (rn - 1, rn, rn + 1):
        for b in (rd - 1, rd, rd + 1):
            if a >= 0 and b > 0 and a**n == num and b**n == den:
                return sign * Fraction(a, b)
    return None


def _power(base, k: Fraction):
    if k.denominator == 1:
        n = k.numerator
        if n < 0:
            if base == 0:
                raise PoleError("pole at point")
            return 1 / base ** (-n)
        return base ** n
    if not isinstance(base, Fraction):
        raise NotRationalError("fractional power of a non-rational value")
    root = _rational_root(base, k.denominator)
    if root is None:
        raise NotRationalError(f"{base}^{k} is not rational")
    return _power(root, Fraction(k.numerator))


def eval_rational(e, point: Mapping[sp.Symbol, Fraction | int]) -> Fraction:
    """Evaluate ``e`` exactly at ``point``.

    Walks the expression tree with :class:`fractions.Fraction`; it does not
    use sympy's own substitution machinery, so it can serve as an oracle.
    Raises :class:`PoleError` if a denominator vanishes.
    """
    return _eval(sp.sympify(e), {k: Fraction(v) for k, v in point.items()}, Fraction)


def _eval(e, point, lift):
    if e.is_Integer:
        return lift(int(e))
    if e.is_Rational:
        return lift(Fraction(int(e.p), int(e.q)))
    if e.is_Symbol:
        if e not in point:
            raise KernelError(f"unbound symbol {e}")
        return point[e]
    if e.is_Add:
        acc = lift(0)
        for a in e.args:
            acc = acc + _eval(a, point, lift)
        return acc
    if e.is_Mul:
        acc = lift(1)
        for a in e.args:
            acc = acc * _eval(a, point, lift)
        return acc
    if e.is_Pow:
        ex = e.args[1]
        if not ex.is_Rational:
            raise NotRationalError(f"non-rational exponent in {e}")
        return _power(_eval(e.args[0], point, lift), Fraction(int(ex.p), int(ex.q)))
    if isinstance(e, sp.exp):
        v = _eval(e.args[0], point, lift)
        if v == 0:
            return lift(1)
        raise NotRationalError("exp of a nonzero rational")
    if isinstance(e, sp.atan):
        if _eval(e.args[0], point, lift) == 0:
            return lift(0)
        raise NotRationalError("arctan of a nonzero rational")
    if isinstance(e, sp.log):
        v = _eval(e.args[0], point, lift)
        if v == 1:
            return lift(0)
        if v == 0:
            raise PoleError("pole at point")
        raise NotRationalError("log of a rational other than 1")
    raise NotRationalError(f"cannot evaluate node {type(e).__name__} exactly")
