"""Evidence that an expression is a first integral.

Three independent checks:

* symbolic: D[I] normalizes to zero;
* points: D[I] evaluated exactly at random rational points, with the
  gradient of I obtained by forward-mode dual numbers (no symbolic
  differentiation involved);
* trajectory: I sampled along classical RK4 trajectories.
"""

from __future__ import annotations

import logging
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Sequence

import mpmath
import numpy as np
import sympy as sp

from . import kernel
from .kernel import NotRationalError, PoleError
from .sfunction import solved_values
from .system import System3D, darboux_apply

log = logging.getLogger(__name__)


class UnderdeterminedInstance(ValueError):
    pass


@dataclass
class VerificationRecord:
    symbolic_zero: str                  # proved | probabilistic | failed
    point_checks_passed: int = 0
    point_checks_total: int = 0
    trajectory_drift: float | None = None
    notes: list[str] = field(default_factory=list)

    @property
    def points_ok(self) -> bool:
        return self.point_checks_passed == self.point_checks_total

    @property
    def sound(self) -> bool:
        return self.symbolic_zero in ("proved", "probabilistic") and self.points_ok


# -- dual numbers ------------------------------------------------------------

class _Exact:
    """Exact rational backend."""

    zero, one = Fraction(0), Fraction(1)

    @staticmethod
    def const(q: Fraction):
        return q

    @staticmethod
    def root(v, k: Fraction):
        return kernel._power(v, k)

    @staticmethod
    def exp(v):
        if v == 0:
            return Fraction(1)
        raise NotRationalError("exp of a nonzero rational")

    @staticmethod
    def log(v):
        if v == 1:
            return Fraction(0)
        if v == 0:
            raise PoleError("pole at point")
        raise NotRationalError("log of a rational other than 1")

    @staticmethod
    def atan(v):
        if v == 0:
            return Fraction(0)
        raise NotRationalError("arctan of a nonzero rational")


class _Float:
    """50-digit floating backend for transcendental expressions."""

    zero, one = mpmath.mpf(0), mpmath.mpf(1)

    @staticmethod
    def const(q: Fraction):
        return mpmath.mpf(q.numerator) / q.denominator

    @staticmethod
    def root(v, k: Fraction):
        if v == 0 and k < 0:
            raise PoleError("pole at point")
        if v < 0 and k.denominator % 2 == 0:
            raise NotRationalError("even root of a negative value")
        if v < 0:
            return -((-v) ** (mpmath.mpf(k.numerator) / k.denominator))
        return v ** (mpmath.mpf(k.numerator) / k.denominator)

    exp = staticmethod(mpmath.exp)
    atan = staticmethod(mpmath.atan)

    @staticmethod
    def log(v):
        if v == 0:
            raise PoleError("pole at point")
        return mpmath.log(abs(v))


class Dual:
    """Value plus gradient with respect to a fixed list of variables."""

    __slots__ = ("v", "d")

    def __init__(self, v, d):
        self.v = v
        self.d = d

    def __add__(self, o):
        return Dual(self.v + o.v, [a + b for a, b in zip(self.d, o.d)])

    def __mul__(self, o):
        return Dual(self.v * o.v, [self.v * b + o.v * a for a, b in zip(self.d, o.d)])

    def scale(self, c, dv):
        """Chain rule: value c, derivative factor dv."""
        return Dual(c, [dv * a for a in self.d])


def _dual_eval(e: sp.Expr, point, backend) -> Dual:
    n = len(next(iter(point.values())).d)
    zero_d = [backend.zero] * n

    def rec(e):
        if e.is_Rational:
            return Dual(backend.const(Fraction(int(e.p), int(e.q))), zero_d)
        if e.is_Symbol:
            if e not in point:
                raise UnderdeterminedInstance(f"unbound symbol {e}")
            return point[e]
        if e.is_Add:
            acc = rec(e.args[0])
            for a in e.args[1:]:
                acc = acc + rec(a)
            return acc
        if e.is_Mul:
            acc = rec(e.args[0])
            for a in e.args[1:]:
                acc = acc * rec(a)
            return acc
        if e.is_Pow:
            ex = e.args[1]
            if not ex.is_Rational:
                raise NotRationalError(f"non-rational exponent in {e}")
            k = Fraction(int(ex.p), int(ex.q))
            b = rec(e.args[0])
            if b.v == 0 and k < 1:
                raise PoleError("pole at point")
            val = backend.root(b.v, k)
            return b.scale(val, backend.const(k) * val / b.v if b.v != 0 else backend.zero)
        if isinstance(e, sp.exp):
            a = rec(e.args[0])
            val = backend.exp(a.v)
            return a.scale(val, val)
        if isinstance(e, sp.log):
            a = rec(e.args[0])
            val = backend.log(a.v)
            return a.scale(val, 1 / a.v)
        if isinstance(e, sp.atan):
            a = rec(e.args[0])
            val = backend.atan(a.v)
            return a.scale(val, 1 / (1 + a.v * a.v))
        raise NotRationalError(f"cannot evaluate node {type(e).__name__}")

    return rec(e)


def _plain_eval(e, point, backend):
    return _dual_eval(e, point, backend).v


def darboux_at(sys: System3D, I: sp.Expr, values: Mapping[sp.Symbol, Fraction], backend=_Exact):
    """D[I] at a point, from dual-number gradients of I."""
    pt = {}
    for i, v in enumerate(sys.vars):
        d = [backend.zero] * 3
        d[i] = backend.one
        pt[v] = Dual(backend.const(Fraction(values[v])), d)
    for k, val in values.items():
        if k not in pt:
            pt[k] = Dual(backend.const(Fraction(val)), [backend.zero] * 3)
    gI = _dual_eval(sp.sympify(I), pt, backend)
    total = backend.zero
    for comp, rhs in zip(gI.d, sys.rhs):
        total = total + comp * _plain_eval(sp.sympify(rhs), pt, backend)
    return total


# -- instances ---------------------------------------------------------------

def _instance(sys: System3D, I: sp.Expr, constraints: Sequence[sp.Expr], rng: random.Random):
    """Fix parameters: solved constraints first, remaining ones at random rationals."""
    values = solved_values(constraints) if constraints else {}
    for c in constraints:
        if sp.expand(sp.sympify(c).xreplace(values)) != 0:
            raise UnderdeterminedInstance("constraints do not determine evaluable instance")
    free = [p for p in sys.params if p not in values]
    free += [s for s in kernel.sort_symbols(sp.sympify(I).free_symbols) if s not in sys.vars
             and s not in values and s not in free]
    sample = {p: sp.Rational(rng.randint(-9, 9) or 1, rng.randint(1, 4)) for p in free}
    values = {k: sp.sympify(v).xreplace(sample) for k, v in values.items()}
    values.update(sample)
    return values, free


def verify_invariant(sys: System3D, I, constraints: Sequence[sp.Expr] = (), *, n_points: int = 20,
                     seed: int = 0, trajectory: bool = True, t_end: float = 10.0, step: float = 1e-3,
                     n_starts: int = 5) -> VerificationRecord:
    I = sp.sympify(I)
    rng = random.Random(seed)
    notes: list[str] = []
    values, sampled = _instance(sys, I, list(constraints), rng)
    if sampled:
        notes.append("parameters sampled: " + ", ".join(f"{p} = {values[p]}" for p in sampled))
    inst = sys.substitute(values) if values else sys
    Ii = I.xreplace(values) if values else I

    try:
        sym = "proved" if kernel.is_zero(darboux_apply(inst, Ii)) else "failed"
    except kernel.KernelError as err:
        sym = "failed"
        notes.append(f"symbolic check unavailable: {err}")
    if sym == "failed" and not Ii.has(sp.Integral):
        try:
            if sp.simplify(darboux_apply(inst, Ii)) == 0:
                sym = "proved"
        except kernel.KernelError:
            pass

    passed = total = 0
    if Ii.has(sp.Integral):
        notes.append("quadrature node: point and trajectory checks skipped")
    else:
        exact = True
        attempts = 0
        with mpmath.workdps(50):
            while total < n_points and attempts < 50 * n_points:
                attempts += 1
                pt = {v: Fraction(rng.randint(-5, 5)) for v in sys.vars}
                try:
                    val = darboux_at(inst, Ii, pt, _Exact if exact else _Float)
                except PoleError:
                    continue
                except NotRationalError:
                    if exact:
                        exact = False
                        notes.append("transcendental invariant: point checks at 50 digits")
                    continue
                total += 1
                if (val == 0) if exact else (abs(val) < mpmath.mpf(10) ** -30):
                    passed += 1
        if total < n_points:
            notes.append(f"only {total} pole-free points found")
        # normalization is complete for rational expressions only
        if sym == "failed" and not exact and total and passed == total:
            sym = "probabilistic"

    drift = None
    if trajectory and not Ii.has(sp.Integral):
        try:
            drift = verify_trajectory(inst, Ii, t_end=t_end, step=step, n_starts=n_starts, seed=seed,
                                      notes=notes)
        except (ValueError, OverflowError, ZeroDivisionError) as err:
            notes.append(f"trajectory check unavailable: {err}")
    return VerificationRecord(sym, passed, total, drift, notes)


def functionally_equivalent(I1, I2, variables) -> bool:
    """grad I1 x grad I2 == 0, i.e. one invariant is locally a function of the other."""
    g1 = [kernel.differentiate(I1, v) for v in variables]
    g2 = [kernel.differentiate(I2, v) for v in variables]
    return all(kernel.is_zero(g1[i] * g2[j] - g1[j] * g2[i]) for i, j in ((0, 1), (0, 2), (1, 2)))


def check_symbolic(sys: System3D, I) -> str:
    """'proved' / 'probabilistic' / 'failed' for D[I] = 0 on a numeric-parameter system."""
    expr = darboux_apply(sys, I)
    if kernel.is_zero(expr):
        return "proved"
    rng = random.Random(1)
    for _ in range(20):
        pt = {v: Fraction(rng.randint(-5, 5)) for v in sys.vars}
        try:
            if darboux_at(sys, I, pt) != 0:
                return "failed"
        except (PoleError, NotRationalError):
            continue
    return "probabilistic"


# -- trajectories ------------------------------------------------------------

def _numeric(e: sp.Expr, variables) -> Callable:
    return sp.lambdify(list(variables), e, modules="math")


def rk4(field_fn: Callable, p0: np.ndarray, step: float, n_steps: int, escape: float = 1e6):
    """Classical RK4; yields points, stops early (returning the escape step) on blow-up."""
    p = np.array(p0, dtype=float)
    out = [p.copy()]
    for _ in range(n_steps):
        k1 = field_fn(p)
        k2 = field_fn(p + 0.5 * step * k1)
        k3 = field_fn(p + 0.5 * step * k2)
        k4 = field_fn(p + step * k3)
        p = p + (step / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(p)) or np.linalg.norm(p) > escape:
            return np.array(out), True
        out.append(p.copy())
    return np.array(out), False


def verify_trajectory(sys: System3D, I, *, t_end: float = 10.0, step: float = 1e-3, n_starts: int = 5,
                      seed: int = 0, box: float = 2.0, max_resamples: int = 3,
                      notes: list[str] | None = None) -> float:
    """Max relative drift of I along RK4 trajectories of a numeric system.

    Escaping starts (norm above 1e6) are resampled; if every resample of a
    start escapes, the last attempt is kept up to its escape time.
    """
    if sys.params:
        raise ValueError("system has symbolic parameters")
    fn = _numeric(sp.Tuple(*sys.rhs), sys.vars)
    Ifn = _numeric(sp.sympify(I), sys.vars)

    def field_fn(p):
        return np.array(fn(*p), dtype=float)

    rng = np.random.default_rng(seed)
    n_steps = int(round(t_end / step))
    worst = 0.0
    for _ in range(n_starts):
        traj = None
        for attempt in range(max_resamples):
            p0 = rng.uniform(-box, box, size=3)
            try:
                I0 = float(Ifn(*p0))
            except (ZeroDivisionError, ValueError, OverflowError, TypeError):
                continue
            if not math.isfinite(I0) or abs(I0) > 1e6:
                continue
            traj, escaped = rk4(field_fn, p0, step, n_steps)
            if not escaped:
                break
        if traj is None:
            raise ValueError("no start point where the invariant is finite and real")
        if escaped and notes is not None:
            notes.append(f"trajectory escaped at t = {step * (len(traj) - 1):.3g}; drift measured up to escape")
        scale = max(1.0, abs(I0))
        for p in traj[1:]:
            try:
                val = float(Ifn(*p))
            except (ZeroDivisionError, ValueError, OverflowError):
                val = math.inf
            worst = max(worst, abs(val - I0) / scale)
    return worst
