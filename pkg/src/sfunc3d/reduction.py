"""Step 3: the associated first-order ODE dz/dy = -S with x held fixed.

:func:`first_integral` is a small cascade of classical methods for
``du/dt = F(t, u)`` with ``F`` rational (parameters allowed).  Every method
is tried on the equation as given and on its reciprocal ``dt/du = 1/F``.
The result ``H`` satisfies ``H_t + F H_u = 0``.
"""

from __future__ import annotations

import logging
import os
import random
import time
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Protocol, Sequence

import sympy as sp
from sympy import QQ
from sympy.polys.rings import ring

from . import kernel
from .splitting import SolverBudgetExceeded, SplittingSolver

log = logging.getLogger(__name__)

EXTERNAL_SOLVER_ENV = "SFUNC3D_EXTERNAL_SOLVER"


class UnsolvedODE(RuntimeError):
    pass


@dataclass(frozen=True)
class Associated1ODE:
    rhs: sp.Expr
    dependent: sp.Symbol
    independent: sp.Symbol
    parameter: sp.Symbol


@dataclass
class ReducedSolution:
    H: sp.Expr
    classification: str          # rational | elementary | liouvillian
    method_used: str
    check: str = "proved"        # proved | probabilistic


class ExternalSolver(Protocol):
    def first_integral(self, rhs: sp.Expr, dep: sp.Symbol, indep: sp.Symbol) -> sp.Expr | None:
        """Return H(indep, dep) constant on solutions of d(dep)/d(indep) = rhs, or None."""


class SympyDsolveAdapter:
    """Delegates to :func:`sympy.dsolve`; used only when explicitly enabled."""

    def first_integral(self, rhs, dep, indep):
        fn = sp.Function("_u")
        ode = sp.Eq(fn(indep).diff(indep), rhs.xreplace({dep: fn(indep)}))
        try:
            sols = sp.dsolve(ode)
        except (NotImplementedError, ValueError):
            return None
        sols = sols if isinstance(sols, list) else [sols]
        C1 = sp.Symbol("C1")
        for sol in sols:
            eq = (sol.lhs - sol.rhs).xreplace({fn(indep): dep})
            try:
                cands = sp.solve(eq, C1)
            except NotImplementedError:
                continue
            for c in cands:
                if not c.has(sp.Function("_u")):
                    return c
        return None


def external_solver_from_env() -> ExternalSolver | None:
    val = os.environ.get(EXTERNAL_SOLVER_ENV, "").strip().lower()
    if val in ("", "0", "off", "false", "disabled", "none"):
        return None
    return SympyDsolveAdapter()


def make_associated_ode(S, variables: Sequence[sp.Symbol]) -> Associated1ODE:
    x, y, z = variables
    return Associated1ODE(kernel.normalize(-sp.sympify(S)), z, y, x)


def classify(H: sp.Expr) -> str:
    if H.has(sp.Integral):
        return "liouvillian"
    if H.has(sp.exp, sp.log, sp.atan) or any(
            p.is_Pow and not p.exp.is_Integer for p in sp.preorder_traversal(H)):
        return "elementary"
    return "rational"


# -- helpers -----------------------------------------------------------------

def _integrate(e: sp.Expr, v: sp.Symbol) -> sp.Expr:
    e = kernel.normalize(e)
    if e == 0:
        return sp.Integer(0)
    if not e.has(v):
        return e * v
    try:
        res = sp.integrate(e, v, conds="none")
    except Exception:  # sympy may raise on hard integrands
        res = sp.Integral(e, v)
    # special functions (erf, Ei, ...) stay as quadratures
    if res.has(sp.Piecewise, sp.Integral) or not _grammar_ok(res):
        res = sp.Integral(e, v)
    return res


def _grammar_ok(e: sp.Expr) -> bool:
    for n in sp.preorder_traversal(e):
        if isinstance(n, sp.Function) and not isinstance(n, (sp.exp, sp.log, sp.atan)):
            return False
        if (n.is_Number and not n.is_Rational) or (n.is_NumberSymbol and n != sp.E) or n == sp.I:
            return False
    return True


def _exp_of(e: sp.Expr) -> sp.Expr:
    """exp(e) with c*log(p) terms turned into p**c."""
    e = sp.expand(sp.expand_log(e, force=True))
    out = sp.Integer(1)
    rest = []
    for t in sp.Add.make_args(e):
        c, logs = t.as_independent(sp.log)
        if isinstance(logs, sp.log) and c.is_Rational:
            out *= logs.args[0] ** c
        else:
            rest.append(t)
    if rest:
        out *= sp.exp(sp.Add(*rest))
    return out


def _free_of(e: sp.Expr, v: sp.Symbol) -> bool:
    return not e.has(v)


def _split_product(F: sp.Expr, t: sp.Symbol, u: sp.Symbol):
    """F = a(t) * b(u), or None."""
    c, facs = sp.factor_list(sp.together(F))
    a, b = sp.Integer(c), sp.Integer(1)
    for fac, k in facs:
        if not fac.has(u):
            a *= fac**k
        elif not fac.has(t):
            b *= fac**k
        else:
            return None
    return a, b


# -- strategies --------------------------------------------------------------
# each: (F, t, u) -> H or None with H_t + F H_u = 0


def _separable(F, t, u):
    if F == 0:
        return u
    sp_ = _split_product(F, t, u)
    if sp_ is None:
        return None
    a, b = sp_
    return _integrate(1 / b, u) - _integrate(a, t)


def _linear_parts(F, t, u):
    num, den = sp.fraction(F)
    if den.has(u):
        return None
    pol = sp.Poly(num, u)
    if pol.degree() > 1:
        return None
    c1 = pol.coeff_monomial(u) if pol.degree() == 1 else sp.Integer(0)
    c0 = pol.coeff_monomial(1)
    return kernel.normalize(c1 / den), kernel.normalize(c0 / den)


def _linear(F, t, u):
    parts = _linear_parts(F, t, u)
    if parts is None:
        return None
    a, c = parts
    if a == 0:
        return None
    mu = _exp_of(-_integrate(a, t))
    return u * mu - _integrate(kernel.normalize(c * mu), t)


def _bernoulli(F, t, u):
    num, den = sp.fraction(F)
    dpoly = sp.Poly(den, u) if den.has(u) else None
    if dpoly is not None and len(dpoly.terms()) != 1:
        return None
    shift = dpoly.degree() if dpoly is not None else 0
    dcoef = dpoly.LC() if dpoly is not None else den
    pol = sp.Poly(num, u)
    powers = {m[0] - shift: c / dcoef for m, c in pol.terms()}
    if 1 not in powers or len(powers) != 2:
        return None
    (n, cn), = [(k, v) for k, v in powers.items() if k != 1]
    if n in (0, 1):
        return None
    a = powers[1]
    # v = u^(1-n) satisfies v' = (1-n) a v + (1-n) c
    v = sp.Dummy("v")
    Hv = _linear(kernel.normalize((1 - n) * a * v + (1 - n) * cn), t, v)
    if Hv is None:
        return None
    return Hv.xreplace({v: u ** (1 - n)})


def _homogeneous(F, t, u):
    lam, w = sp.Dummy("lam"), sp.Dummy("w")
    if not kernel.is_zero(F.xreplace({t: lam * t, u: lam * u}) - F):
        return None
    G = kernel.normalize(F.xreplace({u: w * t}).xreplace({t: 1}))
    if kernel.is_zero(G - w):
        return u / t
    Hw = _integrate(1 / (G - w), w) - sp.log(t)
    return Hw.xreplace({w: u / t})


def _potential(Mt, Nu, t, u):
    """H with H_t = Mt, H_u = Nu (assumes exactness)."""
    H1 = _integrate(Mt, t)
    rest = kernel.normalize(Nu - sp.diff(H1, u))
    if rest.has(t):
        rest = sp.simplify(rest)
        if rest.has(t):
            return None
    return H1 + _integrate(rest, u)


def _exact(F, t, u):
    num, den = sp.fraction(kernel.normalize(F))
    Mt, Nu = num, -den
    if not kernel.is_zero(sp.diff(Mt, u) - sp.diff(Nu, t)):
        return None
    return _potential(Mt, Nu, t, u)


def _integrating_factor(F, t, u):
    num, den = sp.fraction(kernel.normalize(F))
    Mt, Nu = num, -den
    q = kernel.normalize((sp.diff(Mt, u) - sp.diff(Nu, t)) / Nu)
    if q != 0 and not q.has(u):
        mu = _exp_of(_integrate(q, t))
        return _potential(kernel.normalize(mu * Mt), kernel.normalize(mu * Nu), t, u)
    q = kernel.normalize((sp.diff(Nu, t) - sp.diff(Mt, u)) / Mt)
    if q != 0 and not q.has(t):
        mu = _exp_of(_integrate(q, u))
        return _potential(kernel.normalize(mu * Mt), kernel.normalize(mu * Nu), t, u)
    return None


class _DarbouxSearch:
    """Darboux polynomials of X = den d/dt + num d/du, then Prelle-Singer.

    Symbols other than t and u are generic parameters: never solved for,
    and factors in them alone count as nonzero.
    """

    def __init__(self, degree_bound: int = 3, time_budget: float = 30.0):
        self.degree_bound = degree_bound
        self.time_budget = time_budget

    def __call__(self, F, t, u):
        num, den = sp.fraction(kernel.normalize(F))
        X = (sp.expand(den), sp.expand(num))
        params = kernel.sort_symbols((num.free_symbols | den.free_symbols) - {t, u})
        dX = max(sp.Poly(X[0], t, u).total_degree(), sp.Poly(X[1], t, u).total_degree())
        found = []
        deadline = time.monotonic() + self.time_budget
        for d in range(1, self.degree_bound + 1):
            left = deadline - time.monotonic()
            if left <= 0:
                break
            try:
                new = self._darboux(X, t, u, params, d, max(dX - 1, 0), left)
            except SolverBudgetExceeded:
                break
            if not new:
                continue
            found.extend(new)
            H = self._assemble(X, _irreducible_distinct(found, t, u), t, u)
            if H is not None:
                return H
        return None

    def _assemble(self, X, polys, t, u):
        if not polys:
            return None
        cof = [kernel.normalize((X[0] * sp.diff(p, t) + X[1] * sp.diff(p, u)) / p) for p in polys]
        # rational first integral: prod p_i^n_i with sum n_i q_i = 0
        vec = _cofactor_combination(cof, sp.Integer(0), t, u)
        if vec is not None:
            return sp.Mul(*[p**n for p, n in zip(polys, vec)])
        # integrating factor: sum n_i q_i = -div X
        div = sp.expand(sp.diff(X[0], t) + sp.diff(X[1], u))
        vec = _cofactor_combination(cof, -div, t, u)
        if vec is None:
            return None
        R = sp.Mul(*[p**n for p, n in zip(polys, vec)])
        return _potential(kernel.normalize(R * X[1]), kernel.normalize(-R * X[0]), t, u)

    def _darboux(self, X, t, u, params, d, dq, budget):
        mons = [(i, k - i) for k in range(d + 1) for i in range(k, -1, -1)]
        qmons = [(i, k - i) for k in range(dq + 1) for i in range(k, -1, -1)]
        cs = list(sp.symbols(f"_dc0:{len(mons)}"))
        qs = list(sp.symbols(f"_dq0:{len(qmons)}"))
        p = sp.Add(*[c * t**i * u**j for c, (i, j) in zip(cs, mons)])
        q = sp.Add(*[c * t**i * u**j for c, (i, j) in zip(qs, qmons)])
        expr = sp.expand(X[0] * sp.diff(p, t) + X[1] * sp.diff(p, u) - q * p)
        big, *_ = ring([t, u] + cs + qs + list(params), QQ)
        small, *_ = ring(cs + qs + list(params), QQ)
        groups: dict = {}
        for mon, c in big.from_expr(expr).iterterms():
            groups.setdefault(mon[:2], {})[mon[2:]] = c
        eqs = [small.from_dict(g) for g in groups.values()]
        n = len(cs) + len(qs)
        top = [small.gens[k] for k, (i, j) in enumerate(mons) if i + j == d]
        solver = SplittingSolver(small, small.gens[:n], generic=small.gens[n:],
                                 nonvanishing=[top], time_budget=budget)
        found = []
        for comp in solver.solve(eqs):
            if comp.unresolved:
                continue
            pe = sp.expand(p.xreplace(comp.values(small)))
            loose = [c for c in cs + qs if pe.has(c)]
            specs = [{v: int(j == i) for j, v in enumerate(loose)} for i in range(len(loose))] or [{}]
            for spec in specs:
                pp = sp.expand(sp.cancel(pe.xreplace(spec)))
                if pp.has(t) or pp.has(u):
                    found.append(pp)
        return found


def _irreducible_distinct(polys, t, u):
    out = []
    for p in polys:
        for f, _ in sp.factor_list(p, t, u)[1]:
            f = f.as_expr()
            if not (f.has(t) or f.has(u)):
                continue
            if any(sp.cancel(f / g).is_number for g in out):
                continue
            out.append(f)
    return out


def _cofactor_combination(cof, target, t, u):
    """Rational n with sum n_i cof_i = target, one free choice fixed to 1."""
    ns = list(sp.symbols(f"_n0:{len(cof)}"))
    lhs = sp.expand(sp.together(sum(n * q for n, q in zip(ns, cof)) - target))
    lhs = sp.fraction(sp.together(lhs))[0]
    syms = kernel.sort_symbols(lhs.free_symbols - set(ns))
    eqs = sp.Poly(sp.expand(lhs), *syms).coeffs() if syms else [lhs]
    sol = sp.linsolve(eqs, ns)
    if not sol:
        return None
    (vec,) = sol
    free = sorted(set().union(*(sp.sympify(e).free_symbols for e in vec)) & set(ns), key=str)
    if target == 0 and not free:
        return None
    spec = {n: int(i == 0) for i, n in enumerate(free)}
    vec = [sp.sympify(e).xreplace(spec) for e in vec]
    if any(e.free_symbols for e in vec):
        return None
    return vec


def _darboux_strategy(degree_bound, budget):
    return _DarbouxSearch(degree_bound, budget)


def _tidy(H: sp.Expr) -> sp.Expr:
    """Normalize; a sum of logarithms becomes a product of powers when that is rational."""
    if H.has(sp.log) and not H.has(sp.Integral):
        E = _exp_of(H)
        if not E.has(sp.exp, sp.log) and classify(E) == "rational":
            E = kernel.normalize(E)
            if E.free_symbols:
                return E
    return kernel.normalize(H) if not H.has(sp.Integral) else H


def annihilates(H: sp.Expr, F: sp.Expr, t: sp.Symbol, u: sp.Symbol, n_points: int = 20,
                seed: int = 0) -> str | None:
    """'proved' / 'probabilistic' if H_t + F H_u vanishes, else None."""
    expr = sp.diff(H, t) + F * sp.diff(H, u)
    if kernel.is_zero(expr):
        return "proved"
    simp = sp.simplify(expr)
    if simp == 0:
        return "proved"
    if H.has(sp.Integral) or not H.has(t) and not H.has(u):
        return None
    rng = random.Random(seed)
    syms = kernel.sort_symbols(expr.free_symbols)
    ok = 0
    for _ in range(n_points * 5):
        pt = {s: sp.Rational(rng.randint(-9, 9), rng.randint(1, 5)) for s in syms}
        try:
            val = sp.N(expr.xreplace(pt), 30)
        except (ZeroDivisionError, ValueError):
            continue
        if not val.is_number or val.has(sp.zoo, sp.nan, sp.oo):
            continue
        if abs(complex(val)) > 1e-20:
            return None
        ok += 1
        if ok >= n_points:
            return "probabilistic"
    return None


STRATEGIES: list[tuple[str, Callable]] = [
    ("separable", _separable),
    ("linear", _linear),
    ("bernoulli", _bernoulli),
    ("homogeneous", _homogeneous),
    ("exact", _exact),
    ("integrating_factor", _integrating_factor),
]


def first_integral(rhs, dep: sp.Symbol, indep: sp.Symbol, *, darboux_degree: int = 3,
                   darboux_budget: float = 30.0, external: ExternalSolver | None = None) -> ReducedSolution:
    """First integral of d(dep)/d(indep) = rhs.  Raises :class:`UnsolvedODE`."""
    F = kernel.normalize(rhs)
    t, u = indep, dep
    strategies = list(STRATEGIES) + [("darboux", _darboux_strategy(darboux_degree, darboux_budget))]
    for name, fn in strategies:
        for swapped in (False, True):
            if swapped and name == "darboux":
                continue  # same vector field up to orientation
            if swapped:
                if F == 0:
                    continue
                G, a, b = kernel.normalize(1 / F), u, t
            else:
                G, a, b = F, t, u
            try:
                H = fn(G, a, b)
            except (sp.PolynomialError, NotImplementedError, ZeroDivisionError, ValueError) as err:
                log.debug("%s failed: %s", name, err)
                continue
            if H is None:
                continue
            H = _tidy(H)
            if not (H.has(u) or H.has(t)):
                continue
            check = annihilates(H, F, t, u)
            if check is None:
                log.debug("%s produced a non-integral", name)
                continue
            tag = name + (" (reciprocal)" if swapped else "")
            return ReducedSolution(H, classify(H), tag, check)
    if external is not None:
        H = external.first_integral(F, u, t)
        if H is not None and _grammar_ok(H):
            H = kernel.normalize(H)
            check = annihilates(H, F, t, u)
            if check is not None:
                return ReducedSolution(H, classify(H), "external", check)
    raise UnsolvedODE("unsolved")


def solve_1ode(ode: Associated1ODE, *, darboux_degree: int = 3, darboux_budget: float = 30.0,
               external: ExternalSolver | None = None) -> ReducedSolution:
    return first_integral(ode.rhs, ode.dependent, ode.independent, darboux_degree=darboux_degree,
                          darboux_budget=darboux_budget, external=external)
