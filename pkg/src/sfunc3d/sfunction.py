"""Step 2: impose the S-function equation on S = P/N.

For ``S = P/N`` the equation

    D[S] = S^2 (f g_z - g f_z)/f + S (g f_y + f h_z - f g_y - h f_z)/f - (f h_y - h f_y)/f

is cleared of denominators to the polynomial residual

    f (N D[P] - P D[N]) - [A P^2 + B P N - C N^2]

whose monomial coefficients, after inserting a candidate family from the
linear stage, form a polynomial system in the remaining unknowns and the
system parameters.  Its solution components are the branches.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Sequence

import sympy as sp
from sympy import QQ
from sympy.polys.rings import ring

from . import kernel
from .ansatz import CandidateFamily, PolyAnsatz
from .splitting import SolverBudgetExceeded, SplittingSolver
from .system import System3D

log = logging.getLogger(__name__)


class InconsistentConstraints(ValueError):
    pass


class NoBranchError(ValueError):
    pass


def riccati_coefficients(sys: System3D) -> tuple[sp.Expr, sp.Expr, sp.Expr]:
    """(A, B, C) with f D[S] = A S^2 + B S - C."""
    x, y, z = sys.vars
    f, g, h = sys.rhs
    d = sp.diff
    A = sp.expand(f * d(g, z) - g * d(f, z))
    B = sp.expand(g * d(f, y) + f * d(h, z) - f * d(g, y) - h * d(f, z))
    C = sp.expand(f * d(h, y) - h * d(f, y))
    return A, B, C


def _residual_from(sys: System3D, P: sp.Expr, N: sp.Expr) -> sp.Expr:
    x, y, z = sys.vars
    f, g, h = sys.rhs
    A, B, C = riccati_coefficients(sys)

    def D(e):
        return f * sp.diff(e, x) + g * sp.diff(e, y) + h * sp.diff(e, z)

    return sp.expand(f * (N * D(P) - P * D(N)) - (A * P**2 + B * P * N - C * N**2))


def sfunction_residual(sys: System3D, S) -> sp.Expr:
    """Denominator-cleared residual of the S-function equation; zero iff it holds."""
    if kernel.is_zero(sys.f):
        raise ValueError("f is identically zero")
    P, N = sp.fraction(kernel.normalize(S))
    return kernel.normalize(_residual_from(sys, P, N))


# -- constraints -------------------------------------------------------------

def canonicalize_constraints(relations: Sequence, params: Sequence[sp.Symbol]) -> list[sp.Expr]:
    """Reduced lex Groebner basis of the relations, monic, sorted by leading parameter."""
    rels = []
    for r in relations:
        if isinstance(r, sp.Equality):
            r = r.lhs - r.rhs
        r = sp.numer(sp.together(sp.sympify(r)))
        if r != 0:
            rels.append(sp.expand(r))
    if not rels:
        return []
    gens = kernel.sort_symbols(set(params) | set().union(*(r.free_symbols for r in rels)))
    gb = sp.groebner(rels, *gens, order="lex")
    if list(gb.exprs) == [1]:
        raise InconsistentConstraints("inconsistent constraints")
    out = []
    for g in gb.exprs:
        poly = sp.Poly(g, *gens)
        out.append(sp.expand(g / poly.LC(order="lex")))
    return sorted(out, key=lambda e: (kernel.sort_symbols(e.free_symbols)[0].name, sp.default_sort_key(e)))


def constraint_text(rel: sp.Expr) -> str:
    """Solved form ``"b = 1"`` when ``rel`` is linear in its first parameter."""
    syms = kernel.sort_symbols(rel.free_symbols)
    for p in syms:
        poly = sp.Poly(rel, p)
        if poly.degree() == 1 and poly.LC().is_number:
            rhs = kernel.normalize(-(rel - poly.LC() * p) / poly.LC())
            return f"{p.name} = {kernel.to_text(rhs)}"
    return f"{kernel.to_text(rel)} = 0"


def solved_values(constraints: Sequence[sp.Expr]) -> dict[sp.Symbol, sp.Expr]:
    """Parameter values for constraints in triangular solved form."""
    out = {}
    for rel in constraints:
        syms = kernel.sort_symbols(rel.free_symbols)
        if not syms:
            continue
        p = syms[0]
        poly = sp.Poly(rel, p)
        if poly.degree() == 1 and poly.LC().is_number:
            out[p] = kernel.normalize(-(rel - poly.LC() * p) / poly.LC())
    # resolve chains such as b = r, r = 0
    for _ in range(len(out)):
        out = {k: v.xreplace(out) for k, v in out.items()}
    return out


def holds_under(e: sp.Expr, constraints: Sequence[sp.Expr], variables: Sequence[sp.Symbol]) -> bool:
    """True iff ``e`` vanishes identically modulo the constraint ideal."""
    e = kernel.normalize(e)
    if e == 0:
        return True
    num = sp.numer(e)
    if not constraints:
        return False
    params = kernel.sort_symbols(set().union(*(c.free_symbols for c in constraints)))
    gb = sp.groebner(list(constraints), *params, order="lex")
    cm = kernel.collect_coefficients(num, variables)
    return all(gb.reduce(sp.expand(c))[1] == 0 for c in cm.values())


# -- branches ----------------------------------------------------------------

@dataclass
class Branch:
    param_constraints: list[sp.Expr]
    coeff_values: dict[sp.Symbol, sp.Expr]
    S: sp.Expr
    M: sp.Expr
    N: sp.Expr
    P: sp.Expr
    excluded_loci: list[sp.Expr] = field(default_factory=list)
    degrees: tuple[int, int, int] = (0, 0, 0)
    degenerate: bool = False

    @property
    def constraint_strings(self) -> list[str]:
        return [constraint_text(c) for c in self.param_constraints]

    @property
    def param_values(self) -> dict[sp.Symbol, sp.Expr]:
        return solved_values(self.param_constraints)


class _Collector:
    """Move between the (x, y, z, unknowns..., params...) ring and the
    coefficient ring (unknowns..., params...)."""

    def __init__(self, variables, others):
        self.big, *_ = ring(list(variables) + list(others), QQ)
        self.small, *_ = ring(list(others) if others else [sp.Dummy("t")], QQ)
        self.nvars = len(variables)
        self.nothers = len(others)

    def coefficients(self, p) -> list:
        groups: dict[tuple, dict] = {}
        for mon, c in p.iterterms():
            key, rest = mon[: self.nvars], mon[self.nvars:]
            if not self.nothers:
                rest = (0,)
            groups.setdefault(key, {})[rest] = c
        return [self.small.from_dict(d) for _, d in sorted(groups.items())]


def _family_polys(family: CandidateFamily, P: PolyAnsatz, N: PolyAnsatz, M: PolyAnsatz):
    """P, N, M of the family scaled by a common denominator."""
    pv = family.param_values
    subs = {k: sp.cancel(v.xreplace(pv)) for k, v in family.substitutions.items()}
    dens = [sp.fraction(v)[1] for v in subs.values()]
    den = sp.lcm_list(dens) if dens else sp.Integer(1)
    out = []
    for a in (P, N, M):
        e = sp.expand(sp.cancel(a.expr.xreplace(subs) * den))
        out.append(e.xreplace(pv) if pv else e)
    return out[0], out[1], out[2], den


def solve_nonlinear_stage(family: CandidateFamily, sys: System3D, ansatz: tuple[PolyAnsatz, PolyAnsatz, PolyAnsatz],
                          *, time_budget: float | None = 60.0, nonzero: Sequence[sp.Expr] = ()) -> list[Branch]:
    """Enumerate branches of one candidate family.

    ``ansatz`` is the ``(M, N, P)`` triple the family was solved for.
    Raises :class:`NoBranchError` when no admissible branch survives and
    :class:`SolverBudgetExceeded` when the time budget runs out.
    """
    Ma, Na, Pa = ansatz
    x, y, z = sys.vars
    pv = family.param_values
    fsys = sys.substitute(pv) if pv else sys
    params = [p for p in sys.params if p not in pv]
    Pf, Nf, Mf, den = _family_polys(family, Pa, Na, Ma)
    free = [u for u in family.free_unknowns if Pf.has(u) or Nf.has(u)]
    col = _Collector(sys.vars, free + params)
    big = col.big

    Pr, Nr = big.from_expr(Pf) if Pf != 0 else big.zero, big.from_expr(Nf) if Nf != 0 else big.zero
    f, g, h = (big.from_expr(e) if e != 0 else big.zero for e in fsys.rhs)
    xg, yg, zg = big.gens[:3]
    A, B, C = (big.from_expr(e) if e != 0 else big.zero for e in riccati_coefficients(fsys))

    def D(p):
        return f * p.diff(xg) + g * p.diff(yg) + h * p.diff(zg)

    R = f * (Nr * D(Pr) - Pr * D(Nr)) - (A * Pr**2 + B * Pr * Nr - C * Nr**2)
    eqs = col.coefficients(R)
    nvec = col.coefficients(Nr)
    small = col.small
    seeds = [small.from_expr(c) for c in list(family.case_conditions) + list(nonzero)
             + [den] if sp.sympify(c).free_symbols]
    seeds += [small.from_expr(c) for c in _param_content(fsys)]

    solver = SplittingSolver(small, [small.gens[i] for i in range(len(free) + len(params))],
                             nonvanishing=[nvec], time_budget=time_budget)
    solver.preferred_count = len(free)
    t0 = time.monotonic()
    comps = solver.solve(eqs, seeds)
    log.info("nonlinear stage: %d components, %d nodes, %.1fs", len(comps), solver.nodes, time.monotonic() - t0)

    branches: list[Branch] = []
    seen = set()
    for comp in comps:
        if comp.unresolved:
            log.info("skipping unresolved component (%d equations)", len(comp.unresolved))
            continue
        vals = comp.values(small)
        for br in _component_branches(vals, comp, free, params, family, fsys, sys, Pf, Nf, Mf):
            key = (tuple(br.param_constraints), br.S)
            if key in seen:
                continue
            seen.add(key)
            branches.append(br)
    if not branches:
        raise NoBranchError("no branch")
    return branches


def _param_content(sys: System3D) -> list[sp.Expr]:
    out = []
    z = sys.vars[2]
    for e in (sys.f, sys.g - z * sys.f):
        cm = kernel.collect_coefficients(e, sys.vars)
        if not cm:
            continue
        g = sp.gcd_list(list(cm.values())) if len(cm) > 1 else list(cm.values())[0]
        if sp.sympify(g).free_symbols:
            out.append(g)
    return out


def _component_branches(vals, comp, free, params, family, fsys, sys, Pf, Nf, Mf):
    x, y, z = sys.vars
    pset = set(params)
    rels = [sp.numer(sp.together(p - vals[p])) for p in params if p in vals]
    rels += [r.lhs - r.rhs for r in family.param_relations]
    loose = [u for u in free if u not in vals]
    if any(r.free_symbols - pset - {rr.lhs for rr in family.param_relations} for r in rels):
        # relation couples parameters with unknowns: project onto the parameters
        allv = kernel.sort_symbols(set().union(*(r.free_symbols for r in rels)) - pset) + kernel.sort_symbols(pset)
        gb = sp.groebner(rels, *allv, order="lex")
        rels = [g for g in gb.exprs if g.free_symbols <= pset] + [r.lhs - r.rhs for r in family.param_relations]
    try:
        constraints = canonicalize_constraints(rels, sys.params)
    except InconsistentConstraints:
        return []
    pvals = solved_values(constraints)
    excluded = [nz.as_expr() for nz in comp.nonzero if nz.as_expr().free_symbols <= pset]

    def inst(e):
        e = e.xreplace(vals)
        return sp.cancel(e)

    P0, N0, M0 = inst(Pf), inst(Nf), inst(Mf)
    specs = _specializations(loose, P0, N0)
    out = []
    guards = [nz.as_expr() for nz in comp.nonzero]
    for spec in specs:
        # a specialization may land on a locus the component excludes
        if any(sp.cancel(g.xreplace(vals).xreplace(spec)) == 0 for g in guards if g.free_symbols - pset):
            continue
        P1, N1, M1 = (sp.cancel(e.xreplace(spec)) for e in (P0, N0, M0))
        if N1 == 0:
            continue
        if pvals:
            P1, N1, M1 = (sp.cancel(e.xreplace(pvals)) for e in (P1, N1, M1))
        if N1 == 0:
            continue
        S = kernel.normalize(P1 / N1)
        bsys = sys.substitute(pvals) if pvals else sys
        if kernel.is_zero(bsys.f) or kernel.is_zero(bsys.g - z * bsys.f):
            log.info("discarding branch %s: method preconditions fail", constraints)
            continue
        if not holds_under(sfunction_residual(bsys, S), constraints, sys.vars):
            log.warning("discarding branch %s: residual check failed", constraints)
            continue
        coeffs = {k: sp.cancel(sp.sympify(v).xreplace(spec).xreplace(pvals)) for k, v in family.substitutions.items()}
        coeffs.update({k: sp.cancel(sp.sympify(v).xreplace(spec).xreplace(pvals)) for k, v in vals.items() if k not in pset})
        coeffs.update(spec)
        out.append(Branch(constraints, coeffs, S, M1, N1, P1, excluded, family.degrees, S == 0))
    return out


def _specializations(loose, P0, N0) -> list[dict]:
    """Gauge-fix the homogeneous solution set.

    One free coefficient is the projective gauge and is set to 1.  When more
    remain, each is tried as the single nonzero coefficient in turn.
    """
    loose = [u for u in loose if P0.has(u) or N0.has(u)]
    if not loose:
        return [{}]
    specs = []
    for i, u in enumerate(loose):
        specs.append({v: sp.Integer(1 if j == i else 0) for j, v in enumerate(loose)})
    return specs
