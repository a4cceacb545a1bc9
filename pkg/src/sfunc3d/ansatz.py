"""Step 1: generic polynomials M, N, P and the determining identity.

The identity ``P (g - z f) + N h - f M = 0`` is linear in the ansatz
coefficients.  It is solved by fraction-free Gaussian elimination over the
parameter ring, splitting into cases whenever a pivot can only be chosen
among parameter-dependent entries.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import sympy as sp
from sympy import QQ
from sympy.polys.rings import PolyRing, ring

from . import kernel
from .system import System3D

log = logging.getLogger(__name__)


class TrivialKernelError(ValueError):
    """Only the all-zero ansatz solves the identity at these degrees."""


def monomials(degree: int) -> list[tuple[int, int, int]]:
    """Exponent triples of total degree <= ``degree``: by degree, then lex x>y>z."""
    out = []
    for t in range(degree + 1):
        for i in range(t, -1, -1):
            for j in range(t - i, -1, -1):
                out.append((i, j, t - i - j))
    return out


def n_coefficients(degree: int) -> int:
    return (degree + 1) * (degree + 2) * (degree + 3) // 6


@dataclass(frozen=True)
class PolyAnsatz:
    degree: int
    coeff_symbols: tuple[sp.Symbol, ...]
    monomials: tuple[tuple[int, int, int], ...]
    expr: sp.Expr


def build_ansatz(degree: int, prefix: str = "c", variables: Sequence[sp.Symbol] | None = None) -> PolyAnsatz:
    if degree < 0:
        raise ValueError("degree must be non-negative")
    x, y, z = variables or sp.symbols("x y z")
    mons = monomials(degree)
    syms = tuple(sp.Symbol(f"{prefix}_{k}") for k in range(len(mons)))
    expr = sp.Add(*[c * x**i * y**j * z**k for c, (i, j, k) in zip(syms, mons)])
    return PolyAnsatz(degree, syms, tuple(mons), expr)


def ansatz_triple(sys: System3D, deg_mn: int, deg_p: int) -> tuple[PolyAnsatz, PolyAnsatz, PolyAnsatz]:
    M = build_ansatz(deg_mn, "m", sys.vars)
    N = build_ansatz(deg_mn, "n", sys.vars)
    P = build_ansatz(deg_p, "p", sys.vars)
    clash = {s.name for s in sys.params} & {s.name for a in (M, N, P) for s in a.coeff_symbols}
    if clash:
        raise ValueError(f"parameter names clash with ansatz coefficients: {sorted(clash)}")
    return M, N, P


def determining_identity(sys: System3D, M: PolyAnsatz, N: PolyAnsatz, P: PolyAnsatz,
                         p_sign: int = 1) -> dict[tuple[int, int, int], sp.Expr]:
    """Monomial map of ``p_sign*P (g - z f) + N h - f M``.

    ``p_sign=-1`` flips the sign of the P term.  That variant is wrong for
    S = I_y/I_z and exists only so a regression test can show it.
    """
    x, y, z = sys.vars
    e = p_sign * P.expr * (sys.g - z * sys.f) + N.expr * sys.h - sys.f * M.expr
    poly = sp.Poly(sp.expand(e), x, y, z)
    return {m: c for m, c in poly.terms() if c != 0}


@dataclass
class CandidateFamily:
    substitutions: dict[sp.Symbol, sp.Expr]
    free_unknowns: list[sp.Symbol]
    case_conditions: list[sp.Expr]          # assumed nonzero
    degrees: tuple[int, int, int]
    param_relations: list[sp.Expr] = field(default_factory=list)   # assumed zero

    def apply(self, e: sp.Expr) -> sp.Expr:
        e = e.xreplace(self.substitutions)
        if self.param_values:
            e = e.xreplace(self.param_values)
        return e

    @property
    def param_values(self) -> dict[sp.Symbol, sp.Expr]:
        out = {}
        for rel in self.param_relations:
            if isinstance(rel, sp.Equality):
                out[rel.lhs] = rel.rhs
        return out


# -- parametric Gaussian elimination ----------------------------------------

@dataclass
class _State:
    rows: list[dict[int, object]]
    nonzero: set
    param_subs: list[tuple[object, object]]   # (param generator, value), value over QQ
    conditions: list


class _Eliminator:
    def __init__(self, R: PolyRing, n_unknowns: int, split_budget: int):
        self.R = R
        self.n = n_unknowns
        self.budget = split_budget
        self.families: list[_State] = []
        self.pivots_of: list[list[tuple[int, dict]]] = []
        self.skipped: list[str] = []
        self.splits = 0

    def known_nonzero(self, c, nonzero) -> bool:
        if c.is_zero:
            return False
        if c.is_ground:
            return True
        rest = c
        for nz in nonzero:
            while not rest.is_ground:
                q, r = rest.div(nz)
                if not r.is_zero:
                    break
                rest = q
        return rest.is_ground

    def run(self, rows):
        self._work([(_State(rows, set(self.seed_nonzero), [], []), [])])

    def _work(self, stack):
        while stack:
            state, pivots = stack.pop()
            res = self._eliminate(state, pivots)
            if res is None:
                continue
            if isinstance(res, tuple) and res[0] == "split":
                _, st_nonzero, st_zero = res
                stack.extend(x for x in (st_zero, st_nonzero) if x is not None)
                continue
            self.families.append(res[0])
            self.pivots_of.append(res[1])

    def _eliminate(self, state: _State, pivots):
        rows = [r for r in state.rows if r]
        while rows:
            best = None
            for ri, row in enumerate(rows):
                for col, c in row.items():
                    if self.known_nonzero(c, state.nonzero):
                        key = (col, not c.is_ground, len(c), len(row))
                        if best is None or key < best[0]:
                            best = (key, ri, col)
            if best is None:
                return self._split(state, rows, pivots)
            _, ri, col = best
            prow = rows.pop(ri)
            rows = [self._reduce(r, prow, col) for r in rows]
            rows = [r for r in rows if r]
            pivots = [(pc, self._reduce(pr, prow, col)) for pc, pr in pivots]
            pivots.append((col, prow))
        return (state, pivots)

    def _reduce(self, row, prow, col):
        c = row.get(col)
        if c is None:
            return row
        a = prow[col]
        g = a.gcd(c)
        a1, c1 = a.exquo(g), c.exquo(g)
        out = {}
        for k in set(row) | set(prow):
            v = a1 * row.get(k, self.R.zero) - c1 * prow.get(k, self.R.zero)
            if not v.is_zero:
                out[k] = v
        return self._primitive(out)

    def _primitive(self, row):
        if not row:
            return row
        g = None
        for v in row.values():
            g = v if g is None else g.gcd(v)
            if g.is_ground:
                break
        if g is not None and not g.is_ground:
            row = {k: v.exquo(g) for k, v in row.items()}
        return row

    def _split(self, state: _State, rows, pivots):
        # all candidate pivots depend on parameters in an unknown way
        cands = sorted(((len(c), col, c) for row in rows for col, c in row.items()), key=lambda t: (t[0], t[1]))
        _, col, c = cands[0]
        facs = [f for f, _ in c.factor_list()[1] if not self.known_nonzero(f, state.nonzero)]
        st_nonzero = _State(rows, state.nonzero | set(facs), list(state.param_subs),
                            state.conditions + [c])
        st_zero = None
        if self.splits + 1 < self.budget:
            self.splits += 1
            for fac in facs:
                sub = self._solve_param(fac)
                if sub is None:
                    self.skipped.append(f"case {fac.as_expr()} = 0 not linear in a parameter")
                    continue
                gen, val = sub
                new_rows = [{k: v.compose(gen, val) for k, v in r.items()} for r in rows]
                new_rows = [{k: v for k, v in r.items() if not v.is_zero} for r in new_rows]
                new_piv = [(pc, {k: v.compose(gen, val) for k, v in pr.items()}) for pc, pr in pivots]
                # pivots whose coefficient vanishes must go back into elimination
                keep_piv, back = [], []
                for pc, pr in new_piv:
                    pr = {k: v for k, v in pr.items() if not v.is_zero}
                    (keep_piv if pc in pr else back).append((pc, pr))
                nz = {n.compose(gen, val) for n in state.nonzero}
                if any(n.is_zero for n in nz):
                    continue
                nz = {n for n in nz if not n.is_ground}
                st_zero = (_State(new_rows + [pr for _, pr in back], nz,
                                  state.param_subs + [(gen, val)], list(state.conditions)), keep_piv)
                break
        else:
            self.skipped.append("split budget exhausted")
        return ("split", (st_nonzero, pivots), st_zero)

    def _solve_param(self, fac):
        for gen in self.R.gens:
            if fac.degree(gen) == 1:
                c = fac.coeff_wrt(gen, 1)
                if c.is_ground:
                    return gen, (-(fac - c * gen)).quo_ground(c.LC)
        return None


def _content_factors(e: sp.Expr, variables, params) -> list[sp.Expr]:
    """Parameter factors of the content of ``e`` as a polynomial in ``variables``."""
    if e == 0 or not params:
        return []
    cm = kernel.collect_coefficients(e, variables)
    g = sp.gcd_list(list(cm.values())) if len(cm) > 1 else list(cm.values())[0]
    g = sp.factor_list(g)[1]
    return [f for f, _ in g if f.free_symbols & set(params)]


def solve_linear_stage(eqs: dict, unknowns: Sequence[sp.Symbol], params: Sequence[sp.Symbol],
                       degrees: tuple[int, int, int] = (0, 0, 0), *,
                       nonzero: Sequence[sp.Expr] = (), split_budget: int = 16) -> list[CandidateFamily]:
    """Solve the linear identity ``eqs`` (monomial -> linear form) for ``unknowns``.

    Returns one family per case of the parameter split.  Raises
    :class:`TrivialKernelError` if every case forces all unknowns to zero.
    """
    params = list(params)
    gens = params if params else [sp.Dummy("t")]
    R = ring(gens, QQ)[0]
    index = {u: i for i, u in enumerate(unknowns)}
    rows = []
    for coeff in eqs.values():
        coeff = sp.expand(coeff)
        if coeff == 0:
            continue
        lin = sp.Poly(coeff, *unknowns)
        row = {}
        for mon, c in lin.terms():
            if sum(mon) != 1:
                raise ValueError("determining equations must be linear and homogeneous in the unknowns")
            row[mon.index(1)] = R(c)
        rows.append(row)
    el = _Eliminator(R, len(unknowns), split_budget)
    el.seed_nonzero = [R(f) for f in nonzero]
    el.run(rows)

    families = []
    for state, pivots in zip(el.families, el.pivots_of):
        psubs = {g.as_expr(): v.as_expr() for g, v in state.param_subs}
        # later substitutions were applied after earlier ones; resolve chains
        for k in list(psubs):
            psubs[k] = sp.sympify(psubs[k]).xreplace(psubs)
        subs = {}
        pivot_cols = {pc for pc, _ in pivots}
        for pc, prow in pivots:
            a = prow[pc].as_expr()
            rhs = sp.Add(*[-v.as_expr() * unknowns[k] for k, v in prow.items() if k != pc])
            subs[unknowns[pc]] = sp.cancel(rhs / a)
        free = [u for i, u in enumerate(unknowns) if i not in pivot_cols]
        if not free:
            continue
        fam = CandidateFamily(
            substitutions=subs,
            free_unknowns=free,
            case_conditions=[sp.factor(c.as_expr()) for c in state.conditions],
            degrees=degrees,
            param_relations=[sp.Eq(k, v) for k, v in psubs.items()],
        )
        families.append(fam)
    for msg in el.skipped:
        log.info("linear stage: %s", msg)
    if not families:
        raise TrivialKernelError("trivial kernel")
    return families


def linear_stage(sys: System3D, deg_mn: int, deg_p: int, *, split_budget: int = 16, p_sign: int = 1):
    """Build the ansatz triple and solve the determining identity."""
    M, N, P = ansatz_triple(sys, deg_mn, deg_p)
    eqs = determining_identity(sys, M, N, P, p_sign=p_sign)
    unknowns = list(M.coeff_symbols + N.coeff_symbols + P.coeff_symbols)
    x, y, z = sys.vars
    nonzero = _content_factors(sys.f, sys.vars, sys.params) + _content_factors(sys.g - z * sys.f, sys.vars, sys.params)
    fams = solve_linear_stage(eqs, unknowns, sys.params, (deg_mn, deg_mn, deg_p),
                              nonzero=nonzero, split_budget=split_budget)
    return (M, N, P), fams
