"""Triangular decomposition of polynomial systems by factor splitting.

The solver works on sparse polynomials (``sympy.polys.rings``) and walks a
depth-first tree of cases:

* an equation linear in a variable with a constant coefficient is solved
  and substituted;
* an equation that factors is split, one child per factor, with earlier
  factors recorded as nonzero in later children;
* an equation linear in a variable with a parameter-dependent coefficient
  ``c`` is split into ``c != 0`` (solve) and ``c = 0``;
* otherwise a Groebner basis of the remaining equations is tried once.

Leaves are :class:`Component` records: a triangular list of substitutions,
the nonzero conditions assumed on the way, and any equations that could not
be resolved.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import sympy as sp
import sympy.core.random as sympy_random
from sympy.polys.rings import PolyElement

log = logging.getLogger(__name__)


class SolverBudgetExceeded(RuntimeError):
    pass


@dataclass
class Component:
    # (var, num, den): var = num/den, later entries may use earlier vars
    substitutions: list[tuple[PolyElement, PolyElement, PolyElement]]
    nonzero: frozenset
    unresolved: list[PolyElement] = field(default_factory=list)

    def values(self, ring) -> dict[sp.Symbol, sp.Expr]:
        """Back-substitute into explicit values, as sympy expressions."""
        out: dict[sp.Symbol, sp.Expr] = {}
        for var, num, den in reversed(self.substitutions):
            val = num.as_expr() / den.as_expr()
            val = sp.cancel(val.xreplace(out)) if out else sp.cancel(val)
            out[var.as_expr()] = sp.sympify(val)
        return out


def _prim(p: PolyElement) -> PolyElement:
    _, q = p.primitive()
    if q.LC < 0:
        q = -q
    # fresh element: some ring operations hand back objects whose cached
    # hash predates their final terms, which breaks set membership
    return p.ring.from_dict(dict(q))


class SplittingSolver:
    """Solve ``eqs = 0`` over the ring's generators.

    ``solve_order`` lists the variables that may be solved for, in order of
    preference.  Factors involving only ``generic`` generators are treated as
    nonzero.  ``nonvanishing`` is a list of coefficient vectors of which at
    least one entry must stay nonzero in every component (used for N != 0).
    """

    small_factor_terms = 40

    def __init__(
        self,
        ring,
        solve_order: Sequence[PolyElement],
        *,
        generic: Iterable[PolyElement] = (),
        nonvanishing: Sequence[Sequence[PolyElement]] = (),
        time_budget: float | None = None,
        max_components: int | None = None,
    ):
        self.ring = ring
        self.order = list(solve_order)
        self.rank = {v: i for i, v in enumerate(self.order)}
        self.generic_idx = {ring.gens.index(g) for g in generic}
        self.nonvanishing = [list(v) for v in nonvanishing]
        self.time_budget = time_budget
        self.max_components = max_components
        self.nodes = 0
        self._factor_cache: dict[PolyElement, list[PolyElement]] = {}

    # -- helpers -----------------------------------------------------------

    def _only_generic(self, p: PolyElement) -> bool:
        if not self.generic_idx:
            return False
        for m in p.itermonoms():
            for i, k in enumerate(m):
                if k and i not in self.generic_idx:
                    return False
        return True

    def _known_nonzero(self, p: PolyElement, nonzero) -> bool:
        return p.is_ground or p in nonzero or self._only_generic(p)

    def factors(self, e: PolyElement, nonzero) -> list[PolyElement] | None:
        """Distinct factors of ``e`` not known to be nonzero.

        ``None`` means ``e`` is identically zero; ``[]`` means ``e`` can never
        vanish.  Large polynomials are only stripped of monomial content and
        known nonzero divisors, not fully factored.
        """
        if e.is_zero:
            return None
        if e.is_ground:
            return []
        e = _prim(e)
        out: list[PolyElement] = []
        monoms = e.monoms()
        ngens = len(self.ring.gens)
        content = [min(m[i] for m in monoms) for i in range(ngens)]
        if any(content):
            mono = [0] * ngens
            for i, k in enumerate(content):
                if k:
                    mono[i] = k
                    g = self.ring.gens[i]
                    if not self._known_nonzero(g, nonzero):
                        out.append(g)
            e = e.exquo(self.ring({tuple(mono): 1}))
        for nz in nonzero:
            if nz.is_monomial or nz.is_ground:
                continue
            while not e.is_ground and len(nz) <= len(e):
                q, r = e.div(nz)
                if not r.is_zero:
                    break
                e = q
        if e.is_ground:
            return out
        e = _prim(e)
        if len(e) <= self.small_factor_terms:
            facs = self._factor_cache.get(e)
            if facs is None:
                facs = self._irreducible(e)
                self._factor_cache[e] = facs
        else:
            facs = [e]
        for f in facs:
            if not self._known_nonzero(f, nonzero) and f not in out:
                out.append(f)
        return out

    def _irreducible(self, e: PolyElement) -> list[PolyElement]:
        # e = a v + b factors as content gcd(a, b) times an irreducible part.
        # This avoids Wang's algorithm, whose random evaluation points can
        # make a single small factorization take minutes.
        for i, g in enumerate(self.ring.gens):
            if e.degree(i) != 1:
                continue
            a, b = e.coeff_wrt(g, 1), e.coeff_wrt(g, 0)
            if b.is_zero:
                return self._irreducible(_prim(a)) + [g] if not a.is_ground else [g]
            c = a.gcd(b)
            if c.is_ground:
                return [e]
            return self._irreducible(_prim(c)) + [_prim(e.exquo(c))]
        return [_prim(f) for f, _ in e.factor_list()[1]]

    def _check_budget(self):
        if self.time_budget is not None and time.monotonic() - self._t0 > self.time_budget:
            raise SolverBudgetExceeded(f"solver budget of {self.time_budget}s exceeded")

    # -- main loop ---------------------------------------------------------

    def solve(self, equations: Iterable[PolyElement], nonzero: Iterable[PolyElement] = ()) -> list[Component]:
        self._t0 = time.monotonic()
        # multivariate factoring draws random evaluation points; unseeded,
        # identical runs differ in time by an order of magnitude
        sympy_random.seed(0)
        results: list[Component] = []
        nz0 = set()
        for p in nonzero:
            for f in self.factors(p, set()) or []:
                nz0.add(f)
        stack = [(list(equations), frozenset(nz0), [], self.nonvanishing, False)]
        while stack:
            self._check_budget()
            if self.max_components is not None and len(results) >= self.max_components:
                break
            state = stack.pop()
            children = self._step(*state, results)
            # reversed so the first child is explored first
            stack.extend(c for c in reversed(children) if c is not None)
        return results

    def _step(self, eqs, nonzero, subs, nvecs, tried_gb, results):
        self.nodes += 1
        for vec in nvecs:
            if all(c.is_zero for c in vec):
                return []
        F: list[list[PolyElement]] = []
        seen = set()
        for e in eqs:
            fs = self.factors(e, nonzero)
            if fs is None:
                continue
            if not fs:
                return []
            key = frozenset(fs)
            if key not in seen:
                seen.add(key)
                F.append(fs)
        if not F:
            results.append(Component(subs, nonzero))
            return []
        full = [self._prod(fs) for fs in F]

        pick = self._pick_linear(F, nonzero, ground_only=True)
        if pick is not None:
            v, e, c = pick
            num = -(e - c * v)
            return [self._substitute(full, nonzero, subs, nvecs, v, num.quo_ground(c.LC), self.ring.one)]

        multi = [fs for fs in F if len(fs) > 1]
        if multi:
            fs = min(multi, key=lambda fs: (len(fs), sum(len(f) for f in fs)))
            children = []
            nz = set(nonzero)
            for fac in fs:
                children.append(([fac] + full, frozenset(nz), subs, nvecs, False))
                nz.add(fac)
            return children

        pick = self._pick_linear(F, nonzero, ground_only=False)
        if pick is not None:
            v, e, c = pick
            cfs = self.factors(c, nonzero) or []
            nz = frozenset(set(nonzero) | set(cfs))
            child = self._substitute(full, nz, subs, nvecs, v, -(e - c * v), c)
            out = [child] if child is not None else []
            out.append(([c] + full, nonzero, subs, nvecs, False))
            return [o for o in out if o is not None]

        if not tried_gb:
            gb = self._groebner(full)
            if gb is None:
                return []
            return [(gb, nonzero, subs, nvecs, True)]
        log.debug("unresolved component with %d equations", len(full))
        results.append(Component(subs, nonzero, full))
        return []

    def _prod(self, fs):
        p = self.ring.one
        for f in fs:
            p *= f
        return p

    def _pick_linear(self, F, nonzero, ground_only):
        best = None
        for fs in F:
            if len(fs) != 1:
                continue
            e = fs[0]
            for v in self.order:
                if e.degree(v) != 1:
                    continue
                c = e.coeff_wrt(v, 1)
                if ground_only:
                    if not c.is_ground:
                        continue
                    score = (self.rank[v] >= self._n_pref, len(e), self.rank[v])
                else:
                    score = (self.rank[v] >= self._n_pref, len(c), len(e), self.rank[v])
                if best is None or score < best[0]:
                    best = (score, v, e, c)
        return None if best is None else best[1:]

    @property
    def _n_pref(self):
        return getattr(self, "preferred_count", len(self.order))

    def _substitute(self, eqs, nonzero, subs, nvecs, v, num, den):
        ring = self.ring

        def sub(e):
            d = e.degree(v)
            if d <= 0:
                return e
            if den.is_one:
                return e.compose(v, num)
            out = ring.zero
            for k in range(d + 1):
                ck = e.coeff_wrt(v, k)
                if not ck.is_zero:
                    out += ck * num**k * den ** (d - k)
            return out

        new_nz = set()
        for n in nonzero:
            q = sub(n)
            if q.is_zero:
                return None
            if not den.is_one and n.degree(v) > 0:
                for f in self.factors(q, set()) or []:
                    new_nz.add(f)
            elif not q.is_ground:
                new_nz.add(_prim(q))
        new_nvecs = [[sub(c) for c in vec] for vec in nvecs]
        return ([sub(e) for e in eqs], frozenset(new_nz), subs + [(v, num, den)], new_nvecs, False)

    def _groebner(self, eqs):
        ring = self.ring
        exprs = [e.as_expr() for e in eqs]
        gens = [g.as_expr() for g in ring.gens]
        try:
            gb = sp.groebner(exprs, *gens, order="grevlex")
        except Exception:  # pragma: no cover - sympy internal failures
            log.exception("groebner failed")
            return list(eqs)
        if list(gb.exprs) == [1]:
            return None
        return [ring.from_expr(g) for g in gb.exprs]
