"""Step 4: lift H(x, y, z) to an invariant I = G(x, H).

With phi = (S (g - z f) + h)/f the operator d_x + z d_y + phi d_z agrees
with D/f on every function annihilated by d_y - S d_z.  Applied to
G(x, H) it gives G_x + W G_H with W = H_x + z H_y + phi H_z, so G must be
a first integral of d(eta)/dx = w(x, eta) where w(x, H) = W.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass

import sympy as sp

from . import kernel
from .reduction import ExternalSolver, UnsolvedODE, classify, first_integral
from .system import System3D

log = logging.getLogger(__name__)

ETA = sp.Symbol("eta")


class Level(str, enum.Enum):
    FULL_INVARIANT = "FULL_INVARIANT"
    PARTIAL_H = "PARTIAL_H"
    PARTIAL_S = "PARTIAL_S"
    NO_RESULT = "NO_RESULT"


class NotExpressible(ValueError):
    pass


class CharacteristicUnsolved(RuntimeError):
    pass


@dataclass
class AssemblyProblem:
    H: sp.Expr
    phi: sp.Expr
    W: sp.Expr
    w_of_xH: sp.Expr | None = None


@dataclass
class InvariantResult:
    I: sp.Expr
    level: Level
    classification: str
    G: sp.Expr | None = None
    method_used: str = ""


def compute_phi(sys: System3D, S) -> sp.Expr:
    if kernel.is_zero(sys.f):
        raise ValueError("f identically zero")
    z = sys.vars[2]
    return kernel.normalize((sp.sympify(S) * (sys.g - z * sys.f) + sys.h) / sys.f)


def compute_W(H, phi, variables) -> sp.Expr:
    x, y, z = variables
    d = kernel.differentiate
    return kernel.normalize(d(H, x) + z * d(H, y) + phi * d(H, z))


def _rational_roots(e: sp.Expr, v: sp.Symbol) -> list[sp.Expr]:
    """Roots in v of the numerator of e that are rational in the other symbols."""
    num = sp.numer(sp.together(e))
    if not num.has(v):
        return []
    roots = []
    for fac, _ in sp.factor_list(num)[1]:
        poly = sp.Poly(fac, v)
        if poly.degree() == 1:
            a, b = poly.all_coeffs()
            roots.append(kernel.normalize(-b / a))
    return roots


def _elementary_roots(e: sp.Expr, v: sp.Symbol) -> list[sp.Expr]:
    try:
        sols = sp.solve(sp.Eq(e, 0), v, rational=True)
    except (NotImplementedError, ValueError):
        return []
    return [s for s in sols if not s.has(sp.I)]


def reexpress_in_xH(W, H, variables, eta: sp.Symbol = ETA) -> sp.Expr:
    """w(x, eta) with w(x, H(x, y, z)) = W.  Raises :class:`NotExpressible`."""
    x, y, z = variables
    W = kernel.normalize(W)
    if W == 0:
        return sp.Integer(0)
    if not (W.free_symbols & {y, z}):
        return W
    eq = sp.sympify(H) - eta
    rational = not (sp.sympify(H).has(sp.exp, sp.log, sp.atan, sp.Integral)
                    or any(p.is_Pow and not p.exp.is_Integer for p in sp.preorder_traversal(H)))
    for v in (z, y):
        # radical roots of a rational H can still give a rational w (H' = H^2 + 1)
        roots = (_rational_roots(eq, v) or _elementary_roots(eq, v)) if rational else _elementary_roots(eq, v)
        for root in roots:
            try:
                cand = kernel.normalize(W.xreplace({v: root}))
            except Exception:
                cand = sp.simplify(W.xreplace({v: root}))
            if cand.has(sp.Integral) or cand.free_symbols & {y, z}:
                continue
            if not kernel.is_zero(kernel.normalize(cand.xreplace({eta: H})) - W):
                continue
            log.debug("reexpressed via %s = %s", v, root)
            return cand
    raise NotExpressible("not expressible")


def solve_characteristic(w, H, x: sp.Symbol, eta: sp.Symbol = ETA, *, darboux_degree: int = 3,
                         darboux_budget: float = 30.0, external: ExternalSolver | None = None
                         ) -> InvariantResult:
    """I = G(x, H) where G is a first integral of d(eta)/dx = w(x, eta)."""
    w = kernel.normalize(w)
    if w == 0:
        return InvariantResult(sp.sympify(H), Level.FULL_INVARIANT, classify(sp.sympify(H)), eta, "w = 0")
    try:
        sol = first_integral(w, eta, x, darboux_degree=darboux_degree,
                             darboux_budget=darboux_budget, external=external)
    except UnsolvedODE as err:
        raise CharacteristicUnsolved("characteristic ODE unsolved") from err
    if any(eta in node.variables for node in sp.preorder_traversal(sol.H) if isinstance(node, sp.Integral)):
        # G(x, H) would need a quadrature with a variable limit
        raise CharacteristicUnsolved("characteristic ODE unsolved")
    I = sol.H.xreplace({eta: H})
    I = kernel.normalize(I) if not I.has(sp.Integral) else I
    return InvariantResult(I, Level.FULL_INVARIANT, classify(I), sol.H, sol.method_used)
