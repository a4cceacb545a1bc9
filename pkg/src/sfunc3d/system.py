"""Polynomial 3D systems x' = f, y' = g, z' = h and their Darboux operator."""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path

import sympy as sp

from . import kernel
from .grammar import UndeclaredSymbolError, UnknownFunctionError


class SystemDefinitionError(ValueError):
    pass


class NonPolynomialRHSError(SystemDefinitionError):
    pass


class UndeclaredSymbol(SystemDefinitionError):
    pass


class DuplicateVariableError(SystemDefinitionError):
    pass


@dataclass(frozen=True)
class System3D:
    f: sp.Expr
    g: sp.Expr
    h: sp.Expr
    vars: tuple[sp.Symbol, sp.Symbol, sp.Symbol]
    params: tuple[sp.Symbol, ...] = ()

    @property
    def rhs(self) -> tuple[sp.Expr, sp.Expr, sp.Expr]:
        return (self.f, self.g, self.h)

    @property
    def field(self) -> dict[sp.Symbol, sp.Expr]:
        return dict(zip(self.vars, self.rhs))

    def permuted(self, order) -> "System3D":
        """Same vector field with the variable roles reassigned to ``order``."""
        fld = self.field
        order = tuple(order)
        return System3D(fld[order[0]], fld[order[1]], fld[order[2]], order, self.params)

    def substitute(self, values: dict) -> "System3D":
        rhs = [kernel.normalize(e.subs(values)) for e in self.rhs]
        params = tuple(p for p in self.params if p not in values)
        return System3D(*rhs, self.vars, params)

    def degree(self) -> int:
        return max(kernel.total_degree(e, self.vars) for e in self.rhs)


@dataclass
class PreconditionReport:
    f_nonzero: bool
    g_minus_zf_nonzero: bool
    suggested_permutations: list[tuple[str, str, str]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.f_nonzero and self.g_minus_zf_nonzero


def parse_system(doc: dict | str | Path) -> System3D:
    """Build a validated :class:`System3D` from a definition document.

    ``doc`` is a mapping with keys ``vars``, ``params``, ``f``, ``g``, ``h``
    (expression strings), a path to a JSON file, or JSON text.
    """
    if isinstance(doc, Path) or (isinstance(doc, str) and not doc.lstrip().startswith("{")):
        doc = json.loads(Path(doc).read_text())
    elif isinstance(doc, str):
        doc = json.loads(doc)
    names = list(doc.get("vars", ["x", "y", "z"]))
    pnames = list(doc.get("params", []))
    if len(names) != 3:
        raise SystemDefinitionError("exactly three variables are required")
    if len(set(names)) != 3:
        raise DuplicateVariableError("duplicate variable")
    if len(set(pnames)) != len(pnames) or set(pnames) & set(names):
        raise DuplicateVariableError("duplicate variable/parameter name")
    syms = {n: sp.Symbol(n) for n in names + pnames}
    vs = tuple(syms[n] for n in names)
    rhs = []
    for key in ("f", "g", "h"):
        try:
            e = kernel.parse(str(doc[key]), syms)
        except UnknownFunctionError as err:
            raise NonPolynomialRHSError(f"non-polynomial right-hand side {key}: {err}") from err
        except UndeclaredSymbolError as err:
            raise UndeclaredSymbol(f"undeclared symbol in {key}: {err}") from err
        e = kernel.normalize(e)
        if not kernel.is_polynomial_in(e, vs) or sp.fraction(e)[1].free_symbols:
            raise NonPolynomialRHSError(f"non-polynomial right-hand side {key}")
        rhs.append(e)
    return System3D(*rhs, vs, tuple(syms[n] for n in pnames))


def system_to_doc(sys: System3D) -> dict:
    return {
        "vars": [v.name for v in sys.vars],
        "params": [p.name for p in sys.params],
        "f": kernel.to_text(sys.f),
        "g": kernel.to_text(sys.g),
        "h": kernel.to_text(sys.h),
    }


def darboux_apply(sys: System3D, e) -> sp.Expr:
    """D[e] = f e_x + g e_y + h e_z."""
    x, y, z = sys.vars
    return kernel.normalize(
        sys.f * kernel.differentiate(e, x)
        + sys.g * kernel.differentiate(e, y)
        + sys.h * kernel.differentiate(e, z)
    )


def check_preconditions(sys: System3D) -> PreconditionReport:
    z = sys.vars[2]
    f_ok = not kernel.is_zero(sys.f)
    gz_ok = not kernel.is_zero(sys.g - z * sys.f)
    perms = []
    if not (f_ok and gz_ok):
        ident = tuple(v.name for v in sys.vars)
        perms = [p for p in itertools.permutations(ident) if p != ident]
    return PreconditionReport(f_ok, gz_ok, perms)
