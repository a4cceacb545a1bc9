"""End-to-end driver: ansatz -> S-function branches -> H -> I -> verification."""

from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass, field
from typing import Any

import sympy as sp

from . import kernel
from .ansatz import TrivialKernelError, linear_stage
from .assembly import (CharacteristicUnsolved, Level, NotExpressible, compute_phi, compute_W,
                       reexpress_in_xH, solve_characteristic)
from .reduction import UnsolvedODE, external_solver_from_env, make_associated_ode, solve_1ode, SympyDsolveAdapter
from .sfunction import Branch, NoBranchError, holds_under, sfunction_residual, solve_nonlinear_stage
from .splitting import SolverBudgetExceeded
from .system import System3D, check_preconditions, system_to_doc
from .verify import UnderdeterminedInstance, VerificationRecord, verify_invariant

log = logging.getLogger(__name__)


@dataclass
class PipelineConfig:
    degree_start: int | None = None      # None: max(2, degree of the system)
    degree_cap: int = 5
    split_budget: int = 16
    solver_budget_seconds: float = 60.0
    darboux_degree_bound: int = 3
    darboux_budget_seconds: float = 20.0
    point_check_count: int = 20
    drift_tolerance: float = 1e-6
    permutation_retry: bool = True
    external_solver: bool | None = None  # None: read the environment
    trajectory: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.degree_cap < 0 or (self.degree_start is not None and not 0 <= self.degree_start <= self.degree_cap):
            raise ValueError("need 0 <= degree_start <= degree_cap")
        for name in ("split_budget", "solver_budget_seconds", "darboux_budget_seconds", "point_check_count",
                     "drift_tolerance"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.darboux_degree_bound < 1:
            raise ValueError("darboux_degree_bound must be positive")

    def start_degree(self, sys: System3D) -> int:
        if self.degree_start is not None:
            return self.degree_start
        return min(max(2, sys.degree()), self.degree_cap)


@dataclass
class BranchReport:
    constraints: list[str]
    S: sp.Expr
    M: sp.Expr
    N: sp.Expr
    P: sp.Expr
    ode: sp.Expr                      # right-hand side of dz/dy
    level: Level
    degenerate: bool = False
    excluded: list[sp.Expr] = field(default_factory=list)
    H: sp.Expr | None = None
    H_method: str = ""
    phi: sp.Expr | None = None
    W: sp.Expr | None = None
    w: sp.Expr | None = None
    G: sp.Expr | None = None
    I: sp.Expr | None = None
    classification: str = ""
    verification: VerificationRecord | None = None
    notes: list[str] = field(default_factory=list)


@dataclass
class RunReport:
    system: dict
    config: dict
    variables: list[str]
    attempts: list[dict]
    branches: list[BranchReport]
    first_success: list[int] | None
    timing: dict = field(default_factory=dict)

    @property
    def level(self) -> Level:
        order = [Level.FULL_INVARIANT, Level.PARTIAL_H, Level.PARTIAL_S]
        for lv in order:
            if any(b.level == lv for b in self.branches):
                return lv
        return Level.NO_RESULT

    @property
    def full(self) -> list[BranchReport]:
        return [b for b in self.branches if b.level == Level.FULL_INVARIANT]


# -- per-branch processing ---------------------------------------------------

def _process_branch(sys: System3D, br: Branch, cfg: PipelineConfig, external) -> BranchReport:
    x, y, z = sys.vars
    bsys = sys.substitute(br.param_values) if br.param_values else sys
    ode = make_associated_ode(br.S, sys.vars)
    rep = BranchReport(br.constraint_strings, br.S, br.M, br.N, br.P, ode.rhs, Level.PARTIAL_S,
                       br.degenerate, list(br.excluded_loci))
    if br.degenerate:
        rep.notes.append("degenerate-S")
    try:
        sol = solve_1ode(ode, darboux_degree=cfg.darboux_degree_bound,
                         darboux_budget=cfg.darboux_budget_seconds, external=external)
    except UnsolvedODE:
        rep.notes.append("associated ODE unsolved")
        rep.verification = _residual_record(bsys, br)
        return rep
    rep.H, rep.H_method, rep.classification = sol.H, sol.method_used, sol.classification
    if sol.check == "probabilistic":
        rep.notes.append("H annihilation checked at random points only")
    rep.level = Level.PARTIAL_H
    try:
        rep.phi = compute_phi(bsys, br.S)
        rep.W = compute_W(sol.H, rep.phi, sys.vars)
        rep.w = reexpress_in_xH(rep.W, sol.H, sys.vars)
        res = solve_characteristic(rep.w, sol.H, x, darboux_degree=cfg.darboux_degree_bound,
                                   darboux_budget=cfg.darboux_budget_seconds, external=external)
    except NotExpressible:
        rep.notes.append("W not expressible in (x, H)")
        rep.verification = _residual_record(bsys, br)
        return rep
    except CharacteristicUnsolved:
        rep.notes.append("characteristic ODE unsolved")
        rep.verification = _residual_record(bsys, br)
        return rep
    except kernel.NonDifferentiableError as err:
        rep.notes.append(str(err))
        rep.verification = _residual_record(bsys, br)
        return rep
    rep.G, rep.I, rep.classification = res.G, res.I, res.classification
    try:
        rec = verify_invariant(sys, res.I, br.param_constraints, n_points=cfg.point_check_count,
                               seed=cfg.seed, trajectory=cfg.trajectory)
    except UnderdeterminedInstance as err:
        rec = VerificationRecord("failed", notes=[str(err)])
    if rec.trajectory_drift is not None and rec.trajectory_drift >= cfg.drift_tolerance:
        rec.notes.append(f"drift {rec.trajectory_drift:.3g} above tolerance")
    rep.verification = rec
    consistent = _s_consistent(br.S, res.I, sys.vars)
    if rec.sound and consistent:
        rep.level = Level.FULL_INVARIANT
    else:
        rep.notes.append("invariant failed verification" if consistent else "S-consistency failed")
    return rep


def _s_consistent(S, I, variables) -> bool:
    x, y, z = variables
    try:
        return kernel.is_zero(S * kernel.differentiate(I, z) - kernel.differentiate(I, y))
    except kernel.KernelError:
        return True  # not decidable symbolically; covered by the point checks


def _residual_record(bsys: System3D, br: Branch) -> VerificationRecord:
    ok = holds_under(sfunction_residual(bsys, br.S), br.param_constraints, bsys.vars)
    return VerificationRecord("proved" if ok else "failed", notes=["checks the S-function equation only"])


# -- driver -----------------------------------------------------------------

def _orders(sys: System3D, cfg: PipelineConfig):
    yield sys.vars
    pre = check_preconditions(sys)
    if pre.ok or not cfg.permutation_retry:
        return
    by_name = {v.name: v for v in sys.vars}
    for names in pre.suggested_permutations:
        yield tuple(by_name[n] for n in names)


def run(sys: System3D, cfg: PipelineConfig | None = None) -> RunReport:
    cfg = cfg or PipelineConfig()
    external = None
    if cfg.external_solver is None:
        external = external_solver_from_env()
    elif cfg.external_solver:
        external = SympyDsolveAdapter()
    t_start = time.monotonic()
    attempts: list[dict] = []
    stage_times: list[float] = []
    for order in _orders(sys, cfg):
        psys = sys if order == sys.vars else sys.permuted(order)
        names = [v.name for v in order]
        pre = check_preconditions(psys)
        if not pre.ok:
            attempts.append({"variables": names, "degrees": None,
                             "outcome": "precondition failed: " + ("f = 0" if not pre.f_nonzero else "g - z f = 0")})
            stage_times.append(0.0)
            continue
        for d in range(cfg.start_degree(psys), cfg.degree_cap + 1):
            degs = [d, d, max(d - 1, 1)]
            t0 = time.monotonic()
            entry: dict[str, Any] = {"variables": names, "degrees": degs}
            attempts.append(entry)
            try:
                ans, families = linear_stage(psys, d, degs[2], split_budget=cfg.split_budget)
            except TrivialKernelError:
                entry["outcome"] = "trivial kernel"
                stage_times.append(time.monotonic() - t0)
                continue
            entry["families"] = [{"free_unknowns": len(f.free_unknowns),
                                  "case_conditions": [kernel.to_text(c) for c in f.case_conditions]}
                                 for f in families]
            branches: list[Branch] = []
            budget_hit = False
            for fam in families:
                try:
                    branches.extend(solve_nonlinear_stage(fam, psys, ans, time_budget=cfg.solver_budget_seconds))
                except NoBranchError:
                    pass
                except SolverBudgetExceeded:
                    budget_hit = True
            if not branches:
                entry["outcome"] = "solver budget exceeded" if budget_hit else "no branch"
                stage_times.append(time.monotonic() - t0)
                continue
            entry["outcome"] = f"{len(branches)} branch(es)"
            reports = [_process_branch(psys, br, cfg, external) for br in branches]
            stage_times.append(time.monotonic() - t0)
            return RunReport(system_to_doc(sys), asdict(cfg), names, attempts, reports, degs,
                             {"total_seconds": time.monotonic() - t_start, "attempt_seconds": stage_times})
        if cfg.permutation_retry is False:
            break
    return RunReport(system_to_doc(sys), asdict(cfg), [v.name for v in sys.vars], attempts, [], None,
                     {"total_seconds": time.monotonic() - t_start, "attempt_seconds": stage_times})


# -- serialization ----------------------------------------------------------

_EXPR_FIELDS = ("S", "M", "N", "P", "ode", "H", "phi", "W", "w", "G", "I")


def _text(e):
    return None if e is None else kernel.to_text(e)


def report_to_dict(r: RunReport) -> dict:
    branches = []
    for b in r.branches:
        d = {"constraints": b.constraints, "level": b.level.value, "degenerate": b.degenerate,
             "classification": b.classification, "H_method": b.H_method,
             "excluded": [_text(e) for e in b.excluded], "notes": list(b.notes)}
        for k in _EXPR_FIELDS:
            d[k] = _text(getattr(b, k))
        v = b.verification
        d["verification"] = None if v is None else {
            "symbolic_zero": v.symbolic_zero, "point_checks": [v.point_checks_passed, v.point_checks_total],
            "trajectory_drift": v.trajectory_drift, "notes": list(v.notes)}
        branches.append(d)
    return {"system": r.system, "config": r.config, "variables": r.variables, "level": r.level.value,
            "first_success": r.first_success, "attempts": r.attempts, "branches": branches,
            "timing": r.timing}


def _render_text(d: dict) -> str:
    sysd = d["system"]
    lines = [f"system  {sysd['vars']}  params {sysd['params']}",
             f"  f = {sysd['f']}", f"  g = {sysd['g']}", f"  h = {sysd['h']}",
             f"result  {d['level']}", "attempts"]
    for a in d["attempts"]:
        degs = "-" if a["degrees"] is None else "/".join(map(str, a["degrees"]))
        lines.append(f"  vars {','.join(a['variables'])}  degrees {degs}: {a['outcome']}")
    for i, b in enumerate(d["branches"]):
        lines.append(f"branch {i}  [{b['level']}]  " + (", ".join(b["constraints"]) or "no constraints"))
        lines.append(f"  S = {b['S']}")
        lines.append(f"  dz/dy = {b['ode']}")
        for k in ("H", "phi", "W", "w", "G", "I"):
            if b[k] is not None:
                lines.append(f"  {k} = {b[k]}")
        v = b["verification"]
        if v:
            drift = "n/a" if v["trajectory_drift"] is None else f"{v['trajectory_drift']:.2e}"
            lines.append(f"  verification: {v['symbolic_zero']}, points {v['point_checks'][0]}/"
                         f"{v['point_checks'][1]}, drift {drift}")
        for n in b["notes"]:
            lines.append(f"  note: {n}")
    return "\n".join(lines) + "\n"


def emit_report(r: RunReport, fmt: str = "json") -> str:
    d = report_to_dict(r)
    if fmt == "json":
        return json.dumps(d, indent=2, sort_keys=True)
    if fmt == "text":
        return _render_text(d)
    raise ValueError(f"unknown format {fmt!r}")


def parse_report(text: str) -> dict:
    """Inverse of the JSON rendering: expression fields come back as sympy objects."""
    d = json.loads(text)
    for b in d["branches"]:
        for k in _EXPR_FIELDS:
            if b[k] is not None:
                b[k] = kernel.parse(b[k])
        b["excluded"] = [kernel.parse(e) for e in b["excluded"]]
    return d
