"""Acceptance criteria 1-8.

Each test prints one ``CRITERION n: PASS|FAIL`` line before asserting. The
Lorenz run uses the default configuration and is shared by criteria 1-4, 7
and 8, so the module takes under a minute.
"""

import json
import time
from fractions import Fraction
from pathlib import Path

import pytest
import sympy as sp

from sfunc3d import PipelineConfig, kernel, parse_system, run
from sfunc3d.ansatz import linear_stage
from sfunc3d.assembly import Level
from sfunc3d.sfunction import NoBranchError, SolverBudgetExceeded, sfunction_residual, solve_nonlinear_stage
from sfunc3d.verify import darboux_at, functionally_equivalent, verify_invariant, verify_trajectory

from conftest import I_LORENZ, LORENZ_DOC, S_LORENZ, b, r, s

pytestmark = pytest.mark.slow

x, y, z = sp.symbols("x y z")
V = (x, y, z)
CORPUS = Path(__file__).resolve().parents[1] / "corpus"
BRANCH = ["b = 1", "r = 0", "s = 1/2"]


def announce(capsys, n, ok, detail):
    with capsys.disabled():
        print(f"\nCRITERION {n}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="module")
def lorenz_run():
    t0 = time.monotonic()
    rep = run(parse_system(LORENZ_DOC))
    return rep, time.monotonic() - t0


@pytest.fixture(scope="module")
def lorenz_full(lorenz_run):
    rep, _ = lorenz_run
    hits = [br for br in rep.branches if br.constraints == BRANCH]
    return hits[0] if hits else None


@pytest.fixture(scope="module")
def corpus_runs():
    out = {}
    for path in sorted(CORPUS.glob("*.json")):
        if path.stem == "lorenz":
            continue
        t0 = time.monotonic()
        rep = run(parse_system(path))
        out[path.stem] = (json.loads(path.read_text()), rep, time.monotonic() - t0)
    return out


def test_criterion_1_lorenz_branch(lorenz_run, lorenz_full, capsys):
    rep, secs = lorenz_run
    ok = lorenz_full is not None and rep.first_success == [4, 4, 3] and secs <= 300
    announce(capsys, 1, ok, f"constraints {lorenz_full.constraints if lorenz_full else None}, "
                            f"first success {rep.first_success}, {secs:.0f}s")
    assert ok


def test_criterion_2_lorenz_sfunction(lorenz, lorenz_full, capsys):
    assert lorenz_full is not None
    S = lorenz_full.S
    inst = lorenz.substitute({s: sp.Rational(1, 2), r: 0, b: 1})
    ode_ok = kernel.is_zero(lorenz_full.ode + S_LORENZ) and kernel.is_zero(S - S_LORENZ)
    residual_ok = kernel.is_zero(sfunction_residual(inst, S))
    # D[S] via dual numbers; A/f = -2, B/f = 3, C/f = 3 at (2, 1, 1) worked by hand
    pt = {x: Fraction(2), y: Fraction(1), z: Fraction(1)}
    lhs = darboux_at(inst, S, pt)
    Sv = Fraction(3, 5)
    rhs = -2 * Sv**2 + 3 * Sv - 3
    point_ok = lhs == rhs == Fraction(-48, 25)
    ok = ode_ok and residual_ok and point_ok
    announce(capsys, 2, ok, f"dz/dy = {kernel.to_text(lorenz_full.ode)}, residual zero {residual_ok}, "
                            f"D[S](2,1,1) = {lhs}, RHS = {rhs}")
    assert ok


def test_criterion_3_lorenz_invariant(lorenz, lorenz_full, capsys):
    assert lorenz_full is not None and lorenz_full.I is not None
    I = lorenz_full.I
    equiv = functionally_equivalent(I, I_LORENZ, V)
    rec = verify_invariant(lorenz, I, [s - sp.Rational(1, 2), r, b - 1])
    ok = (equiv and lorenz_full.level == Level.FULL_INVARIANT and rec.symbolic_zero == "proved"
          and (rec.point_checks_passed, rec.point_checks_total) == (20, 20) and rec.trajectory_drift < 1e-6)
    announce(capsys, 3, ok, f"I = {kernel.to_text(I)}, equivalent {equiv}, {rec.symbolic_zero}, "
                            f"points {rec.point_checks_passed}/{rec.point_checks_total}, "
                            f"drift {rec.trajectory_drift:.1e}")
    assert ok


def test_criterion_4_degree_escalation(lorenz_run, capsys):
    rep, _ = lorenz_run
    log = [(a["degrees"], a["outcome"]) for a in rep.attempts]
    ok = (len(log) == 3 and log[0] == ([2, 2, 1], "no branch") and log[1] == ([3, 3, 2], "no branch")
          and log[2][0] == [4, 4, 3] and log[2][1].endswith("branch(es)"))
    announce(capsys, 4, ok, "; ".join(f"{'/'.join(map(str, d))}: {o}" for d, o in log))
    assert ok


def test_criterion_5_constructed_suite(corpus_runs, capsys):
    lines, bad = [], []
    for name, (doc, rep, secs) in corpus_runs.items():
        seed = kernel.parse(doc["seed_invariant"])
        hit = any(functionally_equivalent(br.I, seed, V) for br in rep.full)
        good = hit and secs <= 60
        lines.append(f"{name} {'ok' if good else 'MISS'} ({secs:.1f}s)")
        if not good:
            got = [kernel.to_text(br.I) for br in rep.full]
            bad.append(f"{name}: seed {doc['seed_invariant']}, got {got}")
    ok = len(corpus_runs) >= 5 and not bad and {"trivial", "toy_scaling"} <= set(corpus_runs)
    announce(capsys, 5, ok, ", ".join(lines))
    assert ok, "; ".join(bad)


def _flipped_branches(system):
    ans, fams = linear_stage(system, 4, 3, p_sign=-1)
    found, outcome = [], []
    for fam in fams:
        try:
            found += solve_nonlinear_stage(fam, system, ans, time_budget=60)
            outcome.append("branch")
        except NoBranchError:
            outcome.append("no branch")
        except SolverBudgetExceeded:
            outcome.append("budget")
    return found, outcome


def test_criterion_6_sign_regression(lorenz, capsys):
    # printed P sign, symbolic parameters, the degrees where the corrected sign succeeds
    found, outcome = _flipped_branches(lorenz)
    reproduced = any(br.constraint_strings == BRANCH for br in found)
    # and with the parameters pinned to the integrable point
    pinned, pinned_outcome = _flipped_branches(lorenz.substitute({s: sp.Rational(1, 2), r: 0, b: 1}))
    pinned_hit = any(kernel.is_zero(br.S - S_LORENZ) for br in pinned)
    ok = not reproduced and not pinned_hit and outcome == ["no branch"] * len(outcome) and pinned_outcome == [
        "no branch"] * len(pinned_outcome)
    announce(capsys, 6, ok, f"flipped P sign at (4,4,3): generic {outcome}, at b=1 r=0 s=1/2 {pinned_outcome}")
    assert ok


def test_criterion_7_soundness_gate(lorenz_run, corpus_runs, capsys):
    reports = [("lorenz", lorenz_run[0])] + [(k, v[1]) for k, v in corpus_runs.items()]
    unsound = [name for name, rep in reports for br in rep.full
               if br.verification is None or not br.verification.sound]
    n_full = sum(len(rep.full) for _, rep in reports)
    ok = not unsound and n_full > 0
    announce(capsys, 7, ok, f"{n_full} FULL_INVARIANT branches, unsound: {unsound}")
    assert ok


def test_criterion_8_numeric_calibration(lorenz, lorenz_full, capsys):
    chaotic = lorenz.substitute({s: 10, r: 28, b: sp.Rational(8, 3)})
    branch = lorenz.substitute({s: sp.Rational(1, 2), r: 0, b: 1})
    d_chaos = verify_trajectory(chaotic, I_LORENZ)
    d_branch = verify_trajectory(branch, lorenz_full.I if lorenz_full else I_LORENZ)
    # at the default step the drift is at round-off, so halving is measured where truncation dominates
    d_coarse = verify_trajectory(branch, I_LORENZ, step=0.02, n_starts=3)
    d_fine = verify_trajectory(branch, I_LORENZ, step=0.01, n_starts=3)
    ok = d_chaos > 1e-3 and d_branch < 1e-6 and d_coarse / d_fine >= 4
    announce(capsys, 8, ok, f"chaotic drift {d_chaos:.1e}, branch drift {d_branch:.1e}, "
                            f"halving 0.02->0.01 ratio {d_coarse / d_fine:.1f}")
    assert ok
