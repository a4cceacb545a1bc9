"""Command line: ``sfunc3d solve | verify | corpus``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import sympy as sp

from . import kernel
from .pipeline import PipelineConfig, emit_report, run
from .system import parse_system
from .verify import functionally_equivalent, verify_invariant

DEFAULT_CORPUS = Path(__file__).resolve().parents[2] / "corpus"


def _add_config_flags(p: argparse.ArgumentParser):
    defaults = PipelineConfig()
    for f in dataclasses.fields(PipelineConfig):
        flag = "--" + f.name.replace("_", "-")
        default = getattr(defaults, f.name)
        if f.name in ("permutation_retry", "trajectory"):
            p.add_argument(flag, action=argparse.BooleanOptionalAction, default=default)
        elif f.name == "external_solver":
            p.add_argument(flag, action=argparse.BooleanOptionalAction, default=None,
                           help="default: read SFUNC3D_EXTERNAL_SOLVER")
        elif f.name == "degree_start":
            p.add_argument(flag, type=int, default=None)
        else:
            p.add_argument(flag, type=type(default), default=default)


def _config(args) -> PipelineConfig:
    return PipelineConfig(**{f.name: getattr(args, f.name) for f in dataclasses.fields(PipelineConfig)})


def _bindings(text: str | None) -> dict[sp.Symbol, sp.Expr]:
    out = {}
    if not text:
        return out
    for part in text.split(","):
        name, _, val = part.partition("=")
        if not val:
            raise SystemExit(f"bad binding {part!r}; expected name=value")
        out[sp.Symbol(name.strip())] = kernel.parse(val)
    return out


def cmd_solve(args) -> int:
    system = parse_system(Path(args.system))
    report = run(system, _config(args))
    print(emit_report(report, args.format), end="" if args.format == "text" else "\n")
    if args.output:
        Path(args.output).write_text(emit_report(report, "json"))
    return 0 if report.full else 1


def cmd_verify(args) -> int:
    system = parse_system(Path(args.system))
    binds = _bindings(args.params)
    names = {s.name: s for s in system.vars + system.params}
    I = kernel.parse(args.invariant, names)
    constraints = [k - v for k, v in binds.items()]
    rec = verify_invariant(system, I, constraints, n_points=args.point_check_count, seed=args.seed,
                           t_end=args.t_end, step=args.step)
    print(json.dumps(dataclasses.asdict(rec), indent=2))
    ok = rec.sound and (rec.trajectory_drift is None or rec.trajectory_drift < args.drift_tolerance)
    return 0 if ok else 1


def cmd_corpus(args) -> int:
    cfg = _config(args)
    root = Path(args.dir)
    status = 0
    for path in sorted(root.glob("*.json")):
        system = parse_system(path)
        report = run(system, cfg)
        doc = json.loads(path.read_text())
        line = f"{path.stem:24s} {report.level.value:15s} {report.timing['total_seconds']:7.1f}s"
        if report.full:
            line += f"  I = {kernel.to_text(report.full[0].I)}"
        seed = doc.get("seed_invariant")
        matched = True
        if seed:
            I_seed = kernel.parse(seed, {v.name: v for v in system.vars})
            matched = any(functionally_equivalent(b.I, I_seed, system.vars) for b in report.full)
            line += "  [seed recovered]" if matched else f"  [seed {seed} not recovered]"
        print(line, flush=True)
        if doc.get("expect_full", True) and not (report.full and matched):
            status = 1
    return status


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="sfunc3d", description="First integrals of 3D polynomial systems")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("solve", help="run the pipeline on a system file")
    p.add_argument("system")
    p.add_argument("--format", choices=["json", "text"], default="text")
    p.add_argument("-o", "--output", help="also write the JSON report here")
    _add_config_flags(p)
    p.set_defaults(fn=cmd_solve)

    p = sub.add_parser("verify", help="check a candidate invariant")
    p.add_argument("system")
    p.add_argument("--invariant", required=True)
    p.add_argument("--params", help="bindings such as s=1/2,r=0,b=1")
    p.add_argument("--point-check-count", type=int, default=20)
    p.add_argument("--drift-tolerance", type=float, default=1e-6)
    p.add_argument("--t-end", type=float, default=10.0)
    p.add_argument("--step", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("corpus", help="run every system in the corpus directory")
    p.add_argument("--dir", default=str(DEFAULT_CORPUS))
    _add_config_flags(p)
    p.set_defaults(fn=cmd_corpus)

    args = ap.parse_args(argv)
    level = [logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose, 2)]
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
