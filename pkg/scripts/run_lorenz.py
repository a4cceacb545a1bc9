#!/usr/bin/env python3
"""Run the pipeline on the Lorenz corpus entry and print the text report."""

import argparse
import logging
from pathlib import Path

from sfunc3d import PipelineConfig, emit_report, parse_system, run

CORPUS = Path(__file__).resolve().parents[1] / "corpus"


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--degree-cap", type=int, default=5)
    ap.add_argument("--json", action="store_true")
    ap.add_argument("-v", "--verbose", action="store_true")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR)
    rep = run(parse_system(CORPUS / "lorenz.json"), PipelineConfig(degree_cap=args.degree_cap))
    print(emit_report(rep, "json" if args.json else "text"))
    print(f"total {rep.timing['total_seconds']:.1f}s")


if __name__ == "__main__":
    main()
