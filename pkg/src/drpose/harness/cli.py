"""Command line entry point.

    drpose run SCENARIO [--out DIR]
    drpose batch SCENARIO --seeds N [--out DIR] [--workers W]
    drpose validate SCENARIO
    drpose gen-model SPEC --out FILE

Exit codes: 0 success, 2 infeasible initial guess, 3 degenerate solve,
4 configuration error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

from ..errors import ConfigError, DegenerateModel
from .config import load_scenario
from .models import generate_model, save_model
from .runner import EXIT_CONFIG, EXIT_DEGENERATE, EXIT_INFEASIBLE, EXIT_OK, run, run_batch


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="drpose", description=__doc__.split("\n\n")[0])
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="solve one scenario")
    p.add_argument("scenario")
    p.add_argument("--out", default=None, help="directory for iterations.csv")

    p = sub.add_parser("batch", help="solve a scenario over derived seeds")
    p.add_argument("scenario")
    p.add_argument("--seeds", type=int, required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("validate", help="parse and validate a scenario file")
    p.add_argument("scenario")

    p = sub.add_parser("gen-model", help="write a generated target model file")
    p.add_argument("spec", help="cube8 | asymmetric12 | random{n,seed}")
    p.add_argument("--out", required=True)
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "gen-model":
            save_model(generate_model(args.spec), args.out)
            return EXIT_OK
        scenario = load_scenario(args.scenario)
    except (ConfigError, DegenerateModel) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if args.command == "validate":
        print(f"ok: {scenario.name} ({len(scenario.model)} keypoints, model {scenario.model_label})")
        return EXIT_OK

    if args.command == "run":
        summary = run(scenario, args.out)
        print(summary.line())
        print(summary.human())
        return summary.exit_code

    if args.seeds < 1:
        print("error: --seeds must be positive", file=sys.stderr)
        return EXIT_CONFIG
    summaries, agg = run_batch(scenario, args.seeds, args.out, args.workers)
    print(json.dumps(agg))
    for i, s in enumerate(summaries):
        print(f"trial {i:03d}: {s.reason:<14} iters={s.iterations:<3} "
              f"rot={s.error.rotation_error:.4g} deg  trans={s.error.translation_error:.4g}")
    codes = {s.exit_code for s in summaries}
    for code in (EXIT_DEGENERATE, EXIT_INFEASIBLE):
        if code in codes:
            return code
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
