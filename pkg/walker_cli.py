"""Command-line front end: sweep, solve, baseline and plot.

Exit codes: 0 success, 1 configuration error, 2 numerical failure, 3 I/O error.
"""

import argparse
import json
import logging
import os
import sys
from typing import List, Optional

from pydantic import ValidationError

from config import LOG_LEVEL, RESULTS_DIR
from errors import NoConvergenceError, SweepConfigError, SweepIOError, WalkerError
from plot_data import FIGURES, emit_plots
from sweep_orchestrator import load_results, run_baseline_compass, run_sweep, solve_baseline, solve_point
from sweep_spec import SweepSpec

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2
EXIT_IO = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wobblewalk", description="Wobbling-mass walker laboratory")
    parser.add_argument("--out", help=f"Output directory (default: spec output or {RESULTS_DIR})")
    parser.add_argument("--log-level", default=LOG_LEVEL, help="Logging level")
    sub = parser.add_subparsers(dest="command", required=True)

    sweep = sub.add_parser("sweep", help="Run a (k, alpha, omega) sweep")
    sweep.add_argument("spec", help="Sweep spec JSON file")
    sweep.add_argument("--resume", action="store_true", help="Keep complete columns of an earlier run")
    sweep.add_argument("--workers", type=int, help="Worker processes (overrides the spec)")

    solve = sub.add_parser("solve", help="Solve one grid point")
    solve.add_argument("spec", help="Sweep spec JSON file (fixed parameters and settings)")
    solve.add_argument("--k", type=float, required=True)
    solve.add_argument("--alpha", type=float, required=True)
    solve.add_argument("--omega", type=float, required=True)

    baseline = sub.add_parser("baseline", help="Compass baseline for every omega of a spec")
    baseline.add_argument("spec", help="Sweep spec JSON file")

    plot = sub.add_parser("plot", help="Emit a figure dataset from a result table")
    plot.add_argument("result", help="results.csv written by a sweep")
    plot.add_argument("--figure", required=True, help=f"One of {', '.join(FIGURES)}")
    return parser


def cmd_sweep(args) -> int:
    spec = SweepSpec.load(args.spec)
    result = run_sweep(spec, output_dir=args.out, workers=args.workers, resume=args.resume)
    found = sum(1 for r in result.records if r["status"] != "none")
    print(f"{found} of {len(result.records)} grid points have a limit cycle")
    return EXIT_OK


def cmd_solve(args) -> int:
    spec = SweepSpec.load(args.spec)
    compass, gains, failure = solve_baseline(spec, args.omega)
    if compass is None:
        raise NoConvergenceError(f"No compass baseline at omega={args.omega:g}: {failure}")
    solution = solve_point(spec, args.k, args.alpha, args.omega, compass=compass, gains=gains)
    cycle, metrics = solution.cycle, solution.metrics
    output = {
        "cycle": cycle.to_record(),
        "metrics": metrics.to_record() if metrics else None,
        "metrics_failure": solution.metrics_failure,
        "seed": solution.seed,
        "solutions": solution.solutions,
        "retuned": gains,
    }
    out_dir = args.out or spec.output.directory
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, f"solve_k{args.k:g}_alpha{args.alpha:g}_omega{args.omega:g}.json")
    with open(path, "w") as f:
        json.dump(output, f, indent=2)
    status = "stable" if cycle.stable else "unstable"
    group = metrics.group if metrics else "n/a"
    print(f"{status} cycle, max|lambda| = {cycle.max_abs_eigenvalue:.4f}, group {group}. Saved to {path}")
    return EXIT_OK


def cmd_baseline(args) -> int:
    spec = SweepSpec.load(args.spec)
    result = run_baseline_compass(spec, output_dir=args.out)
    for row in result.baseline:
        print(f"omega={row['omega']:g}: {row['status']} (max|lambda| = {row['max_abs_eigenvalue']})")
    return EXIT_OK if any(r["status"] != "none" for r in result.baseline) else EXIT_NUMERICAL


def cmd_plot(args) -> int:
    result = load_results(args.result)
    out_dir = args.out or os.path.join(os.path.dirname(args.result) or ".", "plots")
    path = emit_plots(result, args.figure, out_dir)
    print(f"Figure data saved to {path}")
    return EXIT_OK


COMMANDS = {"sweep": cmd_sweep, "solve": cmd_solve, "baseline": cmd_baseline, "plot": cmd_plot}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, str(args.log_level).upper(), logging.INFO),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    )
    try:
        return COMMANDS[args.command](args)
    except (SweepConfigError, ValidationError) as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_CONFIG
    except (SweepIOError, OSError) as e:
        logger.error(f"I/O error: {e}")
        return EXIT_IO
    except WalkerError as e:
        logger.error(f"Numerical failure: {e}")
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
