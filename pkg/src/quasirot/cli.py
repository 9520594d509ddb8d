"""Command-line entry point.

Exit codes: 0 success, 1 usage or configuration error, 2 incomplete lift,
3 lift ambiguity (delta too large), 4 winding refusal, 5 I/O or parse error,
6 rates did not converge (three-body run flagged unreliable).
"""

import argparse
import json
import logging
import sys

from .errors import QuasirotError
from .experiments import EXPERIMENTS, load_config, run_experiment
from .io import _jsonable

log = logging.getLogger("quasirot")

EXIT_UNRELIABLE = 6


def build_parser():
    ap = argparse.ArgumentParser(
        prog="quasirot",
        description="Rotation rates of quasiperiodic trajectories from projected observations.",
    )
    ap.add_argument("--experiment", choices=EXPERIMENTS, default=None,
                    help="bundled experiment to run (default: custom when --input is given)")
    ap.add_argument("--input", help="observation CSV (one angle column, or x,y columns)")
    ap.add_argument("--N", type=int, help="number of observations to generate")
    ap.add_argument("--K", type=int, help="delay count")
    ap.add_argument("--delta", type=float, help="continuation radius (default: pilot estimate)")
    ap.add_argument("--p", type=int, help="weight exponent of the weighted Birkhoff average")
    ap.add_argument("--ref-x", type=float, help="reference point x")
    ap.add_argument("--ref-y", type=float, help="reference point y")
    ap.add_argument("--out-dir", help="directory for CSV and JSON artifacts")
    ap.add_argument("--seed", type=int, help="seed for randomized steps")
    ap.add_argument("--precision", choices=("double", "extended"))
    ap.add_argument("--allow-winding", action="store_true", default=None,
                    help="proceed even when the winding number at the reference point is not +-1")
    ap.add_argument("--config", help="INI file whose [run] or [<experiment>] section overrides the flags")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def _overrides(args):
    ov = {
        "N": args.N,
        "K": args.K,
        "delta": args.delta,
        "p": args.p,
        "out_dir": args.out_dir,
        "seed": args.seed,
        "precision": args.precision,
        "allow_winding": args.allow_winding,
        "input": args.input,
    }
    if (args.ref_x is None) != (args.ref_y is None):
        raise SystemExit("--ref-x and --ref-y must be given together")
    if args.ref_x is not None:
        ov["ref"] = (args.ref_x, args.ref_y)
    return ov


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    experiment = args.experiment or ("custom" if args.input else None)
    if experiment is None:
        print("error: give --experiment or --input", file=sys.stderr)
        return 1
    try:
        cfg = load_config(experiment, _overrides(args), args.config)
        summary = run_experiment(cfg)
    except QuasirotError as exc:
        print(f"error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return exc.exit_code
    print(json.dumps(_jsonable(summary), indent=2))
    if summary.get("status") == "unreliable":
        print("warning: rotation-rate estimates did not converge; orbit may not be quasiperiodic", file=sys.stderr)
        return EXIT_UNRELIABLE
    return 0


if __name__ == "__main__":
    sys.exit(main())
