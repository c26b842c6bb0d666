"""Command-line front end.

Exit codes: 0 success / all comparisons passed, 1 a comparison failed,
2 configuration or usage error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from pathlib import Path

from . import __version__
from .compare import GridMismatchError, compare
from .config import ConfigError, ExperimentConfig, grid_from_flag, load_config
from .curve import read_csv, write_csv
from .experiments import analytic_curve, engine_curve, run, simulate_curve, steady_report, sweep
from .params import ParameterDomainError

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2

log = logging.getLogger("fblnoise")


def _common(p, *, grid=True, seed=True):
    p.add_argument("--config", type=Path, help="experiment configuration file (INI)")
    p.add_argument("--out", type=Path, help="output directory (overrides [experiment] output_dir)")
    if seed:
        p.add_argument("--seed", type=int, help="first RNG seed (overrides [simulation] seed)")
    if grid:
        p.add_argument("--grid", help="linear frequency grid n,lo,hi in units of kappa")


def build_parser():
    parser = argparse.ArgumentParser(prog="fblnoise", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("steady", help="print the semiclassical operating point")
    _common(p, grid=False, seed=False)

    for name, what in (("analytic", "closed-form"), ("engine", "linear-response engine")):
        p = sub.add_parser(name, help=f"write the {what} spectrum as CSV")
        _common(p, seed=False)

    p = sub.add_parser("simulate", help="Monte Carlo spectrum merged over seeds")
    _common(p, grid=False)
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("compare", help="run all configured routes and cross-check them, "
                                       "or compare two CSV curves")
    _common(p)
    p.add_argument("curves", nargs="*", type=Path, help="two CSV files: candidate and reference")
    p.add_argument("--tol-abs", type=float)
    p.add_argument("--tol-rel", type=float)
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("sweep", help="repeat the configured comparison over values of one parameter")
    _common(p)
    p.add_argument("--param", required=True, help="parameter name, e.g. lambda or p")
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--jobs", type=int, default=1)
    return parser


def _load(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    over = {}
    if getattr(args, "out", None) is not None:
        over["output_dir"] = str(args.out)
    if getattr(args, "seed", None) is not None:
        over["seed"] = args.seed
    if getattr(args, "grid", None):
        over.update(grid_from_flag(args.grid))
    return cfg.with_overrides(**over)


def _print_reports(reports):
    for r in reports:
        print(r.summary())


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    logging.captureWarnings(True)
    warnings.simplefilter("default")
    try:
        return _dispatch(args)
    except (ConfigError, ParameterDomainError, GridMismatchError, ValueError) as exc:
        print(f"fblnoise: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def _dispatch(args):
    cmd = args.command
    if cmd == "compare" and args.curves:
        if len(args.curves) != 2:
            raise ConfigError("compare takes exactly two CSV files")
        report = compare(read_csv(args.curves[0]), read_csv(args.curves[1]), args.tol_abs, args.tol_rel,
                         name=f"{args.curves[0].name}-vs-{args.curves[1].name}")
        print(report.summary())
        return EXIT_OK if report.passed else EXIT_FAIL

    cfg = _load(args)
    out = Path(cfg.output_dir)

    if cmd == "steady":
        print(json.dumps(steady_report(cfg), indent=2, sort_keys=True))
        return EXIT_OK
    if cmd in ("analytic", "engine"):
        curve = analytic_curve(cfg) if cmd == "analytic" else engine_curve(cfg)
        print(write_csv(curve, out / f"{cfg.scenario}_{cmd}.csv"))
        return EXIT_OK
    if cmd == "simulate":
        curve, diags = simulate_curve(cfg.with_overrides(routes=("simulate",)), jobs=args.jobs)
        print(write_csv(curve, out / f"{cfg.scenario}_simulate.csv"))
        (out / "simulate_diagnostics.json").write_text(json.dumps(diags, indent=2, sort_keys=True) + "\n")
        return EXIT_OK
    if cmd == "compare":
        result = run(cfg, jobs=args.jobs)
        _print_reports(result.reports)
        return result.exit_code
    if cmd == "sweep":
        try:
            values = [float(v) for v in args.values.split(",") if v.strip()]
        except ValueError as exc:
            raise ConfigError(f"--values: {exc}") from exc
        results = sweep(cfg, args.param, values, jobs=args.jobs)
        for v, res in zip(values, results):
            for r in res.reports:
                print(f"{args.param}={v:g}: {r.summary()}")
        return EXIT_OK if all(r.passed for r in results) else EXIT_FAIL
    raise AssertionError(cmd)


if __name__ == "__main__":
    sys.exit(main())
