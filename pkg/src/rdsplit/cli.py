"""Command-line entry point: ``rdsplit <command> [options]``.

Exit status is 0 on success, 2 for configuration errors and 3 for
numerical failures; on error the last stderr line reads
``error: <kind>: <message>``.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import harness
from .compositions import (
    SchemeError,
    SchemeFormatError,
    StepError,
    build_order,
    format_scheme,
    integrate,
    load_scheme,
    save_scheme,
    step_count,
    validate,
)
from .erroranalysis import strang_error_terms
from .problems import preset, preset_names
from .spectral import make_grid
from .special import LambertWError
from .subflows import FlowError, linear_potential

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


class ConfigError(ValueError):
    pass


def _float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _add_problem_args(p, study=True):
    p.add_argument("--preset", help=f"one of: {', '.join(preset_names())}")
    if study:
        p.add_argument("--orders", type=_int_list, help="comma-separated nominal orders, e.g. 2,4,6,8")
        p.add_argument("--scheme-file", action="append", help="coefficient file (repeatable)")
    else:
        p.add_argument("--order", type=int, help="nominal order of the constructed scheme (default 4)")
        p.add_argument("--scheme-file", action="append", help="coefficient file (first one is used)")
    p.add_argument("--t-final", type=float)
    p.add_argument("--out", help="output CSV path")
    if study:
        p.add_argument("--dt-grid", type=_float_list, help="comma-separated step sizes, coarse to fine")
        p.add_argument("--norm", choices=("caption", "dx"), help="Gray-Scott error norm variant")
        p.add_argument("--reference", choices=("expm", "composition"),
                       help="reference method (default: the preset's)")
        p.add_argument("--reference-dt", type=float)
        p.add_argument("--cache-dir")
        p.add_argument("--no-cache", action="store_true", default=None)
    p.add_argument("--config", help="JSON file of option defaults (flags win)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rdsplit", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("converge", help="error against a reference over a dt grid")
    _add_problem_args(p)
    p.add_argument("--jobs", type=int, help="parallel cells (timings become meaningless)")

    p = sub.add_parser("efficiency", help="error and median wall time, run serially")
    _add_problem_args(p)
    p.add_argument("--repeats", type=int, help="timing repeats per cell (median)")

    p = sub.add_parser("simulate", help="space-time snapshots of a preset")
    _add_problem_args(p, study=False)
    p.add_argument("--dt", type=float)
    p.add_argument("--stride", type=int, help="record every N steps")

    p = sub.add_parser("table1", help="sup norms of the Strang error-expansion terms")
    p.add_argument("--D", type=float, action="append", help="diffusion constant (repeatable)")
    p.add_argument("--n", type=int)
    p.add_argument("--out")
    p.add_argument("--config")

    p = sub.add_parser("scheme", help="print, validate or save a scheme")
    p.add_argument("--order", type=int)
    p.add_argument("--file", help="load a coefficient file instead of constructing one")
    p.add_argument("--print", action="store_true", default=None)
    p.add_argument("--save")
    p.add_argument("--config")
    return parser


DEFAULTS = {
    "orders": [2, 4, 6, 8],
    "norm": "caption",
    "jobs": 1,
    "repeats": 3,
    "stride": 1,
    "D": [10.0, 0.01],
    "n": 1024,
    "no_cache": False,
}


def resolve(args) -> argparse.Namespace:
    """Fill unset options: flags > config file > built-in defaults."""
    config = {}
    if getattr(args, "config", None):
        try:
            config = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(config, dict):
            raise ConfigError(f"config {args.config} must hold a JSON object")
        unknown = set(config) - set(vars(args))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    for key, value in vars(args).items():
        if value is None:
            key_value = config.get(key, DEFAULTS.get(key))
            setattr(args, key, key_value)
    return args


def _problem(args):
    if not args.preset:
        raise ConfigError("--preset is required")
    try:
        return preset(args.preset)
    except KeyError as exc:
        raise ConfigError(exc.args[0]) from None


def _schemes(args):
    schemes = []
    for path in args.scheme_file or []:
        schemes.append(load_scheme(path))
    if not args.scheme_file or args.orders != DEFAULTS["orders"]:
        schemes += [build_order(p) for p in args.orders]
    return schemes


def _require_out(args):
    if not args.out:
        raise ConfigError("--out is required")
    return args.out


def _study(args, timing: bool):
    problem = _problem(args)
    out = _require_out(args)
    schemes = _schemes(args)
    t_final = args.t_final or problem.t_final
    if t_final is None:
        raise ConfigError(f"preset {problem.name} has no default final time; pass --t-final")
    dt_grid = args.dt_grid or problem.dt_grid
    if not dt_grid:
        raise ConfigError(f"preset {problem.name} has no default dt grid; pass --dt-grid")
    try:
        for dt in dt_grid:
            step_count(dt, t_final)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    ref_kwargs = dict(method=args.reference, dt=args.reference_dt,
                      cache_dir=args.cache_dir, use_cache=not args.no_cache)
    reference = harness.reference_solution(problem, t_final, **ref_kwargs)
    uncertainty = harness.reference_uncertainty(problem, t_final, norm=args.norm, **ref_kwargs)
    table = harness.convergence_study(
        problem, schemes, dt_grid, t_final, reference,
        repeats=args.repeats if timing else 1,
        jobs=1 if timing else args.jobs, norm=args.norm, uncertainty=uncertainty)
    harness.write_study_csv(table, out)
    for name in table.schemes():
        try:
            fit = harness.estimate_order(table, name)
            print(f"{name}: fitted slope {fit.slope:.2f} over {fit.n_points} records")
        except ValueError as exc:
            print(f"{name}: no fit ({exc})")
    failed = [r for r in table.records if r.failed]
    if failed:
        print(f"{len(failed)} cell(s) failed; see the flags column", file=sys.stderr)
    return EXIT_OK


def cmd_simulate(args):
    problem = _problem(args)
    out = _require_out(args)
    if args.t_final is None:
        raise ConfigError("simulate needs an explicit --t-final (e.g. 2000 steps' worth)")
    dt = args.dt or problem.dt
    if dt is None:
        raise ConfigError(f"preset {problem.name} has no default step; pass --dt")
    if args.scheme_file:
        scheme = load_scheme(args.scheme_file[0])
    else:
        scheme = build_order(args.order or 4)
    try:
        step_count(dt, args.t_final)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    traj = integrate(scheme, None, problem, dt, args.t_final, stride=args.stride)
    names = ("u",) if problem.species == 1 else ("u", "v")
    stem = Path(out)
    stem = stem.with_suffix("") if stem.suffix == ".csv" else stem
    for i, name in enumerate(names):
        path = f"{stem}_{name}.csv"
        data = traj.states if problem.species == 1 else traj.states[:, i]
        harness.write_snapshot_csv(path, traj.times, problem.grid.x, data)
        print(path)
    return EXIT_OK


def cmd_table1(args):
    if args.n < 2 or args.n & (args.n - 1):
        raise ConfigError("--n must be a power of two")
    grid = make_grid(args.n, -np.pi, np.pi)
    u = 0.5 - 0.2 * np.exp(np.sin(8.0 * grid.x))
    f = linear_potential(grid.x)
    reports = {D: strang_error_terms(u, D, f, grid) for D in args.D}
    if args.out:
        harness.write_terms_csv(args.out, reports)
    header = "term".ljust(22) + "".join(f"D={D:<12g}" for D in args.D)
    print(header)
    for i, r in enumerate(reports[args.D[0]]):
        print(r.term_label.ljust(22) + "".join(f"{reports[D][i].magnitude:<14.3g}" for D in args.D))
    return EXIT_OK


def cmd_scheme(args):
    if args.file:
        scheme = load_scheme(args.file, strict=False)
    elif args.order:
        scheme = build_order(args.order)
    else:
        raise ConfigError("pass --order or --file")
    problems = validate(scheme)
    if args.print or not args.save:
        sys.stdout.write(format_scheme(scheme))
        print(f"# sum a = {sum(scheme.a):.17g}; sum b = {sum(scheme.b):.17g}")
    if args.save:
        save_scheme(scheme, args.save)
    if problems:
        raise SchemeError("; ".join(problems))
    return EXIT_OK


COMMANDS = {
    "converge": lambda a: _study(a, timing=False),
    "efficiency": lambda a: _study(a, timing=True),
    "simulate": cmd_simulate,
    "table1": cmd_table1,
    "scheme": cmd_scheme,
}


def _fail(kind, exc, code):
    msg = " ".join(str(exc).split())
    print(f"error: {kind}: {msg}", file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        resolve(args)
        return COMMANDS[args.command](args)
    except (StepError, FlowError, LambertWError, FloatingPointError) as exc:
        return _fail("numerical", exc, EXIT_NUMERIC)
    except (ConfigError, SchemeError, SchemeFormatError, OSError, ValueError, KeyError) as exc:
        return _fail("config", exc, EXIT_CONFIG)


if __name__ == "__main__":
    sys.exit(main())
