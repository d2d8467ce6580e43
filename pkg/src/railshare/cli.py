"""Command line entry point.

Exit status: 0 on success, 2 for bad input (scenario, LP text, size cap),
3 when a schedule or grid dump breaks an allocation constraint.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .band_plan import BandPlanError, BandState
from .config import ConfigError, load_scenario, parse_int_range
from .engine import VARIANTS, ValidationFailure, export_scenario_ilp, run_scenario, scenario_ilp, write_metrics
from .grid import read_grid_dump
from .ilp import (
    DEFAULT_LIMIT,
    IlpError,
    OracleLimitError,
    build_model,
    model_from_lp,
    solve_exhaustive,
    write_solution,
)
from .validate import check_cells

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INVALID = 3


def _ints(text: str) -> tuple[int, ...]:
    return parse_int_range(text) if text else ()


def cmd_run(args) -> int:
    sc = load_scenario(args.scenario)
    if args.seeds:
        sc = sc.with_seeds(parse_int_range(args.seeds))
    if args.periods is not None:
        sc = replace(sc, periods=args.periods)
    rows = run_scenario(sc, workers=args.workers)
    path = write_metrics(rows, sc.resolve_output_dir(args.out), sc.name)
    if not args.quiet:
        print(f"{'collide':>7} {'sched':>5} {'seed':>4} {'perf Mbps':>10} {'crit Mbps':>10} {'reuse':>6} {'drop':>7}")
        for r in rows:
            print(f"{r.colliding_prbs:>7} {r.scheduler:>5} {r.seed:>4} {r.perf_throughput_total / 1e6:>10.3f} "
                  f"{r.critical_throughput_total / 1e6:>10.3f} {r.reuse_rate:>6.3f} {r.critical_drop_rate:>7.4f}")
    print(f"wrote {path}")
    return EXIT_OK


def cmd_export(args) -> int:
    sc = load_scenario(args.scenario)
    paths = export_scenario_ilp(sc, args.variant, sc.resolve_output_dir(args.out))
    for p in paths:
        print(p)
    return EXIT_OK


def _infer_shape(rows) -> tuple[int, int, int]:
    if not rows:
        raise ConfigError("grid dump has no cells; pass --shape")
    return (max(r.k for r in rows) + 1, max(r.t for r in rows) + 1, max(r.m for r in rows) + 1)


def cmd_validate(args) -> int:
    try:
        text = Path(args.dump).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read grid dump: {exc.strerror}", source=args.dump) from None
    try:
        rows = read_grid_dump(text)
    except ValueError as exc:
        raise ConfigError(str(exc), source=args.dump) from None
    if args.shape:
        try:
            shape = tuple(int(v) for v in args.shape.split(","))
        except ValueError:
            shape = ()
        if len(shape) != 3 or min(shape) < 1:
            raise ConfigError("--shape takes K,T,M as three positive integers")
    else:
        shape = _infer_shape(rows)
    band = None
    if args.colliding or args.occupied or args.reserved:
        try:
            band = BandState.from_sets(shape[0], _ints(args.colliding), _ints(args.occupied), _ints(args.reserved))
        except BandPlanError as exc:
            raise ConfigError(str(exc)) from None
    violations = check_cells(rows, shape, band)
    if violations:
        for v in violations:
            print(v, file=sys.stderr)
        print(f"{args.dump}: {len(violations)} violation(s)", file=sys.stderr)
        return EXIT_INVALID
    print(f"{args.dump}: {shape[0]}x{shape[1]}x{shape[2]} grid ok")
    return EXIT_OK


def _load_model(args):
    path = Path(args.source)
    if path.suffix.lower() == ".lp":
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read LP file: {exc.strerror}", source=str(path)) from None
        return model_from_lp(text, name=path.stem)
    sc = load_scenario(path)
    n = args.colliding if args.colliding is not None else sc.sweep_points[0]
    return build_model(scenario_ilp(sc, n), preemption=VARIANTS[args.variant])


def cmd_oracle(args) -> int:
    model = _load_model(args)
    sol = solve_exhaustive(model, limit=args.limit)
    if not sol.feasible:
        print(f"{model.name}: infeasible ({model.num_binaries} binaries)")
        return EXIT_OK
    print(f"{model.name}: optimum {float(sol.objective):.12g} ({sol.objective}) "
          f"over {model.num_binaries} binaries, {sol.fixed} fixed by presolve")
    if args.solution:
        with open(args.solution, "w") as fh:
            write_solution(sol.assignment, fh, order=model.variables)
    else:
        for name in model.variables:
            if sol.assignment[name]:
                print(f"  {name} = 1")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="railshare", description="FRMCS / GSM-R shared-band scheduling")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="sweep a scenario and write the metrics CSV")
    p.add_argument("scenario")
    p.add_argument("--out", help="output directory (default: scenario, then $RAILSHARE_OUTPUT_DIR)")
    p.add_argument("--seeds", help="override seeds, e.g. 1..5 or 1,4")
    p.add_argument("--periods", type=int, help="override the number of frames per point")
    p.add_argument("--workers", type=int, default=1, help="processes for sweep points (default 1)")
    p.add_argument("-q", "--quiet", action="store_true")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("export-ilp", help="write one LP file per sweep point")
    p.add_argument("scenario")
    p.add_argument("--variant", choices=sorted(VARIANTS), required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("validate", help="check a grid dump against the allocation constraints")
    p.add_argument("dump")
    p.add_argument("--shape", help="K,T,M (default: inferred from the cells)")
    p.add_argument("--colliding", default="", help="colliding PRBs, e.g. 3..8")
    p.add_argument("--occupied", default="", help="PRBs carrying an active GSM-R carrier")
    p.add_argument("--reserved", default="", help="reserved PRBs")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("oracle", help="solve an LP file or scenario exactly by enumeration")
    p.add_argument("source", help=".lp file or scenario file")
    p.add_argument("--limit", type=int, default=DEFAULT_LIMIT, help="refuse models with more binaries")
    p.add_argument("--variant", choices=sorted(VARIANTS), default="preempt", help="for scenario input")
    p.add_argument("--colliding", type=int, help="sweep point for scenario input (default: first)")
    p.add_argument("--solution", help="write the assignment as JSON lines")
    p.set_defaults(func=cmd_oracle)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, OracleLimitError) as exc:
        print(f"railshare: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValidationFailure as exc:
        print(f"railshare: constraint violated: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except IlpError as exc:
        print(f"railshare: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
