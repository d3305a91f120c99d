"""Command-line interface for the benchmark suite.

Subcommands:
  run            integrate one problem, write solution and report CSVs
  converge       dyadic refinement sweep, write an error/rate table CSV
  weights-study  nonlinear-to-linear weight distance table CSV
  stats          limiter statistics per grid level plus the limited-interface
                 event log of the finest run

Exit codes: 0 success, 2 configuration error, 3 solver failure or blow-up.
Flags override values from --config; both feed the same validation path, so
a run is reproducible from either form.
"""

from __future__ import annotations

import argparse
import os
import sys

from .driver import (
    ConfigError,
    ResolvedRun,
    RunReport,
    Scheme,
    available_problems,
    convergence_table,
    limiter_statistics,
    load_config,
    resolve_run,
    run_levels,
    run_problem,
    weight_convergence_study,
    write_error_table_csv,
    write_events_csv,
    write_solution_csv,
    write_statistics_csv,
    write_weight_study_csv,
)
from .models import AdmissibilityError
from .timeint import LinearSolver, SolverFailure


def parse_levels(text: str) -> list:
    """'40:1280' -> dyadic range, '40,80' -> explicit list, '800' -> [800]."""
    try:
        if ":" in text:
            lo_s, hi_s = text.split(":")
            lo, hi = int(lo_s), int(hi_s)
            if lo <= 0 or hi < lo:
                raise ValueError
            levels = [lo]
            while levels[-1] < hi:
                levels.append(2 * levels[-1])
            if levels[-1] != hi:
                raise ValueError
            return levels
        levels = [int(tok) for tok in text.split(",")]
        if not levels or any(n <= 0 for n in levels):
            raise ValueError
        return levels
    except ValueError:
        raise ConfigError(
            f"bad levels {text!r}: use START:END with END a dyadic multiple"
            " of START, or a comma-separated list"
        ) from None


def _add_common(p: argparse.ArgumentParser, cells: bool) -> None:
    p.add_argument("--config", help="TOML config file; flags override its values")
    p.add_argument("--problem", choices=available_problems())
    p.add_argument("--scheme", choices=[s.value for s in Scheme])
    p.add_argument("--kappa", type=int, help="pressure exponent (euler-convergence)")
    p.add_argument("--eps", type=float, help="rescaling parameter (low-Mach problems)")
    if cells:
        p.add_argument("--cells", type=int, help="grid cells")
    p.add_argument("--final-time", type=float, dest="final_time")
    p.add_argument("--grid-ratio", type=float, dest="grid_ratio", help="dt / h")
    p.add_argument("--gamma2", type=float, help="relative marking threshold")
    p.add_argument(
        "--linear-solver",
        choices=[s.value for s in LinearSolver],
        dest="linear_solver",
    )
    p.add_argument("--output-dir", dest="output_dir", help="CSV output directory")
    p.add_argument("--prefix", help="output file prefix (default: problem name)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="quinpi",
        description="Implicit third-order finite-volume benchmarks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="integrate one problem on one grid")
    _add_common(p_run, cells=True)

    p_conv = sub.add_parser("converge", help="dyadic error/rate table")
    _add_common(p_conv, cells=False)
    p_conv.add_argument("--levels", default="40:320", help="e.g. 40:1280")
    p_conv.add_argument(
        "--window", type=int, default=None, metavar="CELLS",
        help="restrict norms to +/- CELLS around the contact wave",
    )

    p_ws = sub.add_parser("weights-study", help="weight convergence table")
    p_ws.add_argument("--levels", default="20:5120", help="e.g. 20:5120")
    p_ws.add_argument("--output-dir", dest="output_dir")
    p_ws.add_argument("--prefix", default="weights")

    p_stats = sub.add_parser("stats", help="limiter statistics and event log")
    _add_common(p_stats, cells=False)
    p_stats.add_argument("--levels", default=None, help="grid levels (default: catalog)")
    return parser


def _merge_config(args: argparse.Namespace) -> dict:
    cfg = load_config(args.config) if args.config else {}
    prob = dict(cfg.get("problem", {}))
    for key in ("problem", "kappa", "eps", "cells", "final_time", "grid_ratio", "gamma2"):
        val = getattr(args, key, None)
        if val is not None:
            prob["name" if key == "problem" else key] = val
    if not prob.get("name"):
        raise ConfigError("no problem selected: pass --problem or problem.name in the config")
    cfg["problem"] = prob
    if getattr(args, "scheme", None) is not None:
        cfg["scheme"] = {**cfg.get("scheme", {}), "name": args.scheme}
    if getattr(args, "linear_solver", None) is not None:
        cfg["newton"] = {**cfg.get("newton", {}), "linear_solver": args.linear_solver}
    out = dict(cfg.get("output", {}))
    if getattr(args, "output_dir", None) is not None:
        out["directory"] = args.output_dir
    if getattr(args, "prefix", None) is not None:
        out["prefix"] = args.prefix
    if out:
        cfg["output"] = out
    return cfg


def _out_path(resolved: ResolvedRun, suffix: str) -> str:
    os.makedirs(resolved.directory, exist_ok=True)
    return os.path.join(resolved.directory, f"{resolved.prefix}-{suffix}.csv")


def _write_report_csv(path: str, rep: RunReport) -> None:
    cols = [
        ("problem", rep.problem), ("scheme", rep.scheme.value),
        ("cells", rep.cells), ("steps", rep.steps),
        ("time_reached", f"{rep.time:.17g}"),
        ("aborted", int(rep.aborted)), ("abort_reason", rep.abort_reason or ""),
        ("abort_time", "" if rep.abort_time is None else f"{rep.abort_time:.17g}"),
        ("newton_predictor", rep.newton_predictor),
        ("newton_corrector", rep.newton_corrector),
        ("max_limited_fluxes", rep.max_limited_fluxes),
        ("pct_limited_steps", f"{rep.pct_limited_steps:.17g}"),
    ]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(k for k, _ in cols) + "\n")
        fh.write(",".join(str(v) for _, v in cols) + "\n")


def _cmd_run(args: argparse.Namespace) -> int:
    resolved = resolve_run(_merge_config(args))
    rep = run_problem(
        resolved.spec, resolved.spec.cells, resolved.scheme, resolved.newton,
        keep_reports=False,
    )
    write_solution_csv(_out_path(resolved, "solution"), rep)
    _write_report_csv(_out_path(resolved, "report"), rep)
    if rep.aborted:
        print(
            f"{rep.problem}: aborted at t={rep.abort_time:.6g}"
            f" ({rep.abort_reason})",
            file=sys.stderr,
        )
        return 3
    print(
        f"{rep.problem} {rep.scheme.value} N={rep.cells}: t={rep.time:.6g}"
        f" in {rep.steps} steps, {rep.max_limited_fluxes} max limited fluxes,"
        f" {rep.pct_limited_steps:.1f}% limited steps"
    )
    return 0


def _cmd_converge(args: argparse.Namespace) -> int:
    resolved = resolve_run(_merge_config(args))
    levels = parse_levels(args.levels)
    rows = convergence_table(
        resolved.spec, levels, resolved.scheme, resolved.newton,
        window_cells=args.window,
    )
    path = _out_path(resolved, "errors")
    write_error_table_csv(path, rows)
    print(f"wrote {path}")
    return 0


def _cmd_weights(args: argparse.Namespace) -> int:
    levels = parse_levels(args.levels)
    rows = weight_convergence_study(levels)
    directory = args.output_dir or "."
    os.makedirs(directory, exist_ok=True)
    path = os.path.join(directory, f"{args.prefix}-table.csv")
    write_weight_study_csv(path, rows)
    print(f"wrote {path}")
    return 0


def _cmd_stats(args: argparse.Namespace) -> int:
    resolved = resolve_run(_merge_config(args))
    levels = parse_levels(args.levels) if args.levels else [resolved.spec.cells]
    reports = run_levels(
        resolved.spec, levels, resolved.scheme, resolved.newton, keep_reports=True,
    )
    rows = []
    for rep in reports:
        if rep.aborted:
            print(
                f"{rep.problem} N={rep.cells}: aborted at t={rep.abort_time:.6g}"
                f" ({rep.abort_reason})",
                file=sys.stderr,
            )
            return 3
        mx, pct = limiter_statistics(rep.entropy_reports)
        rows.append((rep.cells, mx, pct))
    stats_path = _out_path(resolved, "statistics")
    write_statistics_csv(stats_path, rows)
    events_path = _out_path(resolved, "events")
    write_events_csv(events_path, reports[-1])
    print(f"wrote {stats_path} and {events_path}")
    return 0


def cli_main(argv: list | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handler = {
        "run": _cmd_run,
        "converge": _cmd_converge,
        "weights-study": _cmd_weights,
        "stats": _cmd_stats,
    }[args.command]
    try:
        return handler(args)
    except (SolverFailure, AdmissibilityError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        # ConfigError and any malformed-argument ValueError from the library
        print(f"config error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
