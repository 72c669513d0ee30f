"""Command-line interface: run, sweep, and check scenario files.

``run`` solves one scenario with one solver and writes two CSV files
into the output directory:

* ``<name>-<solver>.csv`` — one row per accepted outer iteration with
  columns iter, objective, grad_inf_norm, alpha, active_pairs,
  elapsed_s.
* ``<name>-<solver>-result.csv`` — long-format summary with columns
  record, name, value: the termination status, iteration count, task
  objective, final gradient norm, the final configuration (one row per
  coordinate), every active separating plane (one row per component),
  and the full-pairwise closest distances.

``sweep`` runs a directory of scenarios with several solvers and
gradient-norm targets and writes Table-style comparison CSVs
(``sweep-iterations.csv`` and ``sweep-time.csv``; cells that never
reach the target hold the N.A. marker).  ``check`` only loads a file
and audits the initial configuration.

Exit codes: 0 converged, 2 stalled, 3 iteration budget exhausted,
4 infeasible start, 5 malformed input.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from threadpoolctl import threadpool_limits

from .ao import ao_solve
from .common import CONVERGED, MAX_ITERS, STALLED
from .ecb import ecb_solve
from .errors import InfeasibleStartError, ScenarioError
from .icb import icb_solve
from .scenarios import load_scenario

SOLVERS = {"ecb": ecb_solve, "icb": icb_solve, "ao": ao_solve}
EXIT_CODES = {CONVERGED: 0, STALLED: 2, MAX_ITERS: 3}
NA = "N.A."


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems with the input-error code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(5, f"{self.prog}: error: {message}\n")


def _fmt(x):
    return f"{float(x):.17g}"


def _write_trace_csv(path, trace):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["iter", "objective", "grad_inf_norm", "alpha", "active_pairs", "elapsed_s"]
        )
        for rec in trace.records:
            writer.writerow(
                [
                    rec.iter,
                    _fmt(rec.objective),
                    _fmt(rec.grad_inf_norm),
                    _fmt(rec.alpha),
                    rec.active_pairs,
                    _fmt(rec.elapsed_s),
                ]
            )


def _write_result_csv(path, problem, result):
    trace = result.trace
    grad_inf = (
        trace.records[-1].grad_inf_norm if trace.records else trace.initial_grad_inf_norm
    )
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["record", "name", "value"])
        writer.writerow(["termination", "", trace.termination])
        writer.writerow(["iterations", "", len(trace.records)])
        writer.writerow(["task_objective", "", _fmt(problem.objective_value(result.theta))])
        writer.writerow(["grad_inf_norm", "", _fmt(grad_inf)])
        for i, v in enumerate(result.theta):
            writer.writerow(["theta", i, _fmt(v)])
        for key in result.pairs.keys():
            a, b, s = key
            plane = result.pairs.plane(key)
            for comp, v in zip(("nx", "ny", "nz", "d"), plane.as_vector()):
                writer.writerow(["plane", f"{a}|{b}|{s}|{comp}", _fmt(v)])
        for (a, b, s), dist in problem.audit_distances(result.theta):
            writer.writerow(["distance", f"{a}|{b}|{s}", _fmt(dist)])


def _solve(scenario, solver_name, deterministic):
    solver = SOLVERS[solver_name]
    if deterministic:
        with threadpool_limits(limits=1):
            return solver(scenario.problem, scenario.settings)
    return solver(scenario.problem, scenario.settings)


def cmd_run(args):
    scenario = load_scenario(args.scenario)
    if args.eps is not None:
        scenario.settings.eps = args.eps
    if args.max_iters is not None:
        scenario.settings.max_iters = args.max_iters
    result = _solve(scenario, args.solver, args.deterministic)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    trace_path = out / f"{scenario.name}-{args.solver}.csv"
    result_path = out / f"{scenario.name}-{args.solver}-result.csv"
    _write_trace_csv(trace_path, result.trace)
    _write_result_csv(result_path, scenario.problem, result)

    clearance, _ = scenario.problem.min_clearance(result.theta)
    print(
        f"{scenario.name} [{args.solver}] {result.trace.termination}: "
        f"{len(result.trace.records)} iterations, "
        f"objective {scenario.problem.objective_value(result.theta):.6g}, "
        f"min clearance {clearance:.4g}"
    )
    print(f"wrote {trace_path} and {result_path}")
    return EXIT_CODES[result.trace.termination]


def cmd_sweep(args):
    scenario_dir = Path(args.scenario_dir)
    paths = sorted(scenario_dir.glob("*.yaml"))
    if not paths:
        raise ScenarioError(f"{scenario_dir}: no scenario files (*.yaml) found")
    solvers = [s.strip() for s in args.solvers.split(",") if s.strip()]
    for s in solvers:
        if s not in SOLVERS:
            raise ScenarioError(f"unknown solver {s!r} (choose from {sorted(SOLVERS)})")
    try:
        eps_list = [float(e) for e in args.eps.split(",") if e.strip()]
    except ValueError as err:
        raise ScenarioError(f"bad eps list {args.eps!r}: {err}") from err
    if not eps_list:
        raise ScenarioError("empty eps list")

    header = ["scenario"] + [f"{s}@{e:g}" for s in solvers for e in eps_list]
    iter_rows, time_rows = [], []
    for path in paths:
        iter_row, time_row = [], []
        name = None
        for solver_name in solvers:
            scenario = load_scenario(path)
            name = scenario.name
            scenario.settings.eps = min(eps_list)
            if args.max_iters is not None:
                scenario.settings.max_iters = args.max_iters
            result = _solve(scenario, solver_name, deterministic=False)
            for e in eps_list:
                its = result.trace.iterations_to(e)
                iter_row.append(NA if its is None else its)
                t = result.trace.time_to(e)
                time_row.append(NA if t is None else _fmt(t))
        iter_rows.append([name] + iter_row)
        time_rows.append([name] + time_row)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for fname, rows in (("sweep-iterations.csv", iter_rows), ("sweep-time.csv", time_rows)):
        with open(out / fname, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(rows)
    for title, rows in (("iterations", iter_rows), ("elapsed seconds", time_rows)):
        print(f"-- {title}")
        print(",".join(header))
        for row in rows:
            print(",".join(str(c) for c in row))
    print(f"wrote {out / 'sweep-iterations.csv'} and {out / 'sweep-time.csv'}")
    return 0


def cmd_check(args):
    scenario = load_scenario(args.scenario)
    print(f"{scenario.name}: loads, dim {scenario.problem.dim}")
    for (a, b, s), dist in scenario.problem.audit_distances(scenario.problem.theta0):
        print(f"   {a} vs {b} (sample {s}): distance {dist:.6g}")
    print("initial configuration is collision free")
    return 0


def build_parser():
    parser = _Parser(prog="barrierplan", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="solve one scenario with one solver")
    p_run.add_argument("scenario", help="scenario YAML file")
    p_run.add_argument("--solver", choices=sorted(SOLVERS), default="icb")
    p_run.add_argument("--eps", type=float, default=None, help="gradient-norm target")
    p_run.add_argument("--max-iters", type=int, default=None)
    p_run.add_argument("--out", default=".", help="output directory for the CSVs")
    p_run.add_argument(
        "--deterministic",
        action="store_true",
        help="pin linear-algebra threads so reruns are bitwise identical",
    )
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="comparison table over a scenario directory")
    p_sweep.add_argument("scenario_dir", help="directory containing *.yaml scenarios")
    p_sweep.add_argument("--solvers", default="ecb,icb,ao", help="comma-separated list")
    p_sweep.add_argument(
        "--eps", default="1e-1,1e-2,1e-3,1e-4", help="comma-separated gradient-norm targets"
    )
    p_sweep.add_argument(
        "--max-iters", type=int, default=50000, help="per-cell iteration cap"
    )
    p_sweep.add_argument("--out", default=".", help="output directory for the CSVs")
    p_sweep.set_defaults(func=cmd_sweep)

    p_check = sub.add_parser("check", help="load a scenario and audit the start")
    p_check.add_argument("scenario", help="scenario YAML file")
    p_check.set_defaults(func=cmd_check)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as err:
        print(f"error: {err}", file=sys.stderr)
        return 5
    except InfeasibleStartError as err:
        print(f"infeasible start: {err}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
