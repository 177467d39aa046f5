"""Command-line front end: generate, solve, profile, stability, oracle."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
import time
from pathlib import Path

from . import cuts as C
from . import io
from .apps import ambulance, checkin, nursing
from .engine import BranchAndSimulate, BudgetExceeded, brute_force, true_objective
from .mip import SolveReport
from .profiles import (RunRecord, performance_profile, stability, write_profile_csv, write_profile_svg,
                       write_stability_csv)
from .queue import simulate, write_trace

log = logging.getLogger("branchsim")

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_BUDGET = 0, 2, 3, 4


class UsageError(Exception):
    pass


# -- generate ------------------------------------------------------------------------


def cmd_generate(args) -> int:
    if args.problem == "acca":
        if args.toy:
            inst = checkin.generate_toy_acca(args.seed, args.periods or 4, args.max_level or 3,
                                             args.scenarios, args.queue_cost)
        else:
            inst = checkin.generate_acca(args.seed, args.scenarios, args.queue_cost)
    elif args.problem == "nhss":
        rate, short = nursing.PRESETS[args.preset] if args.preset else (args.rate, args.short_prob)
        if args.toy:
            inst = nursing.generate_toy_nhss(args.seed, args.scenarios)
        else:
            inst = nursing.generate_nhss(args.seed, args.scenarios, rate, short, h_max=args.h_max,
                                         scheduled_csv=args.scheduled_csv)
    else:
        inst = ambulance.generate_alp(args.seed, args.scenarios, n=args.nodes, K=args.stations,
                                      E=args.hospitals, M1=args.fleet, M=args.max_level or 1, box=args.box,
                                      min_dist=args.min_dist, max_degree=args.max_degree,
                                      arrival=args.arrival)
    io.save_instance(args.out, args.problem, inst)
    print(f"wrote {args.problem} instance ({len(inst.scenarios)} scenarios) to {args.out}")
    return EXIT_OK


# -- solve ---------------------------------------------------------------------------------


def _dump_cuts(path: Path, cut_log) -> None:
    terms = path.with_suffix(path.suffix + ".terms.csv")
    with open(path, "w", newline="") as fh, open(terms, "w", newline="") as ft:
        w, wt = csv.writer(fh), csv.writer(ft)
        w.writerow(["measure", "kind", "constant", "term_count"])
        wt.writerow(["cut", "object", "level", "coeff"])
        for i, cut in enumerate(cut_log):
            k = cut.theta_target
            w.writerow([f"{k.scenario}:{k.key}", cut.kind, repr(cut.constant), len(cut.z_coeffs)])
            for (j, lv), c in sorted(cut.z_coeffs.items()):
                wt.writerow([i, j, lv, repr(c)])


def _write_trace(path: Path, problem, y, scenario: int) -> None:
    if problem.problem_type in ("acca", "nhss"):
        sc = problem.inst.scenarios[scenario]
        write_trace(path, sc, simulate(sc, y))
        return
    sc = problem.inst.scenarios[scenario]
    late, busy = ambulance.simulate_dispatch(problem.data, sc, y, problem.threshold, with_log=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["call", "node", "time", "station", "ambulance", "busy_start", "busy_end"])
        for c in range(sc.n_calls):
            w.writerow([c, int(sc.node[c]), int(sc.time[c]), *[int(v) for v in busy[c]]])


def cmd_solve(args) -> int:
    try:
        problem = io.load_problem(args.instance, objective_mode=args.objective_mode, w0=args.w0, w1=args.w1,
                                  beta=args.beta)
    except (OSError, KeyError, ValueError) as exc:
        raise UsageError(f"cannot load instance: {exc}") from exc
    kind = C.CutKind.parse(args.cuts, args.initial_cuts)
    engine = BranchAndSimulate(problem, kind, threads=args.threads, gap_tolerance=args.gap)
    engine.dump_cuts = args.dump_cuts is not None
    warm = None
    if args.warm_start == "heuristic":
        warm = problem.warm_start()
        if warm is None:
            raise UsageError(f"no heuristic available for {problem.problem_type}")
    t0 = time.perf_counter()
    report = engine.solve(time_limit=args.time_limit, warm_start=warm, node_limit=args.node_limit)
    y = engine.solution(report)
    doc = {
        "instance": str(args.instance), "problem_type": problem.problem_type, "method": kind.label,
        "status": report.status, "objective": report.objective, "bound": report.bound, "gap": report.gap,
        "time": time.perf_counter() - t0, "nodes": report.nodes, "benders_cuts": report.benders_cuts,
        "initial_cuts": report.initial_cuts, "sim_count": report.sim_count, "heuristic": report.heuristic,
        "times": report.times, "seed": args.seed, "threads": args.threads,
        "monotonicity_breaches": engine.monotonicity_breaches, "y": list(y) if y is not None else None,
    }
    if y is not None:
        doc["true_objective"] = true_objective(problem, y, engine.cache)
        if problem.problem_type == "nhss":
            x = nursing.shift_decomposition(problem.catalog, y)
            doc["x"] = None if x is None else [int(v) for v in x]
            doc["shifts"] = [list(s) for s in problem.catalog.shifts]
    out = Path(args.out) if args.out else None
    if out is not None:
        io.save_solution(out, doc)
    if args.report:
        new = not Path(args.report).exists()
        with open(args.report, "a", newline="") as fh:
            w = csv.writer(fh)
            if new:
                w.writerow(SolveReport.CSV_COLUMNS)
            w.writerow(report.csv_row())
    else:
        w = csv.writer(sys.stdout)
        w.writerow(SolveReport.CSV_COLUMNS)
        w.writerow(report.csv_row())
    if args.dump_cuts:
        _dump_cuts(Path(args.dump_cuts), engine.cut_log)
    if args.trace and y is not None:
        _write_trace(Path(args.trace), problem, y, args.trace_scenario)
    print(f"status={report.status} objective={report.objective:.6f} bound={report.bound:.6f} "
          f"gap={report.gap:.3g} nodes={report.nodes} y={y}", file=sys.stderr)
    if report.status == "Infeasible":
        return EXIT_INFEASIBLE
    return EXIT_OK


# -- oracle ----------------------------------------------------------------------------------


def cmd_oracle(args) -> int:
    try:
        problem = io.load_problem(args.instance)
    except (OSError, KeyError, ValueError) as exc:
        raise UsageError(f"cannot load instance: {exc}") from exc
    t0 = time.perf_counter()
    try:
        if problem.problem_type == "alp":
            y, value = ambulance.brute_force_alp(problem, args.budget)
        else:
            y, value = brute_force(problem, args.budget)
    except BudgetExceeded as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except ValueError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    doc = {"instance": str(args.instance), "method": "oracle", "status": "Optimal", "objective": value,
           "y": list(y), "time": time.perf_counter() - t0, "gap": 0.0}
    if args.out:
        io.save_solution(args.out, doc)
    print(json.dumps({"objective": value, "y": list(y)}))
    return EXIT_OK


# -- profile / stability ----------------------------------------------------------------------


def _solution_files(directory) -> list[dict]:
    files = sorted(Path(directory).glob("*.json"))
    if not files:
        raise UsageError(f"no solution files in {directory}")
    return [io.load_solution(f) for f in files]


def cmd_profile(args) -> int:
    runs = []
    for doc in _solution_files(args.report_dir):
        gap = doc.get("gap", math.inf)
        gap = math.inf if gap is None else float(gap)
        runs.append(RunRecord(Path(doc["instance"]).name, doc["method"], doc["status"] == "Optimal",
                              float(doc["time"]), gap))
    try:
        points = performance_profile(runs, args.time_limit)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    write_profile_csv(args.out, points)
    if args.svg:
        write_profile_svg(args.svg, points, args.time_limit)
    print(f"wrote {len(points)} profile points to {args.out}")
    return EXIT_OK


def cmd_stability(args) -> int:
    sols = [doc["y"] for doc in _solution_files(args.solutions_dir) if doc.get("y") is not None]
    try:
        rows = stability(sols)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    write_stability_csv(args.out, rows)
    print(f"wrote stability bands for {len(rows)} variables to {args.out}")
    return EXIT_OK


# -- parser --------------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="branchsim", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="sample an instance")
    g.add_argument("problem", choices=["acca", "nhss", "alp"])
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--scenarios", type=int, default=25)
    g.add_argument("--out", required=True)
    g.add_argument("--toy", action="store_true", help="small instance for exhaustive checks")
    g.add_argument("--queue-cost", type=float, default=40.0, help="acca: cost per period of waiting")
    g.add_argument("--periods", type=int, default=None, help="acca toy: number of periods")
    g.add_argument("--max-level", type=int, default=None, help="acca toy / alp: maximum level M")
    g.add_argument("--rate", type=float, default=20.0, help="nhss: unscheduled requests per hour")
    g.add_argument("--short-prob", type=float, default=0.8)
    g.add_argument("--preset", choices=sorted(nursing.PRESETS), default=None)
    g.add_argument("--h-max", type=float, default=80.0, help="nhss: working-hours budget")
    g.add_argument("--scheduled-csv", default=None, help="nhss: start_minute,duration_microunits file")
    g.add_argument("--nodes", type=int, default=100)
    g.add_argument("--stations", type=int, default=40)
    g.add_argument("--hospitals", type=int, default=10)
    g.add_argument("--fleet", type=int, default=25)
    g.add_argument("--box", type=float, default=40.0)
    g.add_argument("--min-dist", type=float, default=2.0)
    g.add_argument("--max-degree", type=int, default=5)
    g.add_argument("--arrival", choices=["interarrival", "rate"], default="interarrival")
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("solve", help="run Branch-and-Simulate on an instance")
    s.add_argument("instance")
    s.add_argument("--cuts", choices=[t.value for t in C.CutTag], default="strong")
    s.add_argument("--initial-cuts", action="store_true")
    s.add_argument("--time-limit", type=float, default=3600.0)
    s.add_argument("--node-limit", type=int, default=None, help="stop after this many B&B nodes")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--threads", type=int, default=1)
    s.add_argument("--objective-mode", choices=["mean", "cvar"], default="mean")
    s.add_argument("--w0", type=float, default=0.5)
    s.add_argument("--w1", type=float, default=0.5)
    s.add_argument("--beta", type=float, default=0.9)
    s.add_argument("--gap", type=float, default=1e-9, help="relative gap accepted as optimal")
    s.add_argument("--warm-start", choices=["none", "heuristic"], default="none")
    s.add_argument("--out", default=None, help="solution JSON")
    s.add_argument("--report", default=None, help="append the report row to this CSV")
    s.add_argument("--dump-cuts", default=None)
    s.add_argument("--trace", default=None, help="per-job (or per-call) trace CSV of the solution")
    s.add_argument("--trace-scenario", type=int, default=0)
    s.set_defaults(func=cmd_solve)

    pr = sub.add_parser("profile", help="performance profile from solution files")
    pr.add_argument("report_dir")
    pr.add_argument("--time-limit", type=float, required=True)
    pr.add_argument("--out", required=True)
    pr.add_argument("--svg", default=None)
    pr.set_defaults(func=cmd_profile)

    st = sub.add_parser("stability", help="per-variable min/max/mean over solutions")
    st.add_argument("solutions_dir")
    st.add_argument("--out", required=True)
    st.set_defaults(func=cmd_stability)

    o = sub.add_parser("oracle", help="exact optimum by enumeration")
    o.add_argument("instance")
    o.add_argument("--budget", type=int, default=2_000_000)
    o.add_argument("--out", default=None)
    o.set_defaults(func=cmd_oracle)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if getattr(args, "threads", 1) < 1:
        parser.error("--threads must be at least 1")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
