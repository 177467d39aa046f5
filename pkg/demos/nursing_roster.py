"""Build a nurse roster for a reduced home-service day.

Starts from the proportional heuristic, improves it with Branch-and-Simulate
and prints the staffing curve and the shifts that realise it.

    python demos/nursing_roster.py --seed 1 --time-limit 60
"""

import argparse

from branchsim.apps.nursing import NhssProblem, generate_nhss, shift_decomposition
from branchsim.cuts import CutKind
from branchsim.engine import BranchAndSimulate, true_objective


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--scenarios", type=int, default=2)
    ap.add_argument("--time-limit", type=float, default=60.0)
    args = ap.parse_args()

    problem = NhssProblem(generate_nhss(args.seed, args.scenarios, periods=8, M=8, h_max=40, n_scheduled=112))
    h = problem.warm_start()
    print(f"heuristic staffing {h}  objective {true_objective(problem, h):.2f}")
    engine = BranchAndSimulate(problem, CutKind.parse("strong", True))
    r = engine.solve(time_limit=args.time_limit, warm_start=h)
    y = engine.solution(r)
    print(f"B&S {r.status}: staffing {y}  objective {r.objective:.2f}  bound {r.bound:.2f}  nodes {r.nodes}")
    x = shift_decomposition(problem.catalog, y)
    for count, (start, length) in zip(x, problem.catalog.shifts):
        if count:
            print(f"  {count} nurse(s) on the {length} h shift starting at hour {start}")


if __name__ == "__main__":
    main()
