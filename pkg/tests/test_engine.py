import math

import numpy as np
import pytest

from branchsim.apps.ambulance import AlpProblem, brute_force_alp, generate_alp
from branchsim.apps.checkin import AccaProblem, generate_toy_acca
from branchsim.cuts import ALL_KINDS, CutKind
from branchsim.engine import BranchAndSimulate, BudgetExceeded, brute_force, true_objective

from conftest import FunctionProblem


@pytest.fixture(scope="module")
def toy_acca():
    return AccaProblem(generate_toy_acca(1, periods=4, M=3, n_scenarios=2))


@pytest.fixture(scope="module")
def toy_optimum(toy_acca):
    return brute_force(toy_acca)


@pytest.mark.parametrize("kind", ALL_KINDS, ids=lambda k: k.label)
def test_every_kind_matches_brute_force(toy_acca, toy_optimum, kind):
    e = BranchAndSimulate(toy_acca, kind)
    report = e.solve()
    assert report.status == "Optimal"
    assert report.objective == pytest.approx(toy_optimum[1], abs=1e-7)
    assert true_objective(toy_acca, e.solution(report)) == pytest.approx(toy_optimum[1], abs=1e-7)


def test_report_bookkeeping(toy_acca):
    e = BranchAndSimulate(toy_acca, CutKind.parse("strong", True))
    report = e.solve()
    assert report.initial_cuts > 0 and report.sim_count == e.cache.calls
    assert report.bound <= report.objective + 1e-9
    assert math.isnan(report.heuristic)
    assert report.times["total"] >= report.times["initial"]


def test_solves_are_repeatable(toy_acca):
    def run():
        e = BranchAndSimulate(toy_acca, CutKind.parse("local", True))
        r = e.solve()
        return r.objective, r.bound, r.nodes, r.benders_cuts, r.initial_cuts, r.sim_count, e.solution(r)

    assert run() == run()


def test_zero_time_limit_returns_root_bound(toy_acca):
    e = BranchAndSimulate(toy_acca, CutKind.parse("strong"))
    report = e.solve(time_limit=0.0)
    assert report.status == "TimeLimit" and report.nodes == 1
    assert math.isfinite(report.bound)


def test_warm_start_becomes_incumbent(toy_acca, toy_optimum):
    top = (toy_acca.domain.M,) * toy_acca.n
    e = BranchAndSimulate(toy_acca, CutKind.parse("strong"))
    report = e.solve(warm_start=top)
    assert report.heuristic == pytest.approx(true_objective(toy_acca, top))
    assert report.objective == pytest.approx(toy_optimum[1], abs=1e-7)


def test_infeasible_warm_start_rejected(toy_acca):
    e = BranchAndSimulate(toy_acca, CutKind.parse("strong"))
    with pytest.raises(ValueError):
        e.solve(warm_start=(0,) * toy_acca.n)


def test_brute_force_budget(toy_acca):
    with pytest.raises(BudgetExceeded):
        brute_force(toy_acca, budget=3)


def test_brute_force_ties_go_to_first():
    p = FunctionProblem([lambda y: np.array([0.0])], 2, 0, 1, [1.0, 1.0])
    assert brute_force(p) == ((0, 0), 0.0)


def test_cvar_objective_matches_brute_force():
    funcs = [lambda y, s=s: np.array([max(0, 4 - y[0] - s), max(0, 3 - y[1] + s)], dtype=float)
             for s in range(3)]
    p = FunctionProblem(funcs, 2, 0, 3, [0.6, 0.5], mode="cvar", w0=0.4, w1=0.6, beta=0.6)
    best = brute_force(p)
    for kind in (CutKind.parse("strong", True), CutKind.parse("mono")):
        report = BranchAndSimulate(p, kind).solve()
        assert report.objective == pytest.approx(best[1], abs=1e-7)


def test_non_monotone_measure_uses_clamped_cuts():
    # more resources at object 1 make measure 0 worse: the measure is not monotone
    f = lambda y: np.array([3.0 - y[0] + y[1], 2.0 - y[1]])
    p = FunctionProblem([f], 2, 0, 2, [0.0, 0.0], monotone=False)
    e = BranchAndSimulate(p, CutKind.parse("strong", True))
    report = e.solve()
    assert report.status == "Optimal"
    # the approximation never claims a value below the true one of its own answer
    assert true_objective(p, e.solution(report)) >= brute_force(p)[1]


def test_monotone_problem_asserts_certified_windows():
    f = lambda y: np.array([3.0 - y[0] + y[1], 2.0 - y[1]])
    p = FunctionProblem([f], 2, 0, 2, [0.0, 0.0], monotone=True)
    with pytest.raises((AssertionError, ValueError)):
        BranchAndSimulate(p, CutKind.parse("strong")).solve()


def test_alp_small_matches_brute_force_value():
    inst = generate_alp(3, 2, n=8, K=4, E=1, M1=2, box=8.0, min_dist=1.0)
    p = AlpProblem(inst)
    by, bv = brute_force_alp(p)
    assert brute_force(p)[1] == pytest.approx(bv)
    e = BranchAndSimulate(p, CutKind.parse("strong", True))
    report = e.solve()
    # brute force is exact; B&S may be off because the measures are not monotone
    assert true_objective(p, e.solution(report)) >= bv - 1e-9
