import math

import numpy as np
import pytest
from scipy.optimize import LinearConstraint, milp

from branchsim.apps.checkin import AccaProblem, generate_acca
from branchsim.cuts import CutKind
from branchsim.engine import BranchAndSimulate, build_master, cvar_terms
from branchsim.mip import INF, BranchAndBound, MasterModel, SolveReport, relative_gap

from conftest import FunctionProblem


def _three_object_problem(mode="mean", S=1):
    funcs = [lambda y: np.array([3 - y[0], 2 - y[1], 1.0])] * S
    kw = dict(mode="cvar", w0=0.5, w1=0.5, beta=0.5) if mode == "cvar" else {}
    return FunctionProblem(funcs, 3, 0, 2, [1.0, 1.0, 1.0], **kw)


def test_master_counts_small():
    lay = build_master(_three_object_problem())
    m = lay.model
    assert len(m.groups) == 3
    assert sum(len(g.z) for g in m.groups) == 9
    assert m.n_rows == 6
    assert m.n_cols == 3 + 9 + 3
    assert sum(m.integer) == 12


def test_cvar_adds_variables_and_rows():
    S = 4
    mean = build_master(_three_object_problem("mean", S)).model
    cvar = build_master(_three_object_problem("cvar", S)).model
    assert cvar.n_cols - mean.n_cols == 1 + 1 + S
    assert cvar.n_rows - mean.n_rows == 1 + S


def test_acca_master_counts():
    T, M, S = 21, 20, 100
    lay = build_master(AccaProblem(generate_acca(0, S)))
    m = lay.model
    # y, z per level, theta per (scenario, period); two service rows and two linking rows per period
    assert m.n_cols == T + T * (M + 1) + S * T
    assert m.n_rows == 4 * T


def _plain_mip():
    model = MasterModel()
    a = model.add_var(0, 10, -5.0, integer=True)
    b = model.add_var(0, 10, -4.0, integer=True)
    c = model.add_var(0, 10, -3.0, integer=True)
    A = np.array([[2.0, 3.0, 1.0], [4.0, 1.0, 2.0], [3.0, 4.0, 2.0]])
    ub = np.array([5.0, 11.0, 8.0])
    for row, u in zip(A, ub):
        model.add_row([a, b, c], row, -INF, u)
    return model, A, ub


def test_plain_mip_matches_scipy():
    model, A, ub = _plain_mip()
    report = BranchAndBound(model).solve()
    ref = milp(np.array([-5.0, -4.0, -3.0]), constraints=LinearConstraint(A, -np.inf, ub),
               integrality=np.ones(3), bounds=(0, 10))
    assert report.status == "Optimal"
    assert report.objective == pytest.approx(ref.fun, abs=1e-9)
    assert model.objective(report.x) == pytest.approx(ref.fun, abs=1e-9)


def test_root_bound_below_optimum():
    model, _, _ = _plain_mip()
    bb = BranchAndBound(model)
    root = bb.lp_relax_bound()
    assert root <= bb.solve().objective + 1e-9


def test_all_integer_lp_bound_equals_objective():
    model = MasterModel()
    x = model.add_var(0, 4, 1.0, integer=True)
    model.add_row([x], [1.0], 2.0, INF)
    bb = BranchAndBound(model)
    assert bb.lp_relax_bound() == pytest.approx(2.0)
    assert bb.solve().objective == pytest.approx(2.0)


def test_infeasible_model():
    model = MasterModel()
    x = model.add_var(0, 1, 1.0, integer=True)
    model.add_row([x], [2.0], 1.0, 1.0)
    report = BranchAndBound(model).solve()
    assert report.status == "Infeasible" and math.isinf(report.objective)


def test_level_group_links_y_and_z():
    model = MasterModel()
    g = model.add_level_group(1, 3, cost=1.0)
    model.add_row([g.y], [1.0], 1.5, INF)
    report = BranchAndBound(model).solve()
    assert report.x[g.y] == pytest.approx(2.0)
    assert list(np.round(report.x[g.z])) == [0, 1, 0]


def test_single_measure_toy_converges():
    # f(y) = max(0, 3 - y), cost y: every y in 0..3 gives 3
    p = FunctionProblem([lambda y: np.array([max(0, 3 - y[0])])], 1, 0, 3, [1.0])
    e = BranchAndSimulate(p, CutKind.parse("strong"))
    report = e.solve()
    assert report.status == "Optimal" and report.objective == pytest.approx(3.0)


def test_no_good_cuts_enumerate_everything():
    p = FunctionProblem([lambda y: np.array([10.0 - y[0] - y[1]])], 2, 0, 2, [0.0, 0.0])
    e = BranchAndSimulate(p, CutKind.parse("nogood"))
    report = e.solve()
    assert report.objective == pytest.approx(6.0)
    assert len(e.cache) == 9


def test_initial_cuts_raise_root_bound():
    p = FunctionProblem([lambda y: np.array([max(0, 3 - y[0])])], 1, 0, 3, [1.0])
    plain = BranchAndSimulate(p, CutKind.parse("strong"))
    with_init = BranchAndSimulate(p, CutKind.parse("strong", True))
    bb0 = BranchAndBound(plain.layout.model)
    bb1 = BranchAndBound(with_init.layout.model)
    bb1.add_rows(with_init.initial_cuts())
    assert bb0.lp_relax_bound() == pytest.approx(0.0)
    assert bb1.lp_relax_bound() == pytest.approx(3.0)


def _fixed_theta_model(sums, w0, w1, beta):
    model = MasterModel()
    theta = np.array([[model.add_var(v, v, 1.0 / len(sums))] for v in sums])
    info = cvar_terms(model, theta, np.ones(1), 1.0, w0, w1, beta)
    return model, info


def test_cvar_two_scenarios():
    model, info = _fixed_theta_model([10.0, 20.0], 0.5, 0.5, 0.5)
    report = BranchAndBound(model).solve()
    assert report.x[info["cv"]] == pytest.approx(20.0)
    assert report.objective == pytest.approx(0.5 * 15.0 + 0.5 * 20.0)


def test_cvar_single_scenario_equals_loss():
    model, info = _fixed_theta_model([7.0], 0.5, 0.5, 0.5)
    report = BranchAndBound(model).solve()
    assert report.x[info["cv"]] == pytest.approx(7.0)


def test_cvar_zero_weight_is_mean():
    model, _ = _fixed_theta_model([10.0, 20.0], 1.0, 0.0, 0.5)
    assert BranchAndBound(model).solve().objective == pytest.approx(15.0)


def test_cvar_beta_validation():
    model = MasterModel()
    theta = np.array([[model.add_var()]])
    with pytest.raises(ValueError):
        cvar_terms(model, theta, np.ones(1), 1.0, 0.5, 0.5, 1.0)


def test_relative_gap():
    assert relative_gap(10.0, 9.0) == pytest.approx(0.1)
    assert relative_gap(math.inf, 1.0) == math.inf
    assert relative_gap(5.0, 6.0) == 0.0


def test_report_row_matches_columns():
    r = SolveReport()
    assert len(r.csv_row()) == len(SolveReport.CSV_COLUMNS)
    assert ",".join(SolveReport.CSV_COLUMNS) == ("objective,heuristic,initial_time,solver_time,callback_time,"
                                                 "total_time,sim_time,initial_cuts,benders_cuts,nodes")
