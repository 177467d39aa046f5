"""Branch-and-Simulate: the master problem plus the simulation callback."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from . import cuts as C
from .core import Allocation, LevelDomain, MeasureId, ObjectiveSpec, PerformanceCache, delta, with_level
from .mip import INF, BranchAndBound, CallbackResult, MasterModel, Row, SolveReport

log = logging.getLogger(__name__)


class BudgetExceeded(RuntimeError):
    def __init__(self, count, budget):
        super().__init__(f"enumeration needs at least {count} candidates, budget is {budget}")
        self.count = count
        self.budget = budget


class SimulationProblem:
    """Interface shared by the applications.

    Subclasses set ``n``, ``domain``, ``n_scenarios``, ``anchors`` (object of
    every measure key), ``objective`` and implement :meth:`simulate`.
    """

    n: int
    domain: LevelDomain
    n_scenarios: int
    anchors: np.ndarray
    objective: ObjectiveSpec
    monotone: bool = True
    problem_type: str = ""

    @property
    def n_keys(self) -> int:
        return len(self.anchors)

    def measures(self) -> list[MeasureId]:
        return [MeasureId(s, key, int(self.anchors[key]))
                for s in range(self.n_scenarios) for key in range(self.n_keys)]

    def simulate(self, s: int, y: Allocation) -> np.ndarray:
        raise NotImplementedError

    def find_window(self, k: MeasureId, ybar: Allocation, value) -> set[int]:
        return C.find_window_scheduling(k.anchor, ybar, value, self.n, self.domain.M)

    def initial_partners(self, key: int) -> list[int]:
        return []

    def add_constraints(self, model: MasterModel, y_cols: list[int]) -> None:
        pass

    def is_feasible(self, y: Sequence[int]) -> bool:
        return self.domain.contains(y)

    def enumerate_feasible(self) -> Iterator[Allocation]:
        import itertools

        for y in itertools.product(self.domain.levels, repeat=self.n):
            if self.is_feasible(y):
                yield tuple(y)

    def warm_start(self) -> Allocation | None:
        return None


@dataclass
class MasterLayout:
    model: MasterModel
    y: list[int]
    z: dict  # (object, level) -> column
    theta: np.ndarray  # (S, keys) -> column
    cvar: dict = field(default_factory=dict)


def cvar_terms(model: MasterModel, theta: np.ndarray, weights: np.ndarray, scale: float,
               w0: float, w1: float, beta: float) -> dict:
    """Turn a mean-mode objective into w0 * mean + w1 * CVaR_beta.

    ``theta`` is the ``(S, keys)`` column array; scenario losses are the
    weighted sums ``sum_key weights[key] * theta[s, key]``.
    """
    if not 0 < beta < 1:
        raise ValueError("beta must lie in (0, 1)")
    S = theta.shape[0]
    for col in theta.ravel():
        model.cost[col] *= w0
    alpha = model.add_var(-INF, INF, 0.0, name="alpha")
    cv = model.add_var(-INF, INF, w1, name="CV")
    u = [model.add_var(0.0, INF, 0.0, name=f"u[{s}]") for s in range(S)]
    model.add_row([cv, alpha] + u, [1.0, -1.0] + [-1.0 / (S * (1.0 - beta))] * S, 0.0, 0.0)
    for s in range(S):
        cols = [u[s], alpha] + list(theta[s])
        vals = [1.0, 1.0] + list(-weights)
        model.add_row(cols, vals, 0.0, INF)
    return {"alpha": alpha, "cv": cv, "u": u}


def build_master(problem: SimulationProblem) -> MasterLayout:
    obj = problem.objective
    model = MasterModel()
    dom = problem.domain
    ys, zs = [], {}
    for j in range(problem.n):
        g = model.add_level_group(dom.m, dom.M, cost=obj.resource_cost[j], name=f"y{j}")
        ys.append(g.y)
        for lv, col in zip(g.levels, g.z):
            zs[(j, lv)] = col
    S, K = problem.n_scenarios, problem.n_keys
    theta = np.empty((S, K), dtype=np.int64)
    for s in range(S):
        for key in range(K):
            theta[s, key] = model.add_var(0.0, INF, obj.measure_weights[key] / obj.scenario_divisor,
                                          name=f"theta[{s},{key}]")
    layout = MasterLayout(model, ys, zs, theta)
    if obj.mode == "cvar":
        layout.cvar = cvar_terms(model, theta, obj.measure_weights, obj.measure_scale,
                                 obj.w0, obj.w1, obj.beta)
    problem.add_constraints(model, ys)
    return layout


class BranchAndSimulate:
    def __init__(self, problem: SimulationProblem, kind: C.CutKind, threads: int = 1,
                 gap_tolerance: float = 1e-9, violation_tolerance: float = 1e-6):
        self.problem = problem
        self.kind = kind
        self.threads = max(1, int(threads))
        self.gap_tolerance = gap_tolerance
        self.violation_tolerance = violation_tolerance
        self.cache = PerformanceCache(problem.simulate)
        self.layout = build_master(problem)
        self.scale = problem.objective.measure_scale
        self._seen: set = set()
        self._i_tables: dict = {}
        self.initial_cut_count = 0
        self.monotonicity_breaches = 0
        self.cut_log: list[C.LinearCut] = []
        self.dump_cuts = False

    # -- helpers ----------------------------------------------------------------

    def value_fn(self, k: MeasureId):
        cache = self.cache
        return lambda y: cache.outputs(k.scenario, y)[k.key]

    def all_values(self, y: Allocation) -> np.ndarray:
        S = self.problem.n_scenarios
        self.cache.prefetch(((s, y) for s in range(S)), self.threads)
        return np.stack([self.cache.outputs(s, y) for s in range(S)])

    def cut_row(self, cut: C.LinearCut) -> Row:
        lay = self.layout
        idx = [int(lay.theta[cut.theta_target.scenario, cut.theta_target.key])]
        val = [1.0]
        for (j, lv), c in cut.z_coeffs.items():
            if c != 0.0:
                idx.append(lay.z[(j, lv)])
                val.append(-c)
        for j, c in cut.y_coeffs.items():
            if c != 0.0:
                idx.append(lay.y[j])
                val.append(-c)
        return Row(np.array(idx, dtype=np.int32), np.array(val), float(cut.constant), INF)

    def _accept(self, cut: C.LinearCut, out: list) -> None:
        sig = cut.signature()
        if sig in self._seen or cut.is_trivial(self.problem.domain):
            return
        self._seen.add(sig)
        out.append(self.cut_row(cut))
        if self.dump_cuts:
            self.cut_log.append(cut)

    def i_values(self, k: MeasureId) -> dict:
        """Measure with ``level`` at the anchor and the maximum elsewhere, scaled."""
        key = (k.scenario, k.key)
        table = self._i_tables.get(key)
        if table is None:
            dom = self.problem.domain
            top = (dom.M,) * self.problem.n
            f = self.value_fn(k)
            table = {lv: float(f(with_level(top, k.anchor, lv))) * self.scale for lv in dom.levels}
            self._i_tables[key] = table
        return table

    def w_table(self, k: MeasureId, partner: int) -> np.ndarray:
        dom = self.problem.domain
        top = (dom.M,) * self.problem.n
        f = self.value_fn(k)
        levels = list(dom.levels)
        W = np.empty((len(levels), len(levels)))
        # column-major so consecutive calls share the partner level
        for b, l2 in enumerate(levels):
            for a, l1 in enumerate(levels):
                y = with_level(with_level(top, k.anchor, l1), partner, l2)
                W[a, b] = float(f(y)) * self.scale
        return W

    # -- cut generation ------------------------------------------------------------

    def benders_cut(self, k: MeasureId, ybar: Allocation, native: int | float) -> C.LinearCut:
        dom = self.problem.domain
        fval = float(native) * self.scale
        tag = self.kind.tag
        if tag is C.CutTag.NOGOOD:
            return C.no_good_cut(k, ybar, fval, dom)
        if tag is C.CutTag.MONOTONIC:
            return C.monotonic_cut(k, ybar, fval, dom)
        f = self.value_fn(k)
        window = self.problem.find_window(k, ybar, f)
        certified = f(delta(window, ybar, dom.M)) == native
        if not certified:
            if self.problem.monotone:
                raise AssertionError(f"window {sorted(window)} not certified for {k}")
            self.monotonicity_breaches += 1
        if tag is C.CutTag.LOCAL:
            return C.local_cut(k, ybar, window, fval, dom)
        table = self.i_values(k)
        cut, breaches = C.strengthened_cut(k, ybar, window, fval, table, table[ybar[k.anchor]], dom,
                                           tolerate=not self.problem.monotone)
        self.monotonicity_breaches += breaches
        return cut

    def initial_cuts(self) -> list[Row]:
        rows: list[Row] = []
        problem = self.problem
        for k in problem.measures():
            partners = problem.initial_partners(k.key)
            if not partners:
                self._accept(C.initial_cut_1d(k, self.i_values(k)), rows)
                continue
            for partner in partners:
                first, second = C.initial_cuts_2d(k, partner, self.w_table(k, partner), problem.domain)
                for cut in first + second:
                    self._accept(cut, rows)
        return rows

    def _candidate(self, ybar: Allocation, values: np.ndarray, x: np.ndarray | None) -> tuple[float, np.ndarray]:
        lay = self.layout
        obj = self.problem.objective
        out = np.full(lay.model.n_cols, np.nan) if x is None else x.copy()
        out[lay.y] = ybar
        for (j, lv), col in lay.z.items():
            out[col] = 1.0 if ybar[j] == lv else 0.0
        out[lay.theta.ravel()] = (values.astype(float) * self.scale).ravel()
        if lay.cvar:
            losses = obj.scenario_losses(values)
            from .core import cvar_value

            cv = cvar_value(losses, obj.beta, obj.scenario_divisor)
            out[lay.cvar["cv"]] = cv
        return obj.evaluate(ybar, values), out

    def separate(self, ybar: Allocation, theta_bar: np.ndarray | None, x: np.ndarray | None = None):
        """Simulate ``ybar``; cut every measure that ``theta_bar`` underestimates."""
        values = self.all_values(ybar)
        rows: list[Row] = []
        problem = self.problem
        for k in problem.measures():
            native = values[k.scenario, k.key]
            fval = float(native) * self.scale
            if theta_bar is not None:
                est = theta_bar[k.scenario, k.key]
                if est >= fval - self.violation_tolerance * max(1.0, abs(fval)):
                    continue
            elif fval <= 0:
                continue
            self._accept(self.benders_cut(k, ybar, native), rows)
        return rows, self._candidate(ybar, values, x)

    def callback(self, x: np.ndarray) -> CallbackResult:
        lay = self.layout
        ybar = tuple(int(round(v)) for v in x[lay.y])
        theta_bar = x[lay.theta]
        rows, cand = self.separate(ybar, theta_bar, x)
        return CallbackResult(rows, cand)

    # -- driver ---------------------------------------------------------------------

    def solve(self, time_limit: float = math.inf, warm_start: Allocation | None = None,
              node_limit: int | None = None) -> SolveReport:
        t0 = time.perf_counter()
        rows = self.initial_cuts() if self.kind.with_initials else []
        self.initial_cut_count = len(rows)
        t_init = time.perf_counter() - t0
        bb = BranchAndBound(self.layout.model, self.gap_tolerance)
        bb.add_rows(rows)
        incumbents = []
        heuristic = math.nan
        if warm_start is not None:
            warm_start = tuple(int(v) for v in warm_start)
            if not self.problem.is_feasible(warm_start):
                raise ValueError("warm start is not feasible")
            wrows, cand = self.separate(warm_start, None)
            bb.add_rows(wrows)
            incumbents.append(cand)
            heuristic = cand[0]
        self.bb = bb
        remaining = max(0.0, time_limit - (time.perf_counter() - t0))
        report = bb.solve(self.callback, incumbents, remaining, node_limit)
        report.initial_cuts = self.initial_cut_count
        report.heuristic = heuristic
        report.sim_count = self.cache.calls
        report.times["initial"] = t_init
        report.times["simulation"] = self.cache.sim_seconds
        report.times["total"] = time.perf_counter() - t0
        return report

    def solution(self, report: SolveReport) -> Allocation | None:
        if report.x is None:
            return None
        return tuple(int(round(v)) for v in report.x[self.layout.y])


def true_objective(problem: SimulationProblem, y: Allocation, cache: PerformanceCache | None = None) -> float:
    cache = cache or PerformanceCache(problem.simulate)
    values = np.stack([cache.outputs(s, y) for s in range(problem.n_scenarios)])
    return problem.objective.evaluate(y, values)


def brute_force(problem: SimulationProblem, budget: int = 2_000_000) -> tuple[Allocation, float]:
    """Exact optimum by simulating every feasible allocation (first in
    enumeration order wins ties)."""
    candidates = []
    for y in problem.enumerate_feasible():
        candidates.append(y)
        if len(candidates) > budget:
            raise BudgetExceeded(len(candidates), budget)
    if not candidates:
        raise ValueError("no feasible allocation")
    best_y, best = None, math.inf
    obj = problem.objective
    S = problem.n_scenarios
    for y in candidates:
        values = np.stack([problem.simulate(s, y) for s in range(S)])
        v = obj.evaluate(y, values)
        if v < best:
            best_y, best = y, v
    return best_y, best
