"""Bounded-integer linear MIP solver with lazy-constraint callbacks.

Branch-and-bound over LP relaxations. The LPs are solved by HiGHS through a
single persistent model, so every node re-solve warm-starts from the previous
basis. Lazy cuts are global rows appended to that model.

Integer structure comes in two forms:

* level groups: an integer ``y`` with one binary ``z`` per level and the
  linking rows ``sum z = 1``, ``sum level*z = y``. Groups are branched by
  splitting the level range (``y <= b`` / ``y >= b+1``), which also fixes the
  corresponding ``z`` columns to zero; ``z`` is never branched on directly.
* plain integer columns, branched on by value.
"""

from __future__ import annotations

import heapq
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import highspy
import numpy as np

log = logging.getLogger(__name__)

INF = highspy.kHighsInf
INT_TOL = 1e-6
FEAS_TOL = 1e-7


@dataclass
class LevelGroup:
    y: int
    z: list[int]
    levels: list[int]


@dataclass
class Row:
    index: np.ndarray
    value: np.ndarray
    lb: float
    ub: float


class MasterModel:
    """Column/row container; nothing is solved here."""

    def __init__(self):
        self.lb: list[float] = []
        self.ub: list[float] = []
        self.cost: list[float] = []
        self.integer: list[bool] = []
        self.names: list[str] = []
        self.rows: list[Row] = []
        self.groups: list[LevelGroup] = []
        self.objective_offset = 0.0

    @property
    def n_cols(self) -> int:
        return len(self.lb)

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    def add_var(self, lb=0.0, ub=INF, cost=0.0, integer=False, name="") -> int:
        self.lb.append(float(lb))
        self.ub.append(float(ub))
        self.cost.append(float(cost))
        self.integer.append(bool(integer))
        self.names.append(name)
        return len(self.lb) - 1

    def add_row(self, index: Sequence[int], value: Sequence[float], lb=-INF, ub=INF) -> int:
        self.rows.append(Row(np.asarray(index, dtype=np.int32), np.asarray(value, dtype=float),
                             float(lb), float(ub)))
        return len(self.rows) - 1

    def add_level_group(self, y_lb: int, y_ub: int, cost=0.0, name="y") -> LevelGroup:
        """Integer ``y`` in ``[y_lb, y_ub]`` with its level indicators and linking rows."""
        levels = list(range(int(y_lb), int(y_ub) + 1))
        y = self.add_var(y_lb, y_ub, cost, integer=True, name=name)
        z = [self.add_var(0, 1, 0.0, integer=True, name=f"z[{name},{lv}]") for lv in levels]
        self.add_row(z, np.ones(len(z)), 1.0, 1.0)
        self.add_row(z + [y], [float(lv) for lv in levels] + [-1.0], 0.0, 0.0)
        group = LevelGroup(y, z, levels)
        self.groups.append(group)
        return group

    def objective(self, x: np.ndarray) -> float:
        return float(np.dot(self.cost, x)) + self.objective_offset


@dataclass
class CallbackResult:
    """What a lazy callback returns at an integer point.

    ``cuts`` empty means the point is accepted as is. ``candidate`` is an
    optional ``(objective, x)`` with the true objective of the point, passed
    to the solver as a primal solution.
    """

    cuts: list[Row] = field(default_factory=list)
    candidate: tuple[float, np.ndarray] | None = None


Callback = Callable[[np.ndarray], CallbackResult]


@dataclass
class SolveReport:
    status: str = "Infeasible"
    objective: float = math.inf
    bound: float = -math.inf
    gap: float = math.inf
    nodes: int = 0
    benders_cuts: int = 0
    initial_cuts: int = 0
    sim_count: int = 0
    heuristic: float = math.nan
    times: dict = field(default_factory=lambda: dict.fromkeys(
        ("initial", "solver", "callback", "simulation", "total"), 0.0))
    x: np.ndarray | None = None
    lp_solves: int = 0
    incumbents: list = field(default_factory=list)

    CSV_COLUMNS = ("objective", "heuristic", "initial_time", "solver_time", "callback_time",
                   "total_time", "sim_time", "initial_cuts", "benders_cuts", "nodes")

    def csv_row(self) -> list:
        t = self.times
        return [self.objective, self.heuristic, t["initial"], t["solver"], t["callback"],
                t["total"], t["simulation"], self.initial_cuts, self.benders_cuts, self.nodes]


def relative_gap(objective: float, bound: float) -> float:
    if not math.isfinite(objective):
        return math.inf
    if not math.isfinite(bound):
        return math.inf
    return max(0.0, (objective - bound) / max(abs(objective), 1e-10))


@dataclass(order=True)
class _Node:
    bound: float
    order: int
    depth: int = field(compare=False)
    lb: np.ndarray = field(compare=False, repr=False)
    ub: np.ndarray = field(compare=False, repr=False)


class BranchAndBound:
    def __init__(self, model: MasterModel, gap_tolerance: float = 1e-9):
        self.model = model
        self.gap_tolerance = gap_tolerance
        self.int_cols = np.array([i for i, f in enumerate(model.integer) if f], dtype=np.int32)
        grouped = {g.y for g in model.groups} | {z for g in model.groups for z in g.z}
        self.plain_int = [i for i in self.int_cols if i not in grouped]
        self._pos = {int(c): p for p, c in enumerate(self.int_cols)}
        self._build()

    def _build(self):
        m = self.model
        h = highspy.Highs()
        h.setOptionValue("output_flag", False)
        h.setOptionValue("primal_feasibility_tolerance", FEAS_TOL)
        h.setOptionValue("dual_feasibility_tolerance", FEAS_TOL)
        h.setOptionValue("presolve", "off")
        n = m.n_cols
        h.addVars(n, np.array(m.lb), np.array(m.ub))
        h.changeColsCost(n, np.arange(n, dtype=np.int32), np.array(m.cost))
        self.h = h
        self.n_static_rows = 0
        self.add_rows(m.rows)
        self.n_static_rows = len(m.rows)

    def add_rows(self, rows: Sequence[Row]) -> None:
        if not rows:
            return
        starts, idx, val = [], [], []
        nnz = 0
        for r in rows:
            starts.append(nnz)
            idx.append(r.index)
            val.append(r.value)
            nnz += len(r.index)
        self.h.addRows(len(rows), np.array([r.lb for r in rows]), np.array([r.ub for r in rows]), nnz,
                       np.array(starts, dtype=np.int32), np.concatenate(idx).astype(np.int32),
                       np.concatenate(val).astype(float))

    # -- LP -----------------------------------------------------------------

    def _set_bounds(self, lb: np.ndarray, ub: np.ndarray) -> None:
        self.h.changeColsBounds(len(self.int_cols), self.int_cols, lb, ub)

    def _solve_lp(self) -> tuple[str, float, np.ndarray | None]:
        h = self.h
        h.run()
        status = h.getModelStatus()
        if status == highspy.HighsModelStatus.kOptimal:
            x = np.array(h.getSolution().col_value)
            return "optimal", h.getInfo().objective_function_value + self.model.objective_offset, x
        if status in (highspy.HighsModelStatus.kInfeasible,):
            return "infeasible", math.inf, None
        # numerical trouble: retry from scratch once
        h.clearSolver()
        h.run()
        status = h.getModelStatus()
        if status == highspy.HighsModelStatus.kOptimal:
            x = np.array(h.getSolution().col_value)
            return "optimal", h.getInfo().objective_function_value + self.model.objective_offset, x
        if status == highspy.HighsModelStatus.kInfeasible:
            return "infeasible", math.inf, None
        raise RuntimeError(f"LP solve failed with status {status}")

    def lp_relax_bound(self, lb: np.ndarray | None = None, ub: np.ndarray | None = None) -> float:
        """LP optimum over the node box (root box by default) with all current rows."""
        lb, ub = self._root_box() if lb is None else (lb, ub)
        self._set_bounds(*self._tighten(lb, ub))
        status, obj, _ = self._solve_lp()
        return obj

    # -- integrality and branching -------------------------------------------

    def _root_box(self):
        m = self.model
        lb = np.array([m.lb[i] for i in self.int_cols], dtype=float)
        ub = np.array([m.ub[i] for i in self.int_cols], dtype=float)
        return lb, ub

    def _tighten(self, lb, ub):
        """Fix level indicators outside each group's current y range to zero."""
        lb, ub = lb.copy(), ub.copy()
        pos = self._pos
        for g in self.model.groups:
            lo, hi = lb[pos[g.y]], ub[pos[g.y]]
            for z, lv in zip(g.z, g.levels):
                if lv < lo or lv > hi:
                    ub[pos[z]] = 0.0
        return lb, ub

    def _branch_choice(self, x: np.ndarray):
        """Return ``('group', g, split)``, ``('int', col, value)`` or None if integral."""
        best = None
        for gi, g in enumerate(self.model.groups):
            zv = x[g.z]
            if np.all(np.minimum(zv, 1 - zv) <= INT_TOL) and abs(x[g.y] - round(x[g.y])) <= INT_TOL:
                continue
            cum = np.cumsum(zv)
            # split after the level whose cumulative mass is closest to one half
            candidates = [(abs(cum[i] - 0.5), i) for i in range(len(zv) - 1)
                          if cum[i] > INT_TOL and cum[i] < 1 - INT_TOL]
            if not candidates:
                yv = x[g.y]
                split = int(math.floor(yv))
                score = min(yv - split, split + 1 - yv)
                if score <= INT_TOL:
                    continue
            else:
                dist, i = min(candidates)
                split = g.levels[i]
                score = 0.5 - dist
            if best is None or score > best[0] + 1e-12:
                best = (score, gi, split)
        if best is not None:
            return ("group", best[1], best[2])
        best = None
        for c in self.plain_int:
            frac = x[c] - math.floor(x[c])
            score = min(frac, 1 - frac)
            if score > INT_TOL and (best is None or score > best[0] + 1e-12):
                best = (score, c)
        if best is not None:
            return ("int", best[1], x[best[1]])
        return None

    def _children(self, node_lb, node_ub, choice, x):
        pos = self._pos
        kind, what, split = choice
        if kind == "group":
            g = self.model.groups[what]
            p = pos[g.y]
            down_ub = node_ub.copy(); down_ub[p] = split
            up_lb = node_lb.copy(); up_lb[p] = split + 1
            zv = x[g.z]
            down_mass = float(sum(v for v, lv in zip(zv, g.levels) if lv <= split))
            down = (node_lb.copy(), down_ub)
            up = (up_lb, node_ub.copy())
            return (down, up) if down_mass >= 0.5 else (up, down)
        p = pos[what]
        down_ub = node_ub.copy(); down_ub[p] = math.floor(split)
        up_lb = node_lb.copy(); up_lb[p] = math.floor(split) + 1
        down = (node_lb.copy(), down_ub)
        up = (up_lb, node_ub.copy())
        return (down, up) if split - math.floor(split) <= 0.5 else (up, down)

    def _rounded(self, x: np.ndarray) -> np.ndarray:
        x = x.copy()
        x[self.int_cols] = np.round(x[self.int_cols])
        return x

    # -- main loop -------------------------------------------------------------

    def solve(self, callback: Callback | None = None, incumbents: Sequence[tuple[float, np.ndarray]] = (),
              time_limit: float = math.inf, node_limit: int | None = None) -> SolveReport:
        t_start = time.perf_counter()
        report = SolveReport()
        cb_time = 0.0
        best_obj, best_x = math.inf, None
        for obj, x in incumbents:
            if obj < best_obj:
                best_obj, best_x = obj, x
                report.incumbents.append(obj)

        def prune_level(obj_value):
            if not math.isfinite(best_obj):
                return math.inf
            return best_obj - self.gap_tolerance * max(abs(best_obj), 1.0)

        root_lb, root_ub = self._root_box()
        counter = 0
        heap: list[_Node] = [_Node(-math.inf, counter, 0, root_lb, root_ub)]
        plunge: _Node | None = None
        status = None
        hit_limit = False

        while heap or plunge is not None:
            if plunge is not None:
                node, plunge = plunge, None
            else:
                node = heapq.heappop(heap)
            if node.bound >= prune_level(best_obj):
                continue
            if report.nodes > 0 and (time.perf_counter() - t_start >= time_limit
                                     or (node_limit is not None and report.nodes >= node_limit)):
                heapq.heappush(heap, node)
                hit_limit = True
                break
            report.nodes += 1
            self._set_bounds(*self._tighten(node.lb, node.ub))
            node_bound = node.bound
            new_incumbent = False
            stalled = 0
            last = None
            while True:
                status, obj, x = self._solve_lp()
                report.lp_solves += 1
                if status == "infeasible":
                    node_bound = math.inf
                    break
                node_bound = max(node_bound, obj)
                if node_bound >= prune_level(best_obj):
                    break
                choice = self._branch_choice(x)
                if choice is not None:
                    break
                xr = self._rounded(x)
                if callback is None:
                    res = CallbackResult()
                else:
                    t0 = time.perf_counter()
                    res = callback(xr)
                    cb_time += time.perf_counter() - t0
                if res.candidate is not None and res.candidate[0] < best_obj - 1e-12:
                    best_obj, best_x = res.candidate[0], res.candidate[1]
                    report.incumbents.append(best_obj)
                    new_incumbent = True
                if not res.cuts:
                    if res.candidate is None and obj < best_obj:
                        best_obj, best_x = obj, xr
                        report.incumbents.append(best_obj)
                        new_incumbent = True
                    node_bound = math.inf
                    break
                report.benders_cuts += len(res.cuts)
                self.add_rows(res.cuts)
                key = tuple(xr[self.int_cols])
                stalled = stalled + 1 if key == last else 0
                last = key
                if stalled > 50:
                    raise RuntimeError("lazy cuts do not separate the integer point")
                if time.perf_counter() - t_start >= time_limit:
                    hit_limit = True
                    break
            if hit_limit:
                heapq.heappush(heap, _Node(node_bound, node.order, node.depth, node.lb, node.ub))
                break
            if node_bound >= prune_level(best_obj) or status == "infeasible":
                continue
            first, second = self._children(node.lb, node.ub, choice, x)
            counter += 1
            a = _Node(node_bound, counter, node.depth + 1, *first)
            counter += 1
            b = _Node(node_bound, counter, node.depth + 1, *second)
            heapq.heappush(heap, b)
            if new_incumbent or best_x is None:
                plunge = a
            else:
                heapq.heappush(heap, a)

        open_bounds = [n.bound for n in heap if n.bound < prune_level(best_obj)]
        if open_bounds:
            bound = min(open_bounds)
        else:
            bound = best_obj
        report.objective = best_obj
        report.bound = min(bound, best_obj)
        report.x = best_x
        report.gap = relative_gap(best_obj, report.bound)
        if best_x is None:
            report.status = "TimeLimit" if hit_limit else "Infeasible"
            report.bound = bound if open_bounds else math.inf
        elif hit_limit and report.gap > self.gap_tolerance:
            report.status = "TimeLimit"
        else:
            report.status = "Optimal"
        total = time.perf_counter() - t_start
        report.times["callback"] = cb_time
        report.times["solver"] = total - cb_time
        report.times["total"] = total
        return report
