"""Nursing-home shift scheduling.

Care workers are rostered on shifts of a few fixed lengths starting on the
hour. The staffing level of a period is the number of shifts covering it.
Requests (scheduled ones with known preferred start, plus random walk-ins)
are served FCFS; whatever is left at the end of the day is handled by the
night staff, and all delay counts against the roster.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, milp

from ..core import MICRO, Allocation, LevelDomain, ObjectiveSpec
from ..engine import SimulationProblem
from ..mip import INF, MasterModel
from ..queue import Boundary, QueueScenario, delay_by_period
from ..rng import stream

# relative weight of each hour (7AM..11PM) for preferred start times of
# scheduled care: a morning peak and a smaller evening peak
SCHEDULED_PROFILE = (6, 12, 12, 9, 5, 4, 4, 3, 3, 4, 7, 10, 10, 6, 3, 2)
PRESETS = {"standard": (20.0, 0.8), "hard": (5.0, 0.5)}


@dataclass
class ShiftCatalog:
    lengths: tuple  # hours
    periods: int
    L: int  # minutes
    shifts: list[tuple[int, int]] = field(default_factory=list)  # (start period, length in hours)
    alpha: np.ndarray | None = None  # (periods, shifts) 0/1

    @property
    def n_shifts(self) -> int:
        return len(self.shifts)

    def levels(self, x) -> np.ndarray:
        return self.alpha @ np.asarray(x, dtype=np.int64)


def build_shift_catalog(lengths, periods: int, L: int) -> ShiftCatalog:
    if 60 % L:
        raise ValueError("period length must divide 60 minutes")
    shifts = []
    for h in sorted(lengths):
        span = h * 60 // L
        if h * 60 % L:
            raise ValueError(f"shift length {h}h is not a whole number of periods")
        for start in range(0, periods - span + 1):
            shifts.append((start, h))
    alpha = np.zeros((periods, len(shifts)), dtype=np.int64)
    for g, (start, h) in enumerate(shifts):
        alpha[start:start + h * 60 // L, g] = 1
    return ShiftCatalog(tuple(sorted(lengths)), periods, L, shifts, alpha)


@dataclass
class UnscheduledLaw:
    rate: float = 20.0  # requests per hour
    short_prob: float = 0.8
    short_mean: float = 1.89  # minutes
    long_mean: float = 9.28

    def durations(self, rng: np.random.Generator, count: int) -> np.ndarray:
        short = rng.random(count) < self.short_prob
        mean = np.where(short, self.short_mean, self.long_mean)
        return np.rint(rng.exponential(1.0, size=count) * mean * MICRO).astype(np.int64)


@dataclass
class NhssInstance:
    catalog: ShiftCatalog
    periods: int = 16
    L: int = 60
    m: int = 2
    M: int = 20
    h_max: float = 80.0
    night_staff: int = 2
    overtime_hours: int = 8
    scheduled_release: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    scheduled_duration: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    law: UnscheduledLaw = field(default_factory=UnscheduledLaw)
    scenarios: list[QueueScenario] = field(default_factory=list)
    seed: int | None = None

    @property
    def period_length(self) -> int:
        return self.L * MICRO

    @property
    def boundary(self) -> Boundary:
        return Boundary.overtime(self.night_staff, self.overtime_hours * 60 // self.L)


def _poisson_times(rng: np.random.Generator, rate_per_hour: float, horizon_min: float) -> np.ndarray:
    if rate_per_hour <= 0:
        return np.zeros(0)
    out, t = [], 0.0
    scale = 60.0 / rate_per_hour
    while True:
        t += rng.exponential(scale)
        if t >= horizon_min:
            return np.array(out)
        out.append(t)


def scheduled_requests(rng: np.random.Generator, count: int, periods: int, L: int,
                       law: UnscheduledLaw, profile=SCHEDULED_PROFILE) -> tuple[np.ndarray, np.ndarray]:
    """Preferred start times from the hourly profile, durations from the request mixture."""
    hours = periods * L / 60
    weights = np.resize(np.asarray(profile, dtype=float), int(np.ceil(hours)))
    weights /= weights.sum()
    hour = rng.choice(len(weights), size=count, p=weights)
    minute = hour * 60 + rng.uniform(0, 60, size=count)
    release = np.minimum(np.rint(minute * MICRO).astype(np.int64), periods * L * MICRO - 1)
    return np.sort(release), law.durations(rng, count)


def load_scheduled_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Rows ``start_minute,duration_microunits``."""
    release, duration = [], []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            release.append(int(round(float(row["start_minute"]) * MICRO)))
            duration.append(int(row["duration_microunits"]))
    return np.array(release, dtype=np.int64), np.array(duration, dtype=np.int64)


def _sample_scenario(inst: NhssInstance, rng: np.random.Generator) -> QueueScenario:
    times = _poisson_times(rng, inst.law.rate, inst.periods * inst.L)
    release = np.rint(times * MICRO).astype(np.int64)
    release = np.minimum(release, inst.periods * inst.period_length - 1)
    duration = inst.law.durations(rng, len(release))
    tags = np.r_[np.zeros(len(inst.scheduled_release), dtype=np.int64), np.ones(len(release), dtype=np.int64)]
    return QueueScenario(np.r_[inst.scheduled_release, release], np.r_[inst.scheduled_duration, duration],
                         inst.periods, inst.period_length, inst.boundary, tags)


def generate_nhss(seed: int, n_scenarios: int, rate: float = 20.0, short_prob: float = 0.8,
                  n_scheduled: int = 224, periods: int = 16, L: int = 60, lengths=(4, 8), m: int = 2,
                  M: int = 20, h_max: float = 80.0, night_staff: int = 2, scheduled_csv=None,
                  profile=SCHEDULED_PROFILE) -> NhssInstance:
    law = UnscheduledLaw(rate, short_prob)
    inst = NhssInstance(build_shift_catalog(lengths, periods, L), periods, L, m, M, h_max, night_staff,
                        law=law, seed=seed)
    if scheduled_csv is not None:
        inst.scheduled_release, inst.scheduled_duration = load_scheduled_csv(scheduled_csv)
    else:
        inst.scheduled_release, inst.scheduled_duration = scheduled_requests(
            stream(seed, "instance"), n_scheduled, periods, L, law, profile)
    inst.scenarios = [_sample_scenario(inst, stream(seed, f"scenario:{s}")) for s in range(n_scenarios)]
    return inst


def generate_toy_nhss(seed: int, n_scenarios: int = 1) -> NhssInstance:
    """Six one-hour periods, shifts of 2 or 3 hours, small request volume."""
    return generate_nhss(seed, n_scenarios, rate=6.0, short_prob=0.5, n_scheduled=12, periods=6, L=60,
                         lengths=(2, 3), m=1, M=4, h_max=14, night_staff=1,
                         profile=(4, 3, 2, 2, 3, 4))


# -- shift feasibility ------------------------------------------------------------------


def shift_decomposition(catalog: ShiftCatalog, y) -> np.ndarray | None:
    """Nonnegative integer shift counts x with alpha x = y, or None."""
    y = np.asarray(y, dtype=float)
    G = catalog.n_shifts
    res = milp(np.ones(G), constraints=LinearConstraint(catalog.alpha, y, y),
               integrality=np.ones(G), bounds=Bounds(0, np.inf))
    if res.x is None:
        return None
    return np.rint(res.x).astype(np.int64)


def schedule_images(catalog: ShiftCatalog, m: int, M: int, h_max: float) -> set[Allocation]:
    """Every staffing vector reachable by a roster within the hours budget
    (enumerates shift counts directly; small catalogs only)."""
    hours = [h for _, h in catalog.shifts]
    budget = int(h_max)  # sum of shift hours equals staffed hours
    images = set()
    G = catalog.n_shifts

    def rec(g, left, x):
        if g == G:
            y = catalog.alpha @ np.array(x, dtype=np.int64)
            if np.all(y >= m) and np.all(y <= M):
                images.add(tuple(int(v) for v in y))
            return
        for c in range(left // hours[g] + 1):
            x.append(c)
            rec(g + 1, left - c * hours[g], x)
            x.pop()

    rec(0, budget, [])
    return images


class NhssProblem(SimulationProblem):
    problem_type = "nhss"
    monotone = True

    def __init__(self, inst: NhssInstance, objective_mode: str = "mean", w0=1.0, w1=0.0, beta=0.5):
        self.inst = inst
        self.catalog = inst.catalog
        self.n = inst.periods
        self.domain = LevelDomain(inst.m, inst.M)
        self.n_scenarios = len(inst.scenarios)
        self.anchors = np.arange(inst.periods)
        S = max(1, self.n_scenarios)
        cost, weights = np.zeros(self.n), np.ones(self.n)
        if objective_mode == "cvar":
            self.objective = ObjectiveSpec.cvar(cost, weights, S, w0, w1, beta, measure_scale=1.0 / MICRO)
        else:
            self.objective = ObjectiveSpec(cost, weights, S, measure_scale=1.0 / MICRO)
        self.x_cols: list[int] = []

    def simulate(self, s: int, y) -> np.ndarray:
        return delay_by_period(self.inst.scenarios[s], y)

    def initial_partners(self, key: int) -> list[int]:
        return [key - 1] if key >= 1 else []

    def add_constraints(self, model: MasterModel, y_cols: list[int]) -> None:
        inst, cat = self.inst, self.catalog
        self.x_cols = [model.add_var(0, inst.M, 0.0, integer=True, name=f"x[{s},{h}]")
                       for s, h in cat.shifts]
        for t in range(self.n):
            cover = [self.x_cols[g] for g in range(cat.n_shifts) if cat.alpha[t, g]]
            model.add_row([y_cols[t]] + cover, [1.0] + [-1.0] * len(cover), 0.0, 0.0)
        model.add_row(y_cols, [float(inst.L)] * self.n, -INF, 60.0 * inst.h_max)

    def is_feasible(self, y) -> bool:
        inst = self.inst
        if len(y) != self.n or not self.domain.contains(y):
            return False
        if inst.L * sum(y) > 60.0 * inst.h_max + 1e-9:
            return False
        return shift_decomposition(self.catalog, y) is not None

    def enumerate_feasible(self):
        images = schedule_images(self.catalog, self.inst.m, self.inst.M, self.inst.h_max)
        yield from sorted(y for y in images if self.inst.L * sum(y) <= 60.0 * self.inst.h_max + 1e-9)

    def warm_start(self) -> Allocation:
        return proportional_heuristic(self.inst)


def workload_targets(inst: NhssInstance) -> np.ndarray:
    """Average staff needed per period to clear the work released in it."""
    T = inst.periods
    total = np.zeros(T)
    for sc in inst.scenarios:
        p = sc.release // inst.period_length
        total += np.bincount(p, weights=sc.processing.astype(float), minlength=T)[:T]
    return total / (inst.period_length * max(1, len(inst.scenarios)))


def proportional_heuristic(inst: NhssInstance) -> Allocation:
    """Roster whose staffing is closest (mean absolute deviation) to the
    workload targets; ties go to fewer staffed hours."""
    cat = inst.catalog
    T, G = inst.periods, cat.n_shifts
    target = workload_targets(inst)
    # columns: y (T), x (G), d_plus (T), d_minus (T)
    n = 3 * T + G
    rows, lo, hi = [], [], []
    for t in range(T):
        r = np.zeros(n); r[t] = 1.0; r[T:T + G] = -cat.alpha[t]
        rows.append(r); lo.append(0.0); hi.append(0.0)
        r = np.zeros(n); r[t] = 1.0; r[T + G + t] = -1.0; r[2 * T + G + t] = 1.0
        rows.append(r); lo.append(target[t]); hi.append(target[t])
    r = np.zeros(n); r[:T] = inst.L
    rows.append(r); lo.append(-np.inf); hi.append(60.0 * inst.h_max)
    A = np.array(rows)
    lb = np.r_[np.full(T, inst.m), np.zeros(G + 2 * T)]
    ub = np.r_[np.full(T, inst.M), np.full(G, inst.M), np.full(2 * T, np.inf)]
    integrality = np.r_[np.ones(T + G), np.zeros(2 * T)]
    c = np.r_[np.zeros(T + G), np.ones(2 * T) / T]
    res = milp(c, constraints=LinearConstraint(A, lo, hi), integrality=integrality, bounds=Bounds(lb, ub))
    if res.x is None:
        raise ValueError("no roster satisfies the staffing bounds and hours budget")
    best = res.fun
    # second stage: fewest staffed hours among near-optimal deviations
    A2 = np.vstack([A, c])
    res2 = milp(np.r_[np.ones(T), np.zeros(G + 2 * T)],
                constraints=LinearConstraint(A2, np.r_[lo, -np.inf], np.r_[hi, best + 1e-7]),
                integrality=integrality, bounds=Bounds(lb, ub))
    x = res2.x if res2.x is not None else res.x
    return tuple(int(round(v)) for v in x[:T])


# -- serialization ------------------------------------------------------------------


def to_json(inst: NhssInstance) -> dict:
    return {
        "periods": inst.periods, "L": inst.L, "m": inst.m, "M": inst.M, "h_max": inst.h_max,
        "night_staff": inst.night_staff, "overtime_hours": inst.overtime_hours,
        "shift_lengths": list(inst.catalog.lengths),
        "scheduled": [{"release": int(r), "processing": int(p)}
                      for r, p in zip(inst.scheduled_release, inst.scheduled_duration)],
        "unscheduled_law": {"rate": inst.law.rate, "short_prob": inst.law.short_prob,
                            "short_mean": inst.law.short_mean, "long_mean": inst.law.long_mean},
        "seed": inst.seed,
    }


def from_json(block: dict, scenarios: list[dict]) -> NhssInstance:
    cat = build_shift_catalog(block["shift_lengths"], block["periods"], block["L"])
    law = UnscheduledLaw(**block["unscheduled_law"])
    inst = NhssInstance(cat, block["periods"], block["L"], block["m"], block["M"], block["h_max"],
                        block["night_staff"], block.get("overtime_hours", 8), law=law, seed=block.get("seed"))
    inst.scheduled_release = np.array([j["release"] for j in block["scheduled"]], dtype=np.int64)
    inst.scheduled_duration = np.array([j["processing"] for j in block["scheduled"]], dtype=np.int64)
    inst.scenarios = [QueueScenario.from_json(sc, inst.periods, inst.period_length, inst.boundary)
                      for sc in scenarios]
    return inst
