"""Airport check-in counter allocation.

Counters are opened per period; passengers queue FCFS at a common pool of
counters. The cost is a fixed charge per open counter-period plus a charge
per minute of passenger waiting. Service-level rows keep enough capacity
after every period for the latest arrivals and before every deadline for
the flights already closed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import LinearConstraint, milp

from ..core import MICRO, Allocation, LevelDomain, ObjectiveSpec
from ..engine import SimulationProblem
from ..mip import INF, MasterModel
from ..queue import Boundary, QueueScenario, delay_by_period
from ..rng import stream

PASSENGERS = (150, 210, 240, 180, 270, 150, 210, 300, 180, 270)
START_PERIODS = (0, 2, 4, 4, 6, 8, 10, 12, 12, 14)
ARRIVAL_PROFILE = (0.05, 0.10, 0.20, 0.30, 0.20, 0.15, 0.0)
Q_SWEEP = (5, 10, 15, 20, 25, 30, 35, 40)


@dataclass
class Flight:
    passengers: int
    start_period: int  # 0-based period in which check-in opens
    deadline_period: int  # 1-based; check-in closes at the end of this period


@dataclass
class AccaInstance:
    flights: list[Flight]
    periods: int = 21
    L: int = 30  # minutes
    M: int = 20
    m: int = 0
    D: float = 40.0
    Q: float = 40.0
    arrival_profile: tuple = ARRIVAL_PROFILE
    service_mean: float = 2.0  # minutes
    scenarios: list[QueueScenario] = field(default_factory=list)
    seed: int | None = None

    def __post_init__(self):
        if abs(sum(self.arrival_profile) - 1.0) > 1e-9:
            raise ValueError("arrival profile must sum to one")
        for f in self.flights:
            if not 1 <= f.deadline_period <= self.periods:
                raise ValueError(f"deadline period {f.deadline_period} outside the horizon")

    @property
    def period_length(self) -> int:
        return self.L * MICRO

    @property
    def boundary(self) -> Boundary:
        return Boundary.penalty(self.periods * self.period_length)


@dataclass
class ServiceLevelBounds:
    A: np.ndarray  # minutes of service still to come from period t on
    B: np.ndarray  # minutes of service owed by flights closed by the end of period t


def make_flights(passengers=PASSENGERS, start_periods=START_PERIODS, window: int = 7) -> list[Flight]:
    return [Flight(int(p), int(s), int(s) + window) for p, s in zip(passengers, start_periods)]


def _sample_scenario(inst: AccaInstance, rng: np.random.Generator) -> QueueScenario:
    L = inst.L
    release, processing, tags = [], [], []
    profile = np.asarray(inst.arrival_profile, dtype=float)
    for fi, f in enumerate(inst.flights):
        w = rng.choice(len(profile), size=f.passengers, p=profile)
        offset = rng.integers(1, L + 1, size=f.passengers)
        minute = L * (w + f.start_period) + offset
        service = rng.exponential(inst.service_mean, size=f.passengers)
        release.append(minute * MICRO)
        processing.append(np.rint(service * MICRO).astype(np.int64))
        tags.append(np.full(f.passengers, fi))
    if not release:
        z = np.zeros(0, dtype=np.int64)
        return QueueScenario(z, z, inst.periods, inst.period_length, inst.boundary, z)
    return QueueScenario(np.concatenate(release), np.concatenate(processing), inst.periods,
                         inst.period_length, inst.boundary, np.concatenate(tags))


def generate_acca(seed: int, n_scenarios: int, Q: float = 40.0, flights: list[Flight] | None = None,
                  periods: int = 21, L: int = 30, M: int = 20, D: float = 40.0,
                  arrival_profile=ARRIVAL_PROFILE, service_mean: float = 2.0) -> AccaInstance:
    """Sample ``n_scenarios`` passenger scenarios; defaults give the ten-flight day."""
    flights = make_flights(window=len(arrival_profile)) if flights is None else flights
    inst = AccaInstance(flights, periods, L, M, 0, D, Q, tuple(arrival_profile), service_mean, seed=seed)
    horizon = periods * L
    for f in flights:
        last = L * (len(arrival_profile) - 1 + f.start_period) + L
        if last >= horizon and arrival_profile[-1] > 0:
            raise ValueError("arrival window runs past the horizon")
    inst.scenarios = [_sample_scenario(inst, stream(seed, f"scenario:{s}")) for s in range(n_scenarios)]
    return inst


def generate_toy_acca(seed: int, periods: int = 4, M: int = 3, n_scenarios: int = 1,
                      Q: float = 40.0) -> AccaInstance:
    """Small instance for exhaustive checks: a few flights with short arrival windows."""
    rng = stream(seed, "instance")
    profile = (0.4, 0.6, 0.0)
    n_flights = 2 if periods <= 4 else 3
    starts = sorted(int(v) for v in rng.integers(0, periods - 2, size=n_flights))
    passengers = [int(v) for v in rng.integers(10, 26, size=n_flights)]
    flights = make_flights(passengers, starts, window=len(profile))
    flights = [Flight(f.passengers, f.start_period, min(f.deadline_period, periods)) for f in flights]
    return generate_acca(seed, n_scenarios, Q, flights, periods, 30, M, 40.0, profile, 2.0)


def service_bounds(inst: AccaInstance) -> ServiceLevelBounds:
    T = inst.periods
    A = np.zeros(T)
    B = np.zeros(T)
    Lu = inst.period_length
    for sc in inst.scenarios:
        period = sc.release // Lu
        mins = sc.processing / MICRO
        by_period = np.bincount(period, weights=mins, minlength=T)[:T]
        A = np.maximum(A, np.cumsum(by_period[::-1])[::-1])
        deadline = np.array([inst.flights[int(f)].deadline_period for f in sc.tags], dtype=np.int64) \
            if sc.n_jobs else np.zeros(0, dtype=np.int64)
        by_deadline = np.bincount(deadline - 1, weights=mins, minlength=T)[:T]
        B = np.maximum(B, np.cumsum(by_deadline))
    return ServiceLevelBounds(A, B)


def satisfies_bounds(y, bounds: ServiceLevelBounds, L: int, tol: float = 1e-9) -> bool:
    cap = L * np.asarray(y, dtype=float)
    after = np.cumsum(cap[::-1])[::-1]
    before = np.cumsum(cap)
    return bool(np.all(after >= bounds.A - tol) and np.all(before >= bounds.B - tol))


def count_feasible_lower_bound(witness, M: int) -> int:
    """Number of allocations componentwise above ``witness`` (all of them feasible
    when the witness is, since both service rows only get looser)."""
    out = 1
    for v in witness:
        if not 0 <= v <= M:
            raise ValueError(f"witness level {v} outside [0, {M}]")
        out *= M + 1 - int(v)
    return out


def instance_feasible_count_bound(inst: AccaInstance, witness) -> int:
    if not satisfies_bounds(witness, service_bounds(inst), inst.L):
        raise ValueError("witness violates the service-level rows")
    return count_feasible_lower_bound(witness, inst.M)


def minimal_witness(inst: AccaInstance) -> Allocation:
    """Feasible allocation with the fewest counter-periods, and among those the
    smallest peak number of counters."""
    T, L = inst.periods, inst.L
    b = service_bounds(inst)
    rows, lo = [], []
    for t in range(T):
        r = np.zeros(T); r[t:] = L
        rows.append(r); lo.append(b.A[t])
        r = np.zeros(T); r[:t + 1] = L
        rows.append(r); lo.append(b.B[t])
    rows, lo = np.array(rows), np.array(lo)
    res = milp(np.ones(T), constraints=LinearConstraint(rows, lo, np.inf),
               integrality=np.ones(T), bounds=(inst.m, inst.M))
    if res.x is None:
        raise ValueError("service rows cannot be met with the available counters")
    total = round(res.fun)
    # second stage over (y, peak): min peak s.t. sum y = total, y <= peak
    A = np.zeros((2 * T + 1 + T, T + 1))
    A[:2 * T, :T] = rows
    A[2 * T, :T] = 1.0
    for t in range(T):
        A[2 * T + 1 + t, t] = 1.0
        A[2 * T + 1 + t, T] = -1.0
    lb = np.concatenate([lo, [total], np.full(T, -np.inf)])
    ub = np.concatenate([np.full(2 * T, np.inf), [total], np.zeros(T)])
    c = np.zeros(T + 1); c[T] = 1.0
    res = milp(c, constraints=LinearConstraint(A, lb, ub), integrality=np.ones(T + 1),
               bounds=(np.r_[np.full(T, inst.m), 0], np.r_[np.full(T, inst.M), inst.M]))
    return tuple(int(round(v)) for v in res.x[:T])


class AccaProblem(SimulationProblem):
    problem_type = "acca"
    monotone = True

    def __init__(self, inst: AccaInstance, objective_mode: str = "mean", w0=1.0, w1=0.0, beta=0.5):
        self.inst = inst
        self.n = inst.periods
        self.domain = LevelDomain(inst.m, inst.M)
        self.n_scenarios = len(inst.scenarios)
        self.anchors = np.arange(inst.periods)
        weights = np.full(inst.periods, inst.Q / inst.L)
        cost = np.full(inst.periods, float(inst.D))
        S = max(1, self.n_scenarios)
        if objective_mode == "cvar":
            self.objective = ObjectiveSpec.cvar(cost, weights, S, w0, w1, beta, measure_scale=1.0 / MICRO)
        else:
            self.objective = ObjectiveSpec(cost, weights, S, measure_scale=1.0 / MICRO)
        self.bounds = service_bounds(inst)
        if self.bounds.A[0] > inst.L * inst.M * inst.periods + 1e-9:
            raise ValueError("instance infeasible: total service exceeds maximum capacity")

    def simulate(self, s: int, y) -> np.ndarray:
        return delay_by_period(self.inst.scenarios[s], y)

    def initial_partners(self, key: int) -> list[int]:
        return [key - 1] if key >= 1 else []

    def add_constraints(self, model: MasterModel, y_cols: list[int]) -> None:
        T, L = self.n, float(self.inst.L)
        for t in range(T):
            model.add_row(y_cols[t:], [L] * (T - t), self.bounds.A[t], INF)
            model.add_row(y_cols[:t + 1], [L] * (t + 1), self.bounds.B[t], INF)

    def is_feasible(self, y) -> bool:
        return self.domain.contains(y) and len(y) == self.n and \
            satisfies_bounds(y, self.bounds, self.inst.L)


# -- serialization ------------------------------------------------------------------


def to_json(inst: AccaInstance) -> dict:
    return {
        "flights": [{"passengers": f.passengers, "start_period": f.start_period,
                     "deadline_period": f.deadline_period} for f in inst.flights],
        "periods": inst.periods, "L": inst.L, "M": inst.M, "m": inst.m, "D": inst.D, "Q": inst.Q,
        "arrival_profile": list(inst.arrival_profile), "service_mean": inst.service_mean,
        "seed": inst.seed,
    }


def from_json(block: dict, scenarios: list[dict]) -> AccaInstance:
    flights = [Flight(f["passengers"], f["start_period"], f["deadline_period"]) for f in block["flights"]]
    inst = AccaInstance(flights, block["periods"], block["L"], block["M"], block.get("m", 0), block["D"],
                        block["Q"], tuple(block["arrival_profile"]), block["service_mean"],
                        seed=block.get("seed"))
    inst.scenarios = [QueueScenario.from_json(sc, inst.periods, inst.period_length, inst.boundary)
                      for sc in scenarios]
    return inst

