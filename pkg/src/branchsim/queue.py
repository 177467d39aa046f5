"""FCFS multiserver queue with a time-varying number of agents.

Periods are half-open intervals ``[t L, (t+1) L)`` (0-based ``t``). Job ``j``
starts at the earliest instant ``tau >= max(start[j-1], release[j])`` at which
fewer than ``y[period(tau)]`` earlier jobs are still in service. A started job
always runs to completion, even if the agent count drops meanwhile; in that
case no new job starts until the in-service count falls below the new level.

All times are integers in micro-units (1/1000 minute).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Sequence

import numba as nb
import numpy as np

from .core import MICRO

PENALTY = 0
OVERTIME = 1


@dataclass(frozen=True)
class Boundary:
    """What happens to jobs still waiting at the end of the horizon.

    ``penalty``: each unstarted job contributes ``per_unserved`` time units
    instead of its delay. ``overtime``: ``extra_periods`` more periods staffed
    by ``extra_agents`` are appended; a job still waiting after those is
    treated as starting at the end of the overtime.
    """

    kind: str = "penalty"
    per_unserved: int = 0
    extra_agents: int = 0
    extra_periods: int = 0

    @classmethod
    def penalty(cls, per_unserved: int) -> "Boundary":
        return cls("penalty", per_unserved=int(per_unserved))

    @classmethod
    def overtime(cls, extra_agents: int, extra_periods: int) -> "Boundary":
        return cls("overtime", extra_agents=int(extra_agents), extra_periods=int(extra_periods))

    def __post_init__(self):
        if self.kind not in ("penalty", "overtime"):
            raise ValueError(f"unknown boundary kind {self.kind!r}")

    def to_json(self) -> dict:
        if self.kind == "penalty":
            return {"penalty": {"per_unserved": self.per_unserved}}
        return {"overtime": {"extra_agents": self.extra_agents, "extra_periods": self.extra_periods}}

    @classmethod
    def from_json(cls, d: dict) -> "Boundary":
        if "penalty" in d:
            return cls.penalty(d["penalty"]["per_unserved"])
        o = d["overtime"]
        return cls.overtime(o["extra_agents"], o["extra_periods"])


@dataclass
class QueueScenario:
    release: np.ndarray
    processing: np.ndarray
    periods: int
    period_length: int
    boundary: Boundary = field(default_factory=Boundary)
    tags: np.ndarray | None = None

    def __post_init__(self):
        release = np.asarray(self.release, dtype=np.int64)
        processing = np.asarray(self.processing, dtype=np.int64)
        if release.shape != processing.shape:
            raise ValueError("release and processing must have the same length")
        if self.periods < 1 or self.period_length <= 0:
            raise ValueError("need at least one period of positive length")
        if len(release) and (release.min() < 0 or release.max() >= self.periods * self.period_length):
            raise ValueError("release times must lie inside the horizon")
        if np.any(processing < 0):
            raise ValueError("processing times must be non-negative")
        order = np.argsort(release, kind="stable")
        self.release = release[order]
        self.processing = processing[order]
        if self.tags is not None:
            self.tags = np.asarray(self.tags)[order]

    @property
    def n_jobs(self) -> int:
        return len(self.release)

    def to_json(self) -> dict:
        jobs = [{"release": int(r), "processing": int(p)} for r, p in zip(self.release, self.processing)]
        if self.tags is not None:
            for job, tag in zip(jobs, self.tags):
                job["tag"] = int(tag)
        return {"jobs": jobs}

    @classmethod
    def from_json(cls, d: dict, periods: int, period_length: int, boundary: Boundary) -> "QueueScenario":
        jobs = d["jobs"]
        release = [j["release"] for j in jobs]
        processing = [j["processing"] for j in jobs]
        tags = [j["tag"] for j in jobs] if jobs and "tag" in jobs[0] else None
        return cls(np.array(release, dtype=np.int64), np.array(processing, dtype=np.int64),
                   periods, period_length, boundary, None if tags is None else np.array(tags))


@dataclass
class SimOutcome:
    start: np.ndarray  # -1 for jobs absorbed by the penalty boundary
    delay_by_period: np.ndarray
    unserved: int


@nb.njit(cache=True, nogil=True)
def _simulate(release, processing, y, L, T, mode, penalty, extra_agents, extra_periods):
    n = release.shape[0]
    cap = 1
    for t in range(T):
        if y[t] > cap:
            cap = y[t]
    if extra_agents > cap:
        cap = extra_agents
    busy = np.zeros(cap, dtype=np.int64)  # completion times; <= tau means free
    start = np.empty(n, dtype=np.int64)
    delay = np.zeros(T, dtype=np.int64)
    horizon = T * L
    hard_end = (T + extra_periods) * L
    prev = 0
    unserved = 0
    stuck = False
    for j in range(n):
        r = release[j]
        p_rel = r // L
        if stuck:
            if mode == PENALTY:
                start[j] = -1
                delay[p_rel] += penalty
                unserved += 1
            else:
                start[j] = hard_end
                delay[p_rel] += hard_end - r
                unserved += 1
            continue
        tau = prev if prev > r else r
        while True:
            p = tau // L
            if p < T:
                level = y[p]
                boundary = (p + 1) * L
            elif mode == OVERTIME and tau < hard_end:
                level = extra_agents
                boundary = hard_end
            else:
                stuck = True
                break
            count = 0
            nxt = boundary
            slot = -1
            for i in range(cap):
                c = busy[i]
                if c > tau:
                    count += 1
                    if c < nxt:
                        nxt = c
                elif slot < 0:
                    slot = i
            if count < level:
                busy[slot] = tau + processing[j]
                start[j] = tau
                delay[p_rel] += tau - r
                prev = tau
                break
            tau = nxt
        if stuck:
            if mode == PENALTY:
                start[j] = -1
                delay[p_rel] += penalty
            else:
                start[j] = hard_end
                delay[p_rel] += hard_end - r
            unserved += 1
    return start, delay, unserved


def _level_array(y: Sequence[int], T: int) -> np.ndarray:
    arr = np.asarray(y, dtype=np.int64)
    if arr.shape != (T,):
        raise ValueError(f"allocation has length {arr.shape}, expected {T}")
    if np.any(arr < 0):
        raise ValueError("agent levels must be non-negative")
    return arr


def simulate(scenario: QueueScenario, y: Sequence[int]) -> SimOutcome:
    """Run the queue under agent levels ``y`` (one per period)."""
    levels = _level_array(y, scenario.periods)
    b = scenario.boundary
    mode = PENALTY if b.kind == "penalty" else OVERTIME
    start, delay, unserved = _simulate(scenario.release, scenario.processing, levels,
                                       np.int64(scenario.period_length), np.int64(scenario.periods),
                                       mode, np.int64(b.per_unserved), np.int64(b.extra_agents),
                                       np.int64(b.extra_periods))
    return SimOutcome(start, delay, int(unserved))


def delay_by_period(scenario: QueueScenario, y: Sequence[int]) -> np.ndarray:
    return simulate(scenario, y).delay_by_period


def delay_measure(scenarios: Sequence[QueueScenario], s: int, t: int, y, cache=None):
    """Total delay of jobs released in period ``t`` of scenario ``s``."""
    if cache is not None:
        return cache.outputs(s, y)[t]
    return delay_by_period(scenarios[s], y)[t]


def write_trace(path, scenario: QueueScenario, outcome: SimOutcome) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["job", "release", "start", "processing", "delay"])
        for j, (r, p, st) in enumerate(zip(scenario.release, scenario.processing, outcome.start)):
            w.writerow([j, int(r), int(st), int(p), int(st - r) if st >= 0 else ""])


def minutes(units) -> float:
    return float(units) / MICRO
