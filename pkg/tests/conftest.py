import itertools

import numpy as np
import pytest

from branchsim.core import MICRO, LevelDomain, ObjectiveSpec
from branchsim.engine import SimulationProblem
from branchsim.queue import Boundary, QueueScenario


class FunctionProblem(SimulationProblem):
    """Measures given by a plain Python function of y (one scenario per function)."""

    problem_type = "toy"

    def __init__(self, funcs, n, m, M, cost, weights=None, mode="mean", w0=1.0, w1=0.0, beta=0.5,
                 monotone=True):
        self.funcs = funcs  # funcs[s](y) -> array over keys
        self.n = n
        self.domain = LevelDomain(m, M)
        self.n_scenarios = len(funcs)
        keys = len(funcs[0](tuple([M] * n)))
        self.anchors = np.arange(keys) % n
        weights = np.ones(keys) if weights is None else np.asarray(weights, dtype=float)
        if mode == "cvar":
            self.objective = ObjectiveSpec.cvar(np.asarray(cost, float), weights, self.n_scenarios, w0, w1, beta)
        else:
            self.objective = ObjectiveSpec(np.asarray(cost, float), weights, self.n_scenarios)
        self.monotone = monotone

    def simulate(self, s, y):
        return np.asarray(self.funcs[s](tuple(y)), dtype=float)


def minutes(v):
    return int(round(v * MICRO))


def queue(release_min, processing_min, periods, L_min, boundary=None):
    return QueueScenario(np.array([minutes(r) for r in release_min], dtype=np.int64),
                         np.array([minutes(p) for p in processing_min], dtype=np.int64),
                         periods, minutes(L_min), boundary or Boundary.penalty(periods * minutes(L_min)))


def all_allocations(n, m, M):
    return itertools.product(range(m, M + 1), repeat=n)


@pytest.fixture
def two_job_trace():
    # one server, both jobs at time 0: the second waits for the first
    return queue([0, 0], [10, 10], periods=3, L_min=10)


ACCEPTANCE: dict = {}


def record(n, ok, detail):
    ACCEPTANCE[n] = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(ACCEPTANCE[n])


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
