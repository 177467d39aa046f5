import csv

import numpy as np
import pytest

from branchsim.core import PerformanceCache
from branchsim.queue import (Boundary, QueueScenario, delay_by_period, delay_measure, minutes, simulate,
                             write_trace)

from conftest import queue


def test_single_job_ample_capacity():
    out = simulate(queue([0], [10], periods=2, L_min=30), (1, 1))
    assert list(out.start) == [0]
    assert list(out.delay_by_period) == [0, 0]


def test_two_job_hand_trace(two_job_trace):
    out = simulate(two_job_trace, (1, 1, 1))
    assert list(out.start) == [0, 10_000]
    assert list(out.delay_by_period) == [10_000, 0, 0]


def test_delay_measure_on_hand_trace(two_job_trace):
    cache = PerformanceCache(lambda s, y: delay_by_period([two_job_trace][s], y))
    assert delay_measure([two_job_trace], 0, 0, (1, 1, 1), cache) == 10_000
    assert delay_measure([two_job_trace], 0, 1, (1, 1, 1)) == 0


def test_empty_scenario_has_no_delay():
    sc = queue([], [], periods=3, L_min=10)
    assert list(delay_by_period(sc, (0, 0, 0))) == [0, 0, 0]


def test_enough_agents_means_no_waiting():
    sc = queue([0, 0, 1, 2], [30, 30, 30, 30], periods=2, L_min=30)
    out = simulate(sc, (4, 4))
    assert np.array_equal(out.start, sc.release)
    assert out.delay_by_period.sum() == 0


def test_level_drop_holds_job_until_a_server_frees():
    # two agents in period 1, one in period 2; the third job must wait until
    # both earlier jobs finish at 15 min, because busy count stays above the level
    sc = queue([0, 0, 1], [15, 15, 5], periods=2, L_min=10)
    out = simulate(sc, (2, 1))
    assert list(out.start) == [0, 0, 15_000]
    assert list(out.delay_by_period) == [14_000, 0]


def test_penalty_boundary():
    sc = queue([0], [1], periods=2, L_min=10)
    out = simulate(sc, (0, 0))
    assert out.unserved == 1 and out.start[0] == -1
    assert list(out.delay_by_period) == [20_000, 0]


def test_penalty_applies_to_everyone_behind_a_stuck_job():
    sc = queue([0, 1], [1, 1], periods=2, L_min=10)
    out = simulate(sc, (0, 5))
    # the first job starts at the period boundary, the second right after its release
    assert list(out.start) == [10_000, 10_000]
    out = simulate(sc, (0, 0))
    assert out.unserved == 2 and list(out.delay_by_period) == [40_000, 0]


def test_overtime_boundary():
    sc = queue([0], [1], periods=2, L_min=10, boundary=Boundary.overtime(1, 2))
    out = simulate(sc, (0, 0))
    assert out.start[0] == 20_000 and out.unserved == 0
    assert list(out.delay_by_period) == [20_000, 0]


def test_overtime_cap_when_no_night_staff():
    sc = queue([0], [1], periods=1, L_min=10, boundary=Boundary.overtime(0, 3))
    out = simulate(sc, (0,))
    assert out.start[0] == 40_000 and out.unserved == 1


def test_scenario_sorts_by_release():
    sc = QueueScenario(np.array([5, 1]), np.array([1, 2]), 1, 10, tags=np.array([0, 1]))
    assert list(sc.release) == [1, 5] and list(sc.processing) == [2, 1] and list(sc.tags) == [1, 0]


@pytest.mark.parametrize("release,processing", [([0, 1], [1]), ([-1], [1]), ([100], [1]), ([0], [-1])])
def test_scenario_validation(release, processing):
    with pytest.raises(ValueError):
        QueueScenario(np.array(release), np.array(processing), 2, 50)


def test_allocation_validation(two_job_trace):
    with pytest.raises(ValueError):
        simulate(two_job_trace, (1, 1))
    with pytest.raises(ValueError):
        simulate(two_job_trace, (1, -1, 1))


def test_json_round_trip():
    b = Boundary.overtime(2, 8)
    sc = QueueScenario(np.array([3, 1]), np.array([4, 5]), 2, 10, b, np.array([1, 0]))
    back = QueueScenario.from_json(sc.to_json(), 2, 10, Boundary.from_json(b.to_json()))
    assert back.boundary == b
    assert np.array_equal(back.release, sc.release) and np.array_equal(back.tags, sc.tags)
    assert Boundary.from_json(Boundary.penalty(7).to_json()) == Boundary.penalty(7)


def test_trace_csv(tmp_path, two_job_trace):
    path = tmp_path / "trace.csv"
    write_trace(path, two_job_trace, simulate(two_job_trace, (1, 1, 1)))
    rows = list(csv.DictReader(open(path)))
    assert [r["delay"] for r in rows] == ["0", "10000"]
    assert list(rows[0]) == ["job", "release", "start", "processing", "delay"]


def test_minutes():
    assert minutes(1500) == 1.5
