"""Earliest-arrival dispatch on a four-station line, step by step.

Adding an ambulance at station 1 makes the third call late: station 1 wins
the first call on a tie, so the ambulance at station 3 is sent to the second
call and is still busy when the third call comes in at its own node.

    python demos/dispatch_trace.py
"""

import numpy as np

from branchsim.apps.ambulance import AlpScenario, CityGraph, DispatchData, _travel_matrix, simulate_dispatch

THRESHOLD = 9000  # 9 minutes in micro-units


def line_city(xs):
    edges = [(i, i + 1, xs[i + 1] - xs[i]) for i in range(len(xs) - 1)]
    pts = np.array([[x, 0.0] for x in xs])
    every = np.arange(len(xs))
    return CityGraph(pts, edges, every, np.zeros(0, dtype=np.int64), _travel_matrix(len(xs), edges))


def main():
    graph = line_city([0.0, 1.0, 8.0, 15.0])
    data = DispatchData(graph)
    ms = lambda v: np.array(v, dtype=np.int64) * 1000
    calls = AlpScenario(np.array([2, 2, 3]), ms([1, 8, 21]), ms([0, 0, 0]), ms([2, 9, 17]),
                        np.zeros(3, dtype=np.int64), ms([0, 0, 0]))
    for y in [(1, 0, 0, 1), (1, 1, 0, 1)]:
        late, log = simulate_dispatch(data, calls, y, THRESHOLD, with_log=True)
        print(f"y = {y}: late calls per first-preference station {[int(v) for v in late]}")
        for c in range(calls.n_calls):
            st, amb, start, end = log[c]
            print(f"  call {c} at node {calls.node[c]}, t={calls.time[c] / 1000:.0f} min -> station {st} "
                  f"(busy {start / 1000:.0f}-{end / 1000:.0f} min)")


if __name__ == "__main__":
    main()
