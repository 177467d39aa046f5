"""Ambulance location on a random planar city.

A fixed fleet is split over stations. Calls are served by the ambulance that
can reach them first given its current commitments; a call is late when the
response exceeds the target. Late calls are counted per first-preference
(closest) station of the calling node. Adding an ambulance can occasionally
make a count worse, so cuts built from these measures are only approximately
valid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba as nb
import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, shortest_path

from .. import cuts as C
from ..core import MICRO, Allocation, LevelDomain, MeasureId, ObjectiveSpec
from ..engine import SimulationProblem
from ..mip import MasterModel
from ..rng import stream

PRETRIP_MEAN = 3.25  # minutes (195 s)
PRETRIP_SD = 1.6  # minutes (96 s)


@dataclass
class CityGraph:
    points: np.ndarray  # (n, 2)
    edges: list[tuple[int, int, float]]
    stations: np.ndarray  # node ids, one per station index
    hospitals: np.ndarray  # node ids (subset of stations)
    dist: np.ndarray  # (n, n) int64 shortest-path travel time in micro-units
    threshold: float = 0.0

    @property
    def n(self) -> int:
        return len(self.points)

    @property
    def K(self) -> int:
        return len(self.stations)

    def degree(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=np.int64)
        for a, b, _ in self.edges:
            deg[a] += 1
            deg[b] += 1
        return deg

    def preferences(self) -> np.ndarray:
        """(n, K) station indices of every node sorted by distance, ties by index."""
        d = self.dist[self.stations].T  # (n, K)
        return np.argsort(d, axis=1, kind="stable")

    def first_pref_sets(self) -> list[list[int]]:
        pref = self.preferences()
        sets: list[list[int]] = [[] for _ in range(self.K)]
        for v in range(self.n):
            sets[int(pref[v, 0])].append(v)
        return sets


def _travel_matrix(n: int, edges) -> np.ndarray:
    if not edges:
        d = np.full((n, n), np.iinfo(np.int64).max // 4, dtype=np.int64)
        np.fill_diagonal(d, 0)
        return d
    rows = [a for a, b, _ in edges] + [b for a, b, _ in edges]
    cols = [b for a, b, _ in edges] + [a for a, b, _ in edges]
    w = [float(round(length * MICRO)) for *_, length in edges] * 2
    g = csr_matrix((w, (rows, cols)), shape=(n, n))
    d = shortest_path(g, method="D", directed=False)
    return np.rint(d).astype(np.int64)


def generate_city(seed: int, n: int = 100, K: int = 40, E: int = 10, box: float = 40.0,
                  min_dist: float = 2.0, max_degree: int = 5, retry_cap: int = 100_000) -> CityGraph:
    if not 1 <= K <= n or not 0 <= E <= K:
        raise ValueError("need 1 <= K <= n and 0 <= E <= K")
    rng = stream(seed, "instance")
    pts: list[np.ndarray] = []
    tries = 0
    while len(pts) < n:
        tries += 1
        if tries > retry_cap:
            raise RuntimeError(f"could not place {n} points at distance {min_dist} (seed {seed})")
        p = rng.uniform(0.0, box, size=2)
        if all(np.hypot(*(p - q)) >= min_dist for q in pts):
            pts.append(p)
    points = np.array(pts)
    diff = points[:, None, :] - points[None, :, :]
    length = np.hypot(diff[..., 0], diff[..., 1])
    iu, ju = np.triu_indices(n, 1)
    order = np.lexsort((ju, iu, length[iu, ju]))
    pairs = [(int(iu[o]), int(ju[o]), float(length[iu[o], ju[o]])) for o in order]
    threshold = float(min_dist)
    while True:
        deg = np.zeros(n, dtype=np.int64)
        edges = []
        for a, b, d in pairs:
            if d >= threshold:
                break
            if deg[a] < max_degree and deg[b] < max_degree:
                edges.append((a, b, d))
                deg[a] += 1
                deg[b] += 1
        if n == 1:
            break
        if edges:
            adj = csr_matrix((np.ones(len(edges)), ([a for a, _, _ in edges], [b for _, b, _ in edges])),
                             shape=(n, n))
            if connected_components(adj, directed=False)[0] == 1:
                break
        threshold += 1.0
        if threshold > 2 * box * math.sqrt(2) + min_dist:
            raise RuntimeError(f"degree cap {max_degree} prevents a connected graph (seed {seed})")
    stations = np.sort(rng.choice(n, size=K, replace=False))
    hospitals = np.sort(rng.choice(stations, size=E, replace=False))
    return CityGraph(points, edges, stations, hospitals, _travel_matrix(n, edges), threshold)


@dataclass
class AlpScenario:
    node: np.ndarray
    time: np.ndarray  # micro-units
    pretrip: np.ndarray
    onscene: np.ndarray
    hospital: np.ndarray  # 0/1
    hospital_time: np.ndarray

    def __post_init__(self):
        order = np.argsort(np.asarray(self.time), kind="stable")
        for name in ("node", "time", "pretrip", "onscene", "hospital", "hospital_time"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=np.int64)[order])

    @property
    def n_calls(self) -> int:
        return len(self.time)

    def to_json(self) -> dict:
        keys = ("node", "time", "pretrip", "onscene", "hospital", "hospital_time")
        return {"calls": [{k: int(getattr(self, k)[i]) for k in keys} for i in range(self.n_calls)]}

    @classmethod
    def from_json(cls, d: dict) -> "AlpScenario":
        calls = d["calls"]
        keys = ("node", "time", "pretrip", "onscene", "hospital", "hospital_time")
        return cls(*[np.array([c[k] for c in calls], dtype=np.int64) for k in keys])


@dataclass
class CallLaw:
    horizon: float = 720.0  # minutes
    arrival: str = "interarrival"  # "interarrival": 360 - 10 deg is the mean gap in minutes; "rate": calls per minute
    onscene_mean: float = 10.0
    hospital_prob: float = 0.2
    hospital_mean: float = 3.0
    pretrip_mean: float = PRETRIP_MEAN
    pretrip_sd: float = PRETRIP_SD

    def lognormal_params(self) -> tuple[float, float]:
        s2 = math.log(1.0 + (self.pretrip_sd / self.pretrip_mean) ** 2)
        return math.log(self.pretrip_mean) - s2 / 2.0, math.sqrt(s2)


def sample_calls(graph: CityGraph, law: CallLaw, rng: np.random.Generator) -> AlpScenario:
    deg = graph.degree()
    nodes, times = [], []
    for v in range(graph.n):
        q = 360.0 - 10.0 * deg[v]
        gap = q if law.arrival == "interarrival" else 1.0 / q
        t = rng.exponential(gap)
        while t < law.horizon:
            nodes.append(v)
            times.append(t)
            t += rng.exponential(gap)
    k = len(times)
    mu, sigma = law.lognormal_params()
    pretrip = rng.lognormal(mu, sigma, size=k)
    onscene = rng.exponential(law.onscene_mean, size=k)
    hosp = rng.random(k) < law.hospital_prob
    htime = rng.exponential(law.hospital_mean, size=k)
    micro = lambda a: np.rint(np.asarray(a) * MICRO).astype(np.int64)
    return AlpScenario(np.array(nodes, dtype=np.int64), micro(times), micro(pretrip), micro(onscene),
                       hosp.astype(np.int64), micro(htime))


@dataclass
class AlpInstance:
    graph: CityGraph
    M: int = 1
    M1: int = 25
    delta: float = 9.0  # minutes
    law: CallLaw = field(default_factory=CallLaw)
    scenarios: list[AlpScenario] = field(default_factory=list)
    seed: int | None = None

    def __post_init__(self):
        if self.M1 > self.M * self.graph.K:
            raise ValueError("fleet larger than total station capacity")


def generate_alp(seed: int, n_scenarios: int, n: int = 100, K: int = 40, E: int = 10, M1: int = 25,
                 M: int = 1, box: float = 40.0, min_dist: float = 2.0, max_degree: int = 5,
                 delta: float = 9.0, arrival: str = "interarrival") -> AlpInstance:
    graph = generate_city(seed, n, K, E, box, min_dist, max_degree)
    law = CallLaw(arrival=arrival)
    inst = AlpInstance(graph, M, M1, delta, law, seed=seed)
    inst.scenarios = [sample_calls(graph, law, stream(seed, f"scenario:{s}")) for s in range(n_scenarios)]
    return inst


# -- dispatch simulation -----------------------------------------------------------------


@nb.njit(cache=True, nogil=True)
def _dispatch(node, time, pretrip, onscene, hospital, htime, y, st_dist, hosp_leg, hosp_back,
              first_pref, threshold, K):
    """st_dist[k, v]: station k to node v; hosp_leg[v]: node to its nearest hospital;
    hosp_back[k, v]: that hospital back to station k."""
    cap = 0
    for k in range(K):
        if y[k] > cap:
            cap = y[k]
    free = np.zeros((K, max(cap, 1)), dtype=np.int64)
    late = np.zeros(K, dtype=np.int64)
    busy_log = np.zeros((node.shape[0], 4), dtype=np.int64)  # station, ambulance, start, end
    for c in range(node.shape[0]):
        v = node[c]
        t = time[c]
        best = -1
        best_amb = -1
        best_arr = 0
        for k in range(K):
            if y[k] <= 0:
                continue
            a = 0
            for i in range(1, y[k]):
                if free[k, i] < free[k, a]:
                    a = i
            ready = free[k, a] if free[k, a] > t else t
            arr = ready + pretrip[c] + st_dist[k, v]
            if best < 0 or arr < best_arr:
                best, best_amb, best_arr = k, a, arr
        if best < 0:
            late[first_pref[v]] += 1
            busy_log[c, 0] = -1
            continue
        if best_arr - t > threshold:
            late[first_pref[v]] += 1
        if hospital[c]:
            back = hosp_leg[v] + htime[c] + hosp_back[best, v]
        else:
            back = st_dist[best, v]
        start = free[best, best_amb] if free[best, best_amb] > t else t
        free[best, best_amb] = best_arr + onscene[c] + back
        busy_log[c, 0] = best
        busy_log[c, 1] = best_amb
        busy_log[c, 2] = start
        busy_log[c, 3] = free[best, best_amb]
    return late, busy_log


class DispatchData:
    """Distance tables shared by every dispatch run on one graph."""

    def __init__(self, graph: CityGraph):
        self.graph = graph
        d = graph.dist
        self.st_dist = np.ascontiguousarray(d[graph.stations])  # (K, n)
        if len(graph.hospitals):
            hd = d[graph.hospitals]  # (E, n)
            nearest = np.argmin(hd, axis=0)
            self.hosp_node = graph.hospitals[nearest]
            self.hosp_leg = hd[nearest, np.arange(graph.n)]
        else:
            self.hosp_node = np.arange(graph.n)
            self.hosp_leg = np.zeros(graph.n, dtype=np.int64)
        self.hosp_back = np.ascontiguousarray(d[graph.stations][:, self.hosp_node])  # (K, n)
        self.pref = graph.preferences()
        self.first_pref = np.ascontiguousarray(self.pref[:, 0]).astype(np.int64)


def simulate_dispatch(data: DispatchData, scenario: AlpScenario, y, threshold: int,
                      with_log: bool = False):
    y = np.asarray(y, dtype=np.int64)
    if y.shape != (data.graph.K,) or np.any(y < 0):
        raise ValueError("allocation must give a non-negative count per station")
    late, log = _dispatch(scenario.node, scenario.time, scenario.pretrip, scenario.onscene,
                          scenario.hospital, scenario.hospital_time, y, data.st_dist, data.hosp_leg,
                          data.hosp_back, data.first_pref, np.int64(threshold), data.graph.K)
    return (late, log) if with_log else late


def feasible_count(K: int, M: int, M1: int) -> int:
    """Coefficient of x^M1 in (1 + x + ... + x^M)^K."""
    poly = [1]
    for _ in range(K):
        nxt = [0] * (len(poly) + M)
        for i, c in enumerate(poly):
            if c:
                for j in range(M + 1):
                    nxt[i + j] += c
        poly = nxt
    return poly[M1] if 0 <= M1 < len(poly) else 0


def compositions(K: int, M: int, total: int):
    """Vectors in {0..M}^K summing to ``total``, in lexicographic order."""
    if K == 0:
        if total == 0:
            yield ()
        return
    for first in range(max(0, total - M * (K - 1)), min(M, total) + 1):
        for rest in compositions(K - 1, M, total - first):
            yield (first,) + rest


@nb.njit(cache=True, nogil=True)
def _total_late_batch(cands, scen_arrays, st_dist, hosp_leg, hosp_back, first_pref, threshold, K):
    n_cand = cands.shape[0]
    out = np.zeros(n_cand, dtype=np.int64)
    for i in range(n_cand):
        total = 0
        for s in range(len(scen_arrays)):
            node, time, pretrip, onscene, hospital, htime = scen_arrays[s]
            late, _ = _dispatch(node, time, pretrip, onscene, hospital, htime, cands[i], st_dist,
                                hosp_leg, hosp_back, first_pref, threshold, K)
            total += late.sum()
        out[i] = total
    return out


class AlpProblem(SimulationProblem):
    problem_type = "alp"
    monotone = False

    def __init__(self, inst: AlpInstance, objective_mode: str = "mean", w0=1.0, w1=0.0, beta=0.5):
        self.inst = inst
        self.data = DispatchData(inst.graph)
        self.n = inst.graph.K
        self.domain = LevelDomain(0, inst.M)
        self.n_scenarios = len(inst.scenarios)
        self.anchors = np.arange(self.n)
        S = max(1, self.n_scenarios)
        cost, weights = np.zeros(self.n), np.ones(self.n)
        if objective_mode == "cvar":
            self.objective = ObjectiveSpec.cvar(cost, weights, S, w0, w1, beta)
        else:
            self.objective = ObjectiveSpec(cost, weights, S)
        self.threshold = int(round(inst.delta * MICRO))
        self.first_pref_nodes = inst.graph.first_pref_sets()
        pref = self.data.pref
        self.partners = [sorted({int(pref[v, 1]) for v in self.first_pref_nodes[k]}) if pref.shape[1] > 1 else []
                         for k in range(self.n)]

    def simulate(self, s: int, y) -> np.ndarray:
        return simulate_dispatch(self.data, self.inst.scenarios[s], y, self.threshold)

    def find_window(self, k: MeasureId, ybar, value) -> set[int]:
        return set(C.find_window_preferences(k.anchor, ybar, value, self.first_pref_nodes[k.anchor],
                                             self.data.pref, self.domain.M))

    def initial_partners(self, key: int) -> list[int]:
        return self.partners[key]

    def add_constraints(self, model: MasterModel, y_cols: list[int]) -> None:
        model.add_row(y_cols, [1.0] * self.n, float(self.inst.M1), float(self.inst.M1))

    def is_feasible(self, y) -> bool:
        return len(y) == self.n and self.domain.contains(y) and sum(y) == self.inst.M1

    def enumerate_feasible(self):
        yield from compositions(self.n, self.inst.M, self.inst.M1)

    def feasible_count(self) -> int:
        return feasible_count(self.n, self.inst.M, self.inst.M1)


def brute_force_alp(problem: AlpProblem, budget: int = 2_000_000, chunk: int = 20_000) -> tuple[Allocation, float]:
    """Exact optimum over all fleet splits (compiled batch evaluation)."""
    count = problem.feasible_count()
    if count > budget:
        from ..engine import BudgetExceeded

        raise BudgetExceeded(count, budget)
    d = problem.data
    scen = nb.typed.List()
    for sc in problem.inst.scenarios:
        scen.append((sc.node, sc.time, sc.pretrip, sc.onscene, sc.hospital, sc.hospital_time))
    best_y, best = None, math.inf
    gen = problem.enumerate_feasible()
    while True:
        block = [y for _, y in zip(range(chunk), gen)]
        if not block:
            break
        cands = np.array(block, dtype=np.int64)
        if len(scen):
            totals = _total_late_batch(cands, scen, d.st_dist, d.hosp_leg, d.hosp_back,
                                       d.first_pref, np.int64(problem.threshold), problem.n)
        else:
            totals = np.zeros(len(block), dtype=np.int64)
        i = int(np.argmin(totals))
        v = totals[i] / problem.objective.scenario_divisor
        if v < best:
            best_y, best = tuple(int(a) for a in cands[i]), float(v)
    if best_y is None:
        raise ValueError("no feasible allocation")
    return best_y, best


# -- serialization ------------------------------------------------------------------


def to_json(inst: AlpInstance) -> dict:
    g = inst.graph
    return {
        "nodes": [[float(x), float(y)] for x, y in g.points],
        "edges": [[a, b, d] for a, b, d in g.edges],
        "stations": [int(v) for v in g.stations],
        "hospitals": [int(v) for v in g.hospitals],
        "threshold": g.threshold,
        "M": inst.M, "M1": inst.M1, "delta": inst.delta,
        "law": {"horizon": inst.law.horizon, "arrival": inst.law.arrival,
                "onscene_mean": inst.law.onscene_mean, "hospital_prob": inst.law.hospital_prob,
                "hospital_mean": inst.law.hospital_mean, "pretrip_mean": inst.law.pretrip_mean,
                "pretrip_sd": inst.law.pretrip_sd},
        "seed": inst.seed,
    }


def from_json(block: dict, scenarios: list[dict]) -> AlpInstance:
    points = np.array(block["nodes"], dtype=float)
    edges = [(int(a), int(b), float(d)) for a, b, d in block["edges"]]
    graph = CityGraph(points, edges, np.array(block["stations"], dtype=np.int64),
                      np.array(block["hospitals"], dtype=np.int64), _travel_matrix(len(points), edges),
                      block.get("threshold", 0.0))
    inst = AlpInstance(graph, block["M"], block["M1"], block["delta"], CallLaw(**block["law"]),
                       seed=block.get("seed"))
    inst.scenarios = [AlpScenario.from_json(sc) for sc in scenarios]
    return inst
