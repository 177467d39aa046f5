"""Problem-agnostic data model: levels, allocations, measures and the
simulation cache.

Objects are indexed ``0 .. n-1`` internally; allocations are plain tuples of
ints so they can be used directly as cache keys.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

Allocation = tuple[int, ...]

# one time unit in the simulators is 1/1000 minute
MICRO = 1000


@dataclass(frozen=True)
class LevelDomain:
    m: int
    M: int

    def __post_init__(self):
        if not 0 <= self.m <= self.M:
            raise ValueError(f"level domain needs 0 <= m <= M, got m={self.m}, M={self.M}")

    @property
    def levels(self) -> range:
        return range(self.m, self.M + 1)

    @property
    def size(self) -> int:
        return self.M - self.m + 1

    def contains(self, y: Sequence[int]) -> bool:
        return all(self.m <= v <= self.M for v in y)


@dataclass(frozen=True)
class MeasureId:
    """One performance measure: the ``key``-th output of scenario ``scenario``,
    associated with object ``anchor``."""

    scenario: int
    key: int
    anchor: int


@dataclass
class ObjectiveSpec:
    """Linear resource cost plus weighted measures.

    ``measure_weights[key]`` multiplies every measure with that key; the
    sample mean divides by ``scenario_divisor``. ``measure_scale`` converts the
    simulator's native integer units into master-problem units.
    """

    resource_cost: np.ndarray
    measure_weights: np.ndarray
    scenario_divisor: int
    measure_scale: float = 1.0
    mode: str = "mean"
    w0: float = 1.0
    w1: float = 0.0
    beta: float = 0.5

    def __post_init__(self):
        self.resource_cost = np.asarray(self.resource_cost, dtype=float)
        self.measure_weights = np.asarray(self.measure_weights, dtype=float)
        if np.any(self.measure_weights < 0):
            raise ValueError("measure weights must be non-negative")
        if self.scenario_divisor < 1:
            raise ValueError("scenario_divisor must be positive")
        if self.mode not in ("mean", "cvar"):
            raise ValueError(f"unknown objective mode {self.mode!r}")
        if self.mode == "cvar":
            if not (self.w0 > 0 and self.w1 > 0 and abs(self.w0 + self.w1 - 1.0) < 1e-12):
                raise ValueError("cvar mode needs w0, w1 > 0 with w0 + w1 = 1")
            if not 0 < self.beta < 1:
                raise ValueError("cvar mode needs 0 < beta < 1")

    @classmethod
    def cvar(cls, resource_cost, measure_weights, scenario_divisor, w0, w1, beta,
             measure_scale=1.0) -> "ObjectiveSpec":
        return cls(resource_cost, measure_weights, scenario_divisor, measure_scale,
                   mode="cvar", w0=w0, w1=w1, beta=beta)

    def scenario_losses(self, values: np.ndarray) -> np.ndarray:
        """Weighted loss per scenario from a ``(S, keys)`` array of native values."""
        return (np.asarray(values, dtype=float) * self.measure_scale) @ self.measure_weights

    def evaluate(self, y: Sequence[int], values: np.ndarray) -> float:
        """Objective of allocation ``y`` given every scenario's measures."""
        cost = float(np.dot(self.resource_cost, np.asarray(y, dtype=float)))
        losses = self.scenario_losses(values)
        mean = float(losses.sum()) / self.scenario_divisor
        if self.mode == "mean":
            return cost + mean
        return cost + self.w0 * mean + self.w1 * cvar_value(losses, self.beta, self.scenario_divisor)


def cvar_value(losses: np.ndarray, beta: float, divisor: int | None = None) -> float:
    """min over a of  a + sum(max(0, loss - a)) / (S (1 - beta)).

    The function is piecewise linear and convex in ``a`` with breakpoints at
    the losses, so the minimum is attained at one of them.
    """
    losses = np.asarray(losses, dtype=float)
    S = len(losses) if divisor is None else divisor
    if len(losses) == 0:
        return 0.0
    scale = 1.0 / (S * (1.0 - beta))
    return float(min(a + scale * np.maximum(losses - a, 0.0).sum() for a in losses))


def delta(window: Iterable[int], y: Sequence[int], M: int) -> Allocation:
    """Raise every component outside ``window`` to the maximum level ``M``."""
    n = len(y)
    keep = set(window)
    for j in keep:
        if not 0 <= j < n:
            raise IndexError(f"object index {j} outside [0, {n})")
    return tuple(int(v) if j in keep else int(M) for j, v in enumerate(y))


def with_level(y: Sequence[int], j: int, level: int) -> Allocation:
    out = list(y)
    out[j] = int(level)
    return tuple(out)


Oracle = Callable[[int, Allocation], np.ndarray]


@dataclass
class PerformanceCache:
    """Memoised simulation outputs keyed by ``(scenario, allocation)``.

    One simulation of a scenario yields every measure of that scenario, so the
    cache stores the whole output vector and :meth:`evaluate` reads one entry.
    Inserts are insert-if-absent under a lock; the oracle itself runs outside
    the lock.
    """

    oracle: Oracle
    entries: dict = field(default_factory=dict)
    calls: int = 0
    sim_seconds: float = 0.0

    def __post_init__(self):
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self.entries)

    def outputs(self, scenario: int, y: Sequence[int]) -> np.ndarray:
        key = (scenario, tuple(int(v) for v in y))
        hit = self.entries.get(key)
        if hit is not None:
            return hit
        t0 = time.perf_counter()
        values = np.asarray(self.oracle(scenario, key[1]))
        values.setflags(write=False)
        elapsed = time.perf_counter() - t0
        with self._lock:
            stored = self.entries.setdefault(key, values)
            if stored is values:
                self.calls += 1
                self.sim_seconds += elapsed
        return stored

    def evaluate(self, measure: MeasureId, y: Sequence[int]):
        return self.outputs(measure.scenario, y)[measure.key]

    def prefetch(self, keys: Iterable[tuple[int, Allocation]], threads: int = 1) -> None:
        """Simulate every missing ``(scenario, y)`` key, optionally in a thread pool."""
        missing = [k for k in dict.fromkeys(keys) if k not in self.entries]
        if threads <= 1 or len(missing) < 2:
            for s, y in missing:
                self.outputs(s, y)
            return
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(lambda k: self.outputs(*k), missing))


def evaluate(measure: MeasureId, y: Sequence[int], cache: PerformanceCache):
    """Cache-through evaluation of one performance measure."""
    return cache.evaluate(measure, y)
