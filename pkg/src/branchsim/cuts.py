"""Benders optimality cuts, window searches and initial cuts.

Every cut has the form ``theta_k >= constant + sum coeff * z[j, level]`` where
``z[j, level]`` is the indicator that object ``j`` holds exactly ``level``
resources. Values passed to the builders are already in master units.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .core import LevelDomain, MeasureId, delta


class CutTag(str, enum.Enum):
    NOGOOD = "nogood"
    MONOTONIC = "mono"
    LOCAL = "local"
    STRENGTHENED = "strong"


@dataclass(frozen=True)
class CutKind:
    tag: CutTag
    with_initials: bool = False

    @classmethod
    def parse(cls, name: str, initials: bool = False) -> "CutKind":
        return cls(CutTag(name), initials)

    @property
    def label(self) -> str:
        short = {CutTag.NOGOOD: "NG", CutTag.MONOTONIC: "M", CutTag.LOCAL: "L",
                 CutTag.STRENGTHENED: "S"}[self.tag]
        return short + ("+In" if self.with_initials else "")


ALL_KINDS = [CutKind(tag, init) for tag in CutTag for init in (False, True)]


@dataclass
class LinearCut:
    theta_target: MeasureId
    constant: float
    z_coeffs: dict = field(default_factory=dict)  # (object, level) -> coeff
    y_coeffs: dict = field(default_factory=dict)  # object -> coeff
    kind: str = ""

    def rhs(self, y: Sequence[int]) -> float:
        total = self.constant
        for (j, level), c in self.z_coeffs.items():
            if y[j] == level:
                total += c
        for j, c in self.y_coeffs.items():
            total += c * y[j]
        return total

    def max_rhs(self, domain: LevelDomain) -> float:
        """Largest right-hand side over all allocations in ``domain``."""
        per_obj: dict[int, list[float]] = {}
        for (j, level), c in self.z_coeffs.items():
            per_obj.setdefault(j, []).append(c)
        total = self.constant
        for j, cs in per_obj.items():
            best = max(cs)
            if len(cs) < domain.size:
                best = max(best, 0.0)
            total += best
        for c in self.y_coeffs.values():
            total += max(c * domain.m, c * domain.M)
        return total

    def is_trivial(self, domain: LevelDomain) -> bool:
        return self.max_rhs(domain) <= 0.0

    def signature(self) -> tuple:
        return (self.theta_target, round(self.constant, 9),
                tuple(sorted((k, round(v, 9)) for k, v in self.z_coeffs.items())),
                tuple(sorted((k, round(v, 9)) for k, v in self.y_coeffs.items())))


def no_good_cut(k: MeasureId, ybar: Sequence[int], fval: float, domain: LevelDomain) -> LinearCut:
    coeffs = {}
    for j, yj in enumerate(ybar):
        for level in domain.levels:
            if level != yj:
                coeffs[(j, level)] = -fval
    return LinearCut(k, fval, coeffs, kind="nogood")


def _increase_terms(objects: Iterable[int], ybar: Sequence[int], domain: LevelDomain, coeff: float) -> dict:
    return {(j, level): coeff for j in objects for level in range(ybar[j] + 1, domain.M + 1)}


def monotonic_cut(k: MeasureId, ybar: Sequence[int], fval: float, domain: LevelDomain) -> LinearCut:
    return LinearCut(k, fval, _increase_terms(range(len(ybar)), ybar, domain, -fval), kind="mono")


def local_cut(k: MeasureId, ybar: Sequence[int], window: Iterable[int], fval: float,
              domain: LevelDomain) -> LinearCut:
    """Caller guarantees ``f_k(delta(window, ybar)) == f_k(ybar)``."""
    return LinearCut(k, fval, _increase_terms(sorted(window), ybar, domain, -fval), kind="local")


def strengthened_cut(k: MeasureId, ybar: Sequence[int], window: Iterable[int], fval: float,
                     i_values: dict, base: float, domain: LevelDomain,
                     tolerate: bool = False) -> tuple[LinearCut, int]:
    """Local cut whose penalties are the worst-case losses instead of ``fval``.

    ``i_values[level]`` is the measure with ``level`` resources at the anchor
    object and the maximum elsewhere; ``base`` is that value at the incumbent's
    anchor level. Returns the cut and the number of monotonicity breaches seen
    (clamped to zero penalty when ``tolerate`` is set, an error otherwise).
    """
    anchor = k.anchor
    breaches = 0
    coeffs = {}
    for level in range(ybar[anchor] + 1, domain.M + 1):
        drop = fval - i_values[level]
        if drop < 0:
            if not tolerate:
                raise ValueError(f"measure increased with resources at level {level}: "
                                 f"{i_values[level]} > {fval}")
            breaches += 1
            drop = 0.0
        coeffs[(anchor, level)] = -drop
    drop = fval - base
    if drop < 0:
        if not tolerate:
            raise ValueError(f"base value {base} exceeds incumbent value {fval}")
        breaches += 1
        drop = 0.0
    for j in sorted(window):
        if j == anchor:
            continue
        for level in range(ybar[j] + 1, domain.M + 1):
            coeffs[(j, level)] = -drop
    return LinearCut(k, fval, coeffs, kind="strong"), breaches


def initial_cut_1d(k: MeasureId, i_values: dict, obj: int | None = None) -> LinearCut:
    """theta_k >= sum_level I(level) z[obj, level] (``obj`` defaults to the anchor)."""
    obj = k.anchor if obj is None else obj
    return LinearCut(k, 0.0, {(obj, level): float(v) for level, v in i_values.items()}, kind="init1")


def initial_cuts_2d(k: MeasureId, partner: int, W: np.ndarray,
                    domain: LevelDomain) -> tuple[list[LinearCut], list[LinearCut]]:
    """Both two-object families for the pair (anchor, partner).

    ``W[a, b]`` is the measure with ``m + a`` resources at the anchor, ``m + b``
    at the partner and the maximum elsewhere. The first list fixes the anchor
    level and sums over partner levels, the second the other way round.
    """
    W = np.asarray(W, dtype=float)
    size = domain.size
    if W.shape != (size, size) or not np.all(np.isfinite(W)):
        raise ValueError(f"W table must be a complete {size}x{size} array")
    levels = list(domain.levels)
    anchor = k.anchor
    first, second = [], []
    for a in range(size):
        coeffs = {(partner, levels[b]): W[a, b] for b in range(size)}
        for a2 in range(a + 1, size):
            coeffs[(anchor, levels[a2])] = coeffs.get((anchor, levels[a2]), 0.0) - float(np.max(W[a] - W[a2]))
        first.append(LinearCut(k, 0.0, coeffs, kind="init2a"))
    for b in range(size):
        coeffs = {(anchor, levels[a]): W[a, b] for a in range(size)}
        for b2 in range(b + 1, size):
            coeffs[(partner, levels[b2])] = coeffs.get((partner, levels[b2]), 0.0) - float(np.max(W[:, b] - W[:, b2]))
        second.append(LinearCut(k, 0.0, coeffs, kind="init2b"))
    return first, second


ValueFn = Callable[[tuple], object]


def find_window_scheduling(anchor: int, ybar: Sequence[int], value: ValueFn, n: int, M: int) -> set[int]:
    """Grow a contiguous window around ``anchor`` until raising everything
    outside it leaves the measure unchanged, then shrink from each end."""
    target = value(tuple(ybar))
    lo = hi = anchor
    while value(delta(range(lo, hi + 1), ybar, M)) < target:
        lo, hi = max(lo - 1, 0), min(hi + 1, n - 1)
        if lo == 0 and hi == n - 1:
            break
    while lo < hi and value(delta(range(lo + 1, hi + 1), ybar, M)) == target:
        lo += 1
    while lo < hi and value(delta(range(lo, hi), ybar, M)) == target:
        hi -= 1
    return set(range(lo, hi + 1))


def find_window_preferences(anchor: int, ybar: Sequence[int], value: ValueFn,
                            first_pref_nodes: Sequence[int], preferences: np.ndarray,
                            M: int) -> list[int]:
    """Expand by the next preference station of every node whose first
    preference is ``anchor``; then try removing stations last-in-first-out."""
    target = value(tuple(ybar))
    window = [anchor]
    members = {anchor}
    depth = 1
    n_pref = preferences.shape[1]
    while value(delta(members, ybar, M)) < target and depth < n_pref:
        for v in first_pref_nodes:
            st = int(preferences[v, depth])
            if st not in members:
                members.add(st)
                window.append(st)
        depth += 1
    for st in reversed(window[1:]):
        trial = members - {st}
        if value(delta(trial, ybar, M)) == target:
            members = trial
    return [st for st in window if st in members]


def count_solutions(cut: LinearCut, n: int, domain: LevelDomain, fval: float) -> tuple[int, int]:
    """(#allocations with positive RHS, #allocations where the RHS equals ``fval``)."""
    nontrivial = full = 0
    for y in itertools.product(domain.levels, repeat=n):
        r = cut.rhs(y)
        if r > 0:
            nontrivial += 1
        if abs(r - fval) <= 1e-12 * max(1.0, abs(fval)):
            full += 1
    return nontrivial, full
