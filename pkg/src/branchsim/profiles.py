"""Performance profiles and solution-stability bands over batches of runs."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


@dataclass(frozen=True)
class ProfilePoint:
    method: str
    region: str  # "time" or "gap"
    x: float
    y: float


@dataclass
class RunRecord:
    instance: str
    method: str
    solved: bool
    time: float
    gap: float


def performance_profile(runs: Sequence[RunRecord], time_limit: float) -> list[ProfilePoint]:
    """Fraction of instances solved within time t (t <= time_limit), then the
    fraction with final gap at most g for the unsolved remainder."""
    by_method: dict[str, list[RunRecord]] = {}
    for r in runs:
        by_method.setdefault(r.method, []).append(r)
    instance_sets = {m: sorted(r.instance for r in rs) for m, rs in by_method.items()}
    reference = next(iter(instance_sets.values()), [])
    for m, inst in instance_sets.items():
        if inst != reference:
            raise ValueError(f"method {m!r} was run on a different instance list")
    points: list[ProfilePoint] = []
    for method in sorted(by_method):
        rs = by_method[method]
        total = len(rs)
        times = sorted(r.time for r in rs if r.solved and r.time <= time_limit)
        points.append(ProfilePoint(method, "time", 0.0, 0.0))
        for i, t in enumerate(times, start=1):
            points.append(ProfilePoint(method, "time", t, i / total))
        solved_frac = len(times) / total
        points.append(ProfilePoint(method, "time", time_limit, solved_frac))
        gaps = sorted(r.gap for r in rs if not (r.solved and r.time <= time_limit) and math.isfinite(r.gap))
        for i, g in enumerate(gaps, start=1):
            points.append(ProfilePoint(method, "gap", g, solved_frac + i / total))
    return points


def write_profile_csv(path, points: Iterable[ProfilePoint]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "region", "x", "y"])
        for p in points:
            w.writerow([p.method, p.region, repr(float(p.x)), repr(float(p.y))])


def write_profile_svg(path, points: Sequence[ProfilePoint], time_limit: float,
                      width: int = 640, height: int = 360) -> None:
    """Left half: runtime axis (linear); right half: gap axis (log10)."""
    pad = 40
    half = (width - 2 * pad) / 2
    gaps = [p.x for p in points if p.region == "gap" and p.x > 0]
    gmin = math.log10(min(gaps)) if gaps else -6.0
    gmax = math.log10(max(gaps)) if gaps else 0.0
    if gmax <= gmin:
        gmax = gmin + 1.0

    def sx(p: ProfilePoint) -> float:
        if p.region == "time":
            return pad + half * (p.x / time_limit if time_limit > 0 else 1.0)
        g = math.log10(p.x) if p.x > 0 else gmin
        return pad + half + half * (g - gmin) / (gmax - gmin)

    def sy(v: float) -> float:
        return height - pad - (height - 2 * pad) * v

    colours = ["#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d", "#666666"]
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
             f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
             f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>',
             f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
             f'<line x1="{pad + half}" y1="{pad}" x2="{pad + half}" y2="{height - pad}" stroke="grey" '
             f'stroke-dasharray="4"/>']
    methods = sorted({p.method for p in points})
    for i, m in enumerate(methods):
        pts = [p for p in points if p.method == m]
        path_d, prev_y = [], None
        for p in pts:
            x, y = sx(p), sy(p.y)
            if prev_y is None:
                path_d.append(f"M{x:.1f},{y:.1f}")
            else:
                path_d.append(f"L{x:.1f},{prev_y:.1f} L{x:.1f},{y:.1f}")
            prev_y = y
        c = colours[i % len(colours)]
        parts.append(f'<path d="{" ".join(path_d)}" fill="none" stroke="{c}" stroke-width="2"/>')
        parts.append(f'<text x="{width - pad - 90}" y="{pad + 14 * (i + 1)}" fill="{c}" '
                     f'font-size="12">{m}</text>')
    parts.append(f'<text x="{pad}" y="{height - 10}" font-size="11">0 s</text>')
    parts.append(f'<text x="{pad + half - 20}" y="{height - 10}" font-size="11">{time_limit:g} s</text>')
    parts.append(f'<text x="{width - pad - 40}" y="{height - 10}" font-size="11">gap 1e{gmax:.0f}</text>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts))


@dataclass
class StabilityRow:
    index: int
    min: int
    max: int
    mean: float


def stability(solutions: Sequence[Sequence[int]]) -> list[StabilityRow]:
    if len(solutions) < 2:
        raise ValueError("need at least two solutions")
    lengths = {len(s) for s in solutions}
    if len(lengths) != 1:
        raise ValueError(f"solutions have different lengths {sorted(lengths)}")
    arr = np.array(solutions, dtype=np.int64)
    return [StabilityRow(j, int(arr[:, j].min()), int(arr[:, j].max()), float(arr[:, j].mean()))
            for j in range(arr.shape[1])]


def write_stability_csv(path, rows: Iterable[StabilityRow]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "min", "max", "mean"])
        for r in rows:
            w.writerow([r.index, r.min, r.max, repr(r.mean)])
