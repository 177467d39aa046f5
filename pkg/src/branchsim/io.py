"""Instance and solution files (JSON)."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .apps import ambulance, checkin, nursing
from .core import MICRO
from .engine import SimulationProblem

_APPS = {"acca": checkin, "nhss": nursing, "alp": ambulance}


def instance_document(problem_type: str, inst) -> dict:
    """JSON document for an application instance."""
    if problem_type == "acca":
        n, m, M = inst.periods, inst.m, inst.M
        objective = {"resource_cost": [inst.D] * n, "measure_weights": [inst.Q / inst.L] * n,
                     "measure_scale": 1.0 / MICRO}
        scenarios = [sc.to_json() for sc in inst.scenarios]
    elif problem_type == "nhss":
        n, m, M = inst.periods, inst.m, inst.M
        objective = {"resource_cost": [0.0] * n, "measure_weights": [1.0] * n, "measure_scale": 1.0 / MICRO}
        # scheduled requests live in the nhss block; scenarios keep only walk-ins
        scenarios = [{"jobs": [j for j in sc.to_json()["jobs"] if j.get("tag", 1) == 1]} for sc in inst.scenarios]
        for doc in scenarios:
            for j in doc["jobs"]:
                j.pop("tag", None)
    elif problem_type == "alp":
        n, m, M = inst.graph.K, 0, inst.M
        objective = {"resource_cost": [0.0] * n, "measure_weights": [1.0] * n, "measure_scale": 1.0}
        scenarios = [sc.to_json() for sc in inst.scenarios]
    else:
        raise ValueError(f"unknown problem type {problem_type!r}")
    objective["scenario_divisor"] = max(1, len(inst.scenarios))
    objective["mode"] = "mean"
    return {
        "problem_type": problem_type,
        "level_domain": {"m": m, "M": M},
        "n": n,
        "objective": objective,
        "scenarios": scenarios,
        problem_type: _APPS[problem_type].to_json(inst),
    }


def _nhss_from_document(doc: dict):
    block = doc["nhss"]
    inst = nursing.from_json(block, [])
    sched = [{"release": int(r), "processing": int(p), "tag": 0}
             for r, p in zip(inst.scheduled_release, inst.scheduled_duration)]
    full = [{"jobs": sched + [dict(j, tag=1) for j in sc["jobs"]]} for sc in doc["scenarios"]]
    return nursing.from_json(block, full)


def instance_from_document(doc: dict):
    kind = doc["problem_type"]
    if kind == "acca":
        return checkin.from_json(doc["acca"], doc["scenarios"])
    if kind == "nhss":
        return _nhss_from_document(doc)
    if kind == "alp":
        return ambulance.from_json(doc["alp"], doc["scenarios"])
    raise ValueError(f"unknown problem type {kind!r}")


def dumps(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def save_instance(path, problem_type: str, inst) -> None:
    Path(path).write_text(dumps(instance_document(problem_type, inst)))


def load_instance(path) -> tuple[str, object]:
    doc = json.loads(Path(path).read_text())
    return doc["problem_type"], instance_from_document(doc)


def make_problem(problem_type: str, inst, objective_mode: str = "mean", w0: float = 1.0,
                 w1: float = 0.0, beta: float = 0.5) -> SimulationProblem:
    cls = {"acca": checkin.AccaProblem, "nhss": nursing.NhssProblem, "alp": ambulance.AlpProblem}[problem_type]
    return cls(inst, objective_mode, w0, w1, beta)


def load_problem(path, **kwargs) -> SimulationProblem:
    kind, inst = load_instance(path)
    return make_problem(kind, inst, **kwargs)


def _plain(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return float(v) if np.isfinite(v) else None
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, tuple):
        return list(v)
    return v


def save_solution(path, doc: dict) -> None:
    Path(path).write_text(json.dumps({k: _plain(v) for k, v in doc.items()}, indent=1, sort_keys=True))


def load_solution(path) -> dict:
    return json.loads(Path(path).read_text())
