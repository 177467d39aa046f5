"""Simulation-based resource allocation solved by branch-and-bound with
simulation cuts."""

from .core import LevelDomain, MeasureId, ObjectiveSpec, PerformanceCache, delta
from .cuts import ALL_KINDS, CutKind, CutTag
from .engine import BranchAndSimulate, SimulationProblem, brute_force

__all__ = ["LevelDomain", "MeasureId", "ObjectiveSpec", "PerformanceCache", "delta", "ALL_KINDS",
           "CutKind", "CutTag", "BranchAndSimulate", "SimulationProblem", "brute_force"]
__version__ = "0.1.0"
