"""Scheduling a fleet of drones to hover over demanded (location, time) cells."""

from .exact import CapacityError, SolverLimitError, SolverTimeout, exact_solve, exhaustive_reference
from .greedy import SolveResult, greedy_solve, rollout
from .ilp import build_ilp, evaluate_assignment, write_lp
from .instance import AgentSpec, Instance, build_instance, generate_instance
from .schedule import Hover, Schedule, ScheduleError, Transit, coverage_score, validate_schedule

__all__ = [
    "AgentSpec", "CapacityError", "Hover", "Instance", "Schedule", "ScheduleError",
    "SolveResult", "SolverLimitError", "SolverTimeout", "Transit", "build_ilp",
    "build_instance", "coverage_score", "evaluate_assignment", "exact_solve",
    "exhaustive_reference", "generate_instance", "greedy_solve", "rollout",
    "validate_schedule", "write_lp",
]
