"""Observation and downlink planning for a small Earth-observation constellation."""

__version__ = "0.1.0"

from .access import access_scan
from .cycles import CycleBundle, build_cycles, prepare_cycles
from .execution import Schedule, latency, metrics, schedule_from_solution, validate
from .model import PlanModel, build_model, export_lp
from .scenario import GeneratorSpec, Scenario, generate_synthetic, load_scenario, serialize_scenario
from .solver import SolverConfig, plan_with_fallback, solve_bnb, solve_exhaustive, solve_greedy

__all__ = [
    "CycleBundle", "GeneratorSpec", "PlanModel", "Scenario", "Schedule", "SolverConfig",
    "access_scan", "build_cycles", "build_model", "export_lp", "generate_synthetic", "latency",
    "load_scenario", "metrics", "plan_with_fallback", "prepare_cycles", "schedule_from_solution",
    "serialize_scenario", "solve_bnb", "solve_exhaustive", "solve_greedy", "validate",
]
