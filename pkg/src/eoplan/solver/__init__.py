"""Solvers for the planning model."""

from .bnb import plan_with_fallback, presolve, solve_bnb, solve_greedy, solve_lp_relaxation
from .core import (
    FEASIBLE_GAP,
    INFEASIBLE,
    OPTIMAL,
    STATUSES,
    TIMEOUT_NO_INCUMBENT,
    ProgressEntry,
    Solution,
    SolverConfig,
    relative_gap,
)
from .exhaustive import TooLargeError, solve_exhaustive
from .simplex import LPError, LPResult, RevisedSimplex, solve_lp

__all__ = [
    "FEASIBLE_GAP", "INFEASIBLE", "OPTIMAL", "STATUSES", "TIMEOUT_NO_INCUMBENT",
    "LPError", "LPResult", "ProgressEntry", "RevisedSimplex", "Solution", "SolverConfig",
    "TooLargeError", "plan_with_fallback", "presolve", "relative_gap", "solve_bnb",
    "solve_exhaustive", "solve_greedy", "solve_lp", "solve_lp_relaxation",
]
