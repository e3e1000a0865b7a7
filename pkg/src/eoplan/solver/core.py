"""Solver configuration, solution records and shared helpers."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from ..model import PlanModel

OPTIMAL = "optimal"
FEASIBLE_GAP = "feasible_gap"
INFEASIBLE = "infeasible"
TIMEOUT_NO_INCUMBENT = "timeout_no_incumbent"
STATUSES = (OPTIMAL, FEASIBLE_GAP, INFEASIBLE, TIMEOUT_NO_INCUMBENT)


@dataclass(frozen=True)
class SolverConfig:
    mip_gap: float = 1e-4
    time_limit: float = 10800.0
    node_limit: int | None = None
    threads: int = 1
    seed: int = 0
    heuristic_every: int | None = None  # nodes between rounding heuristics; None means every node

    def __post_init__(self):
        if not self.mip_gap >= 0:
            raise ValueError("mip_gap must be >= 0")
        if not self.time_limit > 0:
            raise ValueError("time_limit must be > 0")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")


def relative_gap(bound: float, objective: float) -> float:
    if not math.isfinite(bound) or not math.isfinite(objective):
        return math.inf
    return max(0.0, bound - objective) / max(1.0, abs(objective))


@dataclass(frozen=True)
class ProgressEntry:
    elapsed: float
    incumbent: float
    bound: float
    gap: float
    nodes: int


@dataclass
class Solution:
    status: str
    objective: float
    best_bound: float
    gap: float
    values: np.ndarray | None
    solve_time: float
    node_count: int
    names: list[str] = field(default_factory=list, repr=False)
    progress: list[ProgressEntry] = field(default_factory=list, repr=False)
    message: str = ""
    fallback: bool = False
    solver: str = ""

    @property
    def has_solution(self) -> bool:
        return self.values is not None

    @property
    def assignments(self) -> dict[str, float]:
        if self.values is None:
            return {}
        return {n: float(v) for n, v in zip(self.names, self.values)}

    def to_dict(self) -> dict:
        nonzero = {}
        if self.values is not None:
            for n, v in zip(self.names, self.values):
                if v != 0:
                    nonzero[n] = float(v)
        return {
            "schema_version": 1,
            "status": self.status,
            "solver": self.solver,
            "objective": _finite(self.objective),
            "best_bound": _finite(self.best_bound),
            "gap": _finite(self.gap),
            "solve_time": self.solve_time,
            "node_count": self.node_count,
            "fallback": self.fallback,
            "message": self.message,
            "nonzeros": nonzero,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, doc: dict, model: PlanModel | None = None) -> "Solution":
        names = [v.name for v in model.variables] if model is not None else sorted(doc["nonzeros"])
        values = None
        if doc["status"] in (OPTIMAL, FEASIBLE_GAP):
            lookup = doc["nonzeros"]
            values = np.array([lookup.get(n, 0.0) for n in names])
        return cls(
            status=doc["status"],
            objective=_unfinite(doc["objective"]),
            best_bound=_unfinite(doc["best_bound"]),
            gap=_unfinite(doc["gap"]),
            values=values,
            solve_time=doc["solve_time"],
            node_count=doc["node_count"],
            names=names,
            message=doc.get("message", ""),
            fallback=doc.get("fallback", False),
            solver=doc.get("solver", ""),
        )

    def progress_csv(self) -> str:
        lines = ["elapsed_s,incumbent,bound,gap,nodes"]
        for p in self.progress:
            lines.append(f"{p.elapsed:.6f},{p.incumbent!r},{p.bound!r},{p.gap!r},{p.nodes}")
        return "\n".join(lines) + "\n"


def _finite(v):
    if v is None or (isinstance(v, float) and not math.isfinite(v)):
        return None if v is None or math.isnan(v) else ("inf" if v > 0 else "-inf")
    return v


def _unfinite(v):
    if v is None:
        return math.nan
    if v == "inf":
        return math.inf
    if v == "-inf":
        return -math.inf
    return float(v)


def trivial_bound(model: PlanModel, lb=None, ub=None) -> float:
    arr = model.arrays()
    lb = arr.lb if lb is None else lb
    ub = arr.ub if ub is None else ub
    return float(np.sum(np.maximum(arr.c * lb, arr.c * ub)))


def finish(model: PlanModel, status: str, values, bound: float, t0: float, nodes: int, *,
           progress=None, message: str = "", solver: str = "") -> Solution:
    import time

    names = [v.name for v in model.variables]
    if values is not None:
        values = np.asarray(values, dtype=float).copy()
        arr = model.arrays()
        values[arr.binary] = np.round(values[arr.binary])
        objective = float(arr.c @ values)
        bound = max(bound, objective)
        gap = relative_gap(bound, objective)
    else:
        objective = -math.inf if status != INFEASIBLE else math.nan
        gap = math.inf
    return Solution(status, objective, bound, gap, values, time.perf_counter() - t0, nodes,
                    names, list(progress or []), message, solver=solver)
