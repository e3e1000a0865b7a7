"""LP-based branch-and-bound for the planning model."""

from __future__ import annotations

import heapq
import logging
import math
import threading
import time
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from ..model import PlanModel
from .core import (
    FEASIBLE_GAP,
    INFEASIBLE,
    OPTIMAL,
    TIMEOUT_NO_INCUMBENT,
    ProgressEntry,
    Solution,
    SolverConfig,
    finish,
    relative_gap,
    trivial_bound,
)
from .heuristics import greedy_assignment
from .simplex import INFEASIBLE as LP_INFEASIBLE
from .simplex import OPTIMAL as LP_OPTIMAL
from .simplex import LPError, RevisedSimplex

logger = logging.getLogger(__name__)

_INT_TOL = 1e-6


@dataclass
class Presolve:
    ub: np.ndarray
    infeasible_reason: str | None
    dominated: int
    unreachable: int


def presolve(model: PlanModel) -> Presolve:
    """Fix variables that cannot matter and catch trivial infeasibility.

    Unreachable targets get x = 0.  Within one cycle, an image whose target
    set is contained in another image's set uses the same resources for no
    extra reward, so it is fixed to 0 (ties keep the lower index).
    """
    arr = model.arrays()
    st = model.structure
    ub = arr.ub.copy()
    for m in st.unreachable:
        ub[st.target_var[m]] = 0.0
    reason = None
    if model.active_mandatory:
        missing = [m for m in st.active_targets if m in set(st.unreachable)]
        if missing:
            reason = "no image covers mandatory active target(s) " + ", ".join(missing[:10])
    dominated = 0
    for sat in st.satellites:
        for ct in sat.cycles:
            dominated += _fix_dominated(ct.images, st.image_targets, ub)
    return Presolve(ub, reason, dominated, len(st.unreachable))


def _fix_dominated(images, image_targets, ub) -> int:
    uniq: dict[frozenset, int] = {}
    fixed = 0
    for w in sorted(images):
        key = frozenset(image_targets[w])
        if not key or key in uniq:
            ub[w] = 0.0
            fixed += 1
        else:
            uniq[key] = w
    by_target = defaultdict(list)
    for key in uniq:
        for x in key:
            by_target[x].append(key)
    for key, w in uniq.items():
        rare = min(key, key=lambda x: len(by_target[x]))
        for other in by_target[rare]:
            if len(other) > len(key) and key < other:
                ub[w] = 0.0
                fixed += 1
                break
    return fixed


@dataclass
class _Node:
    bound: float
    depth: int
    fixes: tuple  # ((var, value), ...) applied on top of the root bounds
    warm: tuple | None


class BranchAndBound:
    def __init__(self, model: PlanModel, config: SolverConfig | None = None, *,
                 cancel: threading.Event | None = None, on_progress=None):
        self.model = model
        self.cfg = config or SolverConfig()
        self.cancel = cancel
        self.on_progress = on_progress
        self.arr = model.arrays()
        self.names = [v.name for v in model.variables]
        self.progress: list[ProgressEntry] = []
        self.inc_val = -math.inf
        self.inc = None
        self.nodes = 0
        self.t0 = time.perf_counter()

    def _elapsed(self):
        return time.perf_counter() - self.t0

    def _log(self, bound):
        p = ProgressEntry(self._elapsed(), self.inc_val, bound, relative_gap(bound, self.inc_val), self.nodes)
        self.progress.append(p)
        logger.info("t=%.2fs nodes=%d incumbent=%.6g bound=%.6g gap=%.3g",
                    p.elapsed, p.nodes, p.incumbent, p.bound, p.gap)
        if self.on_progress is not None:
            self.on_progress(p)

    def _offer(self, v: np.ndarray | None, source: str) -> bool:
        if v is None:
            return False
        val = float(self.arr.c @ v)
        if val > self.inc_val + 1e-9:
            if self.model.violations(v):
                return False
            self.inc_val, self.inc = val, v.copy()
            logger.debug("new incumbent %.6g from %s", val, source)
            return True
        return False

    def _heuristic(self, x, ub):
        st = self.model.structure
        ws = [w for w in st.image_var.values() if ub[w] > 0 and x[w] > 1e-6]
        ws.sort(key=lambda w: (-x[w], w))
        forbidden = ub <= 0.5
        return greedy_assignment(self.model, preferred=ws, forbidden=forbidden)

    def _done(self, status, bound, message=""):
        return finish(self.model, status, self.inc, bound, self.t0, self.nodes,
                      progress=self.progress, message=message, solver="bnb")

    def run(self) -> Solution:
        cfg, arr = self.cfg, self.arr
        pre = presolve(self.model)
        if pre.infeasible_reason:
            return finish(self.model, INFEASIBLE, None, -math.inf, self.t0, 0,
                          message=pre.infeasible_reason, solver="bnb")
        lb0, ub0 = arr.lb.copy(), pre.ub
        logger.info("presolve: %d dominated images fixed, %d unreachable targets",
                    pre.dominated, pre.unreachable)
        top = trivial_bound(self.model, lb0, ub0)
        # the unrestricted greedy is the baseline solve_greedy returns, so B&B never ends below it
        self._offer(greedy_assignment(self.model), "greedy")
        self._offer(greedy_assignment(self.model, forbidden=ub0 <= 0.5), "greedy after presolve")
        self._log(top)
        if relative_gap(top, self.inc_val) <= cfg.mip_gap:
            return self._done(OPTIMAL, top)

        deadline = self.t0 + cfg.time_limit
        lp = RevisedSimplex(arr.A, arr.row_lo, arr.row_hi, arr.c)
        binary = np.flatnonzero(arr.binary)
        absc = np.abs(arr.c)
        heur_every = cfg.heuristic_every or 1

        heap: list = []
        seq = 0
        dive: _Node | None = _Node(top, 0, (), None)
        pruned_max = -math.inf
        reported = top
        interrupted = ""

        def global_bound():
            b = max([self.inc_val, pruned_max] + ([-heap[0][0]] if heap else []) + ([dive.bound] if dive else []))
            return min(b, reported)

        while dive is not None or heap:
            if self.cancel is not None and self.cancel.is_set():
                interrupted = "cancelled"
                break
            if time.perf_counter() > deadline:
                interrupted = "time limit reached"
                break
            if cfg.node_limit is not None and self.nodes >= cfg.node_limit:
                interrupted = "node limit reached"
                break
            if dive is not None:
                node, dive = dive, None
            else:
                node = heapq.heappop(heap)[2]
            if node.bound <= self._prune_level():
                pruned_max = max(pruned_max, min(node.bound, self._prune_level()))
                continue
            lb, ub = lb0.copy(), ub0.copy()
            for j, val in node.fixes:
                lb[j] = ub[j] = val
            self.nodes += 1
            try:
                res = lp.solve(lb, ub, node.warm)
            except LPError as exc:
                logger.warning("node LP failed (%s); retrying cold", exc)
                try:
                    res = lp.solve(lb, ub, None)
                except LPError as exc2:
                    return self._done(FEASIBLE_GAP if self.inc is not None else TIMEOUT_NO_INCUMBENT,
                                      global_bound(), f"LP failure: {exc2}")
            if res.status == LP_INFEASIBLE:
                continue
            if res.status != LP_OPTIMAL:
                return self._done(FEASIBLE_GAP if self.inc is not None else TIMEOUT_NO_INCUMBENT,
                                  global_bound(), f"node LP {res.status}")
            bound = min(node.bound, res.objective)
            x = res.x
            frac_vals = x[binary]
            frac = np.minimum(frac_vals - np.floor(frac_vals), np.ceil(frac_vals) - frac_vals)
            fractional = frac > _INT_TOL
            improved = False
            if not fractional.any():
                v = x.copy()
                v[binary] = np.round(v[binary])
                improved = self._offer(v, "integral LP")
                if not improved and float(arr.c @ v) > self.inc_val + 1e-9:
                    improved = self._offer(self._heuristic(x, ub), "integral repair")
                if improved:
                    self._log(global_bound())
                continue
            if node.depth == 0 or self.nodes % heur_every == 0:
                improved = self._offer(self._heuristic(x, ub), "rounding")
            if bound <= self._prune_level():
                pruned_max = max(pruned_max, bound)
                if improved:
                    self._log(global_bound())
                continue
            cand = binary[fractional]
            fv = frac[fractional]
            best = max(range(cand.size), key=lambda i: (fv[i], absc[cand[i]], _neg_name(self.names[cand[i]])))
            j = int(cand[best])
            up_first = x[j] >= 0.5
            kids = [_Node(bound, node.depth + 1, node.fixes + ((j, 1.0),), res.basis),
                    _Node(bound, node.depth + 1, node.fixes + ((j, 0.0),), res.basis)]
            if not up_first:
                kids.reverse()
            dive = kids[0]
            seq += 1
            heapq.heappush(heap, (-bound, seq, kids[1]))
            gb = global_bound()
            if improved or gb < reported - 1e-9 * max(1.0, abs(reported)):
                reported = gb
                self._log(gb)
            if self.inc is not None and relative_gap(gb, self.inc_val) <= cfg.mip_gap:
                return self._done(OPTIMAL, gb)

        if interrupted:
            gb = global_bound()
            self._log(gb)
            if self.inc is None:
                return self._done(TIMEOUT_NO_INCUMBENT, gb, interrupted)
            status = OPTIMAL if relative_gap(gb, self.inc_val) <= cfg.mip_gap else FEASIBLE_GAP
            return self._done(status, gb, interrupted)
        if self.inc is None:
            return finish(self.model, INFEASIBLE, None, -math.inf, self.t0, self.nodes,
                          progress=self.progress, message="search exhausted without a feasible plan",
                          solver="bnb")
        gb = max(self.inc_val, min(pruned_max, reported))
        self._log(gb)
        return self._done(OPTIMAL, gb)

    def _prune_level(self):
        if self.inc is None:
            return -math.inf
        return self.inc_val + self.cfg.mip_gap * max(1.0, abs(self.inc_val)) if self.cfg.mip_gap > 0 \
            else self.inc_val + 1e-9 * max(1.0, abs(self.inc_val))


def _neg_name(name: str):
    # max() picks the lexicographically smallest name on full ties
    return tuple(-ord(ch) for ch in name)


def solve_bnb(model: PlanModel, config: SolverConfig | None = None, *,
              cancel: threading.Event | None = None, on_progress=None) -> Solution:
    return BranchAndBound(model, config, cancel=cancel, on_progress=on_progress).run()


def solve_lp_relaxation(model: PlanModel):
    """LP relaxation value and point (binaries relaxed to [0, 1])."""
    arr = model.arrays()
    lp = RevisedSimplex(arr.A, arr.row_lo, arr.row_hi, arr.c)
    return lp.solve(arr.lb, arr.ub)


def solve_greedy(model: PlanModel) -> Solution:
    t0 = time.perf_counter()
    pre = presolve(model)
    if pre.infeasible_reason:
        return finish(model, INFEASIBLE, None, -math.inf, t0, 0, message=pre.infeasible_reason, solver="greedy")
    v = greedy_assignment(model)
    top = trivial_bound(model, model.arrays().lb, pre.ub)
    if v is None:
        return finish(model, TIMEOUT_NO_INCUMBENT, None, top, t0, 0,
                      message="greedy found no plan meeting the mandatory targets", solver="greedy")
    val = float(model.arrays().c @ v)
    status = OPTIMAL if relative_gap(top, val) <= 1e-12 else FEASIBLE_GAP
    return finish(model, status, v, top, t0, 0, solver="greedy")


def plan_with_fallback(model: PlanModel, config: SolverConfig | None = None, *,
                       cancel: threading.Event | None = None, on_progress=None) -> Solution:
    """Solve with mandatory active targets; if that is infeasible, drop the requirement.

    The returned solution has ``fallback=True`` when the relaxed model was used.
    """
    sol = solve_bnb(model, config, cancel=cancel, on_progress=on_progress)
    if sol.status != INFEASIBLE or not model.active_mandatory:
        return sol
    logger.warning("mandatory active coverage infeasible (%s); re-planning without it", sol.message)
    relaxed = model.without_mandatory()
    sol2 = solve_bnb(relaxed, config, cancel=cancel, on_progress=on_progress)
    sol2.fallback = True
    sol2.message = ("fallback: " + sol.message + "; " + sol2.message).rstrip("; ")
    return sol2
