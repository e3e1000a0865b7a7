"""Greedy plan construction and LP-rounding repair.

The greedy adds images one at a time by marginal objective gain, first
counting only active targets and then every target.  After each tentative
addition the owning satellite's cycles are re-simulated: each cycle downlinks
as much stored data as its free slots and the energy rows allow, taking slots
in time order and skipping any that overlap a slot already claimed by
another satellite at the same station.
"""

from __future__ import annotations

import heapq
import logging
from dataclasses import dataclass

import numpy as np

from ..model import PlanModel

logger = logging.getLogger(__name__)

_EPS = 1e-9


@dataclass
class _SatPlan:
    sc: list[int]
    picks: list[list[int]]
    sa: list[float]
    ea: list[float]


class GreedyBuilder:
    def __init__(self, model: PlanModel, forbidden: np.ndarray | None = None):
        self.model = model
        st = model.structure
        self.st = st
        self.c = model.arrays().c
        self.forbidden = np.zeros(model.n_vars, dtype=bool) if forbidden is None else forbidden.copy()
        self.sats = st.satellites
        self.image_home = {}
        for si, sat in enumerate(self.sats):
            for ci, ct in enumerate(sat.cycles):
                for w in ct.images:
                    self.image_home[w] = (si, ci)
        self.cliques_of: dict[int, list[int]] = {}
        for q, clique in enumerate(st.exclusivity):
            for z in clique:
                self.cliques_of.setdefault(z, []).append(q)
        self.clique_holder = [None] * len(st.exclusivity)  # slot var claiming each clique
        self.selected: set[int] = set()
        self.covered = np.zeros(model.n_vars, dtype=np.int64)  # per x var
        self.active_x = {st.target_var[m] for m in st.active_targets}
        self.counts = [[0] * len(sat.cycles) for sat in self.sats]
        self.plans = []
        for si in range(len(self.sats)):
            plan = self._simulate(si, self.counts[si])
            if plan is None:
                raise ValueError(f"satellite {self.sats[si].satellite_id} cannot idle within its energy floor")
            self._claim(plan)
            self.plans.append(plan)

    # slot claims -------------------------------------------------------
    def _blocked(self, z: int) -> bool:
        for q in self.cliques_of.get(z, ()):
            h = self.clique_holder[q]
            if h is not None and h != z:
                return True
        return False

    def _claim(self, plan: _SatPlan):
        for picks in plan.picks:
            for z in picks:
                for q in self.cliques_of.get(z, ()):
                    self.clique_holder[q] = z

    def _release(self, plan: _SatPlan):
        for picks in plan.picks:
            for z in picks:
                for q in self.cliques_of.get(z, ()):
                    if self.clique_holder[q] == z:
                        self.clique_holder[q] = None

    def _simulate(self, si: int, counts: list[int]) -> _SatPlan | None:
        sat = self.sats[si]
        sa, ea = float(sat.buffer_initial), float(sat.battery_initial)
        sas, eas, picks_all = [sa], [ea], []
        cap, emin = sat.battery_capacity, sat.battery_min
        for ci, ct in enumerate(sat.cycles):
            sc = counts[ci]
            if sa + sc > sat.buffer_capacity + _EPS:
                return None
            usable = [z for z in ct.slots if not self.forbidden[z] and not self._blocked(z)]
            sp = min(len(usable), int(round(sa + sc)))
            has_load = ct.energy_per_image * len(ct.images) + ct.energy_per_slot * len(ct.slots) > 0
            window_cap = max(0.0, cap - emin + ct.drop_window)
            nxt = None
            while sp >= 0:
                C = ct.energy_per_image * sc + ct.energy_per_slot * sp
                ok = True
                if has_load and C > window_cap + _EPS * (1 + window_cap):
                    ok = False
                if ea - C < emin - ct.drop_prefix - _EPS * (1 + emin):
                    ok = False
                en = min(ea + ct.net_generation - C, cap + ct.drop_tail - C, cap)
                if en < emin - _EPS * (1 + emin):
                    ok = False
                if ok:
                    nxt = en
                    break
                sp -= 1
            if nxt is None:
                return None
            picks_all.append(usable[:sp])
            sa = sa + sc - sp
            ea = nxt
            sas.append(sa)
            eas.append(ea)
        return _SatPlan(list(counts), picks_all, sas, eas)

    # selection -----------------------------------------------------------
    def gain(self, w: int, active_only: bool) -> float:
        g = 0.0
        for x in self.st.image_targets[w]:
            if self.covered[x] == 0 and (not active_only or x in self.active_x):
                g += self.c[x]
        return g

    def try_add(self, w: int) -> bool:
        if w in self.selected or self.forbidden[w] or w not in self.image_home:
            return False
        si, ci = self.image_home[w]
        counts = list(self.counts[si])
        counts[ci] += 1
        old = self.plans[si]
        self._release(old)
        plan = self._simulate(si, counts)
        if plan is None:
            self._claim(old)
            return False
        self._claim(plan)
        self.plans[si] = plan
        self.counts[si] = counts
        self.selected.add(w)
        for x in self.st.image_targets[w]:
            self.covered[x] += 1
        return True

    def greedy_pass(self, active_only: bool, candidates=None):
        cand = self.image_home.keys() if candidates is None else candidates
        heap = []
        for w in cand:
            if w in self.selected or self.forbidden[w]:
                continue
            g = self.gain(w, active_only)
            if g > 0:
                heap.append((-g, w))
        heapq.heapify(heap)
        while heap:
            neg, w = heapq.heappop(heap)
            g = self.gain(w, active_only)
            if g <= 0:
                continue
            if g < -neg - 1e-12 and heap and -heap[0][0] > g:
                heapq.heappush(heap, (-g, w))
                continue
            self.try_add(w)

    def assignment(self) -> np.ndarray:
        n = self.model.n_vars
        v = np.zeros(n)
        for w in self.selected:
            v[w] = 1.0
        for x in self.st.target_var.values():
            v[x] = 1.0 if self.covered[x] > 0 else 0.0
        for si, sat in enumerate(self.sats):
            plan = self.plans[si]
            for ci, ct in enumerate(sat.cycles):
                sc = plan.sc[ci]
                sp = len(plan.picks[ci])
                for z in plan.picks[ci]:
                    v[z] = 1.0
                v[ct.sa] = plan.sa[ci]
                v[ct.sa_next] = plan.sa[ci + 1]
                v[ct.ea] = plan.ea[ci]
                v[ct.ea_next] = plan.ea[ci + 1]
                v[ct.sc] = sc
                v[ct.sp] = sp
                v[ct.enet] = ct.net_generation - ct.energy_per_image * sc - ct.energy_per_slot * sp
        return v

    def mandatory_met(self) -> bool:
        if not self.model.active_mandatory:
            return True
        return all(self.covered[self.st.target_var[m]] > 0 for m in self.st.active_targets)


def greedy_assignment(model: PlanModel, *, preferred=None, forbidden=None) -> np.ndarray | None:
    """A feasible 0/1 plan, or None if the heuristic cannot meet the mandatory targets.

    ``preferred`` is an ordered list of image variables tried before the
    gain-driven passes (used to repair a rounded LP point).  Variables marked
    in the boolean mask ``forbidden`` are never set.
    """
    try:
        gb = GreedyBuilder(model, forbidden)
    except ValueError as exc:
        logger.debug("greedy: %s", exc)
        return None
    if preferred is not None:
        for w in preferred:
            gb.try_add(int(w))
    gb.greedy_pass(active_only=True)
    gb.greedy_pass(active_only=False)
    if not gb.mandatory_met():
        return None
    v = gb.assignment()
    bad = model.violations(v)
    if bad:
        logger.warning("greedy plan failed model check (%s); discarding", ", ".join(bad[:5]))
        return None
    return v
