"""Mixed-integer planning model over data cycles.

Maximises ``active_weight * sum(r_a x_a) + sum(r_b x_b)`` subject to target
coverage, optional mandatory active targets, per-cycle storage and energy
bookkeeping, and ground-station exclusivity.

Energy rows: besides the cycle-end inventory recursion, each cycle carries
three guard rows built from the cycle's per-second generation profile.  They
charge the cycle's whole collection/downlink consumption against the worst
point of that profile, so a plan accepted here also keeps the battery above
its floor at every second, with clamping at capacity, which is what the
execution simulator checks.
"""

from __future__ import annotations

import hashlib
import json
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .cycles import CycleBundle, DataCycle, coverage_map
from .scenario import Scenario

BINARY = "binary"
CONTINUOUS = "continuous"
SENSES = ("<=", "=", ">=")
TAGS = ("x", "w", "z", "sa", "sc", "sp", "ea", "eNet")


@dataclass(frozen=True)
class Variable:
    name: str
    kind: str
    lower: float
    upper: float
    tag: str

    def __post_init__(self):
        if self.kind == BINARY and (self.lower, self.upper) != (0.0, 1.0):
            raise ValueError(f"binary {self.name} must have bounds [0, 1]")
        if not (np.isfinite(self.lower) and np.isfinite(self.upper)) or self.lower > self.upper:
            raise ValueError(f"variable {self.name} has invalid bounds [{self.lower}, {self.upper}]")


@dataclass(frozen=True)
class LinearConstraint:
    name: str
    coefficients: tuple[tuple[int, float], ...]
    sense: str
    rhs: float
    tag: str

    def __post_init__(self):
        if self.sense not in SENSES:
            raise ValueError(f"bad sense {self.sense!r}")
        if not any(c != 0 for _, c in self.coefficients):
            raise ValueError(f"constraint {self.name} has no nonzero coefficient")
        if not np.isfinite(self.rhs):
            raise ValueError(f"constraint {self.name} has a non-finite rhs")


@dataclass(frozen=True)
class CycleTerms:
    """Variable indices and energy constants of one (satellite, cycle)."""

    satellite_id: str
    index: int
    sa: int
    sa_next: int
    sc: int
    sp: int
    ea: int
    ea_next: int
    enet: int
    images: tuple[int, ...]
    slots: tuple[int, ...]
    net_generation: float  # sum over the cycle of generation minus base load, J
    drop_prefix: float  # worst partial sum of that profile from the cycle start (<= 0)
    drop_tail: float  # worst partial sum ending at the cycle end (<= 0)
    drop_window: float  # worst partial sum over any sub-window (<= 0)
    energy_per_image: float
    energy_per_slot: float


@dataclass(frozen=True)
class SatelliteTerms:
    satellite_id: str
    buffer_capacity: int
    buffer_initial: int
    battery_capacity: float
    battery_min: float
    battery_initial: float
    cycles: tuple[CycleTerms, ...]


@dataclass
class ModelStructure:
    target_var: dict[str, int]
    target_images: dict[str, tuple[int, ...]]
    active_targets: tuple[str, ...]
    image_var: dict[str, int]
    image_targets: dict[int, tuple[int, ...]]  # w index -> x indices
    slot_var: dict[str, int]
    slot_satellite: dict[int, str]
    satellites: tuple[SatelliteTerms, ...]
    exclusivity: tuple[tuple[int, ...], ...]
    unreachable: tuple[str, ...]

    @property
    def image_of_var(self) -> dict[int, str]:
        return {v: k for k, v in self.image_var.items()}

    @property
    def slot_of_var(self) -> dict[int, str]:
        return {v: k for k, v in self.slot_var.items()}


@dataclass(frozen=True)
class ModelArrays:
    c: np.ndarray
    A: sp.csr_matrix
    row_lo: np.ndarray
    row_hi: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    binary: np.ndarray


@dataclass
class PlanModel:
    variables: list[Variable]
    constraints: list[LinearConstraint]
    objective: dict[int, float]
    structure: ModelStructure
    metadata: dict = field(default_factory=dict)
    _arrays: ModelArrays | None = field(default=None, repr=False, compare=False)

    @property
    def active_mandatory(self) -> bool:
        return bool(self.metadata.get("active_mandatory", False))

    @property
    def n_vars(self) -> int:
        return len(self.variables)

    def arrays(self) -> ModelArrays:
        if self._arrays is None:
            n = len(self.variables)
            rows, cols, vals = [], [], []
            lo = np.empty(len(self.constraints))
            hi = np.empty(len(self.constraints))
            for r, con in enumerate(self.constraints):
                for j, v in con.coefficients:
                    rows.append(r)
                    cols.append(j)
                    vals.append(v)
                lo[r] = con.rhs if con.sense in ("=", ">=") else -np.inf
                hi[r] = con.rhs if con.sense in ("=", "<=") else np.inf
            A = sp.csr_matrix((vals, (rows, cols)), shape=(len(self.constraints), n))
            c = np.zeros(n)
            for j, v in self.objective.items():
                c[j] = v
            self._arrays = ModelArrays(
                c=c,
                A=A,
                row_lo=lo,
                row_hi=hi,
                lb=np.array([v.lower for v in self.variables]),
                ub=np.array([v.upper for v in self.variables]),
                binary=np.array([v.kind == BINARY for v in self.variables], dtype=bool),
            )
        return self._arrays

    def objective_value(self, x) -> float:
        return float(self.arrays().c @ np.asarray(x, dtype=float))

    def violations(self, x, tol: float = 1e-7) -> list[str]:
        """Names of constraints or bounds violated by assignment ``x``."""
        arr = self.arrays()
        x = np.asarray(x, dtype=float)
        act = arr.A @ x
        scale = 1.0 + np.maximum(np.abs(np.where(np.isfinite(arr.row_lo), arr.row_lo, 0)),
                                 np.abs(np.where(np.isfinite(arr.row_hi), arr.row_hi, 0)))
        bad = np.flatnonzero((act < arr.row_lo - tol * scale) | (act > arr.row_hi + tol * scale))
        out = [self.constraints[r].name for r in bad]
        vb = np.flatnonzero((x < arr.lb - tol * (1 + np.abs(arr.lb))) | (x > arr.ub + tol * (1 + np.abs(arr.ub))))
        out += [f"bound:{self.variables[j].name}" for j in vb]
        frac = np.flatnonzero(arr.binary & (np.abs(x - np.round(x)) > 1e-6))
        out += [f"integrality:{self.variables[j].name}" for j in frac]
        return out

    def is_feasible(self, x, tol: float = 1e-7) -> bool:
        return not self.violations(x, tol)

    def without_mandatory(self) -> "PlanModel":
        cons = [c for c in self.constraints if c.tag != "mandatory"]
        meta = dict(self.metadata, active_mandatory=False)
        return PlanModel(list(self.variables), cons, dict(self.objective), self.structure, meta)

    def available_reward(self) -> float:
        """Objective with every reachable target observed."""
        reach = set(self.structure.target_var) - set(self.structure.unreachable)
        return float(sum(self.objective.get(self.structure.target_var[m], 0.0) for m in reach))


# ---------------------------------------------------------------------------
# energy profile constants


def energy_profile(eclipsed: np.ndarray, power_generation: float, power_base: float) -> tuple[float, float, float, float]:
    """Net generation and worst prefix / tail / window partial sums over a cycle."""
    g = np.where(eclipsed, 0.0, power_generation) - power_base
    P = np.concatenate([[0.0], np.cumsum(g)])
    total = float(P[-1])
    prefix = float(P.min())
    tail = float(total - P.max())
    window = float((P - np.maximum.accumulate(P)).min())
    return total, prefix, tail, window


# ---------------------------------------------------------------------------
# builder


class _Builder:
    def __init__(self):
        self.variables: list[Variable] = []
        self.constraints: list[LinearConstraint] = []
        self.counters = defaultdict(int)

    def var(self, tag: str, kind: str, lower: float, upper: float) -> int:
        k = self.counters[tag]
        self.counters[tag] += 1
        self.variables.append(Variable(f"{tag}_{k}", kind, float(lower), float(upper), tag))
        return len(self.variables) - 1

    def con(self, tag: str, terms: dict[int, float], sense: str, rhs: float):
        coeffs = tuple((j, float(v)) for j, v in terms.items() if v != 0)
        k = self.counters["row:" + tag]
        self.counters["row:" + tag] += 1
        self.constraints.append(LinearConstraint(f"{tag}_{k}", coeffs, sense, float(rhs), tag))


def _exclusivity_cliques(slot_list) -> list[list]:
    """Maximal sets of mutually overlapping slots on one station held by different satellites."""
    by_gs = defaultdict(list)
    for s in slot_list:
        by_gs[s.gs_id].append(s)
    out = []
    for gs in sorted(by_gs):
        slots = sorted(by_gs[gs], key=lambda s: (s.start, s.satellite_id))
        seen = set()
        for s in slots:
            t = s.start
            clique = tuple(sorted((o for o in slots if o.start <= t < o.end), key=lambda o: o.slot_id))
            sats = {o.satellite_id for o in clique}
            if len(sats) < 2:
                continue
            key = tuple(o.slot_id for o in clique)
            if key in seen:
                continue
            seen.add(key)
            out.append(list(clique))
    # drop cliques contained in another
    sets = [frozenset(o.slot_id for o in c) for c in out]
    keep = [c for c, s in zip(out, sets) if not any(s < other for other in sets)]
    return keep


def build_model(cycles, targets, scenario: Scenario, active_mandatory: bool = True, *,
                images=None) -> PlanModel:
    """Assemble the planning MILP.

    ``cycles`` is a :class:`CycleBundle` (or a satellite -> cycles mapping, in
    which case ``images`` must list the image opportunities).
    """
    if isinstance(cycles, CycleBundle):
        images = cycles.images
        cycle_map = cycles.cycles
    else:
        cycle_map = cycles
        if images is None:
            raise ValueError("images are required when cycles is a plain mapping")
    targets = list(targets)
    cov = coverage_map(images, targets)
    b = _Builder()

    # binaries
    target_var = {}
    objective = {}
    for t in targets:
        j = b.var("x", BINARY, 0, 1)
        target_var[t.id] = j
        coef = scenario.active_weight * t.reward if t.is_active else t.reward
        if coef:
            objective[j] = coef
    image_var = {}
    sat_order = [s.id for s in scenario.satellites]
    ordered_sats = [s for s in sat_order if s in cycle_map] + sorted(s for s in cycle_map if s not in sat_order)
    for sid in ordered_sats:
        for c in cycle_map[sid]:
            for iid in c.images:
                image_var[iid] = b.var("w", BINARY, 0, 1)
    slot_var = {}
    slot_satellite = {}
    all_slots = []
    for sid in ordered_sats:
        for c in cycle_map[sid]:
            for s in c.downlink_slots:
                j = b.var("z", BINARY, 0, 1)
                slot_var[s.slot_id] = j
                slot_satellite[j] = sid
                all_slots.append(s)

    target_images = {m: tuple(image_var[i] for i in cov.target_images[m] if i in image_var) for m in target_var}
    image_targets = {image_var[i]: tuple(target_var[m] for m in cov.image_targets[i]) for i in image_var}

    # objective coverage (each reward counted once through x_m)
    for m, j in target_var.items():
        terms = {j: 1.0}
        for w in target_images[m]:
            terms[w] = terms.get(w, 0.0) - 1.0
        b.con("coverage", terms, "<=", 0.0)
    active_ids = tuple(t.id for t in targets if t.is_active)
    if active_mandatory:
        for m in active_ids:
            b.con("mandatory", {target_var[m]: 1.0}, "=", 1.0)

    sat_terms = []
    for sid in ordered_sats:
        try:
            sat = scenario.satellite(sid)
        except KeyError:
            raise ValueError(f"cycles reference unknown satellite {sid!r}") from None
        cs: list[DataCycle] = cycle_map[sid]
        B = sat.buffer_capacity
        sa = [b.var("sa", CONTINUOUS, 0, B)]
        ea = [b.var("ea", CONTINUOUS, sat.battery_min, sat.battery_capacity)]
        b.con("storage_init", {sa[0]: 1.0}, "=", sat.buffer_initial)
        b.con("energy_init", {ea[0]: 1.0}, "=", sat.battery_initial)
        terms_list = []
        for c in cs:
            w_idx = tuple(image_var[i] for i in c.images)
            z_idx = tuple(slot_var[s.slot_id] for s in c.downlink_slots)
            e_img = sat.power_observe * 1.0
            e_slot_each = [sat.power_downlink * s.duration for s in c.downlink_slots]
            e_slot = e_slot_each[0] if e_slot_each else sat.power_downlink * scenario.downlink_slot
            if any(abs(v - e_slot) > 0 for v in e_slot_each):
                raise ValueError("all slots of a cycle must share one duration")
            G, d_pre, d_tail, d_win = energy_profile(c.eclipsed, sat.power_generation, sat.power_base)
            n_img, n_slot = len(w_idx), len(z_idx)
            sc = b.var("sc", CONTINUOUS, 0, n_img)
            spv = b.var("sp", CONTINUOUS, 0, n_slot)
            enet = b.var("eNet", CONTINUOUS, G - e_img * n_img - e_slot * n_slot, G)
            sa.append(b.var("sa", CONTINUOUS, 0, B))
            ea.append(b.var("ea", CONTINUOUS, sat.battery_min, sat.battery_capacity))
            k = len(terms_list)
            s_k, s_n, e_k, e_n = sa[k], sa[k + 1], ea[k], ea[k + 1]

            b.con("storage_used", {sc: 1.0, **{w: -1.0 for w in w_idx}}, "=", 0.0)
            b.con("storage_freed", {spv: 1.0, **{z: -1.0 for z in z_idx}}, "=", 0.0)
            b.con("storage_balance", {s_n: 1.0, s_k: -1.0, sc: -1.0, spv: 1.0}, "=", 0.0)
            b.con("storage_full", {s_k: 1.0, sc: 1.0}, "<=", B)
            b.con("storage_empty", {spv: 1.0, s_k: -1.0, sc: -1.0}, "<=", 0.0)

            b.con("energy_net", {enet: 1.0, sc: e_img, spv: e_slot}, "=", G)
            b.con("energy_balance", {e_n: 1.0, e_k: -1.0, enet: -1.0}, "<=", 0.0)
            b.con("energy_clamp", {e_n: 1.0, sc: e_img, spv: e_slot}, "<=", sat.battery_capacity + d_tail)
            b.con("energy_floor", {e_k: 1.0, sc: -e_img, spv: -e_slot}, ">=", sat.battery_min - d_pre)
            if e_img * n_img + e_slot * n_slot > 0:
                # clipped at 0: if a full battery cannot ride out the cycle, no decision fixes it
                b.con("energy_window", {sc: e_img, spv: e_slot}, "<=",
                      max(0.0, sat.battery_capacity - sat.battery_min + d_win))

            terms_list.append(CycleTerms(
                satellite_id=sid, index=c.index, sa=s_k, sa_next=s_n, sc=sc, sp=spv, ea=e_k, ea_next=e_n,
                enet=enet, images=w_idx, slots=z_idx, net_generation=G, drop_prefix=d_pre,
                drop_tail=d_tail, drop_window=d_win, energy_per_image=e_img, energy_per_slot=e_slot,
            ))
        sat_terms.append(SatelliteTerms(sid, B, sat.buffer_initial, sat.battery_capacity, sat.battery_min,
                                        sat.battery_initial, tuple(terms_list)))

    cliques = _exclusivity_cliques(all_slots)
    excl = []
    for clique in cliques:
        idx = tuple(slot_var[s.slot_id] for s in clique)
        b.con("gs_exclusive", {j: 1.0 for j in idx}, "<=", 1.0)
        excl.append(idx)

    structure = ModelStructure(
        target_var=target_var,
        target_images=target_images,
        active_targets=active_ids,
        image_var=image_var,
        image_targets=image_targets,
        slot_var=slot_var,
        slot_satellite=slot_satellite,
        satellites=tuple(sat_terms),
        exclusivity=tuple(excl),
        unreachable=tuple(cov.unreachable),
    )
    meta = {
        "active_mandatory": bool(active_mandatory),
        "active_weight": scenario.active_weight,
        "digest": _digest(scenario, images, cycle_map, targets),
    }
    for j in image_var.values():
        assert j in image_targets
    return PlanModel(b.variables, b.constraints, objective, structure, meta)


def _digest(scenario, images, cycle_map, targets) -> dict:
    from .scenario import serialize_scenario

    h_s = hashlib.sha256(serialize_scenario(scenario).encode()).hexdigest()
    h = hashlib.sha256()
    for im in images:
        h.update(f"{im.image_id}|{','.join(im.covered_targets)};".encode())
    for sid in sorted(cycle_map):
        for c in cycle_map[sid]:
            h.update(f"{sid}:{c.index}:{c.start}:{c.end}:{c.phase_boundary}:".encode())
            h.update(",".join(s.slot_id for s in c.downlink_slots).encode())
            h.update(np.packbits(c.eclipsed).tobytes())
    h.update(",".join(t.id for t in targets).encode())
    return {"scenario_sha256": h_s, "cycles_sha256": h.hexdigest()}


# ---------------------------------------------------------------------------
# reporting / export


def model_stats(model: PlanModel) -> dict:
    var_counts = defaultdict(int)
    binaries = defaultdict(int)
    for v in model.variables:
        var_counts[v.tag] += 1
        if v.kind == BINARY:
            binaries[v.tag] += 1
    con_counts = defaultdict(int)
    for c in model.constraints:
        con_counts[c.tag] += 1
    return {
        "variables": dict(sorted(var_counts.items())),
        "binaries": dict(sorted(binaries.items())),
        "n_binaries": int(sum(binaries.values())),
        "n_variables": len(model.variables),
        "constraints": dict(sorted(con_counts.items())),
        "n_constraints": len(model.constraints),
    }


def _fmt(v: float) -> str:
    return format(v, ".17g")


def _expr(terms, names) -> str:
    parts = []
    for k, (j, v) in enumerate(terms):
        sign = "-" if v < 0 else "+"
        mag = abs(v)
        coef = "" if mag == 1 else _fmt(mag) + " "
        if k == 0:
            parts.append(("- " if v < 0 else "") + coef + names[j])
        else:
            parts.append(f"{sign} {coef}{names[j]}")
    # LP readers cap line length; wrap every few terms
    lines, cur = [], []
    for p in parts:
        cur.append(p)
        if len(cur) == 8:
            lines.append(" ".join(cur))
            cur = []
    if cur:
        lines.append(" ".join(cur))
    return "\n   ".join(lines)


def export_lp(model: PlanModel) -> str:
    """CPLEX LP text for the model."""
    names = [v.name for v in model.variables]
    out = ["\\ eoplan planning model"]
    dig = model.metadata.get("digest")
    if dig:
        out.append(f"\\ scenario_sha256={dig['scenario_sha256']} cycles_sha256={dig['cycles_sha256']}")
    out.append("Maximize")
    obj_terms = sorted(model.objective.items())
    if obj_terms:
        out.append(" obj: " + _expr(obj_terms, names))
    else:
        out.append(" obj: 0 " + names[0] if names else " obj:")
    out.append("Subject To")
    for con in model.constraints:
        out.append(f" {con.name}: {_expr(con.coefficients, names)} {con.sense} {_fmt(con.rhs)}")
    out.append("Bounds")
    for v in model.variables:
        if v.kind == CONTINUOUS:
            out.append(f" {_fmt(v.lower)} <= {v.name} <= {_fmt(v.upper)}")
    out.append("Binaries")
    bins = [v.name for v in model.variables if v.kind == BINARY]
    for k in range(0, len(bins), 10):
        out.append(" " + " ".join(bins[k:k + 10]))
    out.append("End")
    return "\n".join(out) + "\n"


def model_digest_json(model: PlanModel) -> str:
    return json.dumps({"schema_version": 1, **model.metadata.get("digest", {}),
                       "active_mandatory": model.active_mandatory,
                       "stats": model_stats(model)}, sort_keys=True, indent=1) + "\n"
