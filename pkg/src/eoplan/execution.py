"""Command schedules, second-level validation and plan metrics.

A schedule lists, per satellite, when to collect an image and when to
downlink one.  Validation replays it second by second against the access
timeline: a FIFO image buffer, a battery integrated at 1 s steps and clamped
at capacity, and ground-station occupancy shared by all satellites.
"""

from __future__ import annotations

import json
import math
from collections import defaultdict, deque
from dataclasses import asdict, dataclass, field

import numpy as np

from .cycles import CycleBundle
from .model import PlanModel
from .scenario import Scenario
from .solver.core import Solution
from .timeline import AccessTimeline

COLLECT = "collect"
DOWNLINK = "downlink"

STORAGE_FULL = "storage_full"
STORAGE_EMPTY = "storage_empty"
BATTERY_FLOOR = "battery_floor"
GS_EXCLUSIVITY = "gs_exclusivity"
COLLECT_OPPORTUNITY = "collect_opportunity"
DOWNLINK_CONTACT = "downlink_contact"
COMMAND_OVERLAP = "command_overlap"
FIFO_ORDER = "fifo_order"
UNKNOWN_SATELLITE = "unknown_satellite"
FAMILIES = (STORAGE_FULL, STORAGE_EMPTY, BATTERY_FLOOR, GS_EXCLUSIVITY, COLLECT_OPPORTUNITY,
            DOWNLINK_CONTACT, COMMAND_OVERLAP, FIFO_ORDER, UNKNOWN_SATELLITE)


class ConsistencyError(ValueError):
    """Solution, model and cycles do not describe the same plan."""


@dataclass(frozen=True)
class Command:
    kind: str
    satellite_id: str
    t: int
    duration: int
    image_id: str | None = None
    slot_id: str | None = None
    gs_id: str | None = None

    @property
    def end(self) -> int:
        return self.t + self.duration


def initial_image_id(satellite_id: str, k: int) -> str:
    """Name of the k-th image already on board at the start of the horizon."""
    return f"{satellite_id}#init{k}"


@dataclass
class Schedule:
    commands: dict[str, list[Command]]
    initial_contents: dict[str, list[str]] = field(default_factory=dict)
    digest: dict = field(default_factory=dict)

    def all_commands(self) -> list[Command]:
        return [c for sid in self.commands for c in self.commands[sid]]

    def collects(self, satellite_id: str | None = None) -> list[Command]:
        sats = [satellite_id] if satellite_id else list(self.commands)
        return [c for s in sats for c in self.commands.get(s, []) if c.kind == COLLECT]

    def downlinks(self, satellite_id: str | None = None) -> list[Command]:
        sats = [satellite_id] if satellite_id else list(self.commands)
        return [c for s in sats for c in self.commands.get(s, []) if c.kind == DOWNLINK]

    def with_command(self, cmd: Command) -> "Schedule":
        cmds = {s: list(v) for s, v in self.commands.items()}
        cmds.setdefault(cmd.satellite_id, []).append(cmd)
        cmds[cmd.satellite_id].sort(key=lambda c: (c.t, c.kind))
        return Schedule(cmds, {s: list(v) for s, v in self.initial_contents.items()}, dict(self.digest))

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "digest": self.digest,
            "initial_contents": self.initial_contents,
            "satellites": {
                sid: [{k: v for k, v in asdict(c).items() if k != "satellite_id" and v is not None} for c in cmds]
                for sid, cmds in self.commands.items()
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, doc: dict) -> "Schedule":
        cmds = {}
        for sid, items in doc["satellites"].items():
            cmds[sid] = [Command(d["kind"], sid, int(d["t"]), int(d["duration"]), d.get("image_id"),
                                 d.get("slot_id"), d.get("gs_id")) for d in items]
        return cls(cmds, {k: list(v) for k, v in doc.get("initial_contents", {}).items()}, doc.get("digest", {}))


def schedule_from_solution(solution: Solution, model: PlanModel, bundle: CycleBundle) -> Schedule:
    """Expand a plan into per-satellite commands.

    Collects happen at their opportunity seconds; each selected slot carries
    the oldest image still on board (images already stored at the start of
    the horizon come first).
    """
    if solution.values is None:
        raise ConsistencyError(f"solution has no assignment (status {solution.status})")
    names = [v.name for v in model.variables]
    if list(solution.names) != names:
        raise ConsistencyError("solution variables do not match the model")
    st = model.structure
    images = {im.image_id: im for im in bundle.images}
    slots = {s.slot_id: s for s in bundle.slots}
    missing = [i for i in st.image_var if i not in images] + [s for s in st.slot_var if s not in slots]
    if missing:
        raise ConsistencyError(f"model refers to {len(missing)} images/slots absent from the cycles, e.g. {missing[0]}")
    x = solution.values
    chosen_img = [images[i] for i, j in st.image_var.items() if x[j] > 0.5]
    chosen_slot = [slots[s] for s, j in st.slot_var.items() if x[j] > 0.5]
    by_sat = defaultdict(list)
    for im in chosen_img:
        by_sat[im.satellite_id].append((im.t, 0, im))
    for sl in chosen_slot:
        by_sat[sl.satellite_id].append((sl.start, 1, sl))
    initial = {sat.satellite_id: [initial_image_id(sat.satellite_id, k) for k in range(sat.buffer_initial)]
               for sat in st.satellites}
    out: dict[str, list[Command]] = {}
    for sat in st.satellites:
        sid = sat.satellite_id
        queue = deque(initial[sid])
        cmds = []
        for t, kind, ev in sorted(by_sat.get(sid, []), key=lambda e: (e[0], e[1])):
            if kind == 0:
                queue.append(ev.image_id)
                cmds.append(Command(COLLECT, sid, ev.t, ev.duration, image_id=ev.image_id))
            else:
                if not queue:
                    raise ConsistencyError(f"slot {ev.slot_id} is selected while {sid} stores nothing")
                cmds.append(Command(DOWNLINK, sid, ev.start, ev.duration, image_id=queue.popleft(),
                                    slot_id=ev.slot_id, gs_id=ev.gs_id))
        out[sid] = cmds
    return Schedule(out, {k: v for k, v in initial.items() if v}, dict(model.metadata.get("digest", {})))


# ---------------------------------------------------------------------------
# validation


@dataclass
class ResourceTrace:
    satellite_id: str
    stored: np.ndarray  # images on board after each second
    battery: np.ndarray  # J at the end of each second
    delivered: list[tuple[str, int]]  # (image_id, downlink end) in delivery order
    final_contents: list[str]


@dataclass
class Violation:
    family: str
    satellite_id: str | None
    t: int
    detail: str


@dataclass
class ValidationReport:
    violations: list[Violation]
    traces: dict[str, ResourceTrace] = field(repr=False, default_factory=dict)

    @property
    def passed(self) -> bool:
        return not self.violations

    def first_violation(self, family: str) -> int | None:
        ts = [v.t for v in self.violations if v.family == family]
        return min(ts) if ts else None

    @property
    def failed_families(self) -> set[str]:
        return {v.family for v in self.violations}

    def to_dict(self) -> dict:
        fams = {}
        for fam in FAMILIES:
            hits = [v for v in self.violations if v.family == fam]
            first = min(hits, key=lambda v: (v.t, v.satellite_id or "")) if hits else None
            fams[fam] = {
                "passed": not hits,
                "count": len(hits),
                "first_violation_t": first.t if first else None,
                "first_violation": first.detail if first else None,
            }
        return {"schema_version": 1, "passed": self.passed, "families": fams}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"


def clamped_battery(initial: float, capacity: float, delta: np.ndarray) -> np.ndarray:
    """Energy after each second for ``e[t] = min(capacity, e[t-1] + delta[t])``."""
    S = np.cumsum(delta)
    head = np.minimum.accumulate(capacity - S)
    return S + np.minimum(initial, head)


def validate(schedule: Schedule, scenario: Scenario, timeline: AccessTimeline) -> ValidationReport:
    horizon = scenario.horizon
    viol: list[Violation] = []
    traces = {}
    gs_index = {g: k for k, g in enumerate(timeline.ground_station_ids)}
    known = {s.id for s in scenario.satellites}
    for sid in schedule.commands:
        if sid not in known:
            viol.append(Violation(UNKNOWN_SATELLITE, sid, 0, f"{sid} is not in the scenario"))
    downlinks_by_gs = defaultdict(list)
    for sat in scenario.satellites:
        sid = sat.id
        cmds = sorted(schedule.commands.get(sid, []), key=lambda c: (c.t, c.kind))
        try:
            acc = timeline.satellite(sid)
        except KeyError:
            if cmds:
                viol.append(Violation(UNKNOWN_SATELLITE, sid, cmds[0].t, f"no access data for {sid}"))
            continue
        contact = timeline.contact_seconds(sid)
        sunlit = ~timeline.eclipsed_seconds(sid)
        obs_times = set(int(t) for t in acc.observations)
        load = np.zeros(horizon)
        collect_at = {}
        downlink_at = {}
        prev_end, prev = -math.inf, None
        for c in cmds:
            if c.t < prev_end:
                viol.append(Violation(COMMAND_OVERLAP, sid, c.t,
                                      f"{c.kind} at {c.t} overlaps {prev.kind} at {prev.t}"))
            if c.end > prev_end:
                prev_end, prev = c.end, c
            if c.t < 0 or c.end > horizon or c.duration < 1:
                viol.append(Violation(COMMAND_OVERLAP, sid, max(c.t, 0), f"{c.kind} at {c.t} leaves the horizon"))
                continue
            if c.kind == COLLECT:
                if c.t not in obs_times or c.duration != 1:
                    viol.append(Violation(COLLECT_OPPORTUNITY, sid, c.t, f"no observation opportunity at {c.t}"))
                load[c.t:c.end] += sat.power_observe
                collect_at.setdefault(c.t, []).append(c)
            elif c.kind == DOWNLINK:
                g = gs_index.get(c.gs_id, -2)
                bad = np.flatnonzero(contact[c.t:c.end] != g)
                if bad.size:
                    viol.append(Violation(DOWNLINK_CONTACT, sid, c.t + int(bad[0]),
                                          f"downlink at {c.t} has no contact with {c.gs_id} at {c.t + int(bad[0])}"))
                load[c.t:c.end] += sat.power_downlink
                downlink_at.setdefault(c.t, []).append(c)
                downlinks_by_gs[c.gs_id].append(c)
            else:
                viol.append(Violation(COMMAND_OVERLAP, sid, c.t, f"unknown command kind {c.kind!r}"))

        # buffer, in time order: collects add at their second, downlinks pop at slot end
        queue = deque(schedule.initial_contents.get(sid, [initial_image_id(sid, k) for k in range(sat.buffer_initial)]))
        if len(queue) != sat.buffer_initial:
            viol.append(Violation(FIFO_ORDER, sid, 0, "initial buffer contents disagree with buffer_initial"))
        stored_delta = np.zeros(horizon + 1, dtype=np.int64)
        # a slot ending at t frees its image before a collect at t
        events = sorted([(t, 1, c) for t, cs in collect_at.items() for c in cs]
                        + [(c.end, 0, c) for cs in downlink_at.values() for c in cs],
                        key=lambda e: (e[0], e[1]))
        delivered = []
        full_reported = empty_reported = fifo_reported = False
        level = len(queue)
        for t, kind, c in events:
            if kind == 1:
                queue.append(c.image_id)
                level += 1
                stored_delta[t] += 1
                if level > sat.buffer_capacity and not full_reported:
                    viol.append(Violation(STORAGE_FULL, sid, t,
                                          f"collect at {t} brings storage to {level} > {sat.buffer_capacity}"))
                    full_reported = True
            else:
                if not queue:
                    if not empty_reported:
                        viol.append(Violation(STORAGE_EMPTY, sid, c.t, f"downlink at {c.t} with an empty buffer"))
                        empty_reported = True
                    continue
                head = queue.popleft()
                level -= 1
                stored_delta[t] -= 1
                if c.image_id is not None and c.image_id != head and not fifo_reported:
                    viol.append(Violation(FIFO_ORDER, sid, c.t,
                                          f"downlink at {c.t} sends {c.image_id} but the oldest image is {head}"))
                    fifo_reported = True
                delivered.append((head, c.end))
        stored = sat.buffer_initial + np.cumsum(stored_delta[:horizon])

        delta = np.where(sunlit, sat.power_generation, 0.0) - sat.power_base - load
        battery = clamped_battery(sat.battery_initial, sat.battery_capacity, delta)
        low = np.flatnonzero(battery < sat.battery_min - 1e-7 * (1 + sat.battery_min))
        if low.size:
            t = int(low[0])
            viol.append(Violation(BATTERY_FLOOR, sid, t,
                                  f"battery {battery[t]:.3f} J below floor {sat.battery_min} J at {t}"))
        traces[sid] = ResourceTrace(sid, stored, np.maximum(battery, 0.0), delivered, list(queue))

    for gs, cs in downlinks_by_gs.items():
        cs = sorted(cs, key=lambda c: (c.t, c.satellite_id))
        open_until = {}
        for c in cs:
            for other, end in open_until.items():
                if other != c.satellite_id and end > c.t:
                    viol.append(Violation(GS_EXCLUSIVITY, c.satellite_id, c.t,
                                          f"{c.satellite_id} and {other} both use {gs} at {c.t}"))
                    break
            open_until[c.satellite_id] = max(open_until.get(c.satellite_id, -math.inf), c.end)
    viol.sort(key=lambda v: (v.t, v.family, v.satellite_id or ""))
    return ValidationReport(viol, traces)


# ---------------------------------------------------------------------------
# latency and metrics


@dataclass
class LatencyReport:
    latencies: dict[str, int]  # image id -> downlink end minus collect time
    undelivered: list[str]

    @property
    def max_latency(self) -> int | None:
        return max(self.latencies.values()) if self.latencies else None


def latency(schedule: Schedule) -> LatencyReport:
    lat = {}
    undelivered = []
    for sid in schedule.commands:
        collected = {c.image_id: c.t for c in schedule.collects(sid)}
        sent = set()
        for c in schedule.downlinks(sid):
            if c.image_id in collected:
                lat[c.image_id] = c.end - collected[c.image_id]
            sent.add(c.image_id)
        undelivered += [i for i in collected if i not in sent]
    return LatencyReport(dict(sorted(lat.items())), sorted(undelivered))


@dataclass(frozen=True)
class MetricsReport:
    objective: float
    available_reward: float
    reward_pct: float
    active_planned: int
    active_available: int
    active_pct: float
    pre_fire_planned: int
    pre_fire_available: int
    pre_fire_pct: float
    mip_gap: float | None
    solve_time: float
    status: str
    max_latency: int | None
    undelivered: int

    def to_dict(self) -> dict:
        d = asdict(self)
        d["schema_version"] = 1
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    def markdown(self, *, include_timing: bool = True, label: str = "") -> str:
        head = ["MIP Gap", "Solve Time", "Plan", "Available", "Rwd %",
                "Active Planned", "Active Available", "Active %",
                "Pre-Fire Planned", "Pre-Fire Available", "Pre-Fire %"]
        if label:
            head = ["Run"] + head
        gap = "n/a" if self.mip_gap is None or not math.isfinite(self.mip_gap) else f"{self.mip_gap:.1e}"
        row = [gap, _fmt_time(self.solve_time) if include_timing else "omitted",
               f"{self.objective:.4f}", f"{self.available_reward:.4f}", f"{self.reward_pct:.1f}",
               str(self.active_planned), str(self.active_available), f"{self.active_pct:.1f}",
               str(self.pre_fire_planned), str(self.pre_fire_available), f"{self.pre_fire_pct:.1f}"]
        if label:
            row = [label] + row
        return "| " + " | ".join(head) + " |\n|" + "|".join("---" for _ in head) + "|\n| " + " | ".join(row) + " |\n"


def _fmt_time(t: float) -> str:
    if t < 60:
        return f"{t:.2f} s"
    return f"{t / 60:.1f} m"


def _pct(a: float, b: float) -> float:
    return 100.0 * a / b if b > 0 else 0.0


def metrics(solution: Solution, model: PlanModel, schedule: Schedule | None = None) -> MetricsReport:
    """Plan value and per-class coverage relative to what the access data makes reachable."""
    st = model.structure
    unreachable = set(st.unreachable)
    active = set(st.active_targets)
    x = solution.values
    planned = {m for m, j in st.target_var.items() if x is not None and x[j] > 0.5}
    reach_a = [m for m in st.target_var if m in active and m not in unreachable]
    reach_p = [m for m in st.target_var if m not in active and m not in unreachable]
    objective = model.objective_value(x) if x is not None else 0.0
    available = model.available_reward()
    lat = latency(schedule) if schedule is not None else None
    gap = solution.gap if x is not None else None
    return MetricsReport(
        objective=objective,
        available_reward=available,
        reward_pct=min(100.0, _pct(objective, available)),
        active_planned=len(planned & set(reach_a)),
        active_available=len(reach_a),
        active_pct=_pct(len(planned & set(reach_a)), len(reach_a)),
        pre_fire_planned=len(planned & set(reach_p)),
        pre_fire_available=len(reach_p),
        pre_fire_pct=_pct(len(planned & set(reach_p)), len(reach_p)),
        mip_gap=gap,
        solve_time=solution.solve_time,
        status=solution.status,
        max_latency=lat.max_latency if lat else None,
        undelivered=len(lat.undelivered) if lat else 0,
    )
