"""Data-cycle abstraction over per-second access.

A data cycle is one observation phase (images fill the buffer) followed by
one downlink phase (20 s slots free it).  Cycles of a satellite tile the
horizon: each starts where the previous one's last slot ends, and the last
one runs to the horizon.
"""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .scenario import Scenario, Target
from .timeline import AccessTimeline, _runs, _unruns

IMAGE_DURATION = 1
DEFAULT_SLOT_DURATION = 20


@dataclass(frozen=True)
class ImageOpportunity:
    image_id: str
    satellite_id: str
    t: int
    covered_targets: tuple[str, ...]
    duration: int = IMAGE_DURATION
    storage_cost: int = 1

    def __post_init__(self):
        if not self.covered_targets:
            raise ValueError(f"image {self.image_id} covers no targets")


@dataclass(frozen=True)
class DownlinkSlot:
    slot_id: str
    satellite_id: str
    gs_id: str
    start: int
    duration: int = DEFAULT_SLOT_DURATION
    frees: int = 1

    @property
    def end(self) -> int:
        return self.start + self.duration


@dataclass(frozen=True, eq=False)
class DataCycle:
    satellite_id: str
    index: int
    start: int
    end: int
    phase_boundary: int
    images: tuple[str, ...]
    downlink_slots: tuple[DownlinkSlot, ...]
    eclipsed: np.ndarray = field(repr=False)

    @property
    def obs_window(self) -> tuple[int, int]:
        return (self.start, self.phase_boundary)

    @property
    def duration(self) -> int:
        return self.end - self.start

    def __eq__(self, other):
        if not isinstance(other, DataCycle):
            return NotImplemented
        return (
            (self.satellite_id, self.index, self.start, self.end, self.phase_boundary,
             self.images, self.downlink_slots)
            == (other.satellite_id, other.index, other.start, other.end, other.phase_boundary,
                other.images, other.downlink_slots)
            and np.array_equal(self.eclipsed, other.eclipsed)
        )


def image_id_for(satellite_id: str, t: int) -> str:
    return f"{satellite_id}@{t}"


def build_image_opportunities(timeline: AccessTimeline, scenario: Scenario) -> list[ImageOpportunity]:
    """One 1-second image per (satellite, sample) with at least one observable target."""
    known = {t.id for t in scenario.targets}
    out = []
    order = {s.id: k for k, s in enumerate(scenario.satellites)}
    for sat in sorted(timeline.satellites, key=lambda s: (order.get(s.satellite_id, len(order)), s.satellite_id)):
        for t in sorted(sat.observations):
            covered = tuple(sorted(set(sat.observations[t]) & known))
            if covered:
                out.append(ImageOpportunity(image_id_for(sat.satellite_id, t), sat.satellite_id, int(t), covered))
    return out


def build_downlink_slots(timeline: AccessTimeline, scenario: Scenario,
                         slot_duration: int | None = None) -> list[DownlinkSlot]:
    """Pack fixed-length slots into each maximal contact run.

    A run is a maximal stretch of seconds in contact with the same station
    during which the satellite has no observation opportunity, so the
    satellite never has to choose between collecting and downlinking inside
    one slot.  A run of length L yields ``L // slot_duration`` slots.
    """
    d = int(slot_duration or scenario.downlink_slot)
    if d < 1:
        raise ValueError("slot_duration must be >= 1")
    out = []
    order = {s.id: k for k, s in enumerate(scenario.satellites)}
    for sat in sorted(timeline.satellites, key=lambda s: (order.get(s.satellite_id, len(order)), s.satellite_id)):
        contact = timeline.contact_seconds(sat.satellite_id).copy()
        for t in sat.observations:
            if 0 <= t < contact.size:
                contact[t] = -1
        for gs, start, length in _contact_runs(contact):
            gs_id = timeline.ground_station_ids[gs]
            for j in range(length // d):
                s = start + j * d
                out.append(DownlinkSlot(f"{sat.satellite_id}>{gs_id}@{s}", sat.satellite_id, gs_id, s, d))
    return out


def _contact_runs(contact: np.ndarray):
    """Yield (gs_index, start, length) for maximal runs with gs_index >= 0."""
    if contact.size == 0:
        return
    edges = np.flatnonzero(np.diff(contact)) + 1
    starts = np.concatenate([[0], edges])
    ends = np.concatenate([edges, [contact.size]])
    for s, e in zip(starts, ends):
        if contact[s] >= 0:
            yield int(contact[s]), int(s), int(e - s)


def build_cycles(images: list[ImageOpportunity], slots: list[DownlinkSlot], horizon: int, *,
                 satellite_ids=None, eclipsed: dict[str, np.ndarray] | None = None) -> dict[str, list[DataCycle]]:
    """Partition each satellite's horizon into observation/downlink cycles.

    A new cycle opens at the first image that follows a slot.  Satellites in
    ``satellite_ids`` without any image or slot get a single empty cycle.
    ``eclipsed`` maps satellite id to a per-second flag array; missing entries
    mean always sunlit.
    """
    by_sat_img = defaultdict(list)
    by_sat_slot = defaultdict(list)
    for im in images:
        by_sat_img[im.satellite_id].append(im)
    for sl in slots:
        by_sat_slot[sl.satellite_id].append(sl)
    sats = list(dict.fromkeys(list(satellite_ids or []) + list(by_sat_img) + list(by_sat_slot)))
    out: dict[str, list[DataCycle]] = {}
    for sid in sats:
        ecl = None if eclipsed is None else eclipsed.get(sid)
        if ecl is None:
            ecl = np.zeros(horizon, dtype=bool)
        events = [(im.t, 0, im) for im in by_sat_img[sid]] + [(sl.start, 1, sl) for sl in by_sat_slot[sid]]
        events.sort(key=lambda e: (e[0], e[1]))
        cycles = []
        start = 0
        cur_imgs: list[ImageOpportunity] = []
        cur_slots: list[DownlinkSlot] = []

        def close(end):
            boundary = cur_slots[0].start if cur_slots else end
            cycles.append(DataCycle(
                satellite_id=sid,
                index=len(cycles),
                start=start,
                end=end,
                phase_boundary=boundary,
                images=tuple(im.image_id for im in cur_imgs),
                downlink_slots=tuple(cur_slots),
                eclipsed=np.asarray(ecl[start:end], dtype=bool).copy(),
            ))

        for _, kind, ev in events:
            if kind == 0:
                if cur_slots:
                    end = cur_slots[-1].end
                    if ev.t < end:
                        raise ValueError(f"image {ev.image_id} falls inside a downlink slot")
                    close(end)
                    start, cur_imgs, cur_slots = end, [], []
                cur_imgs.append(ev)
            else:
                if cur_slots and ev.start < cur_slots[-1].end:
                    raise ValueError(f"slot {ev.slot_id} overlaps the previous slot of {sid}")
                cur_slots.append(ev)
        close(horizon)
        out[sid] = cycles
    return out


@dataclass
class CoverageMap:
    target_images: dict[str, tuple[str, ...]]
    image_targets: dict[str, tuple[str, ...]]
    unreachable: tuple[str, ...]


def coverage_map(images: list[ImageOpportunity], targets) -> CoverageMap:
    target_ids = [t.id if isinstance(t, Target) else t for t in targets]
    t2i: dict[str, list[str]] = {tid: [] for tid in target_ids}
    i2t = {}
    for im in images:
        covered = tuple(m for m in im.covered_targets if m in t2i)
        i2t[im.image_id] = covered
        for m in covered:
            t2i[m].append(im.image_id)
    unreachable = tuple(m for m in target_ids if not t2i[m])
    return CoverageMap({m: tuple(v) for m, v in t2i.items()}, i2t, unreachable)


# ---------------------------------------------------------------------------
# helpers


def expand_cycles(cycles: dict[str, list[DataCycle]], images: list[ImageOpportunity]):
    """Per-satellite sets of opportunity seconds and slot seconds covered by the cycles."""
    times = {im.image_id: im.t for im in images}
    obs = {}
    dl = {}
    for sid, cs in cycles.items():
        obs[sid] = sorted(times[i] for c in cs for i in c.images)
        dl[sid] = sorted(t for c in cs for s in c.downlink_slots for t in range(s.start, s.end))
    return obs, dl


def cycle_counts(cycles: dict[str, list[DataCycle]]) -> dict[str, int]:
    return {sid: len(cs) for sid, cs in cycles.items()}


@dataclass
class CycleBundle:
    horizon: int
    images: list[ImageOpportunity]
    cycles: dict[str, list[DataCycle]]

    @property
    def slots(self) -> list[DownlinkSlot]:
        return [s for cs in self.cycles.values() for c in cs for s in c.downlink_slots]

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "horizon_s": self.horizon,
            "images": [
                {"image_id": im.image_id, "satellite_id": im.satellite_id, "t": im.t,
                 "covered_targets": list(im.covered_targets)}
                for im in self.images
            ],
            "cycles": {
                sid: [
                    {
                        "index": c.index, "start": c.start, "end": c.end,
                        "phase_boundary": c.phase_boundary,
                        "images": list(c.images),
                        "downlink_slots": [
                            {"slot_id": s.slot_id, "gs_id": s.gs_id, "start": s.start, "duration": s.duration}
                            for s in c.downlink_slots
                        ],
                        "eclipsed": _runs(c.eclipsed.astype(np.int64)),
                    }
                    for c in cs
                ]
                for sid, cs in self.cycles.items()
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, doc: dict) -> "CycleBundle":
        images = [ImageOpportunity(d["image_id"], d["satellite_id"], int(d["t"]), tuple(d["covered_targets"]))
                  for d in doc["images"]]
        cycles = {}
        for sid, cs in doc["cycles"].items():
            cycles[sid] = [
                DataCycle(
                    satellite_id=sid, index=c["index"], start=c["start"], end=c["end"],
                    phase_boundary=c["phase_boundary"], images=tuple(c["images"]),
                    downlink_slots=tuple(DownlinkSlot(s["slot_id"], sid, s["gs_id"], s["start"], s["duration"])
                                         for s in c["downlink_slots"]),
                    eclipsed=_unruns(c["eclipsed"], c["end"] - c["start"]).astype(bool),
                )
                for c in cs
            ]
        return cls(int(doc["horizon_s"]), images, cycles)


def prepare_cycles(scenario: Scenario, timeline: AccessTimeline, slot_duration: int | None = None) -> CycleBundle:
    """Images, slots and cycles for a scenario in one call."""
    images = build_image_opportunities(timeline, scenario)
    slots = build_downlink_slots(timeline, scenario, slot_duration)
    eclipsed = {s.satellite_id: timeline.eclipsed_seconds(s.satellite_id) for s in timeline.satellites}
    cycles = build_cycles(images, slots, scenario.horizon,
                          satellite_ids=[s.id for s in scenario.satellites], eclipsed=eclipsed)
    return CycleBundle(scenario.horizon, images, cycles)
