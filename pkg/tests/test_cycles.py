import numpy as np
import pytest

from eoplan.cycles import (
    CycleBundle,
    DownlinkSlot,
    ImageOpportunity,
    build_cycles,
    build_downlink_slots,
    build_image_opportunities,
    coverage_map,
    cycle_counts,
    expand_cycles,
    prepare_cycles,
)
from eoplan.geometry import GroundSite, OrbitElements
from eoplan.scenario import (
    PRE_FIRE,
    GroundStation,
    Satellite,
    Scenario,
    SyntheticAccessSpec,
    Target,
    generate_synthetic_access,
)
from eoplan.timeline import AccessTimeline, SatelliteAccess

from instances import random_instance

SITE = GroundSite(0.0, 0.0)


def scenario(target_ids=("T1", "T2"), sat_ids=("s",), gs_ids=("g",), horizon=1000):
    sats = tuple(Satellite(s, OrbitElements(6898.137, 0.6, 0.0)) for s in sat_ids)
    gss = tuple(GroundStation(g, SITE) for g in gs_ids)
    tgts = tuple(Target(t, PRE_FIRE, 0.5, SITE) for t in target_ids)
    return Scenario(sats, gss, tgts, horizon=horizon)


def timeline(obs=None, contacts=(), horizon=1000, gs_ids=("g",)):
    gs = np.full(horizon, -1, dtype=np.int64)
    for start, length, g in contacts:
        gs[start:start + length] = g
    return AccessTimeline(horizon, 1, list(gs_ids),
                          [SatelliteAccess("s", np.zeros(horizon, dtype=bool), gs, dict(obs or {}))])


class TestImages:
    def test_one_image_per_observed_second(self):
        tl = timeline({t: ("T1",) for t in range(100, 130)} | {200: ("T1", "T2")})
        images = build_image_opportunities(tl, scenario())
        assert len(images) == 31
        assert len({im.image_id for im in images}) == 31
        assert images[-1].covered_targets == ("T1", "T2")

    def test_unknown_targets_dropped(self):
        images = build_image_opportunities(timeline({5: ("X",), 6: ("X", "T2")}), scenario())
        assert [(im.t, im.covered_targets) for im in images] == [(6, ("T2",))]

    def test_requires_targets(self):
        with pytest.raises(ValueError):
            ImageOpportunity("i", "s", 0, ())


class TestSlots:
    @pytest.mark.parametrize("contacts, starts", [
        ([(300, 60, 0)], [300, 320, 340]),
        ([(300, 19, 0)], []),
        ([(300, 40, 0), (500, 25, 0)], [300, 320, 500]),
    ])
    def test_packing(self, contacts, starts):
        slots = build_downlink_slots(timeline(contacts=contacts), scenario())
        assert [s.start for s in slots] == starts
        assert all(s.duration == 20 and s.gs_id == "g" for s in slots)

    def test_station_switch_splits_run(self):
        tl = timeline(contacts=[(100, 30, 0), (130, 30, 1)], gs_ids=("g", "h"))
        slots = build_downlink_slots(tl, scenario(gs_ids=("g", "h")))
        assert [(s.gs_id, s.start) for s in slots] == [("g", 100), ("h", 130)]

    def test_opportunity_seconds_break_contact(self):
        tl = timeline({120: ("T1",)}, contacts=[(100, 60, 0)])
        slots = build_downlink_slots(tl, scenario())
        assert [s.start for s in slots] == [100, 121]

    def test_custom_duration(self):
        slots = build_downlink_slots(timeline(contacts=[(0, 35, 0)]), scenario(), slot_duration=10)
        assert [s.start for s in slots] == [0, 10, 20]


class TestBuildCycles:
    def test_single_alternation(self):
        images = [ImageOpportunity(f"i{t}", "s", t, ("T1",)) for t in range(100, 111)]
        slots = [DownlinkSlot("a", "s", "g", 500), DownlinkSlot("b", "s", "g", 520)]
        (c,) = build_cycles(images, slots, 1000)["s"]
        assert c.obs_window == (0, 500) and c.end == 1000
        assert len(c.images) == 11 and len(c.downlink_slots) == 2

    def test_no_slots(self):
        images = [ImageOpportunity("i", "s", 5, ("T1",))]
        cycles = build_cycles(images, [], 100, satellite_ids=["s", "idle"])
        assert cycle_counts(cycles) == {"s": 1, "idle": 1}
        assert cycles["s"][0].downlink_slots == ()
        assert cycles["idle"][0].images == ()

    def test_alternating_phases(self):
        images = [ImageOpportunity(f"i{t}", "s", t, ("T1",)) for t in (10, 20, 150, 400)]
        slots = [DownlinkSlot("a", "s", "g", 100), DownlinkSlot("b", "s", "g", 300)]
        cs = build_cycles(images, slots, 1000)["s"]
        assert [(c.start, c.phase_boundary, c.end) for c in cs] == [(0, 100, 120), (120, 300, 320), (320, 1000, 1000)]
        assert [c.images for c in cs] == [("i10", "i20"), ("i150",), ("i400",)]

    def test_image_inside_slot_rejected(self):
        images = [ImageOpportunity("i", "s", 105, ("T1",)), ImageOpportunity("j", "s", 5, ("T1",))]
        with pytest.raises(ValueError):
            build_cycles(images, [DownlinkSlot("a", "s", "g", 100)], 1000)


def check_invariants(bundle, tl):
    obs, dl = expand_cycles(bundle.cycles, bundle.images)
    by_sat = {}
    for im in bundle.images:
        by_sat.setdefault(im.satellite_id, []).append(im.t)
    for sid, cs in bundle.cycles.items():
        assert cs[0].start == 0 and cs[-1].end == bundle.horizon
        for a, b in zip(cs, cs[1:]):
            assert a.end == b.start
        times = {im.image_id: im.t for im in bundle.images}
        for c in cs:
            ts = [times[i] for i in c.images]
            assert all(c.start <= t < c.phase_boundary for t in ts)
            if ts and c.downlink_slots:
                assert max(ts) < min(s.start for s in c.downlink_slots)
            for s in c.downlink_slots:
                assert c.phase_boundary <= s.start and s.end <= c.end
        assert obs[sid] == sorted(by_sat.get(sid, []))
        assert obs[sid] == sorted(tl.opportunity_seconds(sid)) or sid not in {s.satellite_id for s in tl.satellites}
        contact = tl.contact_seconds(sid)
        assert all(contact[t] >= 0 for t in dl[sid])
        assert len(dl[sid]) == len(set(dl[sid]))


def test_random_instances_satisfy_invariants():
    rng = np.random.default_rng(0)
    for _ in range(200):
        _, tl, bundle, _ = random_instance(rng)
        check_invariants(bundle, tl)
        assert CycleBundle.from_dict(bundle.to_dict()) == bundle


def test_synthetic_day_cycle_count():
    spec = SyntheticAccessSpec(target_ids=tuple(f"T{k}" for k in range(20)))
    sc = scenario(spec.target_ids, ("sat00",), ("gs00",), horizon=86400)
    for seed in range(5):
        tl = generate_synthetic_access(spec, seed)
        assert generate_synthetic_access(spec, seed) == tl
        bundle = prepare_cycles(sc, tl)
        assert 6 <= cycle_counts(bundle.cycles)["sat00"] <= 7
        check_invariants(bundle, tl)


def test_zero_density_has_no_images():
    tl = generate_synthetic_access(SyntheticAccessSpec(target_ids=("T1",), density=0.0), 0)
    assert not tl.satellites[0].observations


class TestCoverageMap:
    def test_bidirectional(self):
        images = [ImageOpportunity("i1", "s", 1, ("T1", "T2")), ImageOpportunity("i2", "s", 2, ("T1",))]
        cm = coverage_map(images, ["T1", "T2", "T3"])
        assert cm.target_images == {"T1": ("i1", "i2"), "T2": ("i1",), "T3": ()}
        assert cm.image_targets == {"i1": ("T1", "T2"), "i2": ("T1",)}
        assert cm.unreachable == ("T3",)

    def test_empty(self):
        assert coverage_map([], ["A", "B"]).unreachable == ("A", "B")
