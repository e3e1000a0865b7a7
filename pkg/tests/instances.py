"""Small hand-sized planning instances for solver cross-checks."""

from __future__ import annotations

import numpy as np

from eoplan.cycles import prepare_cycles
from eoplan.geometry import GroundSite, OrbitElements
from eoplan.model import build_model
from eoplan.scenario import (
    ACTIVE_FIRE,
    PRE_FIRE,
    GeneratorSpec,
    GroundStation,
    Satellite,
    Scenario,
    SyntheticAccessSpec,
    Target,
    generate_synthetic,
    generate_synthetic_access,
)
from eoplan.timeline import AccessTimeline, SatelliteAccess

ORBIT = OrbitElements(6898.137, 0.6, 0.0)
SITE = GroundSite(0.0, 0.0)


def random_instance(rng: np.random.Generator, *, max_images=12, max_slots=4, active_mandatory=None,
                    horizon=240):
    """Random tiny scenario; returns (scenario, timeline, cycle bundle, model)."""
    n_sat = int(rng.integers(1, 4))
    n_tgt = int(rng.integers(1, 7))
    targets = tuple(
        Target(f"T{k}", ACTIVE_FIRE if rng.random() < 0.3 else PRE_FIRE, float(rng.choice([0.2, 0.5, 0.7, 1.0])),
               SITE)
        for k in range(n_tgt)
    )
    sats = []
    for s in range(n_sat):
        cap = float(rng.choice([100.0, 150.0]))
        sats.append(Satellite(
            f"s{s}", ORBIT,
            buffer_capacity=int(rng.integers(1, 4)),
            battery_capacity=cap,
            battery_min=40.0,
            battery_initial=float(rng.uniform(45.0, cap)),
            power_generation=float(rng.choice([1.0, 2.0])),
            power_base=float(rng.choice([0.05, 0.2])),
            power_observe=float(rng.choice([5.0, 15.0, 30.0])),
            power_downlink=float(rng.choice([0.5, 1.5])),
            buffer_initial=int(rng.integers(0, 2)),
        ))
    gss = ("g0", "g1")
    obs = {s.id: {} for s in sats}
    contact = {s.id: np.full(horizon, -1, dtype=np.int64) for s in sats}
    n_img = int(rng.integers(1, max_images + 1))
    n_slot = int(rng.integers(0, max_slots + 1))
    # per satellite: observe in [0, 60) and [120, 160); slots start in [60, 120) or [160, 220)
    windows_obs = [(0, 60), (120, 160)]
    slot_starts = [60, 70, 80, 100, 160, 170, 190]
    for _ in range(n_img):
        sid = f"s{int(rng.integers(n_sat))}"
        lo, hi = windows_obs[int(rng.integers(2))]
        t = int(rng.integers(lo, hi))
        if t in obs[sid]:
            continue
        k = int(rng.integers(1, min(3, n_tgt) + 1))
        obs[sid][t] = tuple(sorted(str(v) for v in rng.choice([t_.id for t_ in targets], size=k, replace=False)))
    taken = []
    for _ in range(n_slot):
        sid = f"s{int(rng.integers(n_sat))}"
        st = int(rng.choice(slot_starts))
        if any(o == sid and abs(st - a) < 20 for o, a in taken):
            continue
        taken.append((sid, st))
        contact[sid][st:st + 20] = int(rng.integers(2))
    frac = {s.id: float(rng.choice([0.0, 0.5, 0.9])) for s in sats}
    timeline = AccessTimeline(horizon, 1, list(gss), [
        SatelliteAccess(s.id, rng.random(horizon) < frac[s.id], contact[s.id], obs[s.id]) for s in sats
    ])
    scenario = Scenario(tuple(sats), tuple(GroundStation(g, SITE) for g in gss), targets, horizon=horizon,
                        active_weight=float(rng.choice([1.0, 10.0])))
    bundle = prepare_cycles(scenario, timeline)
    if active_mandatory is None:
        active_mandatory = bool(rng.random() < 0.5)
    model = build_model(bundle, targets, scenario, active_mandatory)
    return scenario, timeline, bundle, model


def synthetic_instance(seed, *, n_sat=3, n_targets=100, buffer=4, horizon=43200, density=0.3,
                       contact_duration=100, phase=0, active_mandatory=True, n_active=5, joint=True):
    """Synthetic-access planning instance; returns (scenario, timeline, bundle, model).

    The defaults give joint models that take the solver a few seconds and
    tens of nodes, while the active-only variant of the same instance is easy.
    """
    spec = GeneratorSpec(n_satellites=n_sat, n_ground_stations=1, n_active=n_active,
                         n_pre_fire=n_targets - n_active, horizon=horizon, buffer_capacity=buffer,
                         n_transmitters=0)
    scenario = generate_synthetic(spec, seed)
    access = SyntheticAccessSpec(
        satellite_ids=tuple(s.id for s in scenario.satellites),
        target_ids=tuple(t.id for t in scenario.targets),
        ground_station_ids=tuple(g.id for g in scenario.ground_stations),
        horizon=horizon, density=density, satellite_phase=phase,
        contact_duration=contact_duration, max_targets_per_image=3,
    )
    timeline = generate_synthetic_access(access, seed)
    bundle = prepare_cycles(scenario, timeline)
    if not joint:
        scenario = scenario.without_pre_fire()
    return scenario, timeline, bundle, build_model(bundle, scenario.targets, scenario, active_mandatory)


def greedy_trap():
    """One satellite, buffer of two, three images; greedy takes the widest image first.

    Greedy collects A then B for 2.3; collecting B and C instead yields 2.8.
    Returns (scenario, bundle, model).
    """
    from eoplan.cycles import CycleBundle, ImageOpportunity, build_cycles

    targets = (Target("t1", PRE_FIRE, 0.9, SITE), Target("t2", PRE_FIRE, 0.9, SITE),
               Target("t3", PRE_FIRE, 0.5, SITE), Target("t4", PRE_FIRE, 0.5, SITE))
    sat = Satellite("s0", ORBIT, buffer_capacity=2)
    scenario = Scenario((sat,), (GroundStation("g0", SITE),), targets, horizon=100)
    images = [ImageOpportunity("s0@1", "s0", 1, ("t1", "t2")),
              ImageOpportunity("s0@2", "s0", 2, ("t1", "t3")),
              ImageOpportunity("s0@3", "s0", 3, ("t2", "t4"))]
    bundle = CycleBundle(100, images, build_cycles(images, [], 100, satellite_ids=["s0"]))
    return scenario, bundle, build_model(bundle, targets, scenario, False)
