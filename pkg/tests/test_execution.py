import numpy as np
import pytest

from eoplan.cycles import prepare_cycles
from eoplan.execution import (
    BATTERY_FLOOR,
    COLLECT,
    COLLECT_OPPORTUNITY,
    COMMAND_OVERLAP,
    DOWNLINK,
    DOWNLINK_CONTACT,
    FAMILIES,
    FIFO_ORDER,
    GS_EXCLUSIVITY,
    STORAGE_EMPTY,
    STORAGE_FULL,
    UNKNOWN_SATELLITE,
    Command,
    ConsistencyError,
    Schedule,
    clamped_battery,
    latency,
    metrics,
    schedule_from_solution,
    validate,
)
from eoplan.geometry import GroundSite, OrbitElements
from eoplan.model import build_model
from eoplan.scenario import ACTIVE_FIRE, PRE_FIRE, GroundStation, Satellite, Scenario, Target
from eoplan.solver import Solution, SolverConfig, solve_bnb, solve_exhaustive, solve_greedy
from eoplan.timeline import AccessTimeline, SatelliteAccess

from instances import random_instance

SITE = GroundSite(0.0, 0.0)
ORBIT = OrbitElements(6898.137, 0.6, 0.0)
H = 300


def setup(sat_ids=("s",), obs=range(0, 70), contact=(100, 160), **sat_kw):
    sats = tuple(Satellite(s, ORBIT, **sat_kw) for s in sat_ids)
    sc = Scenario(sats, (GroundStation("g0", SITE),), (Target("T", PRE_FIRE, 0.5, SITE),), horizon=H)
    gs = np.full(H, -1, dtype=np.int64)
    gs[contact[0]:contact[1]] = 0
    tl = AccessTimeline(H, 1, ["g0"], [
        SatelliteAccess(s, np.zeros(H, dtype=bool), gs.copy(), {t: ("T",) for t in obs}) for s in sat_ids
    ])
    return sc, tl


def collect(t, sid="s"):
    return Command(COLLECT, sid, t, 1, image_id=f"{sid}@{t}")


def downlink(t, image, sid="s", gs="g0"):
    return Command(DOWNLINK, sid, t, 20, image_id=image, slot_id=f"{sid}>{gs}@{t}", gs_id=gs)


def test_clean_schedule_passes():
    sc, tl = setup()
    rep = validate(Schedule({"s": [collect(5), collect(6), downlink(100, "s@5")]}), sc, tl)
    assert rep.passed
    tr = rep.traces["s"]
    assert tr.stored[4] == 0 and tr.stored[5] == 1 and tr.stored[6] == 2 and tr.stored[120] == 1
    assert tr.delivered == [("s@5", 120)] and tr.final_contents == ["s@6"]


def test_61st_image_overflows():
    sc, tl = setup()
    rep = validate(Schedule({"s": [collect(t) for t in range(61)]}), sc, tl)
    assert rep.failed_families == {STORAGE_FULL}
    assert rep.first_violation(STORAGE_FULL) == 60


def test_overlapping_gs_use():
    sc, tl = setup(("a", "b"))
    sched = Schedule({"a": [collect(1, "a"), downlink(100, "a@1", "a")],
                      "b": [collect(2, "b"), downlink(110, "b@2", "b")]})
    rep = validate(sched, sc, tl)
    assert rep.failed_families == {GS_EXCLUSIVITY}
    assert rep.first_violation(GS_EXCLUSIVITY) == 110
    sched = Schedule({"a": [collect(1, "a"), downlink(100, "a@1", "a")],
                      "b": [collect(2, "b"), downlink(120, "b@2", "b")]})
    assert validate(sched, sc, tl).passed


@pytest.mark.parametrize("cmds, family, t", [
    ([downlink(100, None)], STORAGE_EMPTY, 100),
    ([collect(80)], COLLECT_OPPORTUNITY, 80),
    ([collect(5), downlink(150, "s@5")], DOWNLINK_CONTACT, 160),
    ([collect(5), collect(6), downlink(100, "s@6")], FIFO_ORDER, 100),
    ([collect(5), downlink(100, "s@5"), downlink(110, "s@5")], COMMAND_OVERLAP, 110),
])
def test_violation_families(cmds, family, t):
    sc, tl = setup()
    rep = validate(Schedule({"s": cmds}), sc, tl)
    assert family in rep.failed_families
    assert rep.first_violation(family) == t
    assert rep.to_dict()["families"][family]["first_violation_t"] == t


def test_battery_floor():
    sc, tl = setup(battery_capacity=1000.0, battery_min=900.0, battery_initial=950.0,
                   power_generation=0.0, power_base=1.0, power_observe=10.0)
    rep = validate(Schedule({"s": []}), sc, tl)
    assert rep.failed_families == {BATTERY_FLOOR} and rep.first_violation(BATTERY_FLOOR) == 50
    rep = validate(Schedule({"s": [collect(3)]}), sc, tl)
    assert rep.first_violation(BATTERY_FLOOR) == 40


def test_unknown_satellite():
    sc, tl = setup()
    rep = validate(Schedule({"ghost": [collect(1, "ghost")]}), sc, tl)
    assert rep.failed_families == {UNKNOWN_SATELLITE}


def test_report_lists_every_family():
    sc, tl = setup()
    doc = validate(Schedule({"s": []}), sc, tl).to_dict()
    assert set(doc["families"]) == set(FAMILIES) and doc["passed"]


def test_clamped_battery_matches_loop():
    rng = np.random.default_rng(0)
    delta = rng.normal(0, 5, 500)
    e, ref = 50.0, []
    for d in delta:
        e = min(100.0, e + d)
        ref.append(e)
    assert np.allclose(clamped_battery(50.0, 100.0, delta), ref)


def test_latency():
    sched = Schedule({"s": [collect(100), collect(101), downlink(500, "s@100")]})
    rep = latency(sched)
    assert rep.latencies == {"s@100": 420} and rep.undelivered == ["s@101"]
    assert rep.max_latency == 420


def tiny_plan():
    sc, tl = setup()
    bundle = prepare_cycles(sc, tl)
    model = build_model(bundle, sc.targets, sc, False)
    return sc, tl, bundle, model


def test_schedule_expansion_fifo():
    sc, tl, bundle, model = tiny_plan()
    x = np.zeros(model.n_vars)
    iv, sv = model.structure.image_var, model.structure.slot_var
    for i in ("s@10", "s@20"):
        x[iv[i]] = 1
    x[sv["s>g0@100"]] = 1
    sol = Solution("optimal", 0.5, 0.5, 0.0, x, 0.0, 0, [v.name for v in model.variables])
    sched = schedule_from_solution(sol, model, bundle)
    assert [(c.kind, c.t, c.image_id) for c in sched.commands["s"]] == [
        (COLLECT, 10, "s@10"), (COLLECT, 20, "s@20"), (DOWNLINK, 100, "s@10")]
    assert Schedule.from_dict(sched.to_dict()).commands == sched.commands
    empty = Solution("optimal", 0.0, 0.0, 0.0, np.zeros(model.n_vars), 0.0, 0, sol.names)
    assert schedule_from_solution(empty, model, bundle).all_commands() == []


def test_expansion_rejects_mismatch():
    _, _, bundle, model = tiny_plan()
    with pytest.raises(ConsistencyError):
        schedule_from_solution(Solution("infeasible", float("nan"), -np.inf, np.inf, None, 0.0, 0, []),
                               model, bundle)
    bad = Solution("optimal", 0.0, 0.0, 0.0, np.zeros(model.n_vars), 0.0, 0, ["nope"] * model.n_vars)
    with pytest.raises(ConsistencyError):
        schedule_from_solution(bad, model, bundle)


def test_initial_buffer_is_sent_first():
    sc, tl = setup(buffer_initial=1)
    bundle = prepare_cycles(sc, tl)
    model = build_model(bundle, sc.targets, sc, False)
    sol = solve_bnb(model, SolverConfig(mip_gap=0.0))
    sched = schedule_from_solution(sol, model, bundle)
    assert sched.downlinks("s")[0].image_id == "s#init0"
    assert validate(sched, sc, tl).passed


def test_schedules_agree_with_model():
    rng = np.random.default_rng(21)
    checked = 0
    for _ in range(200):
        sc, tl, bundle, model = random_instance(rng)
        for sol in (solve_bnb(model, SolverConfig(mip_gap=0.0)), solve_greedy(model), solve_exhaustive(model)):
            if sol.values is None:
                continue
            sched = schedule_from_solution(sol, model, bundle)
            rep = validate(sched, sc, tl)
            assert rep.passed, rep.violations
            checked += 1
            for st in model.structure.satellites:
                tr = rep.traces[st.satellite_id]
                collects = [c.t for c in sched.collects(st.satellite_id)]
                order = sched.initial_contents.get(st.satellite_id, []) + [
                    c.image_id for c in sched.collects(st.satellite_id)]
                # conservation and FIFO delivery
                assert order == [i for i, _ in tr.delivered] + tr.final_contents
                for ct, c in zip(st.cycles, bundle.cycles[st.satellite_id]):
                    if c.end < sc.horizon:
                        stored = tr.stored[c.end] - collects.count(c.end)
                    else:
                        stored = len(tr.final_contents)
                    assert stored == pytest.approx(sol.values[ct.sa_next])
                    assert tr.battery[c.end - 1] >= sol.values[ct.ea_next] - 1e-6
    assert checked > 300


def test_metrics_percentages():
    targets = (Target("a", PRE_FIRE, 0.47993, SITE), Target("b", PRE_FIRE, 0.00352, SITE),
               Target("c", ACTIVE_FIRE, 0.0, SITE))
    sc = Scenario((Satellite("s", ORBIT),), (GroundStation("g0", SITE),), targets, horizon=H)
    tl = AccessTimeline(H, 1, ["g0"], [SatelliteAccess("s", np.zeros(H, dtype=bool), np.full(H, -1),
                                                       {1: ("a",), 2: ("b",)})])
    bundle = prepare_cycles(sc, tl)
    model = build_model(bundle, targets, sc, False)
    x = np.zeros(model.n_vars)
    x[model.structure.target_var["a"]] = 1
    x[model.structure.image_var["s@1"]] = 1
    sol = Solution("optimal", 0.47993, 0.47993, 0.0, x, 1.5, 3, [v.name for v in model.variables])
    rep = metrics(sol, model)
    assert f"{rep.reward_pct:.1f}" == "99.3"
    assert (rep.pre_fire_planned, rep.pre_fire_available, rep.pre_fire_pct) == (1, 2, 50.0)
    assert (rep.active_available, rep.active_pct) == (0, 0.0)
    assert rep == metrics(sol, model)
    md = rep.markdown()
    assert "| 99.3 |" in md and "1.50 s" in md
    assert "omitted" in rep.markdown(include_timing=False)
    full = solve_exhaustive(model)
    assert metrics(full, model).pre_fire_pct == 100.0
    none = Solution("optimal", 0.0, 0.0, 0.0, np.zeros(model.n_vars), 0.0, 0, sol.names)
    assert metrics(none, model).reward_pct == 0.0 and metrics(none, model).pre_fire_planned == 0
