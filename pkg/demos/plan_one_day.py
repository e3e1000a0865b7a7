"""Plan one synthetic day end to end with the library API and print the outcome.

    python demos/plan_one_day.py [seed]
"""

import sys
import time

from eoplan import (
    GeneratorSpec,
    SolverConfig,
    access_scan,
    build_model,
    generate_synthetic,
    latency,
    metrics,
    prepare_cycles,
    schedule_from_solution,
    solve_bnb,
    solve_greedy,
    validate,
)
from eoplan.cycles import cycle_counts


def main(seed: int) -> None:
    scenario = generate_synthetic(GeneratorSpec(n_satellites=3, n_active=5, n_pre_fire=120), seed)
    t0 = time.perf_counter()
    timeline = access_scan(scenario)
    print(f"access scan: {scenario.horizon} s for {len(scenario.satellites)} satellites "
          f"in {time.perf_counter() - t0:.1f} s")

    bundle = prepare_cycles(scenario, timeline)
    print(f"{len(bundle.images)} images, {len(bundle.slots)} downlink slots")
    for sid, n in sorted(cycle_counts(bundle.cycles).items()):
        print(f"  {sid}: {n} data cycles")

    model = build_model(bundle, scenario.targets, scenario, True)
    print(f"model: {model.n_vars} variables")

    greedy = solve_greedy(model)
    plan = solve_bnb(model, SolverConfig(mip_gap=1e-4))
    print(f"greedy objective {greedy.objective:.3f}, branch-and-bound {plan.objective:.3f} "
          f"({plan.status}, {plan.node_count} nodes, gap {plan.gap:.1e})")

    schedule = schedule_from_solution(plan, model, bundle)
    check = validate(schedule, scenario, timeline)
    print(f"second-level replay: {'passed' if check.passed else check.failed_families}")
    lat = latency(schedule)
    if lat.latencies:
        print(f"max collect-to-ground latency {lat.max_latency} s, {len(lat.undelivered)} images still on board")
    print()
    print(metrics(plan, model).markdown())


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 0)
