"""Watch incumbent, bound and gap evolve while branch-and-bound runs, then stop it early.

    python demos/anytime_gap.py [stop_after_seconds]
"""

import math
import sys
import threading

from eoplan import SolverConfig, build_model, prepare_cycles, solve_bnb
from eoplan.scenario import GeneratorSpec, SyntheticAccessSpec, generate_synthetic, generate_synthetic_access


def build(seed: int = 0):
    # synthetic access plus a 4-image buffer: small enough to branch, tight enough to need it
    scenario = generate_synthetic(GeneratorSpec(n_satellites=3, n_active=5, n_pre_fire=95,
                                                n_ground_stations=1, n_transmitters=0, horizon=43200,
                                                buffer_capacity=4), seed)
    spec = SyntheticAccessSpec(satellite_ids=tuple(s.id for s in scenario.satellites),
                               target_ids=tuple(t.id for t in scenario.targets),
                               ground_station_ids=tuple(g.id for g in scenario.ground_stations),
                               horizon=scenario.horizon, density=0.3, contact_duration=100,
                               max_targets_per_image=3)
    bundle = prepare_cycles(scenario, generate_synthetic_access(spec, seed))
    return build_model(bundle, scenario.targets, scenario, True)


def main(stop_after: float | None) -> None:
    model = build()
    stop = threading.Event()
    if stop_after is not None:
        threading.Timer(stop_after, stop.set).start()

    def show(p):
        inc = f"{p.incumbent:9.4f}" if math.isfinite(p.incumbent) else "        -"
        print(f"{p.elapsed:7.2f} s  nodes {p.nodes:5d}  incumbent {inc}  bound {p.bound:9.4f}  gap {p.gap:.2e}")

    sol = solve_bnb(model, SolverConfig(mip_gap=0.0), cancel=stop, on_progress=show)
    stop.set()
    print(f"\n{sol.status}: objective {sol.objective:.4f}, bound {sol.best_bound:.4f}, "
          f"gap {sol.gap:.2e} after {sol.solve_time:.2f} s {sol.message}".rstrip())


if __name__ == "__main__":
    main(float(sys.argv[1]) if len(sys.argv) > 1 else None)
