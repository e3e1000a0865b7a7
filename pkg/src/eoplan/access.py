"""Per-second access scan: eclipse, ground contacts and specular observations."""

from __future__ import annotations

import logging
import math

import numpy as np
from scipy.spatial import cKDTree

from .geometry import (
    EARTH_RADIUS_KM,
    eci_to_ecef,
    eclipsed_many,
    elevation_many,
    geodetic_to_unit,
    propagate_many,
    specular_many,
)
from .scenario import Scenario
from .timeline import AccessTimeline, SatelliteAccess

logger = logging.getLogger(__name__)

DEFAULT_MAX_HORIZON = 7 * 86400


class ResourceGuardError(RuntimeError):
    """Requested scan exceeds the configured size cap."""


def access_scan(scenario: Scenario, step: int = 1, *, max_horizon: int = DEFAULT_MAX_HORIZON,
                chunk: int = 1800) -> AccessTimeline:
    """Sample access for every satellite at ``step``-second spacing.

    A target counts as observed at a sample when the specular point of any
    visible transmitter lies within the target's capture radius.  Each
    contact sample is attributed to the highest-elevation station above its
    mask.
    """
    if int(step) != step or step < 1:
        raise ValueError("step must be an integer >= 1")
    if scenario.horizon > max_horizon:
        raise ResourceGuardError(
            f"horizon {scenario.horizon} s exceeds the cap of {max_horizon} s"
        )
    times = np.arange(0, scenario.horizon, step, dtype=np.int64)
    tf = times.astype(float)
    sun = np.asarray(scenario.sun_direction, dtype=float)
    offset = scenario.earth_rotation_offset

    targets = scenario.targets
    tree = None
    if targets and scenario.transmitters:
        unit = geodetic_to_unit([t.location.latitude for t in targets],
                                [t.location.longitude for t in targets])
        tree = cKDTree(unit)
        radii = np.array([t.capture_radius for t in targets]) / EARTH_RADIUS_KM
        max_radius = float(radii.max())
        chord = 2.0 * math.sin(min(max_radius, math.pi) / 2.0)
        target_ids = [t.id for t in targets]

    tx_cache = [propagate_many(o, tf)[0] for o in scenario.transmitters] if tree is not None else []

    out = []
    for sat in scenario.satellites:
        pos, _ = propagate_many(sat.orbit, tf)
        eclipsed = eclipsed_many(pos, sun)

        gs_index = np.full(times.size, -1, dtype=np.int64)
        if scenario.ground_stations:
            elev = np.stack([elevation_many(g.site, pos, tf, offset) for g in scenario.ground_stations])
            masks = np.stack([g.site.min_elevation for g in scenario.ground_stations])[:, None]
            elev = np.where(elev >= masks, elev, -np.inf)
            best = np.argmax(elev, axis=0)
            ok = np.isfinite(elev[best, np.arange(times.size)])
            gs_index[ok] = best[ok]

        observations: dict[int, tuple[str, ...]] = {}
        if tree is not None:
            r = float(np.linalg.norm(pos[0]))
            reach = math.acos(EARTH_RADIUS_KM / r) + max_radius
            reach_chord = 2.0 * math.sin(min(reach, math.pi) / 2.0)
            sub = eci_to_ecef(pos, tf, offset) / r
            near_d, _ = tree.query(sub, k=1, distance_upper_bound=reach_chord)
            candidates = np.flatnonzero(np.isfinite(near_d))
            for start in range(0, candidates.size, chunk):
                idx = candidates[start:start + chunk]
                n_tx = len(tx_cache)
                rx = np.tile(pos[idx], (n_tx, 1))
                tx = np.concatenate([c[idx] for c in tx_cache])
                tt = np.tile(tf[idx], n_tx)
                sample = np.tile(idx, n_tx)
                spec = specular_many(tx, rx)
                good = ~np.isnan(spec[:, 0])
                if not good.any():
                    continue
                pts = eci_to_ecef(spec[good], tt[good], offset) / EARTH_RADIUS_KM
                sample = sample[good]
                hits = tree.query_ball_point(pts, chord)
                for row, found in enumerate(hits):
                    if not found:
                        continue
                    found = np.asarray(found)
                    ang = np.arccos(np.clip(unit[found] @ pts[row], -1.0, 1.0))
                    found = found[ang <= radii[found]]
                    if found.size == 0:
                        continue
                    t = int(times[sample[row]])
                    prev = observations.get(t, ())
                    observations[t] = tuple(sorted(set(prev) | {target_ids[i] for i in found}))
        logger.debug("%s: %d observation samples", sat.id, len(observations))
        out.append(SatelliteAccess(sat.id, eclipsed, gs_index, observations))
    return AccessTimeline(scenario.horizon, int(step), [g.id for g in scenario.ground_stations], out)
