"""Planning scenarios: satellites, ground stations, prioritised targets.

Scenario files are JSON (``schema_version`` 1).  Files carry angles in
degrees; the in-memory objects use radians.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Any

import numpy as np

from .geometry import EARTH_RADIUS_KM, GeometryError, GroundSite, OrbitElements

SCHEMA_VERSION = 1
ACTIVE_FIRE = "active_fire"
PRE_FIRE = "pre_fire"
TARGET_KINDS = (ACTIVE_FIRE, PRE_FIRE)


class ScenarioError(ValueError):
    """Scenario document violates the schema; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass(frozen=True)
class Satellite:
    id: str
    orbit: OrbitElements
    buffer_capacity: int = 60
    battery_capacity: float = 200_000.0
    battery_min: float = 60_000.0
    battery_initial: float = 160_000.0
    power_generation: float = 40.0
    power_base: float = 15.0
    power_observe: float = 10.0
    power_downlink: float = 12.0
    buffer_initial: int = 0


@dataclass(frozen=True)
class GroundStation:
    id: str
    site: GroundSite


@dataclass(frozen=True)
class Target:
    id: str
    kind: str
    reward: float
    location: GroundSite
    capture_radius: float = 25.0

    @property
    def is_active(self) -> bool:
        return self.kind == ACTIVE_FIRE


@dataclass(frozen=True)
class Scenario:
    satellites: tuple[Satellite, ...]
    ground_stations: tuple[GroundStation, ...]
    targets: tuple[Target, ...]
    horizon: int = 86400
    active_weight: float = 10.0
    sun_direction: tuple[float, float, float] = (1.0, 0.0, 0.0)
    seed: int = 0
    transmitters: tuple[OrbitElements, ...] = ()
    earth_rotation_offset: float = 0.0
    downlink_slot: int = 20

    @property
    def active_targets(self) -> tuple[Target, ...]:
        return tuple(t for t in self.targets if t.kind == ACTIVE_FIRE)

    @property
    def pre_fire_targets(self) -> tuple[Target, ...]:
        return tuple(t for t in self.targets if t.kind == PRE_FIRE)

    def satellite(self, satellite_id: str) -> Satellite:
        for s in self.satellites:
            if s.id == satellite_id:
                return s
        raise KeyError(satellite_id)

    def target_map(self) -> dict[str, Target]:
        return {t.id: t for t in self.targets}

    def without_pre_fire(self) -> "Scenario":
        return _replace(self, targets=self.active_targets)


def _replace(s: Scenario, **changes) -> Scenario:
    from dataclasses import replace

    return replace(s, **changes)


# ---------------------------------------------------------------------------
# validation / loading


def _require(doc: dict, key: str, path: str):
    if key not in doc:
        raise ScenarioError(f"{path}.{key}" if path else key, "missing required field")
    return doc[key]


def _number(value, path: str, *, integer: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(path, f"expected a number, got {value!r}")
    if not math.isfinite(value):
        raise ScenarioError(path, "must be finite")
    if integer:
        if int(value) != value:
            raise ScenarioError(path, f"expected an integer, got {value!r}")
        return int(value)
    return float(value)


def _orbit(doc: dict, path: str) -> OrbitElements:
    try:
        return OrbitElements(
            semi_major_axis=_number(_require(doc, "semi_major_axis_km", path), f"{path}.semi_major_axis_km"),
            inclination=math.radians(_number(_require(doc, "inclination_deg", path), f"{path}.inclination_deg")),
            raan=math.radians(_number(doc.get("raan_deg", 0.0), f"{path}.raan_deg")),
            arg_latitude_epoch=math.radians(_number(doc.get("arg_latitude_deg", 0.0), f"{path}.arg_latitude_deg")),
            epoch=_number(doc.get("epoch_s", 0.0), f"{path}.epoch_s"),
        )
    except GeometryError as exc:
        raise ScenarioError(path, str(exc)) from None


def _site(doc: dict, path: str, *, elevation: bool) -> GroundSite:
    lat = _number(_require(doc, "latitude_deg", path), f"{path}.latitude_deg")
    lon = _number(_require(doc, "longitude_deg", path), f"{path}.longitude_deg")
    if abs(lat) > 90:
        raise ScenarioError(f"{path}.latitude_deg", "must lie in [-90, 90]")
    min_el = 0.0
    if elevation:
        min_el = _number(doc.get("min_elevation_deg", 0.0), f"{path}.min_elevation_deg")
        if not 0 <= min_el < 90:
            raise ScenarioError(f"{path}.min_elevation_deg", "must lie in [0, 90)")
    return GroundSite(math.radians(lat), math.radians(lon), math.radians(min_el))


def _satellite(doc: dict, path: str) -> Satellite:
    sid = str(_require(doc, "id", path))
    num = lambda key, default, **kw: _number(doc.get(key, default), f"{path}.{key}", **kw)  # noqa: E731
    sat = Satellite(
        id=sid,
        orbit=_orbit(_require(doc, "orbit", path), f"{path}.orbit"),
        buffer_capacity=num("buffer_capacity", 60, integer=True),
        battery_capacity=num("battery_capacity_j", Satellite.battery_capacity),
        battery_min=num("battery_min_j", Satellite.battery_min),
        battery_initial=num("battery_initial_j", Satellite.battery_initial),
        power_generation=num("power_generation_w", Satellite.power_generation),
        power_base=num("power_base_w", Satellite.power_base),
        power_observe=num("power_observe_w", Satellite.power_observe),
        power_downlink=num("power_downlink_w", Satellite.power_downlink),
        buffer_initial=num("buffer_initial", 0, integer=True),
    )
    if sat.buffer_capacity < 1:
        raise ScenarioError(f"{path}.buffer_capacity", "must be at least 1")
    if not 0 <= sat.buffer_initial <= sat.buffer_capacity:
        raise ScenarioError(f"{path}.buffer_initial", "must lie in [0, buffer_capacity]")
    if not 0 < sat.battery_min:
        raise ScenarioError(f"{path}.battery_min_j", "must be positive")
    if not sat.battery_min <= sat.battery_initial:
        raise ScenarioError(f"{path}.battery_initial_j", "must be at least battery_min_j")
    if not sat.battery_initial <= sat.battery_capacity:
        raise ScenarioError(f"{path}.battery_initial_j", "must not exceed battery_capacity_j")
    for key in ("power_generation", "power_base", "power_observe", "power_downlink"):
        if getattr(sat, key) < 0:
            raise ScenarioError(f"{path}.{key}_w", "must be non-negative")
    return sat


def _target(doc: dict, path: str) -> Target:
    kind = _require(doc, "kind", path)
    if kind not in TARGET_KINDS:
        raise ScenarioError(f"{path}.kind", f"must be one of {TARGET_KINDS}")
    reward = _number(_require(doc, "reward", path), f"{path}.reward")
    if not 0.0 <= reward <= 1.0:
        raise ScenarioError(f"{path}.reward", f"must lie in [0, 1], got {reward}")
    radius = _number(doc.get("capture_radius_km", 25.0), f"{path}.capture_radius_km")
    if radius <= 0:
        raise ScenarioError(f"{path}.capture_radius_km", "must be positive")
    return Target(
        id=str(_require(doc, "id", path)),
        kind=kind,
        reward=reward,
        location=_site(doc, path, elevation=False),
        capture_radius=radius,
    )


def _unique(items, path: str):
    seen = set()
    for k, item in enumerate(items):
        if item.id in seen:
            raise ScenarioError(f"{path}[{k}].id", f"duplicate id {item.id!r}")
        seen.add(item.id)


def scenario_from_dict(doc: Any) -> Scenario:
    if not isinstance(doc, dict):
        raise ScenarioError("$", "scenario document must be a JSON object")
    version = doc.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ScenarioError("schema_version", f"unsupported version {version!r}")

    def seq(key):
        value = doc.get(key, [])
        if not isinstance(value, list):
            raise ScenarioError(key, "expected a list")
        return value

    sats = tuple(_satellite(d, f"satellites[{k}]") for k, d in enumerate(seq("satellites")))
    stations = tuple(
        GroundStation(str(_require(d, "id", f"ground_stations[{k}]")), _site(d, f"ground_stations[{k}]", elevation=True))
        for k, d in enumerate(seq("ground_stations"))
    )
    targets = tuple(_target(d, f"targets[{k}]") for k, d in enumerate(seq("targets")))
    transmitters = tuple(_orbit(d, f"transmitters[{k}]") for k, d in enumerate(seq("transmitters")))
    _unique(sats, "satellites")
    _unique(stations, "ground_stations")
    _unique(targets, "targets")

    horizon = _number(doc.get("horizon_s", 86400), "horizon_s", integer=True)
    if horizon <= 0:
        raise ScenarioError("horizon_s", "must be positive")
    weight = _number(doc.get("active_weight", 10.0), "active_weight")
    if weight <= 0:
        raise ScenarioError("active_weight", "must be positive")
    sun = doc.get("sun_direction", [1.0, 0.0, 0.0])
    if not isinstance(sun, list) or len(sun) != 3:
        raise ScenarioError("sun_direction", "expected a 3-element list")
    sun = tuple(_number(v, f"sun_direction[{k}]") for k, v in enumerate(sun))
    norm = math.sqrt(sum(v * v for v in sun))
    if abs(norm - 1.0) > 1e-9:
        raise ScenarioError("sun_direction", f"must be a unit vector (norm {norm})")
    slot = _number(doc.get("downlink_slot_s", 20), "downlink_slot_s", integer=True)
    if slot < 1:
        raise ScenarioError("downlink_slot_s", "must be at least 1")
    return Scenario(
        satellites=sats,
        ground_stations=stations,
        targets=targets,
        horizon=horizon,
        active_weight=weight,
        sun_direction=sun,
        seed=_number(doc.get("seed", 0), "seed", integer=True),
        transmitters=transmitters,
        earth_rotation_offset=math.radians(_number(doc.get("earth_rotation_offset_deg", 0.0), "earth_rotation_offset_deg")),
        downlink_slot=slot,
    )


def load_scenario(document: str) -> Scenario:
    """Parse and validate scenario JSON text."""
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise ScenarioError("$", f"invalid JSON: {exc}") from None
    return scenario_from_dict(doc)


def _orbit_dict(o: OrbitElements) -> dict:
    return {
        "semi_major_axis_km": o.semi_major_axis,
        "inclination_deg": math.degrees(o.inclination),
        "raan_deg": math.degrees(o.raan),
        "arg_latitude_deg": math.degrees(o.arg_latitude_epoch),
        "epoch_s": o.epoch,
    }


def scenario_to_dict(s: Scenario) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "horizon_s": s.horizon,
        "active_weight": s.active_weight,
        "sun_direction": list(s.sun_direction),
        "seed": s.seed,
        "earth_rotation_offset_deg": math.degrees(s.earth_rotation_offset),
        "downlink_slot_s": s.downlink_slot,
        "satellites": [
            {
                "id": sat.id,
                "orbit": _orbit_dict(sat.orbit),
                "buffer_capacity": sat.buffer_capacity,
                "buffer_initial": sat.buffer_initial,
                "battery_capacity_j": sat.battery_capacity,
                "battery_min_j": sat.battery_min,
                "battery_initial_j": sat.battery_initial,
                "power_generation_w": sat.power_generation,
                "power_base_w": sat.power_base,
                "power_observe_w": sat.power_observe,
                "power_downlink_w": sat.power_downlink,
            }
            for sat in s.satellites
        ],
        "ground_stations": [
            {
                "id": g.id,
                "latitude_deg": math.degrees(g.site.latitude),
                "longitude_deg": math.degrees(g.site.longitude),
                "min_elevation_deg": math.degrees(g.site.min_elevation),
            }
            for g in s.ground_stations
        ],
        "targets": [
            {
                "id": t.id,
                "kind": t.kind,
                "reward": t.reward,
                "latitude_deg": math.degrees(t.location.latitude),
                "longitude_deg": math.degrees(t.location.longitude),
                "capture_radius_km": t.capture_radius,
            }
            for t in s.targets
        ],
        "transmitters": [_orbit_dict(o) for o in s.transmitters],
    }


def serialize_scenario(s: Scenario) -> str:
    return json.dumps(scenario_to_dict(s), indent=1, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# synthetic generation


def _rt(x: float) -> float:
    """Snap a radian value to one that survives a degrees round trip exactly."""
    for _ in range(8):
        y = math.radians(math.degrees(x))
        if y == x:
            return x
        x = y
    raise RuntimeError("angle did not reach a round-trip fixed point")  # pragma: no cover


@dataclass(frozen=True)
class GeneratorSpec:
    """Knobs for :func:`generate_synthetic`. Angles here are in degrees."""

    n_satellites: int = 7
    n_ground_stations: int = 2
    n_active: int = 10
    n_pre_fire: int = 100
    horizon: int = 86400
    altitude_km: float = 520.0
    inclination_deg: float = 35.0
    n_planes: int = 1
    n_transmitters: int = 24
    region: tuple[float, float, float, float] = (25.0, 35.0, -120.0, -80.0)  # lat lo/hi, lon lo/hi
    ground_station_region: tuple[float, float, float, float] = (-10.0, 30.0, -160.0, 20.0)
    capture_radius_km: float = 25.0
    active_weight: float = 10.0
    min_elevation_deg: float = 5.0
    buffer_capacity: int = 60
    battery_capacity: float = 200_000.0
    battery_min: float = 60_000.0
    battery_initial: float = 160_000.0
    power_generation: float = 40.0
    power_base: float = 15.0
    power_observe: float = 10.0
    power_downlink: float = 12.0
    sun_direction: tuple[float, float, float] = (1.0, 0.0, 0.0)

    def __post_init__(self):
        for key in ("n_satellites", "n_ground_stations", "n_active", "n_pre_fire", "n_transmitters"):
            if getattr(self, key) < 0:
                raise ValueError(f"{key} must be >= 0")
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        if self.n_planes < 1:
            raise ValueError("n_planes must be >= 1")


def gnss_constellation(n: int, rng: np.random.Generator | None = None) -> tuple[OrbitElements, ...]:
    """GPS-like MEO transmitters: six planes at 55 degrees."""
    if n == 0:
        return ()
    planes = min(6, n)
    out = []
    for k in range(n):
        p = k % planes
        slot = k // planes
        per_plane = math.ceil(n / planes)
        jitter = float(rng.uniform(-5, 5)) if rng is not None else 0.0
        out.append(OrbitElements(
            semi_major_axis=26560.0,
            inclination=_rt(math.radians(55.0)),
            raan=_rt(math.radians(60.0 * p)),
            arg_latitude_epoch=_rt(math.radians((360.0 * slot / per_plane + 15.0 * p + jitter) % 360.0)),
        ))
    return tuple(out)


def generate_synthetic(spec: GeneratorSpec, seed: int) -> Scenario:
    """Random scenario with low-inclination receivers and uniform rewards."""
    rng = np.random.default_rng(seed)
    a = EARTH_RADIUS_KM + spec.altitude_km
    per_plane = math.ceil(spec.n_satellites / spec.n_planes) if spec.n_satellites else 0
    sats = []
    for k in range(spec.n_satellites):
        plane, slot = divmod(k, per_plane)
        raan = 360.0 * plane / spec.n_planes + float(rng.uniform(-2, 2))
        u0 = 360.0 * slot / per_plane + float(rng.uniform(-3, 3))
        sats.append(Satellite(
            id=f"sat{k:02d}",
            orbit=OrbitElements(a, _rt(math.radians(spec.inclination_deg)), _rt(math.radians(raan % 360.0)),
                                _rt(math.radians(u0 % 360.0))),
            buffer_capacity=spec.buffer_capacity,
            battery_capacity=spec.battery_capacity,
            battery_min=spec.battery_min,
            battery_initial=spec.battery_initial,
            power_generation=spec.power_generation,
            power_base=spec.power_base,
            power_observe=spec.power_observe,
            power_downlink=spec.power_downlink,
        ))
    glat0, glat1, glon0, glon1 = spec.ground_station_region
    stations = []
    for k in range(spec.n_ground_stations):
        stations.append(GroundStation(f"gs{k:02d}", GroundSite(
            _rt(math.radians(float(rng.uniform(glat0, glat1)))),
            _rt(math.radians(float(rng.uniform(glon0, glon1)))),
            _rt(math.radians(spec.min_elevation_deg)),
        )))
    lat0, lat1, lon0, lon1 = spec.region
    targets = []
    n_total = spec.n_active + spec.n_pre_fire
    lats = rng.uniform(lat0, lat1, n_total)
    lons = rng.uniform(lon0, lon1, n_total)
    rewards = rng.uniform(0.0, 1.0, n_total)
    for k in range(n_total):
        active = k < spec.n_active
        targets.append(Target(
            id=f"{'A' if active else 'P'}{k if active else k - spec.n_active:05d}",
            kind=ACTIVE_FIRE if active else PRE_FIRE,
            reward=float(rewards[k]),
            location=GroundSite(_rt(math.radians(float(lats[k]))), _rt(math.radians(float(lons[k])))),
            capture_radius=spec.capture_radius_km,
        ))
    return Scenario(
        satellites=tuple(sats),
        ground_stations=tuple(stations),
        targets=tuple(targets),
        horizon=spec.horizon,
        active_weight=spec.active_weight,
        sun_direction=tuple(float(v) for v in spec.sun_direction),
        seed=seed,
        transmitters=gnss_constellation(spec.n_transmitters, rng),
    )


@dataclass(frozen=True)
class SyntheticAccessSpec:
    """Shape of a synthetic access pattern, bypassing orbital geometry.

    Each orbit of length ``period`` begins with an observation window (when
    the target region is in view) followed by a ground-station contact.
    Earth rotation is mimicked by advancing the region's longitude phase by
    ``longitude_shift_deg`` per orbit: the region is in view only while this
    phase lies within ``region_span_deg``.
    """

    satellite_ids: tuple[str, ...] = ("sat00",)
    target_ids: tuple[str, ...] = ()
    ground_station_ids: tuple[str, ...] = ("gs00",)
    horizon: int = 86400
    period: int = 5700
    obs_window: int = 600
    obs_offset: int = 600
    density: float = 0.3
    max_targets_per_image: int = 2
    contact_duration: int = 480
    contact_offset: int = 2400
    eclipse_fraction: float = 1 / 3
    longitude_shift_deg: float = 23.8
    region_span_deg: float = 160.0
    satellite_phase: int = 0  # seconds between successive satellites

    def __post_init__(self):
        if not 0.0 <= self.density <= 1.0:
            raise ValueError("density must lie in [0, 1]")
        if self.period <= 0 or self.horizon <= 0:
            raise ValueError("period and horizon must be positive")
        if self.obs_offset + self.obs_window > self.contact_offset:
            raise ValueError("observation window must end before the contact starts")
        if self.contact_offset + self.contact_duration > self.period:
            raise ValueError("contact must fit within one orbit")


def generate_synthetic_access(spec: SyntheticAccessSpec, seed: int):
    from .timeline import AccessTimeline, SatelliteAccess

    rng = np.random.default_rng(seed)
    times = np.arange(spec.horizon)
    sats = []
    n_gs = len(spec.ground_station_ids)
    for k, sid in enumerate(spec.satellite_ids):
        local = times + k * spec.satellite_phase
        orbit_no = local // spec.period
        phase = local % spec.period
        eclipsed = phase >= spec.period * (1.0 - spec.eclipse_fraction)
        gs_index = np.full(spec.horizon, -1, dtype=np.int64)
        if n_gs:
            in_contact = (phase >= spec.contact_offset) & (phase < spec.contact_offset + spec.contact_duration)
            gs_index[in_contact] = (orbit_no[in_contact] % n_gs)
        observations: dict[int, tuple[str, ...]] = {}
        if spec.target_ids and spec.density > 0:
            region_phase = (orbit_no * spec.longitude_shift_deg + 37.0 * k) % 360.0
            in_view = region_phase < spec.region_span_deg
            in_window = (phase >= spec.obs_offset) & (phase < spec.obs_offset + spec.obs_window) & in_view
            draws = rng.random(spec.horizon)
            for t in np.flatnonzero(in_window & (draws < spec.density)):
                m = int(rng.integers(1, spec.max_targets_per_image + 1))
                m = min(m, len(spec.target_ids))
                picks = rng.choice(len(spec.target_ids), size=m, replace=False)
                observations[int(t)] = tuple(sorted(spec.target_ids[i] for i in picks))
        sats.append(SatelliteAccess(sid, eclipsed, gs_index, observations))
    return AccessTimeline(spec.horizon, 1, list(spec.ground_station_ids), sats)
