"""Orbit, visibility, eclipse and specular-reflection geometry.

Everything here works on a spherical Earth in an Earth-centred inertial
frame.  Scalar entry points mirror the vectorised ``*_many`` helpers used by
the access scanner, so tests can check one against the other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

EARTH_RADIUS_KM = 6378.137
MU_EARTH = 398600.4418  # km^3 / s^2
EARTH_ROTATION_RATE = 7.2921159e-5  # rad / s


class GeometryError(ValueError):
    """Invalid geometric input."""


class NoSpecularError(GeometryError):
    """The transmitter is hidden from the receiver by the Earth."""


@dataclass(frozen=True)
class OrbitElements:
    """Circular orbit. ``arg_latitude_epoch`` is the argument of latitude at ``epoch``."""

    semi_major_axis: float
    inclination: float
    raan: float
    arg_latitude_epoch: float = 0.0
    epoch: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.semi_major_axis) or self.semi_major_axis <= EARTH_RADIUS_KM:
            raise GeometryError(
                f"semi_major_axis must exceed {EARTH_RADIUS_KM} km, got {self.semi_major_axis}"
            )
        for name in ("inclination", "raan", "arg_latitude_epoch", "epoch"):
            if not math.isfinite(getattr(self, name)):
                raise GeometryError(f"{name} must be finite")

    @property
    def mean_motion(self) -> float:
        return math.sqrt(MU_EARTH / self.semi_major_axis**3)

    @property
    def period(self) -> float:
        return 2.0 * math.pi / self.mean_motion


@dataclass(frozen=True)
class GroundSite:
    latitude: float
    longitude: float
    min_elevation: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.latitude) and abs(self.latitude) <= math.pi / 2):
            raise GeometryError(f"latitude out of range: {self.latitude}")
        if not math.isfinite(self.longitude):
            raise GeometryError("longitude must be finite")
        if not (0.0 <= self.min_elevation < math.pi / 2):
            raise GeometryError(f"min_elevation must lie in [0, pi/2): {self.min_elevation}")


@dataclass(frozen=True)
class SpecularSolution:
    point: np.ndarray
    path_length: float
    incidence_angle: float
    reflection_angle: float


def _as_vec(v) -> np.ndarray:
    arr = np.asarray(v, dtype=float)
    if arr.shape != (3,) or not np.all(np.isfinite(arr)):
        raise GeometryError(f"expected a finite 3-vector, got {v!r}")
    return arr


# --------------------------------------------------------------------------
# propagation


def propagate_circular(elements: OrbitElements, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Position and velocity (km, km/s) of a circular two-body orbit at time ``t``."""
    pos, vel = propagate_many(elements, np.array([t], dtype=float))
    return pos[0], vel[0]


def propagate_many(elements: OrbitElements, times: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    times = np.asarray(times, dtype=float)
    a = elements.semi_major_axis
    n = elements.mean_motion
    u = elements.arg_latitude_epoch + n * (times - elements.epoch)
    cu, su = np.cos(u), np.sin(u)
    ci, si = math.cos(elements.inclination), math.sin(elements.inclination)
    co, so = math.cos(elements.raan), math.sin(elements.raan)
    pos = a * np.stack([cu * co - su * ci * so, cu * so + su * ci * co, su * si], axis=-1)
    vel = (a * n) * np.stack([-su * co - cu * ci * so, -su * so + cu * ci * co, cu * si], axis=-1)
    return pos, vel


# --------------------------------------------------------------------------
# ground sites


def earth_rotation_angle(t, offset: float = 0.0):
    return offset + EARTH_ROTATION_RATE * np.asarray(t, dtype=float)


def site_position(site: GroundSite, t, rotation_offset: float = 0.0) -> np.ndarray:
    """Inertial position of a ground site; shape (3,) for scalar t, (n, 3) otherwise."""
    theta = earth_rotation_angle(t, rotation_offset)
    lon = site.longitude + theta
    cl = math.cos(site.latitude)
    return EARTH_RADIUS_KM * np.stack(
        [cl * np.cos(lon), cl * np.sin(lon), np.full_like(lon, math.sin(site.latitude))], axis=-1
    )


def elevation_angle(site: GroundSite, sat_pos, t: float, rotation_offset: float = 0.0) -> float:
    """Elevation of a satellite above the local horizontal at ``site``."""
    sat = _as_vec(sat_pos)
    if np.linalg.norm(sat) <= EARTH_RADIUS_KM:
        raise GeometryError("satellite position must lie above the Earth surface")
    return float(elevation_many(site, sat[None, :], np.array([t]), rotation_offset)[0])


def elevation_many(site: GroundSite, sat_pos: np.ndarray, times: np.ndarray,
                   rotation_offset: float = 0.0) -> np.ndarray:
    gs = site_position(site, times, rotation_offset)
    los = sat_pos - gs
    up = gs / EARTH_RADIUS_KM
    vert = np.einsum("ij,ij->i", los, up)
    horiz = np.linalg.norm(los - vert[:, None] * up, axis=1)
    return np.arctan2(vert, horiz)  # better conditioned than arcsin near zenith


def eci_to_ecef(pos: np.ndarray, times: np.ndarray, rotation_offset: float = 0.0) -> np.ndarray:
    theta = earth_rotation_angle(times, rotation_offset)
    c, s = np.cos(theta), np.sin(theta)
    x, y, z = pos[..., 0], pos[..., 1], pos[..., 2]
    return np.stack([c * x + s * y, -s * x + c * y, z], axis=-1)


def geodetic_to_unit(latitude, longitude) -> np.ndarray:
    latitude = np.asarray(latitude, dtype=float)
    longitude = np.asarray(longitude, dtype=float)
    cl = np.cos(latitude)
    return np.stack([cl * np.cos(longitude), cl * np.sin(longitude), np.sin(latitude)], axis=-1)


# --------------------------------------------------------------------------
# eclipse


def is_eclipsed(sat_pos, sun_dir) -> bool:
    """Cylindrical umbra test."""
    sun = _as_vec(sun_dir)
    if abs(np.linalg.norm(sun) - 1.0) > 1e-9:
        raise GeometryError("sun_dir must be a unit vector")
    return bool(eclipsed_many(_as_vec(sat_pos)[None, :], sun)[0])


def eclipsed_many(sat_pos: np.ndarray, sun_dir: np.ndarray) -> np.ndarray:
    along = sat_pos @ sun_dir
    perp = np.linalg.norm(sat_pos - along[:, None] * sun_dir[None, :], axis=1)
    return (along < 0.0) & (perp < EARTH_RADIUS_KM)


# --------------------------------------------------------------------------
# specular reflection


def line_of_sight_clear(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """True where the segment a-b stays outside the Earth sphere. Works row-wise."""
    a = np.atleast_2d(a)
    b = np.atleast_2d(b)
    d = b - a
    dd = np.einsum("ij,ij->i", d, d)
    s = np.where(dd > 0, -np.einsum("ij,ij->i", a, d) / np.where(dd > 0, dd, 1.0), 0.0)
    s = np.clip(s, 0.0, 1.0)
    closest = a + s[:, None] * d
    return np.linalg.norm(closest, axis=1) >= EARTH_RADIUS_KM


def _path_derivative(theta, e1, e2, tx, rx):
    c, s = np.cos(theta)[:, None], np.sin(theta)[:, None]
    p = EARTH_RADIUS_KM * (c * e1 + s * e2)
    dp = EARTH_RADIUS_KM * (-s * e1 + c * e2)
    to_tx = tx - p
    to_rx = rx - p
    return -(
        np.einsum("ij,ij->i", to_tx, dp) / np.linalg.norm(to_tx, axis=1)
        + np.einsum("ij,ij->i", to_rx, dp) / np.linalg.norm(to_rx, axis=1)
    )


def specular_many(tx: np.ndarray, rx: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Specular points for rows of transmitter/receiver positions.

    Rows whose line of sight is blocked come back as NaN.  The search runs
    along the great-circle arc from the receiver's sub-point towards the
    transmitter's; the path-length derivative changes sign exactly once there,
    so bisection on it converges to the reflection point.
    """
    tx = np.atleast_2d(np.asarray(tx, dtype=float))
    rx = np.atleast_2d(np.asarray(rx, dtype=float))
    n = tx.shape[0]
    out = np.full((n, 3), np.nan)
    visible = line_of_sight_clear(tx, rx)
    if not visible.any():
        return out
    t, r = tx[visible], rx[visible]
    r_norm = np.linalg.norm(r, axis=1)
    e1 = r / r_norm[:, None]
    along = np.einsum("ij,ij->i", t, e1)
    perp = t - along[:, None] * e1
    perp_norm = np.linalg.norm(perp, axis=1)
    phi = np.arctan2(perp_norm, along)
    collinear = perp_norm <= 1e-9 * np.linalg.norm(t, axis=1)
    e2 = perp / np.where(collinear, 1.0, perp_norm)[:, None]

    # the point must be seen from the receiver, which bounds the arc
    hi = np.minimum(phi, np.arccos(np.clip(EARTH_RADIUS_KM / r_norm, -1.0, 1.0)))
    lo = np.zeros_like(hi)
    active = ~collinear
    if active.any():
        a_lo, a_hi = lo[active], hi[active]
        a_e1, a_e2, a_t, a_r = e1[active], e2[active], t[active], r[active]
        width = float(np.max(a_hi - a_lo)) if a_hi.size else 0.0
        iters = max(1, int(math.ceil(math.log2(max(width, tol) / tol)))) + 1
        for _ in range(iters):
            mid = 0.5 * (a_lo + a_hi)
            neg = _path_derivative(mid, a_e1, a_e2, a_t, a_r) < 0.0
            a_lo = np.where(neg, mid, a_lo)
            a_hi = np.where(neg, a_hi, mid)
        lo[active] = 0.5 * (a_lo + a_hi)
    theta = np.where(collinear, 0.0, lo)
    pts = EARTH_RADIUS_KM * (np.cos(theta)[:, None] * e1 + np.sin(theta)[:, None] * e2)
    out[visible] = pts
    return out


def specular_point(tx_pos, rx_pos) -> SpecularSolution:
    """Reflection point on the spherical Earth for one transmitter/receiver pair."""
    tx = _as_vec(tx_pos)
    rx = _as_vec(rx_pos)
    if np.linalg.norm(tx) <= EARTH_RADIUS_KM or np.linalg.norm(rx) <= EARTH_RADIUS_KM:
        raise GeometryError("transmitter and receiver must lie above the Earth surface")
    p = specular_many(tx[None, :], rx[None, :])[0]
    if np.isnan(p).any():
        raise NoSpecularError("transmitter is not visible from the receiver")
    n = p / EARTH_RADIUS_KM
    to_tx, to_rx = tx - p, rx - p
    d_tx, d_rx = np.linalg.norm(to_tx), np.linalg.norm(to_rx)
    inc = math.acos(float(np.clip(to_tx @ n / d_tx, -1.0, 1.0)))
    ref = math.acos(float(np.clip(to_rx @ n / d_rx, -1.0, 1.0)))
    return SpecularSolution(point=p, path_length=float(d_tx + d_rx),
                            incidence_angle=inc, reflection_angle=ref)
