import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eoplan.geometry import (
    EARTH_RADIUS_KM,
    EARTH_ROTATION_RATE,
    MU_EARTH,
    GeometryError,
    GroundSite,
    NoSpecularError,
    OrbitElements,
    eci_to_ecef,
    elevation_angle,
    is_eclipsed,
    propagate_circular,
    propagate_many,
    site_position,
    specular_many,
    specular_point,
)

from oracles import grid_specular, random_visible_pair

R = EARTH_RADIUS_KM


class TestPropagation:
    def test_radius_speed_and_period(self):
        el = OrbitElements(R + 520.0, math.radians(35), math.radians(10), math.radians(40))
        t = np.linspace(0, 3 * el.period, 200)
        pos, vel = propagate_many(el, t)
        assert np.allclose(np.linalg.norm(pos, axis=1), el.semi_major_axis, rtol=1e-12)
        assert np.allclose(np.linalg.norm(vel, axis=1), math.sqrt(MU_EARTH / el.semi_major_axis), rtol=1e-12)
        assert np.allclose(np.einsum("ij,ij->i", pos, vel), 0.0, atol=1e-6)
        p0, _ = propagate_circular(el, 0.0)
        p1, _ = propagate_circular(el, el.period)
        assert np.allclose(p0, p1, atol=1e-6)
        assert el.period == pytest.approx(2 * math.pi * math.sqrt(el.semi_major_axis**3 / MU_EARTH))

    def test_velocity_is_derivative_of_position(self):
        el = OrbitElements(R + 700.0, 1.1, 0.3, 2.0)
        h = 1e-3
        for t in (0.0, 1234.5, 5000.0):
            p_plus, _ = propagate_circular(el, t + h)
            p_minus, _ = propagate_circular(el, t - h)
            _, v = propagate_circular(el, t)
            assert np.allclose((p_plus - p_minus) / (2 * h), v, rtol=1e-6)

    def test_max_latitude_equals_inclination(self):
        inc = math.radians(35)
        el = OrbitElements(R + 520.0, inc, 0.0)
        pos, _ = propagate_many(el, np.arange(0, el.period, 1.0))
        lat = np.arcsin(pos[:, 2] / np.linalg.norm(pos, axis=1))
        assert lat.max() == pytest.approx(inc, abs=1e-5)

    @pytest.mark.parametrize("a", [R, R - 1, float("nan")])
    def test_rejects_orbits_inside_earth(self, a):
        with pytest.raises(GeometryError):
            OrbitElements(a, 0.1, 0.0)


class TestElevation:
    def test_zenith_and_horizon(self):
        site = GroundSite(0.0, 0.0)
        assert elevation_angle(site, [R + 500, 0, 0], 0.0) == pytest.approx(math.pi / 2)
        # point on the local horizontal plane
        assert elevation_angle(site, [R, 1000.0, 0.0], 0.0) == pytest.approx(0.0, abs=1e-12)

    @settings(max_examples=200, deadline=None)
    @given(lat=st.floats(-1.4, 1.4), lon=st.floats(-3.1, 3.1), cang=st.floats(0.0, 0.35),
           az=st.floats(0, 2 * math.pi), h=st.floats(300, 2000))
    def test_central_angle_formula(self, lat, lon, cang, az, h):
        """Elevation from the closed form tan(el) = (cos(g) - R/r) / sin(g)."""
        site = GroundSite(lat, lon)
        up = site_position(site, 0.0) / R
        east = np.cross([0, 0, 1.0], up)
        if np.linalg.norm(east) < 1e-9:
            east = np.array([1.0, 0, 0])
        east /= np.linalg.norm(east)
        north = np.cross(up, east)
        d = math.cos(az) * north + math.sin(az) * east
        r = R + h
        sat = r * (math.cos(cang) * up + math.sin(cang) * d)
        expected = math.atan2(math.cos(cang) - R / r, math.sin(cang)) if cang > 0 else math.pi / 2
        assert elevation_angle(site, sat, 0.0) == pytest.approx(expected, abs=1e-9)

    def test_earth_rotation_moves_site(self):
        site = GroundSite(0.0, 0.0)
        t = math.pi / 2 / EARTH_ROTATION_RATE
        assert np.allclose(site_position(site, t), [0, R, 0], atol=1e-6)
        assert np.allclose(site_position(site, 0.0, rotation_offset=math.pi / 2), [0, R, 0], atol=1e-9)

    def test_ecef_inverts_rotation(self):
        site = GroundSite(0.4, -1.2)
        ts = np.array([0.0, 100.0, 40000.0])
        ecef = eci_to_ecef(site_position(site, ts), ts)
        assert np.allclose(ecef, site_position(site, 0.0), atol=1e-6)

    def test_rejects_satellite_below_surface(self):
        with pytest.raises(GeometryError):
            elevation_angle(GroundSite(0, 0), [R - 1, 0, 0], 0.0)

    @pytest.mark.parametrize("lat", [2.0, -1.6, float("nan")])
    def test_bad_latitude(self, lat):
        with pytest.raises(GeometryError):
            GroundSite(lat, 0.0)


class TestEclipse:
    def test_cylinder(self):
        sun = np.array([1.0, 0, 0])
        assert not is_eclipsed([R + 500, 0, 0], sun)
        assert is_eclipsed([-(R + 500), 0, 0], sun)
        assert not is_eclipsed([-(R + 500), R + 1, 0], sun)
        assert is_eclipsed([-(R + 500), R - 1, 0], sun)
        assert not is_eclipsed([0, 0, R + 500], sun)

    def test_requires_unit_sun(self):
        with pytest.raises(GeometryError):
            is_eclipsed([R + 500, 0, 0], [2.0, 0, 0])

    def test_leo_eclipse_fraction(self):
        el = OrbitElements(R + 520.0, 0.0, 0.0)
        pos, _ = propagate_many(el, np.arange(0, el.period, 1.0))
        frac = np.mean([is_eclipsed(p, [1.0, 0, 0]) for p in pos[::10]])
        expected = math.asin(R / el.semi_major_axis) / math.pi
        assert frac == pytest.approx(expected, abs=0.01)


class TestSpecular:
    def test_matches_grid_search(self):
        rng = np.random.default_rng(7)
        for _ in range(60):
            tx, rx = random_visible_pair(rng)
            sol = specular_point(tx, rx)
            p, L = grid_specular(tx, rx)
            assert abs(sol.incidence_angle - sol.reflection_angle) <= 1e-6
            assert sol.path_length == pytest.approx(L, abs=1e-3)
            assert sol.path_length <= L + 1e-6
            assert np.linalg.norm(sol.point) == pytest.approx(R)
            assert np.linalg.norm(sol.point - p) < 0.1

    def test_symmetric_geometry_gives_midpoint(self):
        for half in (0.05, 0.2, 0.35):
            r = R + 600.0
            tx = r * np.array([math.cos(half), math.sin(half), 0.0])
            rx = r * np.array([math.cos(half), -math.sin(half), 0.0])
            sol = specular_point(tx, rx)
            ang = math.atan2(sol.point[1], sol.point[0])
            assert abs(ang) <= 1e-6

    def test_overhead_transmitter(self):
        rx = np.array([R + 500, 0, 0])
        tx = np.array([R + 20000, 0, 0])
        sol = specular_point(tx, rx)
        assert np.allclose(sol.point, [R, 0, 0], atol=1e-9)
        assert sol.incidence_angle == pytest.approx(0.0, abs=1e-7)

    def test_blocked_line_of_sight(self):
        with pytest.raises(NoSpecularError):
            specular_point([R + 20000, 0, 0], [-(R + 500), 0, 0])

    def test_receiver_below_surface(self):
        with pytest.raises(GeometryError):
            specular_point([R + 20000, 0, 0], [R - 10, 0, 0])

    def test_vectorised_agrees_with_scalar(self):
        rng = np.random.default_rng(3)
        pairs = [random_visible_pair(rng) for _ in range(20)]
        tx = np.array([p[0] for p in pairs])
        rx = np.array([p[1] for p in pairs])
        blocked_tx = np.array([[R + 20000, 0, 0]])
        blocked_rx = np.array([[-(R + 500), 0, 0]])
        out = specular_many(np.vstack([tx, blocked_tx]), np.vstack([rx, blocked_rx]))
        assert np.isnan(out[-1]).all()
        for k, (a, b) in enumerate(pairs):
            assert np.allclose(out[k], specular_point(a, b).point, atol=1e-9)
