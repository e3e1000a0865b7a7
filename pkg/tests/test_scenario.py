import copy
import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eoplan.scenario import (
    ACTIVE_FIRE,
    PRE_FIRE,
    GeneratorSpec,
    ScenarioError,
    SyntheticAccessSpec,
    generate_synthetic,
    generate_synthetic_access,
    gnss_constellation,
    load_scenario,
    scenario_from_dict,
    scenario_to_dict,
    serialize_scenario,
)

SMALL = GeneratorSpec(n_satellites=3, n_ground_stations=1, n_active=2, n_pre_fire=5, n_transmitters=6)


@pytest.fixture(scope="module")
def doc():
    return scenario_to_dict(generate_synthetic(SMALL, 5))


def test_round_trip_is_exact():
    for seed in range(20):
        s = generate_synthetic(SMALL, seed)
        assert load_scenario(serialize_scenario(s)) == s


def test_generator_is_deterministic_and_seed_sensitive():
    a = serialize_scenario(generate_synthetic(SMALL, 11))
    assert a == serialize_scenario(generate_synthetic(SMALL, 11))
    assert a != serialize_scenario(generate_synthetic(SMALL, 12))


def test_generator_counts_and_ranges():
    s = generate_synthetic(GeneratorSpec(n_active=4, n_pre_fire=30), 0)
    assert len(s.satellites) == 7 and len(s.ground_stations) == 2
    assert len(s.active_targets) == 4 and len(s.pre_fire_targets) == 30
    assert all(0 <= t.reward <= 1 for t in s.targets)
    assert {t.kind for t in s.targets} == {ACTIVE_FIRE, PRE_FIRE}
    assert len(s.transmitters) == 24
    assert s.without_pre_fire().targets == s.active_targets


def test_gnss_constellation_shape():
    orbits = gnss_constellation(24)
    assert len(orbits) == 24
    assert len({round(o.raan, 6) for o in orbits}) == 6
    assert all(abs(o.semi_major_axis - 26560) < 1 for o in orbits)


@pytest.mark.parametrize("mutate, path", [
    (lambda d: d["targets"][0].__setitem__("reward", 1.5), "targets[0].reward"),
    (lambda d: d["targets"][1].__setitem__("kind", "smoke"), "targets[1].kind"),
    (lambda d: d["targets"][0].pop("latitude_deg"), "targets[0].latitude_deg"),
    (lambda d: d["satellites"][1].__setitem__("id", d["satellites"][0]["id"]), "satellites[1].id"),
    (lambda d: d["satellites"][0]["orbit"].__setitem__("semi_major_axis_km", 6000.0), "satellites[0].orbit"),
    (lambda d: d["satellites"][0].__setitem__("battery_initial_j", 1.0), "satellites[0].battery_initial_j"),
    (lambda d: d["satellites"][0].__setitem__("buffer_capacity", 2.5), "satellites[0].buffer_capacity"),
    (lambda d: d["ground_stations"][0].__setitem__("min_elevation_deg", 95.0), "ground_stations[0].min_elevation_deg"),
    (lambda d: d.__setitem__("sun_direction", [1.0, 1.0, 0.0]), "sun_direction"),
    (lambda d: d.__setitem__("horizon_s", -5), "horizon_s"),
    (lambda d: d.__setitem__("schema_version", 99), "schema_version"),
    (lambda d: d.__setitem__("targets", {}), "targets"),
    (lambda d: d["targets"][0].__setitem__("reward", "high"), "targets[0].reward"),
])
def test_validation_names_the_field(doc, mutate, path):
    d = copy.deepcopy(doc)
    mutate(d)
    with pytest.raises(ScenarioError) as err:
        scenario_from_dict(d)
    assert err.value.path == path


def test_invalid_json():
    with pytest.raises(ScenarioError):
        load_scenario("{not json")


def test_defaults_fill_optional_fields(doc):
    d = copy.deepcopy(doc)
    for t in d["targets"]:
        t.pop("capture_radius_km")
    for s in d["satellites"]:
        s.pop("buffer_initial")
    s = scenario_from_dict(d)
    assert all(t.capture_radius == 25.0 for t in s.targets)
    assert all(sat.buffer_initial == 0 for sat in s.satellites)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10_000), n_pre=st.integers(0, 20), n_sat=st.integers(1, 5))
def test_round_trip_property(seed, n_pre, n_sat):
    spec = GeneratorSpec(n_satellites=n_sat, n_pre_fire=n_pre, n_active=2, n_transmitters=4)
    s = generate_synthetic(spec, seed)
    text = serialize_scenario(s)
    assert load_scenario(text) == s
    assert serialize_scenario(load_scenario(text)) == text
    json.loads(text)


def test_generator_spec_validation():
    with pytest.raises(ValueError):
        GeneratorSpec(n_satellites=-1)


class TestSyntheticAccess:
    def test_shape(self):
        spec = SyntheticAccessSpec(satellite_ids=("a", "b"), target_ids=("T1", "T2", "T3"))
        tl = generate_synthetic_access(spec, 1)
        assert tl.horizon == 86400 and tl.step == 1
        for sat in tl.satellites:
            assert sat.eclipsed.mean() == pytest.approx(1 / 3, abs=0.01)
            assert all(set(v) <= {"T1", "T2", "T3"} for v in sat.observations.values())
            contact = sat.gs_index >= 0
            assert not any(contact[t] for t in sat.observations)

    def test_bad_spec(self):
        with pytest.raises(ValueError):
            SyntheticAccessSpec(density=2.0)
        with pytest.raises(ValueError):
            SyntheticAccessSpec(obs_offset=2000, obs_window=1000, contact_offset=2400)
