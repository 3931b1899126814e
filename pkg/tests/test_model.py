import math

import pytest
from shapely.geometry import Polygon as ShapelyPolygon

from canopy import geo
from canopy.errors import ValidationFailed
from canopy.model import (
    DEFAULT_EPOCH,
    GeoPoint,
    IucnStatus,
    SPECIES_BY_CODE,
    SPECIES_REGISTRY,
    SensorDevice,
    SensorKind,
    SimClock,
    SpeciesGroup,
    TreeAsset,
    Zone,
    load_inventory,
    save_inventory,
    validate_tree_asset,
)
from canopy.scenario import default_scenario, default_zones


# -- geometry ----------------------------------------------------------------

def test_haversine_identity():
    assert geo.haversine_m(41.56, 14.66, 41.56, 14.66) == 0.0


def test_haversine_one_degree_longitude_at_equator():
    # 1 degree of arc = 2*pi*R / 360
    expected = 2 * math.pi * geo.EARTH_RADIUS_M / 360.0
    assert geo.haversine_m(0.0, 0.0, 0.0, 1.0) == pytest.approx(expected, abs=10.0)


def test_haversine_symmetry():
    import random
    rng = random.Random(7)
    for _ in range(50):
        a = (rng.uniform(-80, 80), rng.uniform(-179, 179))
        b = (rng.uniform(-80, 80), rng.uniform(-179, 179))
        assert geo.haversine_m(*a, *b) == pytest.approx(geo.haversine_m(*b, *a), abs=1e-9)


def _square_at(lat, lon, side_m):
    dlat = side_m / (math.pi / 180.0 * geo.EARTH_RADIUS_M)
    dlon = side_m / (math.pi / 180.0 * geo.EARTH_RADIUS_M * math.cos(math.radians(lat)))
    return [(lat, lon), (lat, lon + dlon), (lat + dlat, lon + dlon), (lat + dlat, lon)]


def test_polygon_area_square_100m():
    square = _square_at(41.56, 14.66, 100.0)
    area = geo.polygon_area_m2(square)
    assert area == pytest.approx(10_000.0, rel=0.01)


def test_polygon_area_matches_projected_shapely():
    square = _square_at(41.56, 14.66, 173.0)
    ref_lat = sum(p[0] for p in square) / 4
    ref_lon = sum(p[1] for p in square) / 4
    projected = geo.project_local_m(square, ref_lat, ref_lon)
    assert geo.polygon_area_m2(square) == pytest.approx(ShapelyPolygon(projected).area, rel=1e-9)


def test_polygon_area_winding_independent():
    square = _square_at(41.56, 14.66, 80.0)
    assert geo.polygon_area_m2(square) == pytest.approx(geo.polygon_area_m2(square[::-1]))


def test_polygon_area_degenerate():
    with pytest.raises(geo.DegeneratePolygon):
        geo.polygon_area_m2([(41.0, 14.0), (41.0, 14.0), (41.0001, 14.0)])


# -- species registry -----------------------------------------------------------

def test_registry_holds_eight_species_four_per_group():
    assert len(SPECIES_REGISTRY) == 8
    groups = [s.group for s in SPECIES_REGISTRY]
    assert groups.count(SpeciesGroup.DECIDUOUS_ANGIOSPERM) == 4
    assert groups.count(SpeciesGroup.EVERGREEN_GYMNOSPERM) == 4


def test_registry_threatened_entries():
    assert SPECIES_BY_CODE["SEQ-SEM"].scientific_name == "Sequoia sempervirens"
    assert SPECIES_BY_CODE["SEQ-SEM"].iucn_status is IucnStatus.EN
    assert SPECIES_BY_CODE["AES-HIP"].scientific_name == "Aesculus hippocastanum"
    assert SPECIES_BY_CODE["AES-HIP"].iucn_status is IucnStatus.VU
    listed = [s for s in SPECIES_REGISTRY if s.iucn_status in (IucnStatus.EN, IucnStatus.VU)]
    assert len(listed) == 2


# -- tree validation -------------------------------------------------------------

@pytest.fixture()
def zone_map():
    return {z.zone_id: z for z in default_zones()}


def test_valid_tree_passes(zone_map):
    zone = zone_map["villa-park"]
    center = GeoPoint(sum(p.lat for p in zone.boundary) / 4, sum(p.lon for p in zone.boundary) / 4)
    asset = TreeAsset("CB-9001", "SEQ-SEM", center, "villa-park")
    assert validate_tree_asset(asset, SPECIES_BY_CODE, zone_map) is asset


def test_unknown_species_rejected(zone_map):
    zone = zone_map["villa-park"]
    asset = TreeAsset("CB-9002", "XYZ", zone.boundary[0], "villa-park")
    with pytest.raises(ValidationFailed) as err:
        validate_tree_asset(asset, SPECIES_BY_CODE, zone_map)
    assert any("unknown-species" in v for v in err.value.violations)


def test_unknown_zone_and_outside_zone(zone_map):
    asset = TreeAsset("CB-9003", "SEQ-SEM", GeoPoint(41.56, 14.66), "nowhere")
    with pytest.raises(ValidationFailed) as err:
        validate_tree_asset(asset, SPECIES_BY_CODE, zone_map)
    assert any("unknown-zone" in v for v in err.value.violations)

    far = TreeAsset("CB-9004", "SEQ-SEM", GeoPoint(42.0, 15.0), "villa-park")
    with pytest.raises(ValidationFailed) as err:
        validate_tree_asset(far, SPECIES_BY_CODE, zone_map)
    assert any("location-outside-zone" in v for v in err.value.violations)


def test_duplicate_id_rejected(zone_map):
    zone = zone_map["villa-park"]
    center = GeoPoint(41.5560, 14.6590)
    asset = TreeAsset("CB-0001", "SEQ-SEM", center, "villa-park")
    with pytest.raises(ValidationFailed) as err:
        validate_tree_asset(asset, SPECIES_BY_CODE, zone_map, existing_ids={"CB-0001"})
    assert any("duplicate-id" in v for v in err.value.violations)


def test_multiple_violations_all_listed(zone_map):
    asset = TreeAsset("CB-0001", "XYZ", GeoPoint(0.0, 0.0), "nowhere")
    with pytest.raises(ValidationFailed) as err:
        validate_tree_asset(asset, SPECIES_BY_CODE, zone_map, existing_ids={"CB-0001"})
    text = " ".join(err.value.violations)
    for code in ("duplicate-id", "unknown-species", "unknown-zone"):
        assert code in text


# -- zones -------------------------------------------------------------------------

def test_bowtie_zone_rejected():
    with pytest.raises(ValidationFailed):
        Zone("bow", "Bow Tie", (
            GeoPoint(41.0, 14.0), GeoPoint(41.001, 14.001),
            GeoPoint(41.001, 14.0), GeoPoint(41.0, 14.001)))


def test_zone_needs_three_distinct_vertices():
    with pytest.raises(ValidationFailed):
        Zone("thin", "Thin", (GeoPoint(41.0, 14.0), GeoPoint(41.0, 14.0), GeoPoint(41.001, 14.0)))


# -- devices ------------------------------------------------------------------------

def test_tree_talker_requires_tree():
    with pytest.raises(ValidationFailed):
        SensorDevice(1, SensorKind.TREE_TALKER, GeoPoint(41.56, 14.66))


def test_device_id_range():
    with pytest.raises(ValidationFailed):
        SensorDevice(2 ** 32, SensorKind.SOIL_PROBE, GeoPoint(41.56, 14.66))


def test_default_scenario_has_twenty_talkers_mapped_injectively():
    s = default_scenario()
    talkers = [d for d in s.devices if d.kind is SensorKind.TREE_TALKER]
    assert len(talkers) == 20
    attached = [d.attached_tree for d in talkers]
    assert len(set(attached)) == len(attached)
    tree_ids = {t.tree_id for t in s.trees}
    assert set(attached) <= tree_ids


# -- clock ---------------------------------------------------------------------------

def test_clock_time_is_pure_function_of_tick():
    clock = SimClock()
    clock.advance(7)
    assert clock.now() == clock.at(7)
    again = SimClock()
    again.advance(3)
    again.advance(4)
    assert again.now() == clock.now()


def test_clock_never_decreases():
    clock = SimClock()
    with pytest.raises(ValidationFailed):
        clock.advance(-1)


def test_clock_rejects_off_grid_timestamp():
    from datetime import timedelta
    clock = SimClock()
    with pytest.raises(ValidationFailed):
        clock.tick_of(DEFAULT_EPOCH + timedelta(minutes=7))
    assert clock.tick_of(DEFAULT_EPOCH + timedelta(minutes=90)) == 3


# -- inventory round trip ---------------------------------------------------------------

def test_inventory_round_trip(zone_map):
    s = default_scenario()
    text = save_inventory(s.trees)
    loaded = load_inventory(text, SPECIES_BY_CODE, zone_map)
    assert [t.tree_id for t in loaded] == [t.tree_id for t in s.trees]
    assert all(a.location == b.location for a, b in zip(loaded, s.trees))


def test_inventory_rejects_duplicate_lines(zone_map):
    s = default_scenario()
    text = save_inventory(s.trees[:1]) + save_inventory(s.trees[:1])
    with pytest.raises(ValidationFailed):
        load_inventory(text, SPECIES_BY_CODE, zone_map)
