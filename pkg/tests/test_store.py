import random
from datetime import timedelta

import pytest

from canopy.errors import CanopyError
from canopy.model import DEFAULT_EPOCH, SensorKind, TICK_STEP, TICKS_PER_DAY
from canopy.readings import SoilReading
from canopy.store import (
    FLAG_OK,
    FLAG_SUSPECT,
    InvalidChannel,
    MisalignedTimestamp,
    RETENTION_DAYS,
    SeriesKey,
    TelemetryStore,
    UnknownSeries,
)


def soil_reading(tick: int, salinity=0.45, device_id=0x30000001):
    return SoilReading(device_id=device_id, t=DEFAULT_EPOCH + tick * TICK_STEP,
                       moisture_vwc_pct=30.0, soil_temp_c=12.0, salinity_dsm=salinity,
                       water_potential_kpa=-50.0)


def salinity_key(device_id=0x30000001):
    return SeriesKey(device_id, SensorKind.SOIL_PROBE, "salinity_dsm")


# -- ingestion -----------------------------------------------------------------

def test_soil_reading_fans_out_to_four_series():
    store = TelemetryStore()
    assert store.append(soil_reading(0)) == "inserted"
    keys = store.keys()
    assert len(keys) == 4
    assert {k.channel for k in keys} == {
        "moisture_vwc_pct", "soil_temp_c", "salinity_dsm", "water_potential_kpa"}


def test_reappend_is_idempotent():
    store = TelemetryStore()
    store.append(soil_reading(0))
    before = store.total_points()
    assert store.append(soil_reading(0)) == "duplicate"
    assert store.total_points() == before


def test_off_grid_timestamp_rejected():
    store = TelemetryStore()
    reading = SoilReading(device_id=1, t=DEFAULT_EPOCH + timedelta(minutes=7),
                          moisture_vwc_pct=30.0, soil_temp_c=12.0, salinity_dsm=0.4,
                          water_potential_kpa=-50.0)
    with pytest.raises(MisalignedTimestamp):
        store.append(reading)


def test_invalid_channel_rejected():
    store = TelemetryStore()
    with pytest.raises(InvalidChannel):
        store._append_point(SeriesKey(1, SensorKind.SOIL_PROBE, "co2_ppm"), 0, 1.0, FLAG_OK)


def test_unknown_series_raises():
    store = TelemetryStore()
    with pytest.raises(UnknownSeries):
        store.query_range(salinity_key(), DEFAULT_EPOCH, DEFAULT_EPOCH + timedelta(days=1))


# -- queries ---------------------------------------------------------------------

def test_raw_query_returns_everything_in_order():
    store = TelemetryStore()
    for tick in range(10):
        store.append(soil_reading(tick))
    points = store.query_range(salinity_key(), DEFAULT_EPOCH, DEFAULT_EPOCH + 9 * TICK_STEP)
    assert len(points) == 10
    assert all(a.t < b.t for a, b in zip(points, points[1:]))


def test_mean_of_constant_day_is_the_constant():
    store = TelemetryStore()
    for tick in range(TICKS_PER_DAY):
        store.append(soil_reading(tick, salinity=0.45))
    points = store.query_range(salinity_key(), DEFAULT_EPOCH,
                               DEFAULT_EPOCH + timedelta(days=1), agg="mean",
                               bucket=timedelta(days=1))
    assert len(points) == 1
    assert points[0].value == pytest.approx(0.45)


def test_epoch_aligned_daily_sum_buckets():
    """48 half-hour points of 0.5 starting at noon split into two midnight-aligned
    buckets of 24 x 0.5 = 12.0 each."""
    store = TelemetryStore()
    noon_tick = 24  # epoch is midnight, so noon is tick 24
    device = 0x10000001
    from canopy.readings import WeatherReading
    for i in range(48):
        tick = noon_tick + i
        store.append(WeatherReading(
            device_id=device, t=DEFAULT_EPOCH + tick * TICK_STEP, temp_dry_c=15.0,
            temp_wet_c=12.0, dew_point_c=10.0, rh_pct=70.0, wind_speed_ms=1.0,
            wind_dir_deg=90.0, rain_mm_30min=0.5, leaf_wetness_pct=10.0, solar_wm2=100.0))
    key = SeriesKey(device, SensorKind.WEATHER_STATION, "rain_mm_30min")
    buckets = store.query_range(key, DEFAULT_EPOCH, DEFAULT_EPOCH + timedelta(days=3),
                                agg="sum", bucket=timedelta(days=1))
    assert [round(b.value, 9) for b in buckets] == [12.0, 12.0]
    assert buckets[0].t == DEFAULT_EPOCH
    assert buckets[1].t == DEFAULT_EPOCH + timedelta(days=1)


def test_bucket_must_be_grid_multiple():
    store = TelemetryStore()
    store.append(soil_reading(0))
    with pytest.raises(CanopyError):
        store.query_range(salinity_key(), DEFAULT_EPOCH, DEFAULT_EPOCH + TICK_STEP,
                          agg="mean", bucket=timedelta(minutes=45))


def test_aggregates_match_brute_force_on_random_series():
    rng = random.Random(11)
    for trial in range(30):
        store = TelemetryStore()
        n = rng.randrange(5, 200)
        values = [rng.uniform(0.0, 2.0) for _ in range(n)]
        for tick, v in enumerate(values):
            store.append(soil_reading(tick, salinity=v))
        bucket_ticks = rng.choice([2, 4, 48, 96])
        t0, t1 = DEFAULT_EPOCH, DEFAULT_EPOCH + (n + 5) * TICK_STEP
        for agg in ("mean", "min", "max", "sum"):
            got = store.query_range(salinity_key(), t0, t1, agg=agg,
                                    bucket=bucket_ticks * TICK_STEP)
            expected = {}
            for tick, v in enumerate(values):
                expected.setdefault(tick // bucket_ticks, []).append(v)
            assert len(got) == len(expected)
            for point, (b, vals) in zip(got, sorted(expected.items())):
                ref = {"mean": sum(vals) / len(vals), "min": min(vals),
                       "max": max(vals), "sum": sum(vals)}[agg]
                assert point.value == pytest.approx(ref, rel=1e-12)


# -- retention ----------------------------------------------------------------------

def test_retention_boundary_is_exactly_ninety_days():
    store = TelemetryStore()
    now_tick = 200 * TICKS_PER_DAY
    for days_ago in (91, 90, 89):
        tick = now_tick - days_ago * TICKS_PER_DAY
        store.append(soil_reading(tick, device_id=0x30000001 + days_ago))
    purged = store.enforce_retention(DEFAULT_EPOCH + now_tick * TICK_STEP)
    assert purged == 4  # one reading = 4 channel points
    remaining_devices = {k.device_id for k in store.keys() if store.point_count(k)}
    assert 0x30000001 + 91 not in remaining_devices
    assert 0x30000001 + 90 in remaining_devices  # boundary point is retained
    assert 0x30000001 + 89 in remaining_devices


def test_retention_is_idempotent_and_safe_on_empty_store():
    store = TelemetryStore()
    now = DEFAULT_EPOCH + timedelta(days=100)
    assert store.enforce_retention(now) == 0
    store.append(soil_reading(0))
    assert store.enforce_retention(now) == 4
    assert store.enforce_retention(now) == 0


def test_min_timestamp_after_retention():
    store = TelemetryStore()
    for day in range(0, 120, 7):
        store.append(soil_reading(day * TICKS_PER_DAY))
    now = DEFAULT_EPOCH + timedelta(days=119)
    store.enforce_retention(now)
    cutoff = now - timedelta(days=RETENTION_DAYS)
    for key in store.keys():
        points = store.query_range(key, DEFAULT_EPOCH, now)
        assert all(p.t >= cutoff for p in points)


# -- flags and append-only ---------------------------------------------------------------

def test_mark_suspect_keeps_values():
    store = TelemetryStore()
    for tick in range(6):
        store.append(soil_reading(tick, salinity=0.4 + tick * 0.01))
    key = salinity_key()
    before = [p.value for p in store.query_range(key, DEFAULT_EPOCH, DEFAULT_EPOCH + 6 * TICK_STEP)]
    n = store.mark_suspect(key, DEFAULT_EPOCH + 2 * TICK_STEP, DEFAULT_EPOCH + 4 * TICK_STEP)
    assert n == 3
    after = store.query_range(key, DEFAULT_EPOCH, DEFAULT_EPOCH + 6 * TICK_STEP)
    assert [p.value for p in after] == before
    assert [p.flag for p in after] == [FLAG_OK, FLAG_OK, FLAG_SUSPECT, FLAG_SUSPECT,
                                       FLAG_SUSPECT, FLAG_OK]


def test_appends_never_mutate_existing_points():
    store = TelemetryStore()
    store.append(soil_reading(0, salinity=0.4))
    first = store.query_range(salinity_key(), DEFAULT_EPOCH, DEFAULT_EPOCH)[0]
    for tick in range(1, 50):
        store.append(soil_reading(tick, salinity=0.6))
    again = store.query_range(salinity_key(), DEFAULT_EPOCH, DEFAULT_EPOCH)[0]
    assert again == first


# -- snapshots -----------------------------------------------------------------------------

def test_snapshot_round_trip_bit_exact(tmp_path):
    store = TelemetryStore()
    rng = random.Random(13)
    for tick in range(100):
        store.append(soil_reading(tick, salinity=rng.uniform(0.0, 3.0)))
    store.mark_suspect(salinity_key(), DEFAULT_EPOCH + 10 * TICK_STEP,
                       DEFAULT_EPOCH + 20 * TICK_STEP)
    store.export_snapshot(tmp_path)
    restored = TelemetryStore()
    assert restored.import_snapshot(tmp_path) == store.total_points()
    assert restored.digest() == store.digest()
    # and a re-export produces byte-identical files
    second = tmp_path / "again"
    restored.export_snapshot(second)
    for f in sorted(tmp_path.glob("*.series")):
        assert (second / f.name).read_text() == f.read_text()
