import random

import pytest

from canopy.alerts import (
    AlertEngine,
    AlertRule,
    AlertRuleConfig,
    BatteryRuleConfig,
    RainObstructionRuleConfig,
    SalinityRuleConfig,
    SapHealthRuleConfig,
    Severity,
    TiltRuleConfig,
    TransitionKind,
    eval_battery_deficit,
    eval_rain_obstruction,
    eval_salinity,
    eval_sap_health,
    eval_tilt,
)
from canopy.errors import ValidationFailed
from canopy.model import DEFAULT_EPOCH, TICKS_PER_DAY, TICK_STEP, GeoPoint, SensorDevice, SensorKind
from canopy.store import FLAG_SUSPECT, SeriesKey, TelemetryStore

import oracles


# -- configuration ----------------------------------------------------------------

def test_config_defaults_are_valid():
    cfg = AlertRuleConfig()
    assert cfg.salinity.threshold_dsm == 0.8
    assert cfg.rain_obstruction.window_h == 24
    assert cfg.battery.slope_threshold_pct_per_day == -2.0
    assert cfg.tilt.baseline_window_ticks == 336
    assert cfg.sap_health.z_threshold == -2.5


def test_config_rejects_nonsense():
    with pytest.raises(ValidationFailed):
        AlertRuleConfig(salinity=SalinityRuleConfig(sustain_ticks=0))
    with pytest.raises(ValidationFailed):
        AlertRuleConfig(salinity=SalinityRuleConfig(threshold_dsm=float("nan")))
    with pytest.raises(ValidationFailed):
        AlertRuleConfig(battery=BatteryRuleConfig(window_days=1))


def test_config_round_trips_through_dict():
    cfg = AlertRuleConfig(salinity=SalinityRuleConfig(threshold_dsm=1.1, sustain_ticks=5))
    again = AlertRuleConfig.from_dict(cfg.to_dict())
    assert again == cfg


# -- salinity -----------------------------------------------------------------------

def test_constant_in_band_salinity_never_alerts():
    series = [(t, 0.45) for t in range(200)]
    assert eval_salinity(series, SalinityRuleConfig()) == []


def test_salinity_spike_opens_on_third_exceeding_tick():
    cfg = SalinityRuleConfig(threshold_dsm=0.8, sustain_ticks=3)
    series = [(t, 0.4) for t in range(10)]
    series += [(10 + i, 1.5) for i in range(6)]   # exceeds at ticks 10..15
    series += [(16 + i, 0.4) for i in range(10)]
    episodes = eval_salinity(series, cfg)
    assert len(episodes) == 1
    assert episodes[0].open_tick == 12  # third consecutive exceeding tick
    assert episodes[0].close_tick == 18


def test_two_spikes_with_a_compliant_day_between_are_two_episodes():
    cfg = SalinityRuleConfig()
    series = []
    t = 0
    for _ in range(2):
        for _ in range(TICKS_PER_DAY):
            series.append((t, 0.4)); t += 1
        for _ in range(6):
            series.append((t, 1.5)); t += 1
    for _ in range(TICKS_PER_DAY):
        series.append((t, 0.4)); t += 1
    episodes = eval_salinity(series, cfg)
    assert len(episodes) == 2
    assert all(e.close_tick is not None for e in episodes)


def test_missing_data_pauses_without_closing():
    cfg = SalinityRuleConfig(threshold_dsm=0.8, sustain_ticks=3)
    series = [(t, 1.5) for t in range(5)]          # opens at tick 2
    series += [(100 + t, 1.5) for t in range(3)]   # long gap, still anomalous
    episodes = eval_salinity(series, cfg)
    assert len(episodes) == 1
    assert episodes[0].close_tick is None


def test_salinity_episodes_match_linear_scan_oracle_on_random_series():
    rng = random.Random(21)
    for _ in range(200):
        n = rng.randrange(20, 400)
        series = [(t, rng.choice([0.4, 0.5, 1.0, 1.4])) for t in range(n)]
        cfg = SalinityRuleConfig(threshold_dsm=0.8, sustain_ticks=rng.randrange(1, 5))
        got = [(e.open_tick, e.close_tick) for e in eval_salinity(series, cfg)]
        want = oracles.threshold_episodes(series, cfg.threshold_dsm, cfg.sustain_ticks)
        assert got == want


# -- rain obstruction -------------------------------------------------------------------

def _rain_day(values_by_tick):
    return dict(values_by_tick)


def test_obstructed_station_with_two_wet_neighbors_alerts():
    cfg = RainObstructionRuleConfig()
    n = 3 * TICKS_PER_DAY
    station = {t: 0.0 for t in range(n)}
    wet = {t: (4.0 if t % TICKS_PER_DAY in (30, 31) else 0.0) for t in range(n)}
    episodes, diags = eval_rain_obstruction(station.items(), {2: wet.items(), 3: wet.items()}, cfg, station_id=1)
    assert diags == []
    assert len(episodes) == 1
    assert episodes[0].close_tick is None


def test_dry_everywhere_is_not_an_obstruction():
    cfg = RainObstructionRuleConfig()
    n = 3 * TICKS_PER_DAY
    station = {t: 0.0 for t in range(n)}
    dry = {t: 0.0 for t in range(n)}
    episodes, _ = eval_rain_obstruction(station.items(), {2: dry.items(), 3: dry.items()}, cfg, station_id=1)
    assert episodes == []


def test_single_neighbor_is_skipped_with_diagnostic():
    cfg = RainObstructionRuleConfig()
    n = 2 * TICKS_PER_DAY
    station = {t: 0.0 for t in range(n)}
    wet = {t: 5.0 for t in range(n)}
    episodes, diags = eval_rain_obstruction(station.items(), {2: wet.items()}, cfg, station_id=1)
    assert episodes == []
    assert len(diags) == 1
    assert diags[0]["reason"] == "insufficient-neighbors"


def test_obstruction_matches_oracle_on_random_series():
    rng = random.Random(22)
    cfg = RainObstructionRuleConfig()
    for _ in range(50):
        n = rng.randrange(2 * TICKS_PER_DAY, 6 * TICKS_PER_DAY)
        station = {t: rng.choice([0.0, 0.0, 0.0, 1.0]) for t in range(n)}
        neighbors = {nid: {t: rng.choice([0.0, 0.0, 1.0, 3.0]) for t in range(n)}
                     for nid in (2, 3)}
        got, _ = eval_rain_obstruction(station.items(),
                                       {k: v.items() for k, v in neighbors.items()},
                                       cfg, station_id=1)
        want = oracles.rain_obstruction_episodes(station, neighbors)
        assert [(e.open_tick, e.close_tick) for e in got] == want


# -- battery --------------------------------------------------------------------------------

def _soc_series(daily_means):
    out = []
    for day, mean in enumerate(daily_means):
        for k in range(TICKS_PER_DAY):
            out.append((day * TICKS_PER_DAY + k, mean))
    out.append((len(daily_means) * TICKS_PER_DAY, daily_means[-1]))  # finalize the last day
    return out


def test_declining_battery_opens_alert():
    cfg = BatteryRuleConfig()
    series = _soc_series([95 - 3 * d for d in range(8)])
    episodes = eval_battery_deficit(series, cfg)
    assert len(episodes) == 1
    assert episodes[0].evidence["slope_pct_per_day"] == pytest.approx(-3.0, abs=1e-9)


def test_flat_battery_never_alerts():
    episodes = eval_battery_deficit(_soc_series([100.0] * 10), BatteryRuleConfig())
    assert episodes == []


def test_oscillation_with_zero_net_slope_never_alerts():
    # alternating day means with zero trend
    means = [80 + (5 if d % 2 else -5) for d in range(12)]
    episodes = eval_battery_deficit(_soc_series(means), BatteryRuleConfig())
    assert episodes == []


def test_battery_matches_polyfit_oracle_on_random_series():
    rng = random.Random(23)
    cfg = BatteryRuleConfig()
    for _ in range(60):
        days = rng.randrange(9, 25)
        means = [rng.uniform(20.0, 100.0) for _ in range(days)]
        series = _soc_series(means)
        got = [(e.open_tick, e.close_tick) for e in eval_battery_deficit(series, cfg)]
        want = oracles.battery_episodes(series, cfg.slope_threshold_pct_per_day, cfg.window_days)
        assert got == want


# -- tilt -------------------------------------------------------------------------------------

def test_sustained_jump_of_three_and_a_half_degrees_is_a_warning():
    cfg = TiltRuleConfig(delta_deg=2.0, baseline_window_ticks=48, sustain_ticks=3)
    series = [(t, 1.0) for t in range(48)]
    series += [(48 + i, 4.5) for i in range(20)]
    episodes = eval_tilt(series, cfg)
    assert len(episodes) == 1
    # excess 3.5 is below 2 x delta = 4.0, so warning rather than critical
    assert episodes[0].severity is Severity.WARNING
    assert episodes[0].open_tick == 50


def test_bigger_jump_is_critical():
    cfg = TiltRuleConfig(delta_deg=2.0, baseline_window_ticks=48, sustain_ticks=3)
    series = [(t, 1.0) for t in range(48)] + [(48 + i, 6.5) for i in range(10)]
    episodes = eval_tilt(series, cfg)
    assert episodes[0].severity is Severity.CRITICAL


def test_constant_tilt_never_alerts():
    cfg = TiltRuleConfig(baseline_window_ticks=48)
    assert eval_tilt([(t, 1.2) for t in range(400)], cfg) == []


def test_single_tick_spike_is_filtered_by_sustain():
    cfg = TiltRuleConfig(delta_deg=2.0, baseline_window_ticks=48, sustain_ticks=3)
    series = [(t, 1.0) for t in range(48)] + [(48, 9.0)] + [(49 + t, 1.0) for t in range(60)]
    assert eval_tilt(series, cfg) == []


def test_tilt_matches_sorted_slice_oracle_on_random_series():
    rng = random.Random(24)
    for _ in range(40):
        window = rng.choice([24, 48])
        cfg = TiltRuleConfig(delta_deg=2.0, baseline_window_ticks=window, sustain_ticks=3)
        n = rng.randrange(window + 10, window + 300)
        series = []
        level = 1.0
        for t in range(n):
            if rng.random() < 0.02:
                level = rng.choice([1.0, 1.0, 4.0, 6.0])
            series.append((t, level + rng.uniform(-0.05, 0.05)))
        got = [(e.open_tick, e.close_tick) for e in eval_tilt(series, cfg)]
        want = oracles.tilt_episodes(series, baseline_window=window, sustain=3, delta_deg=2.0)
        assert got == want


# -- sap health ------------------------------------------------------------------------------

def _sap_series(day_levels, rng=None):
    """One value per tick; daytime value = level, night = 0."""
    out = []
    for day, level in enumerate(day_levels):
        for k in range(TICKS_PER_DAY):
            tick = day * TICKS_PER_DAY + k
            hour = k / 2.0
            value = level if 9.0 <= hour < 17.0 else 0.0
            if rng is not None:
                value *= 1.0 + rng.uniform(-0.02, 0.02)
            out.append((tick, value))
    out.append((len(day_levels) * TICKS_PER_DAY, 0.0))
    return out


def test_sap_matching_baseline_has_no_alert():
    rng = random.Random(25)
    series = _sap_series([1.0] * 20, rng)
    z, episodes = eval_sap_health(series, SapHealthRuleConfig())
    assert episodes == []
    assert abs(z) < 2.5


def test_sap_collapse_for_two_days_alerts():
    rng = random.Random(26)
    series = _sap_series([1.0] * 16 + [0.2, 0.2, 0.2], rng)
    _, episodes = eval_sap_health(series, SapHealthRuleConfig())
    assert len(episodes) == 1


def test_nighttime_only_data_defers_evaluation():
    series = []
    for day in range(20):
        for k in range(TICKS_PER_DAY):
            hour = k / 2.0
            if hour < 9.0 or hour >= 17.0:
                series.append((day * TICKS_PER_DAY + k, 0.0))
    z, episodes = eval_sap_health(series, SapHealthRuleConfig())
    assert z is None
    assert episodes == []


def test_sap_matches_oracle_on_random_series():
    rng = random.Random(27)
    cfg = SapHealthRuleConfig()
    for _ in range(30):
        days = rng.randrange(16, 30)
        levels = [rng.uniform(0.8, 1.2) for _ in range(days)]
        if rng.random() < 0.6:
            start = rng.randrange(cfg.baseline_days, days)
            for d in range(start, days):
                levels[d] = rng.uniform(0.0, 0.3)
        series = _sap_series(levels, rng)
        got = [(e.open_tick, e.close_tick) for e in eval_sap_health(series, cfg)[1]]
        want = oracles.sap_episodes(series)
        assert got == want


# -- monotone configuration --------------------------------------------------------------------

def test_raising_threshold_never_increases_episode_count_on_bump_series():
    """Random baseline-plus-bumps series: anomalies are unimodal, so a higher
    threshold can only shrink or drop each episode."""
    rng = random.Random(28)
    for _ in range(100):
        n = 400
        series = [[t, 0.3 + rng.uniform(-0.05, 0.05)] for t in range(n)]
        # one bump per 40-tick slot keeps anomalies apart by more than any
        # sustain count, so a higher threshold can only shrink them
        slots = rng.sample(range(n // 40), k=rng.randrange(0, 5))
        for slot in slots:
            center = slot * 40 + 20
            width = rng.randrange(3, 15)
            height = rng.uniform(0.5, 2.0)
            for t in range(max(0, center - width), min(n, center + width)):
                bump = height * (1.0 - abs(t - center) / width)
                series[t][1] = max(series[t][1], 0.3 + bump)
        counts = []
        for threshold in (0.8, 1.0, 1.2, 1.5, 2.0):
            cfg = SalinityRuleConfig(threshold_dsm=threshold, sustain_ticks=3)
            counts.append(len(eval_salinity([tuple(p) for p in series], cfg)))
        assert all(a >= b for a, b in zip(counts, counts[1:]))


# -- live engine ----------------------------------------------------------------------------------

def _engine_fixture():
    store = TelemetryStore()
    devices = [
        SensorDevice(0x30000001, SensorKind.SOIL_PROBE, GeoPoint(41.56, 14.66)),
    ]
    cfg = AlertRuleConfig()
    engine = AlertEngine(store, devices, [], cfg)
    return store, engine


def test_engine_rerun_at_same_tick_is_idempotent():
    store, engine = _engine_fixture()
    from canopy.readings import SoilReading
    for tick in range(10):
        store.append(SoilReading(device_id=0x30000001, t=DEFAULT_EPOCH + tick * TICK_STEP,
                                 moisture_vwc_pct=30.0, soil_temp_c=12.0,
                                 salinity_dsm=1.5, water_potential_kpa=-50.0))
    now = DEFAULT_EPOCH + 9 * TICK_STEP
    first = engine.run_rules(now)
    assert [t.kind for t in first] == [TransitionKind.OPENED]
    assert engine.run_rules(now) == []


def test_engine_marks_obstructed_rain_series_suspect():
    store = TelemetryStore()
    stations = [SensorDevice(0x10000001 + i, SensorKind.WEATHER_STATION,
                             GeoPoint(41.56 + 0.001 * i, 14.66)) for i in range(3)]
    engine = AlertEngine(store, stations, [], AlertRuleConfig())
    from canopy.readings import WeatherReading
    n = 2 * TICKS_PER_DAY
    for tick in range(n):
        for i, dev in enumerate(stations):
            rain = 0.0 if i == 0 else (6.0 if tick % TICKS_PER_DAY == 20 else 0.0)
            store.append(WeatherReading(
                device_id=dev.device_id, t=DEFAULT_EPOCH + tick * TICK_STEP,
                temp_dry_c=15.0, temp_wet_c=12.0, dew_point_c=10.0, rh_pct=70.0,
                wind_speed_ms=1.0, wind_dir_deg=90.0, rain_mm_30min=rain,
                leaf_wetness_pct=10.0, solar_wm2=100.0))
    transitions = engine.run_rules(DEFAULT_EPOCH + (n - 1) * TICK_STEP)
    opened = [t for t in transitions if t.kind is TransitionKind.OPENED]
    assert len(opened) == 1
    assert opened[0].rule is AlertRule.RAIN_GAUGE_OBSTRUCTION
    key = SeriesKey(0x10000001, SensorKind.WEATHER_STATION, "rain_mm_30min")
    flags = [p.flag for p in store.query_range(key, DEFAULT_EPOCH, DEFAULT_EPOCH + n * TICK_STEP)]
    assert FLAG_SUSPECT in flags
