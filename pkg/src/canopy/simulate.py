"""Deterministic virtual-clock telemetry simulator with scripted fault injection.

Every waveform is an explicit parametric model: diurnal sinusoid plus a
seasonal trend plus bounded uniform noise. Randomness comes from named
streams keyed by (seed, device, channel) so adding a device never perturbs
any existing series, and identical seeds replay identical batches.
"""

from __future__ import annotations

import hashlib
import math
import random
from dataclasses import dataclass, replace
from datetime import datetime
from typing import Optional, Sequence

from .errors import CanopyError
from .model import SimClock, SensorDevice, SensorKind, TICKS_PER_DAY
from .readings import (
    AirQualityReading,
    Reading,
    SoilReading,
    SPECTRAL_BANDS,
    TreeTalkerReading,
    WeatherReading,
    channel_values,
    kind_of,
)
from .scenario import FaultKind, FaultSpec, GeneratorParams, Scenario

MAGNUS_A = 17.62
MAGNUS_B = 243.12


def dew_point_magnus(temp_c: float, rh_pct: float) -> float:
    """Dew point from dry-bulb temperature and relative humidity.

    Uses the Magnus approximation with a = 17.62 and b = 243.12 C.
    Equals temp_c at saturation; undefined for rh <= 0.
    """
    if not (0.0 < rh_pct <= 100.0):
        raise CanopyError(f"relative humidity {rh_pct} outside (0, 100]")
    if not math.isfinite(temp_c):
        raise CanopyError("temperature must be finite")
    gamma = math.log(rh_pct / 100.0) + MAGNUS_A * temp_c / (MAGNUS_B + temp_c)
    return MAGNUS_B * gamma / (MAGNUS_A - gamma)


@dataclass(frozen=True, slots=True)
class WeatherContext:
    """Regional driver shared by every device at one tick."""

    tick: int
    t: datetime
    temp_c: float
    rh_pct: float
    solar_wm2: float
    solar_factor: float  # 0..1 fraction of the clear-sky maximum
    rain_mm: float
    storm: bool


def _hour_of(tick: int) -> float:
    return (tick % TICKS_PER_DAY) / 2.0


def _day_of_year(t: datetime) -> int:
    return t.timetuple().tm_yday


class FieldSimulator:
    """Single-timeline generator: one reading per registered device per tick."""

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.params = scenario.generator
        self.clock = SimClock(epoch_start=scenario.epoch_start)
        self._devices = sorted(scenario.devices, key=lambda d: d.device_id)
        self._streams: dict[tuple[int | str, str], random.Random] = {}
        self._storm_remaining = 0
        self._overcast = 1.0
        self._state: dict[int, dict[str, float]] = {}
        self._spectral_base: dict[int, tuple[float, ...]] = {}
        for dev in self._devices:
            self._init_device_state(dev)

    # -- random streams -------------------------------------------------------

    def _stream(self, owner: int | str, channel: str) -> random.Random:
        key = (owner, channel)
        rng = self._streams.get(key)
        if rng is None:
            rng = self._streams[key] = random.Random(f"{self.scenario.seed}/{owner}/{channel}")
        return rng

    def _noise(self, owner: int | str, channel: str, amp: float) -> float:
        return self._stream(owner, channel).uniform(-amp, amp)

    # -- device state -----------------------------------------------------------

    def _init_device_state(self, dev: SensorDevice) -> None:
        p = self.params
        init = self._stream(dev.device_id, "init")
        state: dict[str, float] = {}
        if dev.kind is SensorKind.SOIL_PROBE:
            state["moisture"] = p.soil_moisture_init_pct + init.uniform(-3.0, 3.0)
            state["soil_temp"] = p.temp_base_c
            state["salinity_base"] = init.uniform(*p.salinity_baseline_dsm)
        elif dev.kind is SensorKind.TREE_TALKER:
            state["soc"] = p.battery_init_pct + init.uniform(-2.0, 2.0)
            state["growth"] = init.uniform(0.0, 50.0)
            state["sap_coef"] = init.uniform(*p.sap_coef_range)
            state["tilt_base"] = init.uniform(*p.tilt_base_range_deg)
            self._spectral_base[dev.device_id] = tuple(
                init.uniform(*p.spectral_base_range) for _ in range(SPECTRAL_BANDS))
        self._state[dev.device_id] = state

    # -- regional weather ---------------------------------------------------------

    def _context(self, tick: int) -> WeatherContext:
        p = self.params
        t = self.clock.at(tick)
        hour = _hour_of(tick)
        doy = _day_of_year(t)
        seasonal = math.sin(2.0 * math.pi * (doy - 110) / 365.0)
        diurnal = math.sin(math.pi * (hour - 6.0) / 12.0)  # peaks mid-afternoon window

        storm_rng = self._stream("regional", "storm")
        storm_draw = storm_rng.random()
        intensity_draw = storm_rng.uniform(*p.storm_intensity_mm)
        if self._storm_remaining > 0:
            self._storm_remaining -= 1
            storm = True
        elif storm_draw < p.storm_start_prob:
            # geometric storm length via the continue probability
            length = 1
            while storm_rng.random() < p.storm_continue_prob:
                length += 1
            self._storm_remaining = length - 1
            storm = True
        else:
            storm = False
        rain_mm = intensity_draw if storm else 0.0

        overcast_rng = self._stream("regional", "overcast")
        if tick % TICKS_PER_DAY == 0:
            self._overcast = overcast_rng.uniform(*p.overcast_factor_range)
        else:
            overcast_rng.random()  # keep the stream tick-aligned

        temp = (p.temp_base_c + p.temp_seasonal_amp_c * seasonal
                + p.temp_diurnal_amp_c * diurnal
                + self._noise("regional", "temp", p.temp_noise_c))
        rh = p.rh_base_pct - p.rh_diurnal_amp_pct * max(0.0, diurnal)
        if storm:
            rh += 18.0
        rh = min(100.0, max(20.0, rh + self._noise("regional", "rh", p.rh_noise_pct)))

        if 6.0 <= hour < 18.0:
            elevation = math.sin(math.pi * (hour - 6.0) / 12.0)
            clear = p.solar_max_wm2 * (1.0 + 0.2 * seasonal) * elevation
            factor = p.storm_solar_factor if storm else self._overcast
            solar = max(0.0, clear * factor)
        else:
            solar = 0.0
        solar_factor = solar / p.solar_max_wm2 if p.solar_max_wm2 > 0 else 0.0

        return WeatherContext(tick=tick, t=t, temp_c=temp, rh_pct=rh, solar_wm2=solar,
                              solar_factor=solar_factor, rain_mm=rain_mm, storm=storm)

    # -- per-kind generators ----------------------------------------------------------

    def generate_reading(self, dev: SensorDevice, ctx: WeatherContext,
                         shading: float = 0.0) -> Reading:
        if dev.kind is SensorKind.WEATHER_STATION:
            return self._weather_reading(dev, ctx)
        if dev.kind is SensorKind.AIR_QUALITY:
            return self._air_reading(dev, ctx)
        if dev.kind is SensorKind.SOIL_PROBE:
            return self._soil_reading(dev, ctx)
        return self._tree_reading(dev, ctx, shading)

    def _weather_reading(self, dev: SensorDevice, ctx: WeatherContext) -> WeatherReading:
        p = self.params
        did = dev.device_id
        temp = ctx.temp_c + self._noise(did, "temp", 0.4)
        rh = min(100.0, max(20.0, ctx.rh_pct + self._noise(did, "rh", 2.0)))
        dew = dew_point_magnus(temp, rh)
        wet = temp - (temp - dew) / 3.0
        rain_factor = self._stream(did, "rain").uniform(0.85, 1.15)  # drawn every tick to keep the stream aligned
        rain = ctx.rain_mm * rain_factor if ctx.rain_mm > 0 else 0.0
        wind = max(0.0, p.wind_mean_ms + (1.2 if ctx.storm else 0.0) + self._noise(did, "wind", p.wind_noise_ms))
        wind_dir = self._stream(did, "wind_dir").uniform(0.0, 360.0) % 360.0
        wetness = 95.0 if (ctx.rain_mm > 0 or rh >= 97.0) else max(0.0, (rh - 55.0) * 1.5)
        wetness = min(100.0, max(0.0, wetness + self._noise(did, "wetness", 3.0)))
        solar = max(0.0, ctx.solar_wm2 * (1.0 + self._noise(did, "solar", 0.03)))
        return WeatherReading(
            device_id=did, t=ctx.t, temp_dry_c=temp, temp_wet_c=wet, dew_point_c=dew,
            rh_pct=rh, wind_speed_ms=wind, wind_dir_deg=wind_dir, rain_mm_30min=rain,
            leaf_wetness_pct=wetness, solar_wm2=solar)

    def _air_reading(self, dev: SensorDevice, ctx: WeatherContext) -> AirQualityReading:
        p = self.params
        did = dev.device_id
        hour = _hour_of(ctx.tick)
        temp = ctx.temp_c + self._noise(did, "temp", 0.5)
        rh = min(100.0, max(20.0, ctx.rh_pct + self._noise(did, "rh", 2.5)))
        traffic = max(0.0, math.sin(math.pi * (hour - 5.0) / 14.0)) if 5.0 <= hour < 19.0 else 0.0
        co2 = max(380.0, p.co2_base_ppm + p.co2_diurnal_ppm * traffic + self._noise(did, "co2", p.co2_noise_ppm))
        washout = 0.55 if ctx.storm else 1.0
        pm10 = max(1.0, (p.pm10_base + 6.0 * traffic) * washout + self._noise(did, "pm", p.pm10_noise))
        r4 = self._stream(did, "pm_split").uniform(0.78, 0.88)
        r25 = self._stream(did, "pm_split").uniform(0.80, 0.90)
        r1 = self._stream(did, "pm_split").uniform(0.60, 0.75)
        pm4 = pm10 * r4
        pm25 = pm4 * r25
        pm1 = pm25 * r1
        return AirQualityReading(device_id=did, t=ctx.t, temp_c=temp, rh_pct=rh, co2_ppm=co2,
                                 pm1=pm1, pm25=pm25, pm4=pm4, pm10=pm10)

    def _soil_reading(self, dev: SensorDevice, ctx: WeatherContext) -> SoilReading:
        p = self.params
        did = dev.device_id
        state = self._state[did]
        infiltration = 0.6 * ctx.rain_mm
        drydown = 0.10 + 0.25 * ctx.solar_factor
        state["moisture"] = min(55.0, max(5.0, state["moisture"] + infiltration - drydown))
        state["soil_temp"] = 0.92 * state["soil_temp"] + 0.08 * ctx.temp_c
        moisture = min(100.0, max(0.0, state["moisture"] + self._noise(did, "moisture", 0.4)))
        salinity = max(0.0, state["salinity_base"] + self._noise(did, "salinity", p.salinity_noise_dsm))
        # wetter soil sits near zero tension; dry soil approaches wilting point
        dryness = (55.0 - state["moisture"]) / 50.0
        potential = min(0.0, -8.0 - 1400.0 * max(0.0, dryness) ** 2 + self._noise(did, "potential", 4.0))
        return SoilReading(device_id=did, t=ctx.t, moisture_vwc_pct=moisture,
                           soil_temp_c=state["soil_temp"], salinity_dsm=salinity,
                           water_potential_kpa=potential)

    def _tree_reading(self, dev: SensorDevice, ctx: WeatherContext, shading: float) -> TreeTalkerReading:
        p = self.params
        did = dev.device_id
        state = self._state[did]

        sap_noise = 1.0 + self._noise(did, "sap", p.sap_noise)
        sap = max(0.0, p.sap_max_lh * state["sap_coef"] * ctx.solar_factor * sap_noise)

        temp_factor = max(0.0, min(1.0, (ctx.temp_c - 4.0) / 16.0))
        growth_inc = max(0.0, p.growth_per_tick_um * temp_factor
                         * (1.0 + self._noise(did, "growth", 0.5)))
        state["growth"] += growth_inc

        base = self._spectral_base[did]
        spectral = tuple(
            min(1.0, max(0.0, b + self._noise(did, f"spectral_{i:02d}", p.spectral_noise)))
            for i, b in enumerate(base))

        tilt = min(90.0, max(0.0, state["tilt_base"] + self._noise(did, "tilt", p.tilt_noise_deg)))

        drain = p.battery_drain_pct_per_day / TICKS_PER_DAY
        recharge = p.battery_recharge_pct_per_tick_max * ctx.solar_factor * (1.0 - shading)
        state["soc"] = min(100.0, max(0.0, state["soc"] - drain + recharge))

        temp = ctx.temp_c + self._noise(did, "temp", 0.5)
        rh = min(100.0, max(20.0, ctx.rh_pct + self._noise(did, "rh", 2.5)))
        return TreeTalkerReading(
            device_id=did, t=ctx.t, sap_flow_lh=sap, radial_growth_um=state["growth"],
            spectral_transmission=spectral, tilt_deg=tilt, air_temp_c=temp, air_rh_pct=rh,
            battery_soc_pct=state["soc"])

    # -- fault machinery ------------------------------------------------------------

    def _active_faults(self, device_id: int, tick: int) -> list[FaultSpec]:
        return [f for f in self.scenario.faults
                if f.target_device == device_id and f.active_at(tick)]

    def add_fault(self, fault: FaultSpec) -> None:
        self.scenario.add_fault(fault)

    # -- the tick loop -----------------------------------------------------------------

    def advance(self, n_ticks: int) -> list[Reading]:
        """Produce readings for n ticks; faults mutate or suppress affected readings."""
        if n_ticks < 0:
            raise CanopyError("cannot advance a negative number of ticks")
        batch: list[Reading] = []
        for _ in range(n_ticks):
            tick = self.clock.tick
            ctx = self._context(tick)
            for dev in self._devices:
                faults = self._active_faults(dev.device_id, tick)
                shading = max((f.magnitude for f in faults if f.kind is FaultKind.SOLAR_SHADED),
                              default=0.0)
                reading = self.generate_reading(dev, ctx, shading=shading)
                reading = apply_fault(reading, faults)
                if reading is not None:
                    batch.append(reading)
            self.clock.advance(1)
        return batch


def apply_fault(reading: Optional[Reading], active_faults: Sequence[FaultSpec]) -> Optional[Reading]:
    """Apply reading-level fault effects; returns None when the reading is suppressed.

    Solar shading acts on the battery recharge term inside the simulator's
    state update, so it passes through here unchanged.
    """
    if reading is None:
        return None
    for fault in active_faults:
        if fault.kind is FaultKind.DATA_GAP:
            return None
        if fault.kind is FaultKind.RAIN_GAUGE_OBSTRUCTED and isinstance(reading, WeatherReading):
            reading = replace(reading, rain_mm_30min=0.0)
        elif fault.kind is FaultKind.SALINITY_SPIKE and isinstance(reading, SoilReading):
            reading = replace(reading, salinity_dsm=reading.salinity_dsm + fault.magnitude)
        elif fault.kind is FaultKind.TILT_EVENT and isinstance(reading, TreeTalkerReading):
            reading = replace(reading, tilt_deg=min(90.0, reading.tilt_deg + fault.magnitude))
    return reading


def batch_digest(batch: Sequence[Reading]) -> str:
    """Canonical sha256 over a reading batch; equal seeds yield equal digests."""
    h = hashlib.sha256()
    for reading in batch:
        kind = kind_of(reading)
        h.update(f"{reading.device_id}|{kind.value}|{reading.t.isoformat()}".encode())
        for channel, value in sorted(channel_values(reading).items()):
            h.update(f"|{channel}={value!r}".encode())
        h.update(b"\n")
    return h.hexdigest()
