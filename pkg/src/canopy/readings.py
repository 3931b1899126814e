"""Per-kind sensor reading records and their channel fan-out."""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from datetime import datetime
from typing import Union

from .errors import ValidationFailed
from .model import SensorKind

SPECTRAL_BANDS = 12

# Comparisons between generated floats tolerate representation noise only.
_EPS = 1e-9


def _require(cond: bool, msg: str, bag: list[str]) -> None:
    if not cond:
        bag.append(msg)


def _finite(*values: float) -> bool:
    return all(isinstance(v, (int, float)) and math.isfinite(v) for v in values)


@dataclass(frozen=True, slots=True)
class WeatherReading:
    device_id: int
    t: datetime
    temp_dry_c: float
    temp_wet_c: float
    dew_point_c: float
    rh_pct: float
    wind_speed_ms: float
    wind_dir_deg: float
    rain_mm_30min: float
    leaf_wetness_pct: float
    solar_wm2: float

    def __post_init__(self):
        v: list[str] = []
        nums = (self.temp_dry_c, self.temp_wet_c, self.dew_point_c, self.rh_pct,
                self.wind_speed_ms, self.wind_dir_deg, self.rain_mm_30min,
                self.leaf_wetness_pct, self.solar_wm2)
        _require(_finite(*nums), "all channels must be finite", v)
        if _finite(*nums):
            _require(self.dew_point_c <= self.temp_dry_c + _EPS, "dew point above dry bulb", v)
            _require(self.temp_wet_c <= self.temp_dry_c + _EPS, "wet bulb above dry bulb", v)
            _require(0.0 <= self.rh_pct <= 100.0, "rh_pct outside [0, 100]", v)
            _require(self.wind_speed_ms >= 0.0, "negative wind speed", v)
            _require(0.0 <= self.wind_dir_deg < 360.0, "wind direction outside [0, 360)", v)
            _require(self.rain_mm_30min >= 0.0, "negative rainfall", v)
            _require(0.0 <= self.leaf_wetness_pct <= 100.0, "leaf wetness outside [0, 100]", v)
            _require(self.solar_wm2 >= 0.0, "negative solar radiation", v)
        if v:
            raise ValidationFailed(v, f"weather reading {self.device_id}: " + "; ".join(v))


@dataclass(frozen=True, slots=True)
class AirQualityReading:
    device_id: int
    t: datetime
    temp_c: float
    rh_pct: float
    co2_ppm: float
    pm1: float
    pm25: float
    pm4: float
    pm10: float

    def __post_init__(self):
        v: list[str] = []
        nums = (self.temp_c, self.rh_pct, self.co2_ppm, self.pm1, self.pm25, self.pm4, self.pm10)
        _require(_finite(*nums), "all channels must be finite", v)
        if _finite(*nums):
            _require(0.0 <= self.rh_pct <= 100.0, "rh_pct outside [0, 100]", v)
            _require(self.co2_ppm >= 0.0, "negative co2", v)
            _require(min(self.pm1, self.pm25, self.pm4, self.pm10) >= 0.0, "negative particulate value", v)
            _require(
                self.pm1 <= self.pm25 + _EPS and self.pm25 <= self.pm4 + _EPS and self.pm4 <= self.pm10 + _EPS,
                "particulate size fractions must be cumulative (pm1 <= pm25 <= pm4 <= pm10)", v)
        if v:
            raise ValidationFailed(v, f"air reading {self.device_id}: " + "; ".join(v))


@dataclass(frozen=True, slots=True)
class SoilReading:
    device_id: int
    t: datetime
    moisture_vwc_pct: float
    soil_temp_c: float
    salinity_dsm: float
    water_potential_kpa: float

    def __post_init__(self):
        v: list[str] = []
        nums = (self.moisture_vwc_pct, self.soil_temp_c, self.salinity_dsm, self.water_potential_kpa)
        _require(_finite(*nums), "all channels must be finite", v)
        if _finite(*nums):
            _require(0.0 <= self.moisture_vwc_pct <= 100.0, "moisture outside [0, 100]", v)
            _require(self.salinity_dsm >= 0.0, "negative salinity", v)
            # tension convention: drier soil is more negative, zero is saturation
            _require(self.water_potential_kpa <= _EPS, "water potential must be non-positive", v)
        if v:
            raise ValidationFailed(v, f"soil reading {self.device_id}: " + "; ".join(v))


@dataclass(frozen=True, slots=True)
class TreeTalkerReading:
    device_id: int
    t: datetime
    sap_flow_lh: float
    radial_growth_um: float
    spectral_transmission: tuple[float, ...]
    tilt_deg: float
    air_temp_c: float
    air_rh_pct: float
    battery_soc_pct: float

    def __post_init__(self):
        v: list[str] = []
        nums = (self.sap_flow_lh, self.radial_growth_um, self.tilt_deg,
                self.air_temp_c, self.air_rh_pct, self.battery_soc_pct)
        _require(_finite(*nums), "all channels must be finite", v)
        _require(len(self.spectral_transmission) == SPECTRAL_BANDS,
                 f"expected {SPECTRAL_BANDS} spectral bands, got {len(self.spectral_transmission)}", v)
        _require(all(_finite(b) and -_EPS <= b <= 1.0 + _EPS for b in self.spectral_transmission),
                 "spectral transmission bands must lie in [0, 1]", v)
        if _finite(*nums):
            _require(self.sap_flow_lh >= 0.0, "negative sap flow", v)
            _require(self.radial_growth_um >= 0.0, "negative cumulative growth", v)
            _require(0.0 <= self.tilt_deg <= 90.0, "tilt outside [0, 90]", v)
            _require(0.0 <= self.air_rh_pct <= 100.0, "rh outside [0, 100]", v)
            _require(0.0 <= self.battery_soc_pct <= 100.0, "battery soc outside [0, 100]", v)
        if v:
            raise ValidationFailed(v, f"tree reading {self.device_id}: " + "; ".join(v))


Reading = Union[WeatherReading, AirQualityReading, SoilReading, TreeTalkerReading]

READING_TYPES: dict[SensorKind, type] = {
    SensorKind.WEATHER_STATION: WeatherReading,
    SensorKind.AIR_QUALITY: AirQualityReading,
    SensorKind.SOIL_PROBE: SoilReading,
    SensorKind.TREE_TALKER: TreeTalkerReading,
}

KIND_OF_READING = {cls: kind for kind, cls in READING_TYPES.items()}

_SPECTRAL_CHANNELS = tuple(f"spectral_{i:02d}" for i in range(SPECTRAL_BANDS))

CHANNELS: dict[SensorKind, tuple[str, ...]] = {
    SensorKind.WEATHER_STATION: (
        "temp_dry_c", "temp_wet_c", "dew_point_c", "rh_pct", "wind_speed_ms",
        "wind_dir_deg", "rain_mm_30min", "leaf_wetness_pct", "solar_wm2"),
    SensorKind.AIR_QUALITY: ("temp_c", "rh_pct", "co2_ppm", "pm1", "pm25", "pm4", "pm10"),
    SensorKind.SOIL_PROBE: ("moisture_vwc_pct", "soil_temp_c", "salinity_dsm", "water_potential_kpa"),
    SensorKind.TREE_TALKER: (
        "sap_flow_lh", "radial_growth_um") + _SPECTRAL_CHANNELS + (
        "tilt_deg", "air_temp_c", "air_rh_pct", "battery_soc_pct"),
}


def kind_of(reading: Reading) -> SensorKind:
    return KIND_OF_READING[type(reading)]


def channel_values(reading: Reading) -> dict[str, float]:
    """Flatten a reading into {channel: value}, expanding spectral bands."""
    out: dict[str, float] = {}
    for f in fields(reading):
        if f.name in ("device_id", "t"):
            continue
        value = getattr(reading, f.name)
        if f.name == "spectral_transmission":
            for i, band in enumerate(value):
                out[_SPECTRAL_CHANNELS[i]] = float(band)
        else:
            out[f.name] = float(value)
    return out


def from_channel_values(kind: SensorKind, device_id: int, t: datetime, values: dict[str, float]) -> Reading:
    """Inverse of channel_values; raises on missing channels."""
    missing = [c for c in CHANNELS[kind] if c not in values]
    if missing:
        raise ValidationFailed([f"missing channels for {kind.value}: {missing}"])
    if kind is SensorKind.TREE_TALKER:
        bands = tuple(values[c] for c in _SPECTRAL_CHANNELS)
        return TreeTalkerReading(
            device_id=device_id, t=t,
            sap_flow_lh=values["sap_flow_lh"],
            radial_growth_um=values["radial_growth_um"],
            spectral_transmission=bands,
            tilt_deg=values["tilt_deg"],
            air_temp_c=values["air_temp_c"],
            air_rh_pct=values["air_rh_pct"],
            battery_soc_pct=values["battery_soc_pct"],
        )
    cls = READING_TYPES[kind]
    kwargs = {c: values[c] for c in CHANNELS[kind]}
    return cls(device_id=device_id, t=t, **kwargs)
