"""Scenario configuration: device roster, zones, faults, signal and link parameters.

A scenario file pins everything a run needs for bit-exact reproducibility:
seed, topology, generator constants, fault schedule, link model, raster
settings, and alert rule thresholds.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from enum import Enum
from typing import Optional

from .alerts import AlertRuleConfig
from .errors import ValidationFailed
from .model import (
    DEFAULT_EPOCH,
    GeoPoint,
    SensorDevice,
    SensorKind,
    SPECIES_REGISTRY,
    SPECIES_BY_CODE,
    TreeAsset,
    Zone,
    ZoneSource,
    validate_tree_asset,
)

SCENARIO_SCHEMA = "canopy/scenario/v1"


class FaultKind(str, Enum):
    RAIN_GAUGE_OBSTRUCTED = "rain-gauge-obstructed"
    SOLAR_SHADED = "solar-shaded"
    SALINITY_SPIKE = "salinity-spike"
    TILT_EVENT = "tilt-event"
    DATA_GAP = "data-gap"


@dataclass(frozen=True, slots=True)
class FaultSpec:
    """Scripted sensor incident active on [start_tick, start_tick + duration_ticks)."""

    kind: FaultKind
    target_device: int
    start_tick: int
    duration_ticks: int
    magnitude: float = 0.0

    def __post_init__(self):
        v = []
        if self.start_tick < 0:
            v.append("start_tick must be >= 0")
        if self.duration_ticks < 1:
            v.append("duration_ticks must be >= 1")
        if v:
            raise ValidationFailed(v)

    def active_at(self, tick: int) -> bool:
        return self.start_tick <= tick < self.start_tick + self.duration_ticks


@dataclass(frozen=True, slots=True)
class GatewaySpec:
    gateway_id: str
    location: GeoPoint
    range_m: float = 4000.0
    floor_loss: float = 0.01
    clock_skew_ms: int = 0


@dataclass(frozen=True, slots=True)
class LinkParams:
    bitrate_bps: int = 5470
    duty_budget_ms_per_hour: int = 36_000


@dataclass(frozen=True, slots=True)
class GeneratorParams:
    """Synthetic signal constants; every waveform is diurnal + seasonal + bounded noise."""

    temp_base_c: float = 12.0
    temp_seasonal_amp_c: float = 6.0
    temp_diurnal_amp_c: float = 5.0
    temp_noise_c: float = 0.8
    rh_base_pct: float = 70.0
    rh_diurnal_amp_pct: float = 15.0
    rh_noise_pct: float = 5.0
    wind_mean_ms: float = 2.5
    wind_noise_ms: float = 1.5
    storm_start_prob: float = 0.012
    storm_continue_prob: float = 0.875
    storm_intensity_mm: tuple[float, float] = (0.5, 3.0)
    solar_max_wm2: float = 800.0
    overcast_factor_range: tuple[float, float] = (0.55, 1.0)
    storm_solar_factor: float = 0.25
    co2_base_ppm: float = 420.0
    co2_diurnal_ppm: float = 40.0
    co2_noise_ppm: float = 8.0
    pm10_base: float = 18.0
    pm10_noise: float = 6.0
    soil_moisture_init_pct: float = 30.0
    salinity_baseline_dsm: tuple[float, float] = (0.3, 0.6)
    salinity_noise_dsm: float = 0.03
    sap_max_lh: float = 2.0
    sap_coef_range: tuple[float, float] = (0.8, 1.2)
    sap_noise: float = 0.10
    growth_per_tick_um: float = 0.5
    spectral_base_range: tuple[float, float] = (0.35, 0.65)
    spectral_noise: float = 0.02
    tilt_base_range_deg: tuple[float, float] = (0.5, 1.5)
    tilt_noise_deg: float = 0.08
    battery_init_pct: float = 92.0
    battery_drain_pct_per_day: float = 3.0
    battery_recharge_pct_per_tick_max: float = 0.5


@dataclass(frozen=True, slots=True)
class ZoneDecline:
    """Vegetation-stress injection for synthetic imagery over one zone."""

    zone_id: str
    start_tick: int
    ndvi_per_day: float


@dataclass(frozen=True, slots=True)
class RasterParams:
    width: int = 64
    height: int = 64
    cell_size_m: float = 25.0
    origin: GeoPoint = GeoPoint(41.5540, 14.6560)
    interval_ticks: int = 240
    cloud_fraction_range: tuple[float, float] = (0.05, 0.35)
    ndvi_base: float = 0.55
    declines: tuple[ZoneDecline, ...] = ()


@dataclass
class Scenario:
    seed: int
    epoch_start: datetime = DEFAULT_EPOCH
    zones: list[Zone] = field(default_factory=list)
    trees: list[TreeAsset] = field(default_factory=list)
    devices: list[SensorDevice] = field(default_factory=list)
    gateways: list[GatewaySpec] = field(default_factory=list)
    faults: list[FaultSpec] = field(default_factory=list)
    generator: GeneratorParams = field(default_factory=GeneratorParams)
    link: LinkParams = field(default_factory=LinkParams)
    raster: RasterParams = field(default_factory=RasterParams)
    rules: AlertRuleConfig = field(default_factory=AlertRuleConfig)

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        violations: list[str] = []
        zone_map = {z.zone_id: z for z in self.zones}
        if len(zone_map) != len(self.zones):
            violations.append("duplicate zone ids")
        seen_trees: set[str] = set()
        for tree in self.trees:
            try:
                validate_tree_asset(tree, SPECIES_BY_CODE, zone_map, existing_ids=seen_trees)
            except ValidationFailed as exc:
                violations.extend(exc.violations)
            seen_trees.add(tree.tree_id)
        device_ids = [d.device_id for d in self.devices]
        if len(set(device_ids)) != len(device_ids):
            violations.append("duplicate device ids")
        tree_ids = {t.tree_id for t in self.trees}
        attached: set[str] = set()
        for dev in self.devices:
            if dev.kind is SensorKind.TREE_TALKER:
                if dev.attached_tree not in tree_ids:
                    violations.append(f"device {dev.device_id}: attached tree {dev.attached_tree!r} not in inventory")
                elif dev.attached_tree in attached:
                    violations.append(f"tree {dev.attached_tree!r} carries more than one tree-talker")
                else:
                    attached.add(dev.attached_tree)
        known = set(device_ids)
        for f in self.faults:
            if f.target_device not in known:
                violations.append(f"fault targets unknown device {f.target_device}")
        if violations:
            raise ValidationFailed(violations, "scenario invalid: " + "; ".join(violations))

    # -- lookups ----------------------------------------------------------

    def device(self, device_id: int) -> SensorDevice:
        for d in self.devices:
            if d.device_id == device_id:
                return d
        raise KeyError(device_id)

    def devices_of_kind(self, kind: SensorKind) -> list[SensorDevice]:
        return [d for d in self.devices if d.kind is kind]

    def zone_of_device(self, device: SensorDevice) -> Optional[Zone]:
        for z in self.zones:
            if z.contains_bbox(device.location):
                return z
        return None

    def tree(self, tree_id: str) -> TreeAsset:
        for t in self.trees:
            if t.tree_id == tree_id:
                return t
        raise KeyError(tree_id)

    def add_fault(self, fault: FaultSpec) -> None:
        if fault.target_device not in {d.device_id for d in self.devices}:
            raise ValidationFailed([f"fault targets unknown device {fault.target_device}"])
        self.faults.append(fault)

    # -- serialization ----------------------------------------------------

    def to_dict(self) -> dict:
        def point(p: GeoPoint) -> list[float]:
            return [p.lat, p.lon]

        return {
            "schema": SCENARIO_SCHEMA,
            "seed": self.seed,
            "epoch_start": self.epoch_start.isoformat(),
            "zones": [
                {"zone_id": z.zone_id, "name": z.name, "source": z.source.value,
                 "boundary": [point(p) for p in z.boundary]}
                for z in self.zones
            ],
            "trees": [
                {"tree_id": t.tree_id, "species_code": t.species_code,
                 "location": point(t.location), "zone_id": t.zone_id,
                 "planted_estimate": t.planted_estimate}
                for t in self.trees
            ],
            "devices": [
                {"device_id": d.device_id, "kind": d.kind.value, "location": point(d.location),
                 "attached_tree": d.attached_tree, "battery_capacity_mwh": d.battery_capacity_mwh}
                for d in self.devices
            ],
            "gateways": [
                {"gateway_id": g.gateway_id, "location": point(g.location), "range_m": g.range_m,
                 "floor_loss": g.floor_loss, "clock_skew_ms": g.clock_skew_ms}
                for g in self.gateways
            ],
            "faults": [
                {"kind": f.kind.value, "target_device": f.target_device, "start_tick": f.start_tick,
                 "duration_ticks": f.duration_ticks, "magnitude": f.magnitude}
                for f in self.faults
            ],
            "generator": asdict(self.generator),
            "link": asdict(self.link),
            "raster": {
                "width": self.raster.width, "height": self.raster.height,
                "cell_size_m": self.raster.cell_size_m, "origin": point(self.raster.origin),
                "interval_ticks": self.raster.interval_ticks,
                "cloud_fraction_range": list(self.raster.cloud_fraction_range),
                "ndvi_base": self.raster.ndvi_base,
                "declines": [asdict(d) for d in self.raster.declines],
            },
            "rules": self.rules.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        if data.get("schema") != SCENARIO_SCHEMA:
            raise ValidationFailed([f"unsupported scenario schema: {data.get('schema')!r}"])

        def point(xs) -> GeoPoint:
            return GeoPoint(float(xs[0]), float(xs[1]))

        def pair(xs) -> tuple[float, float]:
            return (float(xs[0]), float(xs[1]))

        gen_raw = dict(data.get("generator", {}))
        for key in ("storm_intensity_mm", "overcast_factor_range", "salinity_baseline_dsm",
                    "sap_coef_range", "spectral_base_range", "tilt_base_range_deg"):
            if key in gen_raw:
                gen_raw[key] = pair(gen_raw[key])
        raster_raw = data.get("raster", {})
        return cls(
            seed=int(data["seed"]),
            epoch_start=datetime.fromisoformat(data["epoch_start"]).astimezone(timezone.utc),
            zones=[
                Zone(z["zone_id"], z["name"], tuple(point(p) for p in z["boundary"]),
                     ZoneSource(z.get("source", "drawn")))
                for z in data.get("zones", [])
            ],
            trees=[
                TreeAsset(t["tree_id"], t["species_code"], point(t["location"]), t["zone_id"],
                          t.get("planted_estimate"))
                for t in data.get("trees", [])
            ],
            devices=[
                SensorDevice(int(d["device_id"]), SensorKind(d["kind"]), point(d["location"]),
                             d.get("attached_tree"), float(d.get("battery_capacity_mwh", 10_000.0)))
                for d in data.get("devices", [])
            ],
            gateways=[
                GatewaySpec(g["gateway_id"], point(g["location"]), float(g.get("range_m", 4000.0)),
                            float(g.get("floor_loss", 0.01)), int(g.get("clock_skew_ms", 0)))
                for g in data.get("gateways", [])
            ],
            faults=[
                FaultSpec(FaultKind(f["kind"]), int(f["target_device"]), int(f["start_tick"]),
                          int(f["duration_ticks"]), float(f.get("magnitude", 0.0)))
                for f in data.get("faults", [])
            ],
            generator=GeneratorParams(**gen_raw),
            link=LinkParams(**data.get("link", {})),
            raster=RasterParams(
                width=int(raster_raw.get("width", 64)),
                height=int(raster_raw.get("height", 64)),
                cell_size_m=float(raster_raw.get("cell_size_m", 25.0)),
                origin=point(raster_raw.get("origin", [41.5540, 14.6560])),
                interval_ticks=int(raster_raw.get("interval_ticks", 240)),
                cloud_fraction_range=pair(raster_raw.get("cloud_fraction_range", [0.05, 0.35])),
                ndvi_base=float(raster_raw.get("ndvi_base", 0.55)),
                declines=tuple(
                    ZoneDecline(d["zone_id"], int(d["start_tick"]), float(d["ndvi_per_day"]))
                    for d in raster_raw.get("declines", [])
                ),
            ),
            rules=AlertRuleConfig.from_dict(data.get("rules", {})),
        )

    @classmethod
    def from_json(cls, text: str) -> "Scenario":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValidationFailed([f"scenario file is not valid JSON: {exc}"]) from exc
        return cls.from_dict(data)


# -- default scenario -------------------------------------------------------

# Five monitored areas laid out near 41.56 N, 14.66 E. Each is a small plot a
# few hundred meters across; weather stations sit at zone centers so every
# station has at least two neighbors within 2 km.
_ZONE_CENTERS = {
    "villa-park": (41.5560, 14.6590),
    "station-avenue": (41.5600, 14.6660),
    "castle-hill": (41.5640, 14.6600),
    "river-walk": (41.5585, 14.6720),
    "campus-green": (41.5625, 14.6685),
}

_ZONE_NAMES = {
    "villa-park": "Villa Park",
    "station-avenue": "Station Avenue",
    "castle-hill": "Castle Hill",
    "river-walk": "River Walk",
    "campus-green": "Campus Green",
}

WEATHER_ID_BASE = 0x10000000
AIR_ID_BASE = 0x20000000
SOIL_ID_BASE = 0x30000000
TREE_TALKER_ID_BASE = 0x40000000


def _rect(center: tuple[float, float], dlat: float = 0.0011, dlon: float = 0.0015) -> tuple[GeoPoint, ...]:
    lat, lon = center
    return (
        GeoPoint(lat - dlat, lon - dlon),
        GeoPoint(lat - dlat, lon + dlon),
        GeoPoint(lat + dlat, lon + dlon),
        GeoPoint(lat + dlat, lon - dlon),
    )


def _pentagon(center: tuple[float, float], dlat: float = 0.0012, dlon: float = 0.0016) -> tuple[GeoPoint, ...]:
    lat, lon = center
    return (
        GeoPoint(lat - dlat, lon - dlon),
        GeoPoint(lat - dlat, lon + dlon),
        GeoPoint(lat + 0.0002, lon + dlon * 1.15),
        GeoPoint(lat + dlat, lon),
        GeoPoint(lat + 0.0002, lon - dlon * 1.15),
    )


def default_zones() -> list[Zone]:
    zones = []
    for i, (zone_id, center) in enumerate(_ZONE_CENTERS.items()):
        boundary = _pentagon(center) if zone_id == "castle-hill" else _rect(center)
        zones.append(Zone(zone_id, _ZONE_NAMES[zone_id], boundary, ZoneSource.DRAWN))
    return zones


def default_trees() -> list[TreeAsset]:
    """20 trees, four per zone, cycling through the species registry."""
    offsets = [(-0.0005, -0.0007), (-0.0005, 0.0007), (0.0005, 0.0007), (0.0005, -0.0007)]
    trees = []
    n = 0
    for zone_id, (clat, clon) in _ZONE_CENTERS.items():
        for dlat, dlon in offsets:
            species = SPECIES_REGISTRY[n % len(SPECIES_REGISTRY)]
            n += 1
            trees.append(TreeAsset(
                tree_id=f"CB-{n:04d}",
                species_code=species.code,
                location=GeoPoint(clat + dlat, clon + dlon),
                zone_id=zone_id,
                planted_estimate=1930 + (n * 7) % 60,
            ))
    return trees


def default_devices(trees: list[TreeAsset]) -> list[SensorDevice]:
    devices: list[SensorDevice] = []
    centers = list(_ZONE_CENTERS.values())
    for i, (clat, clon) in enumerate(centers, start=1):
        devices.append(SensorDevice(WEATHER_ID_BASE + i, SensorKind.WEATHER_STATION, GeoPoint(clat, clon)))
    for i, (clat, clon) in enumerate(centers, start=1):
        devices.append(SensorDevice(AIR_ID_BASE + i, SensorKind.AIR_QUALITY, GeoPoint(clat + 0.0004, clon - 0.0005)))
    soil_n = 0
    for clat, clon in centers:
        for dlat, dlon in ((-0.0003, 0.0002), (0.0003, -0.0002)):
            soil_n += 1
            devices.append(SensorDevice(SOIL_ID_BASE + soil_n, SensorKind.SOIL_PROBE, GeoPoint(clat + dlat, clon + dlon)))
    for i, tree in enumerate(trees, start=1):
        devices.append(SensorDevice(TREE_TALKER_ID_BASE + i, SensorKind.TREE_TALKER, tree.location,
                                    attached_tree=tree.tree_id))
    return devices


def default_gateways() -> list[GatewaySpec]:
    return [
        GatewaySpec("gw-north", GeoPoint(41.5650, 14.6640), range_m=4000.0, floor_loss=0.01, clock_skew_ms=3),
        GatewaySpec("gw-south", GeoPoint(41.5550, 14.6650), range_m=4000.0, floor_loss=0.01, clock_skew_ms=-2),
        GatewaySpec("gw-east", GeoPoint(41.5605, 14.6730), range_m=4000.0, floor_loss=0.01, clock_skew_ms=5),
    ]


def four_incident_faults() -> list[FaultSpec]:
    """One scripted incident of each field-failure class, timed for a 90-day run.

    All four stay active through the final tick so each leaves one open alert.
    """
    return [
        FaultSpec(FaultKind.SALINITY_SPIKE, SOIL_ID_BASE + 1, start_tick=2880, duration_ticks=1440, magnitude=1.0),
        FaultSpec(FaultKind.RAIN_GAUGE_OBSTRUCTED, WEATHER_ID_BASE + 2, start_tick=3600, duration_ticks=720),
        FaultSpec(FaultKind.SOLAR_SHADED, TREE_TALKER_ID_BASE + 3, start_tick=3360, duration_ticks=960, magnitude=0.9),
        FaultSpec(FaultKind.TILT_EVENT, TREE_TALKER_ID_BASE + 7, start_tick=4176, duration_ticks=144, magnitude=3.5),
    ]


def default_scenario(seed: int = 20240301) -> Scenario:
    zones = default_zones()
    trees = default_trees()
    devices = default_devices(trees)
    faults = four_incident_faults() + [
        FaultSpec(FaultKind.DATA_GAP, AIR_ID_BASE + 4, start_tick=1440, duration_ticks=4),
    ]

    # Stress imagery over the zones whose devices take the salinity and tilt hits.
    zone_map = {z.zone_id: z for z in zones}
    tree_map = {t.tree_id: t for t in trees}
    device_map = {d.device_id: d for d in devices}
    declines = []
    for f in faults:
        if f.kind not in (FaultKind.SALINITY_SPIKE, FaultKind.TILT_EVENT):
            continue
        dev = device_map[f.target_device]
        zone_id = tree_map[dev.attached_tree].zone_id if dev.attached_tree else None
        if zone_id is None:
            for z in zones:
                if z.contains_bbox(dev.location):
                    zone_id = z.zone_id
                    break
        if zone_id in zone_map:
            declines.append(ZoneDecline(zone_id, f.start_tick, ndvi_per_day=0.004))

    return Scenario(
        seed=seed,
        zones=zones,
        trees=trees,
        devices=devices,
        gateways=default_gateways(),
        faults=faults,
        raster=RasterParams(declines=tuple(declines)),
    )
