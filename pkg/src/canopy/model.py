"""Domain vocabulary: geography, species, trees, devices, zones, and the clock."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from enum import Enum
from typing import Iterable, Optional, Sequence

from . import geo
from .errors import ValidationFailed

TICK_MINUTES = 30
TICK_STEP = timedelta(minutes=TICK_MINUTES)
TICKS_PER_HOUR = 2
TICKS_PER_DAY = 48

DEFAULT_EPOCH = datetime(2024, 3, 1, 0, 0, tzinfo=timezone.utc)


@dataclass(frozen=True, slots=True)
class GeoPoint:
    """WGS84 coordinate pair in decimal degrees."""

    lat: float
    lon: float

    def __post_init__(self):
        if not (math.isfinite(self.lat) and math.isfinite(self.lon)):
            raise ValidationFailed(["coordinates must be finite"])
        if not (-90.0 <= self.lat <= 90.0 and -180.0 <= self.lon <= 180.0):
            raise ValidationFailed([f"coordinates out of range: ({self.lat}, {self.lon})"])

    def distance_m(self, other: "GeoPoint") -> float:
        return geo.haversine_m(self.lat, self.lon, other.lat, other.lon)


class SpeciesGroup(str, Enum):
    DECIDUOUS_ANGIOSPERM = "deciduous-angiosperm"
    EVERGREEN_GYMNOSPERM = "evergreen-gymnosperm"


class IucnStatus(str, Enum):
    LC = "LC"
    NT = "NT"
    VU = "VU"
    EN = "EN"
    CR = "CR"
    UNKNOWN = "unknown"


@dataclass(frozen=True, slots=True)
class Species:
    code: str
    scientific_name: str
    group: SpeciesGroup
    iucn_status: IucnStatus


SPECIES_REGISTRY_VERSION = 1

# Two entries carry a threatened IUCN status; the remaining six are common
# urban street/park species chosen as illustrative defaults.
SPECIES_REGISTRY: tuple[Species, ...] = (
    Species("AES-HIP", "Aesculus hippocastanum", SpeciesGroup.DECIDUOUS_ANGIOSPERM, IucnStatus.VU),
    Species("QUE-ROB", "Quercus robur", SpeciesGroup.DECIDUOUS_ANGIOSPERM, IucnStatus.LC),
    Species("PLA-ACE", "Platanus x acerifolia", SpeciesGroup.DECIDUOUS_ANGIOSPERM, IucnStatus.LC),
    Species("TIL-COR", "Tilia cordata", SpeciesGroup.DECIDUOUS_ANGIOSPERM, IucnStatus.LC),
    Species("SEQ-SEM", "Sequoia sempervirens", SpeciesGroup.EVERGREEN_GYMNOSPERM, IucnStatus.EN),
    Species("PIN-PIN", "Pinus pinea", SpeciesGroup.EVERGREEN_GYMNOSPERM, IucnStatus.LC),
    Species("CUP-SEM", "Cupressus sempervirens", SpeciesGroup.EVERGREEN_GYMNOSPERM, IucnStatus.LC),
    Species("TAX-BAC", "Taxus baccata", SpeciesGroup.EVERGREEN_GYMNOSPERM, IucnStatus.LC),
)

SPECIES_BY_CODE = {s.code: s for s in SPECIES_REGISTRY}


class ZoneSource(str, Enum):
    IMPORTED = "imported"
    DRAWN = "drawn"


@dataclass(frozen=True, slots=True)
class Zone:
    """Managed green area delimited by a closed, non-self-intersecting polygon."""

    zone_id: str
    name: str
    boundary: tuple[GeoPoint, ...]
    source: ZoneSource = ZoneSource.DRAWN

    def __post_init__(self):
        violations = []
        distinct = {(p.lat, p.lon) for p in self.boundary}
        if len(distinct) < 3:
            violations.append("polygon needs at least 3 distinct vertices")
        ring = [(p.lat, p.lon) for p in self.boundary]
        if not violations and not geo.polygon_is_simple(ring):
            violations.append("polygon is self-intersecting")
        if not violations:
            try:
                geo.polygon_area_m2(ring)
            except geo.DegeneratePolygon as exc:
                violations.append(str(exc))
        if violations:
            raise ValidationFailed(violations, f"zone {self.zone_id!r}: " + "; ".join(violations))

    def area_m2(self) -> float:
        return geo.polygon_area_m2([(p.lat, p.lon) for p in self.boundary])

    def contains_bbox(self, point: GeoPoint) -> bool:
        return geo.in_bounding_box(point.lat, point.lon, [(p.lat, p.lon) for p in self.boundary])


@dataclass(frozen=True, slots=True)
class TreeAsset:
    """Georeferenced, coded, taxonomically classified tree under monitoring."""

    tree_id: str
    species_code: str
    location: GeoPoint
    zone_id: str
    planted_estimate: Optional[int] = None


class SensorKind(str, Enum):
    WEATHER_STATION = "weather-station"
    AIR_QUALITY = "air-quality"
    SOIL_PROBE = "soil-probe"
    TREE_TALKER = "tree-talker"


@dataclass(frozen=True, slots=True)
class SensorDevice:
    """One field device; tree health units must reference the tree they sit on."""

    device_id: int
    kind: SensorKind
    location: GeoPoint
    attached_tree: Optional[str] = None
    battery_capacity_mwh: float = 10_000.0

    def __post_init__(self):
        violations = []
        if not (0 <= self.device_id <= 0xFFFFFFFF):
            violations.append(f"device_id {self.device_id} outside 32-bit unsigned range")
        if self.kind is SensorKind.TREE_TALKER and not self.attached_tree:
            violations.append("tree-talker device requires attached_tree")
        if self.kind is not SensorKind.TREE_TALKER and self.attached_tree:
            violations.append(f"{self.kind.value} device must not reference a tree")
        if violations:
            raise ValidationFailed(violations)


def validate_tree_asset(
    asset: TreeAsset,
    registry: dict[str, Species],
    zones: dict[str, Zone],
    existing_ids: Iterable[str] = (),
) -> TreeAsset:
    """Return the asset unchanged, or raise ValidationFailed listing every violation.

    Violation codes: unknown-species, unknown-zone, location-outside-zone, duplicate-id.
    """
    violations = []
    if asset.tree_id in set(existing_ids):
        violations.append(f"duplicate-id: {asset.tree_id}")
    if asset.species_code not in registry:
        violations.append(f"unknown-species: {asset.species_code}")
    zone = zones.get(asset.zone_id)
    if zone is None:
        violations.append(f"unknown-zone: {asset.zone_id}")
    elif not zone.contains_bbox(asset.location):
        violations.append(f"location-outside-zone: {asset.tree_id} not within bbox of {asset.zone_id}")
    if violations:
        raise ValidationFailed(violations, f"tree {asset.tree_id!r}: " + "; ".join(violations))
    return asset


@dataclass
class SimClock:
    """Virtual clock on a fixed 30-minute grid; time is a pure function of tick."""

    epoch_start: datetime = DEFAULT_EPOCH
    tick: int = 0

    step: timedelta = field(default=TICK_STEP, init=False, repr=False)

    def now(self) -> datetime:
        return self.epoch_start + self.tick * TICK_STEP

    def at(self, tick: int) -> datetime:
        return self.epoch_start + tick * TICK_STEP

    def tick_of(self, t: datetime) -> int:
        """Tick index for a grid-aligned timestamp; raises if off-grid."""
        delta = t - self.epoch_start
        seconds = delta.total_seconds()
        ticks = seconds / TICK_STEP.total_seconds()
        if ticks != int(ticks):
            raise ValidationFailed([f"timestamp {t.isoformat()} is not aligned to the {TICK_MINUTES}-minute grid"])
        return int(ticks)

    def advance(self, n_ticks: int) -> None:
        if n_ticks < 0:
            raise ValidationFailed(["clock cannot move backwards"])
        self.tick += n_ticks


def save_inventory(trees: Sequence[TreeAsset]) -> str:
    """Line-delimited inventory: tree_id,species_code,lat,lon,zone_id per line."""
    lines = [
        f"{t.tree_id},{t.species_code},{t.location.lat!r},{t.location.lon!r},{t.zone_id}"
        for t in trees
    ]
    return "\n".join(lines) + ("\n" if lines else "")


def load_inventory(text: str, registry: dict[str, Species], zones: dict[str, Zone]) -> list[TreeAsset]:
    """Parse and validate an inventory file; rejects the whole file on any violation."""
    trees: list[TreeAsset] = []
    seen: set[str] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 5:
            raise ValidationFailed([f"line {lineno}: expected 5 fields, got {len(parts)}"])
        tree_id, species_code, lat_s, lon_s, zone_id = parts
        try:
            location = GeoPoint(float(lat_s), float(lon_s))
        except ValueError as exc:
            raise ValidationFailed([f"line {lineno}: bad coordinate: {exc}"]) from exc
        asset = TreeAsset(tree_id, species_code, location, zone_id)
        validate_tree_asset(asset, registry, zones, existing_ids=seen)
        seen.add(tree_id)
        trees.append(asset)
    return trees
