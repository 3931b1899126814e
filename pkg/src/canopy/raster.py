"""Vegetation-index rasters: synthetic snapshots on a 5-day cadence, NDVI,
color bucketing, zonal statistics, and zone-file interchange (GeoJSON subset).

Grids are row-major with row 0 at the southern edge; `origin` is the
south-west corner and cell centers sit half a cell in from each edge.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from datetime import datetime
from typing import Optional, Sequence

import numpy as np
import shapely
from shapely.geometry import Polygon as ShapelyPolygon

from . import geo
from .errors import CanopyError, NotFound, ValidationFailed
from .model import GeoPoint, TICKS_PER_DAY, Zone, ZoneSource
from .scenario import RasterParams, Scenario

SNAPSHOT_INTERVAL_TICKS = 240  # 5 days of 30-minute ticks

BUCKET_BARE = "bare"
BUCKET_SPARSE = "sparse"
BUCKET_MODERATE = "moderate"
BUCKET_DENSE = "dense"
BUCKET_MASKED = "masked"

BUCKET_THRESHOLDS = ((0.1, BUCKET_BARE), (0.3, BUCKET_SPARSE), (0.6, BUCKET_MODERATE))


class ZoneOutsideRaster(CanopyError):
    code = "zone-outside-raster"


class ZoneFileError(CanopyError):
    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


@dataclass
class RasterSnapshot:
    """One acquisition: near-infrared and red reflectance plus a cloud mask."""

    snapshot_id: str
    acquired_at: datetime
    acquired_tick: int
    nir: np.ndarray        # (H, W) reflectance [0, 1]
    red: np.ndarray        # (H, W) reflectance [0, 1]
    cloud_mask: np.ndarray # (H, W) bool, True = obscured
    cell_size_m: float
    origin: GeoPoint

    def __post_init__(self):
        shape = self.nir.shape
        if len(shape) != 2 or shape[0] < 1 or shape[1] < 1:
            raise ValidationFailed(["raster must be at least 1x1"])
        if self.red.shape != shape or self.cloud_mask.shape != shape:
            raise ValidationFailed(["band and mask shapes must match"])
        for name, band in (("nir", self.nir), ("red", self.red)):
            if not np.all((band >= 0.0) & (band <= 1.0)):
                raise ValidationFailed([f"{name} reflectance outside [0, 1]"])

    @property
    def height(self) -> int:
        return self.nir.shape[0]

    @property
    def width(self) -> int:
        return self.nir.shape[1]


@dataclass
class NdviGrid:
    """Per-cell NDVI with a validity mask; carries grid geometry for zonal queries."""

    snapshot_id: str
    acquired_at: datetime
    values: np.ndarray  # (H, W) float, NaN where masked
    mask: np.ndarray    # (H, W) bool, True = masked
    cell_size_m: float
    origin: GeoPoint

    @property
    def masked_fraction(self) -> float:
        return float(self.mask.mean())


def compute_ndvi(snapshot: RasterSnapshot) -> NdviGrid:
    """(nir - red) / (nir + red) per cell; clouded or zero-sum cells are masked."""
    nir = snapshot.nir.astype(float)
    red = snapshot.red.astype(float)
    total = nir + red
    mask = snapshot.cloud_mask | (total == 0.0)
    values = np.full(nir.shape, np.nan)
    np.divide(nir - red, total, out=values, where=~mask)
    return NdviGrid(snapshot.snapshot_id, snapshot.acquired_at, values, mask,
                    snapshot.cell_size_m, snapshot.origin)


def color_bucket(ndvi: Optional[float]) -> str:
    """Map one NDVI value onto the display scale; total over [-1, 1] plus masked."""
    if ndvi is None or (isinstance(ndvi, float) and math.isnan(ndvi)):
        return BUCKET_MASKED
    for upper, bucket in BUCKET_THRESHOLDS:
        if ndvi < upper:
            return bucket
    return BUCKET_DENSE


def bucket_counts(grid: NdviGrid) -> dict[str, int]:
    counts = {BUCKET_BARE: 0, BUCKET_SPARSE: 0, BUCKET_MODERATE: 0,
              BUCKET_DENSE: 0, BUCKET_MASKED: int(grid.mask.sum())}
    vals = grid.values[~grid.mask]
    counts[BUCKET_BARE] += int((vals < 0.1).sum())
    counts[BUCKET_SPARSE] += int(((vals >= 0.1) & (vals < 0.3)).sum())
    counts[BUCKET_MODERATE] += int(((vals >= 0.3) & (vals < 0.6)).sum())
    counts[BUCKET_DENSE] += int((vals >= 0.6).sum())
    return counts


# -- grid geometry ------------------------------------------------------------


def cell_center_lonlat(grid: NdviGrid) -> tuple[np.ndarray, np.ndarray]:
    """(lon, lat) arrays of every cell center, shaped (H, W)."""
    k = math.pi / 180.0 * geo.EARTH_RADIUS_M
    lat_per_m = 1.0 / k
    lon_per_m = 1.0 / (k * math.cos(math.radians(grid.origin.lat)))
    rows = (np.arange(grid.values.shape[0]) + 0.5) * grid.cell_size_m
    cols = (np.arange(grid.values.shape[1]) + 0.5) * grid.cell_size_m
    lat = grid.origin.lat + rows * lat_per_m
    lon = grid.origin.lon + cols * lon_per_m
    lon_grid, lat_grid = np.meshgrid(lon, lat)
    return lon_grid, lat_grid


@dataclass(frozen=True, slots=True)
class ZonalStats:
    zone_id: str
    snapshot_id: str
    cell_count: int
    masked_fraction: float
    mean: Optional[float]
    min: Optional[float]
    max: Optional[float]

    def to_dict(self) -> dict:
        return {"zone_id": self.zone_id, "snapshot_id": self.snapshot_id,
                "cell_count": self.cell_count, "masked_fraction": self.masked_fraction,
                "mean": self.mean, "min": self.min, "max": self.max}


def zonal_stats(grid: NdviGrid, zone: Zone) -> ZonalStats:
    """Statistics over unmasked cells whose centers fall inside the zone polygon.

    masked_fraction counts over every in-zone cell; with nothing unmasked the
    mean/min/max are None. Raises ZoneOutsideRaster when no center is inside.
    """
    lon, lat = cell_center_lonlat(grid)
    poly = ShapelyPolygon([(p.lon, p.lat) for p in zone.boundary])
    inside = shapely.contains_xy(poly, lon.ravel(), lat.ravel()).reshape(lon.shape)
    n_inside = int(inside.sum())
    if n_inside == 0:
        raise ZoneOutsideRaster(f"zone {zone.zone_id!r} covers no cell center of {grid.snapshot_id}")
    in_masked = grid.mask & inside
    valid = inside & ~grid.mask
    vals = grid.values[valid]
    if vals.size:
        mean, vmin, vmax = float(vals.mean()), float(vals.min()), float(vals.max())
    else:
        mean = vmin = vmax = None
    return ZonalStats(zone.zone_id, grid.snapshot_id, n_inside,
                      float(in_masked.sum()) / n_inside, mean, vmin, vmax)


# -- zone file interchange (GeoJSON polygon subset) ------------------------------


def import_zone_file(data: bytes | str) -> list[Zone]:
    """Parse a FeatureCollection of named Polygons into validated zones.

    Raises ZoneFileError with code parse-error, empty-file, or invalid-geometry.
    """
    text = data.decode("utf-8", errors="replace") if isinstance(data, bytes) else data
    if not text.strip():
        raise ZoneFileError("empty-file", "zone file is empty")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ZoneFileError("parse-error", f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("type") != "FeatureCollection":
        raise ZoneFileError("parse-error", "expected a GeoJSON FeatureCollection")
    features = doc.get("features")
    if not isinstance(features, list):
        raise ZoneFileError("parse-error", "missing features list")
    if not features:
        raise ZoneFileError("empty-file", "feature list is empty")
    zones: list[Zone] = []
    seen_ids: set[str] = set()
    for i, feat in enumerate(features):
        geom = feat.get("geometry") or {}
        if geom.get("type") != "Polygon":
            raise ZoneFileError("parse-error", f"feature {i}: only Polygon geometry is supported")
        rings = geom.get("coordinates")
        if not rings or not isinstance(rings, list):
            raise ZoneFileError("parse-error", f"feature {i}: missing polygon coordinates")
        ring = rings[0]
        if len(ring) >= 2 and ring[0] == ring[-1]:
            ring = ring[:-1]  # drop GeoJSON's repeated closing vertex
        props = feat.get("properties") or {}
        name = props.get("name")
        if not name:
            raise ZoneFileError("parse-error", f"feature {i}: missing name property")
        zone_id = props.get("zone_id") or name.lower().replace(" ", "-")
        if zone_id in seen_ids:
            raise ZoneFileError("parse-error", f"duplicate zone id {zone_id!r}")
        seen_ids.add(zone_id)
        try:
            boundary = tuple(GeoPoint(float(latlon[1]), float(latlon[0])) for latlon in ring)
            zones.append(Zone(zone_id, name, boundary, ZoneSource.IMPORTED))
        except (ValidationFailed, TypeError, IndexError, ValueError) as exc:
            raise ZoneFileError("invalid-geometry", f"feature {i} ({name!r}): {exc}") from exc
    return zones


def export_zone_file(zones: Sequence[Zone]) -> str:
    features = []
    for z in zones:
        ring = [[p.lon, p.lat] for p in z.boundary]
        ring.append(ring[0])
        features.append({
            "type": "Feature",
            "properties": {"name": z.name, "zone_id": z.zone_id, "source": z.source.value},
            "geometry": {"type": "Polygon", "coordinates": [ring]},
        })
    return json.dumps({"type": "FeatureCollection", "features": features}, indent=2) + "\n"


# -- synthetic acquisition -------------------------------------------------------


def snapshot_due(tick: int, interval_ticks: int = SNAPSHOT_INTERVAL_TICKS) -> bool:
    return tick > 0 and tick % interval_ticks == 0


def generate_snapshot(scenario: Scenario, tick: int, epoch_time: datetime) -> RasterSnapshot:
    """Deterministic synthetic acquisition; stressed zones decay over time."""
    p = scenario.raster
    rng = random.Random(f"{scenario.seed}/raster/{tick}")
    h, w = p.height, p.width

    cloud_fraction = rng.uniform(*p.cloud_fraction_range)
    cloud = np.array([[rng.random() < cloud_fraction for _ in range(w)] for _ in range(h)])

    # smooth spatial ripple plus per-cell noise around the configured base
    ys, xs = np.mgrid[0:h, 0:w]
    ripple = 0.08 * np.sin(xs / 9.0) * np.cos(ys / 7.0)
    noise = np.array([[rng.uniform(-0.04, 0.04) for _ in range(w)] for _ in range(h)])
    ndvi = p.ndvi_base + ripple + noise

    if p.declines:
        grid_stub = NdviGrid("stub", epoch_time, ndvi, np.zeros_like(cloud), p.cell_size_m, p.origin)
        lon, lat = cell_center_lonlat(grid_stub)
        zones = {z.zone_id: z for z in scenario.zones}
        for decline in p.declines:
            zone = zones.get(decline.zone_id)
            if zone is None or tick < decline.start_tick:
                continue
            days = (tick - decline.start_tick) / TICKS_PER_DAY
            poly = ShapelyPolygon([(pt.lon, pt.lat) for pt in zone.boundary])
            inside = shapely.contains_xy(poly, lon.ravel(), lat.ravel()).reshape(lon.shape)
            ndvi = np.where(inside, ndvi - decline.ndvi_per_day * days, ndvi)

    ndvi = np.clip(ndvi, -0.2, 0.85)
    red = np.array([[rng.uniform(0.05, 0.08) for _ in range(w)] for _ in range(h)])
    nir = red * (1.0 + ndvi) / (1.0 - ndvi)
    nir = np.clip(nir, 0.0, 1.0)

    return RasterSnapshot(
        snapshot_id=f"S-{tick:06d}", acquired_at=epoch_time, acquired_tick=tick,
        nir=nir, red=red, cloud_mask=cloud, cell_size_m=p.cell_size_m, origin=p.origin)


@dataclass
class RasterArchive:
    """Snapshots plus derived NDVI, newest last."""

    snapshots: list[RasterSnapshot] = field(default_factory=list)
    grids: dict[str, NdviGrid] = field(default_factory=dict)

    def add(self, snapshot: RasterSnapshot) -> NdviGrid:
        grid = compute_ndvi(snapshot)
        self.snapshots.append(snapshot)
        self.grids[snapshot.snapshot_id] = grid
        return grid

    def get(self, snapshot_id: str) -> NdviGrid:
        grid = self.grids.get(snapshot_id)
        if grid is None:
            raise NotFound(f"no such snapshot: {snapshot_id}")
        return grid

    def latest(self) -> Optional[NdviGrid]:
        if not self.snapshots:
            return None
        return self.grids[self.snapshots[-1].snapshot_id]


# -- plain-text raster interchange --------------------------------------------------


def save_snapshot_text(snapshot: RasterSnapshot) -> str:
    """Header line then row-major cell lines; clouded cells are written as 'x'."""
    lines = [
        f"canopy/raster/v1 id={snapshot.snapshot_id} tick={snapshot.acquired_tick} "
        f"acquired={snapshot.acquired_at.isoformat()} w={snapshot.width} h={snapshot.height} "
        f"cell_m={snapshot.cell_size_m!r} origin={snapshot.origin.lat!r},{snapshot.origin.lon!r}"
    ]
    for r in range(snapshot.height):
        cells = []
        for c in range(snapshot.width):
            if snapshot.cloud_mask[r, c]:
                cells.append("x")
            else:
                cells.append(f"{float(snapshot.nir[r, c])!r}:{float(snapshot.red[r, c])!r}")
        lines.append(" ".join(cells))
    return "\n".join(lines) + "\n"


def load_snapshot_text(text: str) -> RasterSnapshot:
    lines = text.splitlines()
    if not lines or not lines[0].startswith("canopy/raster/v1"):
        raise CanopyError("unsupported raster interchange header")
    fields_map = dict(part.split("=", 1) for part in lines[0].split()[1:])
    w, h = int(fields_map["w"]), int(fields_map["h"])
    lat_s, lon_s = fields_map["origin"].split(",")
    nir = np.zeros((h, w))
    red = np.zeros((h, w))
    cloud = np.zeros((h, w), dtype=bool)
    if len(lines) - 1 < h:
        raise CanopyError(f"raster body has {len(lines) - 1} rows, expected {h}")
    for r in range(h):
        cells = lines[1 + r].split()
        if len(cells) != w:
            raise CanopyError(f"row {r} has {len(cells)} cells, expected {w}")
        for c, cell in enumerate(cells):
            if cell == "x":
                cloud[r, c] = True
            else:
                nir_s, red_s = cell.split(":")
                nir[r, c], red[r, c] = float(nir_s), float(red_s)
    return RasterSnapshot(
        snapshot_id=fields_map["id"], acquired_at=datetime.fromisoformat(fields_map["acquired"]),
        acquired_tick=int(fields_map["tick"]), nir=nir, red=red, cloud_mask=cloud,
        cell_size_m=float(fields_map["cell_m"]), origin=GeoPoint(float(lat_s), float(lon_s)))
