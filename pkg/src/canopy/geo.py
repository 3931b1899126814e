"""Planar and great-circle geometry helpers for city-scale work.

Polygons are sequences of (lat, lon) vertices without a repeated closing
vertex; the edge from the last vertex back to the first is implicit.
"""

from __future__ import annotations

import math
from typing import Iterable, Sequence, Tuple

from shapely.geometry import Polygon as _ShapelyPolygon

from .errors import CanopyError

EARTH_RADIUS_M = 6_371_000.0

LatLon = Tuple[float, float]


class DegeneratePolygon(CanopyError):
    code = "degenerate-polygon"


def haversine_m(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    """Great-circle distance in meters between two WGS84 points."""
    phi1, phi2 = math.radians(lat1), math.radians(lat2)
    dphi = phi2 - phi1
    dlam = math.radians(lon2 - lon1)
    a = math.sin(dphi / 2.0) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlam / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(a)))


def project_local_m(points: Iterable[LatLon], ref_lat: float, ref_lon: float) -> list[tuple[float, float]]:
    """Equirectangular projection to meters about a local reference point."""
    k = math.pi / 180.0 * EARTH_RADIUS_M
    cos_ref = math.cos(math.radians(ref_lat))
    return [((lon - ref_lon) * k * cos_ref, (lat - ref_lat) * k) for lat, lon in points]


def polygon_area_m2(boundary: Sequence[LatLon]) -> float:
    """Planar shoelace area of a lat/lon polygon, in square meters.

    Projects about the vertex centroid before measuring; winding order is
    irrelevant. Raises DegeneratePolygon below 1 m².
    """
    if len(boundary) < 3:
        raise DegeneratePolygon(f"polygon needs >= 3 vertices, got {len(boundary)}")
    ref_lat = sum(p[0] for p in boundary) / len(boundary)
    ref_lon = sum(p[1] for p in boundary) / len(boundary)
    xy = project_local_m(boundary, ref_lat, ref_lon)
    acc = 0.0
    for i, (x1, y1) in enumerate(xy):
        x2, y2 = xy[(i + 1) % len(xy)]
        acc += x1 * y2 - x2 * y1
    area = abs(acc) / 2.0
    if area < 1.0:
        raise DegeneratePolygon(f"polygon area {area:.3g} m² is below 1 m²")
    return area


def polygon_is_simple(boundary: Sequence[LatLon]) -> bool:
    """True when the polygon ring does not self-intersect."""
    if len(boundary) < 3:
        return False
    try:
        poly = _ShapelyPolygon([(lon, lat) for lat, lon in boundary])
    except Exception:
        return False
    return bool(poly.is_valid)


def bounding_box(boundary: Sequence[LatLon]) -> tuple[float, float, float, float]:
    """(min_lat, min_lon, max_lat, max_lon) of a vertex sequence."""
    lats = [p[0] for p in boundary]
    lons = [p[1] for p in boundary]
    return min(lats), min(lons), max(lats), max(lons)


def in_bounding_box(lat: float, lon: float, boundary: Sequence[LatLon]) -> bool:
    min_lat, min_lon, max_lat, max_lon = bounding_box(boundary)
    return min_lat <= lat <= max_lat and min_lon <= lon <= max_lon
