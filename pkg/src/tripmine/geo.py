"""Geodesy helpers: haversine distance, GCJ-02 -> WGS84, regions and grids."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigError, TransformError

EARTH_RADIUS_M = 6371000.0

# Krasovsky 1940 ellipsoid, as used by the GCJ-02 obfuscation.
GCJ_A = 6378245.0
GCJ_EE = 0.00669342162296594323


@dataclass(frozen=True)
class GeoPoint:
    lng: float
    lat: float

    def __post_init__(self):
        if not (-180.0 <= self.lng <= 180.0) or not (-90.0 <= self.lat <= 90.0):
            raise ValueError(f"coordinates out of range: ({self.lng}, {self.lat})")


@dataclass(frozen=True)
class Bounds:
    min_lng: float
    min_lat: float
    max_lng: float
    max_lat: float

    def __post_init__(self):
        if not (self.min_lng < self.max_lng and self.min_lat < self.max_lat):
            raise ConfigError(f"degenerate bounds {self}")

    def contains(self, p: GeoPoint) -> bool:
        return self.min_lng <= p.lng <= self.max_lng and self.min_lat <= p.lat <= self.max_lat

    @property
    def center(self) -> GeoPoint:
        return GeoPoint((self.min_lng + self.max_lng) / 2, (self.min_lat + self.max_lat) / 2)

    def as_list(self):
        return [self.min_lng, self.min_lat, self.max_lng, self.max_lat]


# Approximates the area inside Beijing's 6th ring road.
DEFAULT_BOUNDS = Bounds(116.0, 39.6, 116.8, 40.2)


@dataclass(frozen=True)
class GridSpec:
    bounds: Bounds = DEFAULT_BOUNDS
    n_cols: int = 30
    n_rows: int = 30

    def __post_init__(self):
        if self.n_cols < 1 or self.n_rows < 1:
            raise ConfigError("grid needs at least one row and one column")


@dataclass(frozen=True)
class Region:
    """A bounding box (``kind='box'``) or a simple polygon (``kind='polygon'``).

    ``coords`` is ``(min_lng, min_lat, max_lng, max_lat)`` for a box and a
    sequence of ``(lng, lat)`` vertices for a polygon.  Open rings are closed.
    """

    kind: str
    coords: tuple

    def __post_init__(self):
        if self.kind == "box":
            b = tuple(float(c) for c in self.coords)
            if len(b) != 4:
                raise ConfigError("box region needs 4 numbers")
            Bounds(*b)
            object.__setattr__(self, "coords", b)
        elif self.kind == "polygon":
            ring = [(float(x), float(y)) for x, y in self.coords]
            if len(ring) >= 2 and ring[0] == ring[-1]:
                ring = ring[:-1]
            if len(ring) < 3:
                raise ConfigError("polygon needs at least 3 distinct vertices")
            if _self_intersects(ring):
                raise ConfigError("polygon is self-intersecting")
            object.__setattr__(self, "coords", tuple(ring))
        else:
            raise ConfigError(f"unknown region kind {self.kind!r}")

    @classmethod
    def box(cls, bounds: Bounds = DEFAULT_BOUNDS) -> "Region":
        return cls("box", tuple(bounds.as_list()))

    @property
    def bounds(self) -> Bounds:
        if self.kind == "box":
            return Bounds(*self.coords)
        xs = [v[0] for v in self.coords]
        ys = [v[1] for v in self.coords]
        return Bounds(min(xs), min(ys), max(xs), max(ys))

    def to_json(self):
        if self.kind == "box":
            return {"kind": "box", "coords": list(self.coords)}
        return {"kind": "polygon", "coords": [list(v) for v in self.coords]}


def haversine_distance(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance in meters on a sphere of radius 6,371 km."""
    return float(haversine_m(a.lng, a.lat, b.lng, b.lat))


def haversine_m(lng1, lat1, lng2, lat2):
    """Vectorised haversine; accepts scalars or numpy arrays (degrees)."""
    lng1, lat1, lng2, lat2 = map(np.radians, (lng1, lat1, lng2, lat2))
    h = np.sin((lat2 - lat1) / 2) ** 2 + np.cos(lat1) * np.cos(lat2) * np.sin((lng2 - lng1) / 2) ** 2
    return 2 * EARTH_RADIUS_M * np.arcsin(np.sqrt(np.minimum(h, 1.0)))


def destination_point(p: GeoPoint, bearing_rad: float, distance_m: float) -> GeoPoint:
    """Point reached from ``p`` along a great circle at the given bearing."""
    phi1, lam1 = math.radians(p.lat), math.radians(p.lng)
    delta = distance_m / EARTH_RADIUS_M
    phi2 = math.asin(math.sin(phi1) * math.cos(delta)
                     + math.cos(phi1) * math.sin(delta) * math.cos(bearing_rad))
    lam2 = lam1 + math.atan2(math.sin(bearing_rad) * math.sin(delta) * math.cos(phi1),
                             math.cos(delta) - math.sin(phi1) * math.sin(phi2))
    lng = (math.degrees(lam2) + 540.0) % 360.0 - 180.0
    return GeoPoint(lng, math.degrees(phi2))


# --- GCJ-02 -------------------------------------------------------------

def out_of_china(lng: float, lat: float) -> bool:
    return not (72.004 <= lng <= 137.8347 and 0.8293 <= lat <= 55.8271)


def _transform_lat(x, y):
    ret = -100.0 + 2.0 * x + 3.0 * y + 0.2 * y * y + 0.1 * x * y + 0.2 * math.sqrt(abs(x))
    ret += (20.0 * math.sin(6.0 * x * math.pi) + 20.0 * math.sin(2.0 * x * math.pi)) * 2.0 / 3.0
    ret += (20.0 * math.sin(y * math.pi) + 40.0 * math.sin(y / 3.0 * math.pi)) * 2.0 / 3.0
    ret += (160.0 * math.sin(y / 12.0 * math.pi) + 320.0 * math.sin(y * math.pi / 30.0)) * 2.0 / 3.0
    return ret


def _transform_lng(x, y):
    ret = 300.0 + x + 2.0 * y + 0.1 * x * x + 0.1 * x * y + 0.1 * math.sqrt(abs(x))
    ret += (20.0 * math.sin(6.0 * x * math.pi) + 20.0 * math.sin(2.0 * x * math.pi)) * 2.0 / 3.0
    ret += (20.0 * math.sin(x * math.pi) + 40.0 * math.sin(x / 3.0 * math.pi)) * 2.0 / 3.0
    ret += (150.0 * math.sin(x / 12.0 * math.pi) + 300.0 * math.sin(x / 30.0 * math.pi)) * 2.0 / 3.0
    return ret


def _gcj_offset(lng, lat):
    dlat = _transform_lat(lng - 105.0, lat - 35.0)
    dlng = _transform_lng(lng - 105.0, lat - 35.0)
    radlat = math.radians(lat)
    magic = 1 - GCJ_EE * math.sin(radlat) ** 2
    sqrtmagic = math.sqrt(magic)
    dlat = (dlat * 180.0) / ((GCJ_A * (1 - GCJ_EE)) / (magic * sqrtmagic) * math.pi)
    dlng = (dlng * 180.0) / (GCJ_A / sqrtmagic * math.cos(radlat) * math.pi)
    return dlng, dlat


def wgs84_to_gcj02(p: GeoPoint) -> GeoPoint:
    """Forward GCJ-02 obfuscation (identity outside mainland China)."""
    if out_of_china(p.lng, p.lat):
        return p
    dlng, dlat = _gcj_offset(p.lng, p.lat)
    return GeoPoint(p.lng + dlng, p.lat + dlat)


def gcj02_to_wgs84(p: GeoPoint, tol: float = 1e-7, max_iter: int = 100) -> GeoPoint:
    """Invert the GCJ-02 forward transform by fixed-point iteration.

    Iterates ``w <- w - (fwd(w) - p)`` until successive iterates move less than
    ``tol`` degrees on both axes.
    """
    if out_of_china(p.lng, p.lat):
        return p
    lng, lat = p.lng, p.lat
    for _ in range(max_iter):
        dlng, dlat = _gcj_offset(lng, lat)
        new_lng = p.lng - dlng
        new_lat = p.lat - dlat
        if abs(new_lng - lng) < tol and abs(new_lat - lat) < tol:
            return GeoPoint(new_lng, new_lat)
        lng, lat = new_lng, new_lat
    raise TransformError(f"GCJ-02 inversion did not converge for {p}")


# --- containment and grids ------------------------------------------------

def _on_segment(px, py, ax, ay, bx, by, eps=1e-12):
    cross = (bx - ax) * (py - ay) - (by - ay) * (px - ax)
    if abs(cross) > eps * max(1.0, abs(bx - ax) + abs(by - ay)):
        return False
    return min(ax, bx) - eps <= px <= max(ax, bx) + eps and min(ay, by) - eps <= py <= max(ay, by) + eps


def _segments_cross(a, b, c, d):
    def orient(p, q, r):
        v = (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])
        return (v > 0) - (v < 0)

    o1, o2, o3, o4 = orient(a, b, c), orient(a, b, d), orient(c, d, a), orient(c, d, b)
    if o1 != o2 and o3 != o4:
        return True
    if o1 == 0 and _on_segment(*c, *a, *b):
        return True
    if o2 == 0 and _on_segment(*d, *a, *b):
        return True
    if o3 == 0 and _on_segment(*a, *c, *d):
        return True
    if o4 == 0 and _on_segment(*b, *c, *d):
        return True
    return False


def _self_intersects(ring):
    n = len(ring)
    edges = [(ring[i], ring[(i + 1) % n]) for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            if j == i + 1 or (i == 0 and j == n - 1):
                continue  # adjacent edges share a vertex
            if _segments_cross(*edges[i], *edges[j]):
                return True
    return False


def in_region(p: GeoPoint, r: Region) -> bool:
    """Containment test; boundary points count as inside (even-odd rule)."""
    if r.kind == "box":
        return r.bounds.contains(p)
    ring = r.coords
    n = len(ring)
    x, y = p.lng, p.lat
    inside = False
    for i in range(n):
        ax, ay = ring[i]
        bx, by = ring[(i + 1) % n]
        if _on_segment(x, y, ax, ay, bx, by):
            return True
        if (ay > y) != (by > y):
            xcross = ax + (y - ay) * (bx - ax) / (by - ay)
            if x < xcross:
                inside = not inside
    return inside


def grid_index(p: GeoPoint, g: GridSpec) -> Optional[Tuple[int, int]]:
    """``(col, row)`` of the cell holding ``p``, or None outside the bounds.

    Columns run west to east from ``min_lng``; rows run north to south from
    ``max_lat``.  Interior boundaries belong to the higher-index cell and the
    outer max edges clamp to the last cell.
    """
    b = g.bounds
    if not b.contains(p):
        return None
    col = int(math.floor((p.lng - b.min_lng) * g.n_cols / (b.max_lng - b.min_lng)))
    row = int(math.floor((b.max_lat - p.lat) * g.n_rows / (b.max_lat - b.min_lat)))
    return min(col, g.n_cols - 1), min(row, g.n_rows - 1)


# --- config ---------------------------------------------------------------

def region_from_json(doc) -> Region:
    try:
        return Region(doc["kind"], tuple(doc["coords"]))
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"bad region document: {exc}") from exc


def grid_from_json(doc) -> GridSpec:
    try:
        return GridSpec(Bounds(*map(float, doc["bounds"])), int(doc.get("n_cols", 30)), int(doc.get("n_rows", 30)))
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"bad grid document: {exc}") from exc


def load_geo_config(path) -> Tuple[Region, GridSpec]:
    """Read ``{"region": {"kind", "coords"}, "grid": {"bounds", "n_cols", "n_rows"}}``.

    Either section may be omitted; defaults are the Beijing box and a 30x30
    grid over the region's bounds.
    """
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    region = region_from_json(doc["region"]) if "region" in doc else Region.box()
    grid = grid_from_json(doc["grid"]) if "grid" in doc else GridSpec(region.bounds)
    return region, grid


def points_to_arrays(points: Sequence[GeoPoint]):
    return (np.fromiter((p.lng for p in points), float, len(points)),
            np.fromiter((p.lat for p in points), float, len(points)))
