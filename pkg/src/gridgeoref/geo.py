"""Shared geodesy: points, bounding boxes, haversine and Web Mercator."""

from __future__ import annotations

import math
from dataclasses import dataclass

EARTH_RADIUS_KM = 6371.0088
# spherical Web Mercator (EPSG:3857) radius, metres
MERCATOR_RADIUS_M = 6378137.0
MERCATOR_MAX_LAT = 85.05112878


@dataclass(frozen=True)
class GeoPoint:
    """WGS84 point in decimal degrees."""

    lat: float
    lon: float

    def __post_init__(self) -> None:
        if not (-90.0 <= self.lat <= 90.0):
            raise ValueError(f"latitude out of range: {self.lat}")
        if not (-180.0 <= self.lon <= 180.0):
            raise ValueError(f"longitude out of range: {self.lon}")

    def to_dict(self) -> dict:
        return {"lat": self.lat, "lon": self.lon}

    @classmethod
    def from_dict(cls, data: dict) -> GeoPoint:
        return cls(float(data["lat"]), float(data["lon"]))


@dataclass(frozen=True)
class BBox:
    """Lat/lon bounding box; may be degenerate (a single point)."""

    min_lat: float
    min_lon: float
    max_lat: float
    max_lon: float

    def __post_init__(self) -> None:
        if self.min_lat > self.max_lat or self.min_lon > self.max_lon:
            raise ValueError(f"inverted bbox: {self}")

    @classmethod
    def of_points(cls, points) -> BBox:
        """Bounding box of an iterable of (lon, lat) pairs."""
        lons, lats = [], []
        for lon, lat in points:
            lons.append(lon)
            lats.append(lat)
        if not lons:
            raise ValueError("bbox of zero points")
        return cls(min(lats), min(lons), max(lats), max(lons))

    @property
    def center(self) -> GeoPoint:
        return GeoPoint((self.min_lat + self.max_lat) / 2, (self.min_lon + self.max_lon) / 2)

    def union(self, other: BBox) -> BBox:
        return BBox(
            min(self.min_lat, other.min_lat),
            min(self.min_lon, other.min_lon),
            max(self.max_lat, other.max_lat),
            max(self.max_lon, other.max_lon),
        )

    def contains_point(self, p: GeoPoint) -> bool:
        return self.min_lat <= p.lat <= self.max_lat and self.min_lon <= p.lon <= self.max_lon

    def contains_bbox(self, other: BBox, tol: float = 1e-12) -> bool:
        return (
            self.min_lat <= other.min_lat + tol
            and self.min_lon <= other.min_lon + tol
            and self.max_lat >= other.max_lat - tol
            and self.max_lon >= other.max_lon - tol
        )

    def intersection(self, other: BBox) -> BBox | None:
        lo_lat, hi_lat = max(self.min_lat, other.min_lat), min(self.max_lat, other.max_lat)
        lo_lon, hi_lon = max(self.min_lon, other.min_lon), min(self.max_lon, other.max_lon)
        if lo_lat > hi_lat or lo_lon > hi_lon:
            return None
        return BBox(lo_lat, lo_lon, hi_lat, hi_lon)

    def width_km(self) -> float:
        """Geodesic width along the central parallel."""
        lat = (self.min_lat + self.max_lat) / 2
        return haversine_km(GeoPoint(lat, self.min_lon), GeoPoint(lat, self.max_lon))

    def height_km(self) -> float:
        lon = (self.min_lon + self.max_lon) / 2
        return haversine_km(GeoPoint(self.min_lat, lon), GeoPoint(self.max_lat, lon))

    def area_km2(self) -> float:
        return self.width_km() * self.height_km()

    def buffered(self, km: float) -> BBox:
        """Grow every side outward by ``km`` kilometres."""
        if km <= 0:
            return self
        dlat = km / KM_PER_DEGREE
        worst_lat = max(abs(self.min_lat), abs(self.max_lat))
        dlon = km / (KM_PER_DEGREE * max(math.cos(math.radians(worst_lat)), 1e-6))
        return BBox(
            max(self.min_lat - dlat, -90.0),
            self.min_lon - dlon,
            min(self.max_lat + dlat, 90.0),
            self.max_lon + dlon,
        )

    def to_dict(self) -> dict:
        return {
            "min_lat": self.min_lat,
            "min_lon": self.min_lon,
            "max_lat": self.max_lat,
            "max_lon": self.max_lon,
        }

    @classmethod
    def from_dict(cls, data: dict):
        return cls(
            float(data["min_lat"]),
            float(data["min_lon"]),
            float(data["max_lat"]),
            float(data["max_lon"]),
        )


KM_PER_DEGREE = math.pi * EARTH_RADIUS_KM / 180.0


def haversine_km(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance in kilometres."""
    lat1, lon1, lat2, lon2 = map(math.radians, (a.lat, a.lon, b.lat, b.lon))
    dlat = lat2 - lat1
    dlon = lon2 - lon1
    h = math.sin(dlat / 2) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin(dlon / 2) ** 2
    return 2 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(h)))


def spherical_mean(points) -> GeoPoint:
    """Centroid of points on the unit sphere, returned as lat/lon."""
    x = y = z = 0.0
    n = 0
    for p in points:
        lat, lon = math.radians(p.lat), math.radians(p.lon)
        x += math.cos(lat) * math.cos(lon)
        y += math.cos(lat) * math.sin(lon)
        z += math.sin(lat)
        n += 1
    if n == 0:
        raise ValueError("mean of zero points")
    lon = math.atan2(y, x)
    lat = math.atan2(z, math.hypot(x, y))
    return GeoPoint(math.degrees(lat), math.degrees(lon))


def to_mercator(lat: float, lon: float) -> tuple[float, float]:
    """Project to spherical Web Mercator metres (x east, y north)."""
    lat = max(-MERCATOR_MAX_LAT, min(MERCATOR_MAX_LAT, lat))
    x = MERCATOR_RADIUS_M * math.radians(lon)
    y = MERCATOR_RADIUS_M * math.log(math.tan(math.pi / 4 + math.radians(lat) / 2))
    return x, y


def from_mercator(x: float, y: float) -> tuple[float, float]:
    """Inverse of :func:`to_mercator`; returns (lat, lon)."""
    lon = math.degrees(x / MERCATOR_RADIUS_M)
    lat = math.degrees(2 * math.atan(math.exp(y / MERCATOR_RADIUS_M)) - math.pi / 2)
    return lat, lon
