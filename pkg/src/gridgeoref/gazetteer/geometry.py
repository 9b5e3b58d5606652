"""GeoJSON-shaped geometries with bounding boxes and representative points."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import shapely
from shapely.geometry import shape
from shapely.ops import polylabel

from ..geo import BBox, GeoPoint

KINDS = {
    "Point": "point",
    "LineString": "line",
    "Polygon": "polygon",
    "MultiPoint": "multi",
    "MultiLineString": "multi",
    "MultiPolygon": "multi",
    "GeometryCollection": "multi",
}


class GeometryError(ValueError):
    pass


def _freeze(coords):
    if isinstance(coords, (list, tuple)):
        if coords and isinstance(coords[0], (int, float)):
            return tuple(float(c) for c in coords[:2])
        return tuple(_freeze(c) for c in coords)
    raise GeometryError(f"bad coordinate value {coords!r}")


def _thaw(coords):
    if isinstance(coords, tuple):
        return [_thaw(c) for c in coords]
    return coords


def _positions(geojson_type: str, coords):
    if geojson_type == "Point":
        return [coords]
    if geojson_type in ("LineString", "MultiPoint"):
        return list(coords)
    if geojson_type in ("Polygon", "MultiLineString"):
        return [p for ring in coords for p in ring]
    if geojson_type == "MultiPolygon":
        return [p for poly in coords for ring in poly for p in ring]
    raise GeometryError(f"unsupported geometry type {geojson_type}")


def _rings(geojson_type: str, coords):
    if geojson_type == "Polygon":
        return list(coords)
    if geojson_type == "MultiPolygon":
        return [ring for poly in coords for ring in poly]
    return []


@dataclass(frozen=True)
class Geometry:
    geojson_type: str
    coordinates: tuple  # nested, (lon, lat) order; GeometryCollection: tuple of Geometry

    def __post_init__(self) -> None:
        if self.geojson_type not in KINDS:
            raise GeometryError(f"unsupported geometry type {self.geojson_type!r}")
        if self.geojson_type == "GeometryCollection":
            if not self.coordinates:
                raise GeometryError("empty geometry collection")
            return
        if not self.coordinates or not _positions(self.geojson_type, self.coordinates):
            raise GeometryError("geometry has no vertices")
        for ring in _rings(self.geojson_type, self.coordinates):
            if len(ring) < 4 or ring[0] != ring[-1]:
                raise GeometryError("polygon ring not closed")

    @property
    def kind(self) -> str:
        return KINDS[self.geojson_type]

    @cached_property
    def shape(self):
        return shape(self.to_geojson())

    @property
    def dimension(self) -> int:
        """0 for points, 1 for lines, 2 for areas (max over parts)."""
        return shapely.get_dimensions(self.shape).item()

    @cached_property
    def bbox(self) -> BBox:
        if self.geojson_type == "GeometryCollection":
            boxes = [g.bbox for g in self.coordinates]
            out = boxes[0]
            for b in boxes[1:]:
                out = out.union(b)
            return out
        return BBox.of_points(_positions(self.geojson_type, self.coordinates))

    def to_geojson(self) -> dict:
        if self.geojson_type == "GeometryCollection":
            return {"type": self.geojson_type, "geometries": [g.to_geojson() for g in self.coordinates]}
        return {"type": self.geojson_type, "coordinates": _thaw(self.coordinates)}

    @classmethod
    def from_geojson(cls, data: dict) -> Geometry:
        gtype = data.get("type")
        if gtype == "GeometryCollection":
            return cls(gtype, tuple(cls.from_geojson(g) for g in data.get("geometries", [])))
        try:
            return cls(gtype, _freeze(data["coordinates"]))
        except (KeyError, TypeError) as exc:
            raise GeometryError(f"malformed geometry: {exc}") from exc

    @classmethod
    def point(cls, lat: float, lon: float) -> Geometry:
        return cls("Point", (float(lon), float(lat)))

    @classmethod
    def from_shape(cls, geom) -> Geometry:
        return cls.from_geojson(shapely.geometry.mapping(geom))


def representative_point(geometry: Geometry) -> GeoPoint:
    """A point guaranteed to lie on the geometry.

    Polygons use the centroid, or the pole of inaccessibility when the
    centroid falls outside; lines use their middle vertex.
    """
    g = geometry.shape
    if g.is_empty:
        raise GeometryError("empty geometry")
    dim = geometry.dimension
    if geometry.geojson_type == "Point":
        return GeoPoint(g.y, g.x)
    if dim == 2:
        polys = [p for p in getattr(g, "geoms", [g]) if p.geom_type in ("Polygon", "MultiPolygon")]
        area = shapely.union_all(polys) if len(polys) > 1 else polys[0]
        c = area.centroid
        if not area.covers(c):
            biggest = max(getattr(area, "geoms", [area]), key=lambda p: p.area)
            span = max(biggest.bounds[2] - biggest.bounds[0], biggest.bounds[3] - biggest.bounds[1])
            c = polylabel(biggest, tolerance=max(span * 1e-4, 1e-9))
        return GeoPoint(c.y, c.x)
    if dim == 1:
        lines = [p for p in getattr(g, "geoms", [g]) if p.geom_type in ("LineString", "MultiLineString")]
        line = max(lines, key=lambda ln: ln.length)
        if line.geom_type == "MultiLineString":
            line = max(line.geoms, key=lambda ln: ln.length)
        coords = list(line.coords)
        lon, lat = coords[len(coords) // 2][:2]
        return GeoPoint(lat, lon)
    pts = list(getattr(g, "geoms", [g]))
    return GeoPoint(pts[0].y, pts[0].x)


def contains(outer: Geometry, inner: Geometry) -> bool:
    """Areal ``outer`` covers ``inner``'s representative point and is larger."""
    if outer.dimension < 2:
        return False
    if outer.bbox.area_km2() <= inner.bbox.area_km2():
        return False
    p = representative_point(inner)
    return outer.shape.covers(shapely.geometry.Point(p.lon, p.lat))
