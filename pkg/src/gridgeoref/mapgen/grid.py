"""Square grid over a Web Mercator map excerpt, with spreadsheet-style labels.

Columns are lettered A..Z, AA..ZZ from the west edge; rows are numbered from
1 at the north edge. A label is column letters followed by the row number,
e.g. ``C7``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

from ..geo import BBox, GeoPoint, from_mercator, haversine_km, to_mercator

MAX_COLS = 702  # A..ZZ
MAX_ROWS = 99
LABELING = "spreadsheet"
PROJECTION = "web-mercator"

# relative tolerance used to snap projected coordinates onto gridlines
_SNAP = 1e-9

_LABEL_RE = re.compile(r"^([A-Z]{1,2})([1-9][0-9]?)$")


class GridError(ValueError):
    """Bad label, cell, or point for a grid."""


@dataclass(frozen=True)
class MapExtent(BBox):
    def __post_init__(self) -> None:
        if not (self.min_lat < self.max_lat and self.min_lon < self.max_lon):
            raise ValueError(f"map extent must have positive size: {self}")
        if self.min_lon < -180.0 or self.max_lon > 180.0:
            raise ValueError("map extent crosses the antimeridian")

    @classmethod
    def from_bbox(cls, bbox: BBox) -> MapExtent:
        return cls(bbox.min_lat, bbox.min_lon, bbox.max_lat, bbox.max_lon)

    def projected(self) -> tuple[float, float, float, float]:
        """(x_min, y_min, x_max, y_max) in Web Mercator metres."""
        x0, y0 = to_mercator(self.min_lat, self.min_lon)
        x1, y1 = to_mercator(self.max_lat, self.max_lon)
        return x0, y0, x1, y1

    @classmethod
    def from_projected(cls, x0: float, y0: float, x1: float, y1: float) -> MapExtent:
        lat0, lon0 = from_mercator(x0, y0)
        lat1, lon1 = from_mercator(x1, y1)
        return cls(lat0, lon0, lat1, lon1)


@dataclass(frozen=True)
class CellIndex:
    x: int  # column, 1-based from west
    y: int  # row, 1-based from north


@dataclass(frozen=True)
class GridSpec:
    cols: int
    rows: int
    cell_km: float
    labeling: str = LABELING

    def __post_init__(self) -> None:
        if not (1 <= self.cols <= MAX_COLS):
            raise ValueError(f"cols must be in 1..{MAX_COLS}, got {self.cols}")
        if not (1 <= self.rows <= MAX_ROWS):
            raise ValueError(f"rows must be in 1..{MAX_ROWS}, got {self.rows}")
        if not self.cell_km > 0:
            raise ValueError("cell_km must be positive")
        if self.labeling != LABELING:
            raise ValueError(f"unknown labeling scheme {self.labeling!r}")

    def contains(self, cell: CellIndex) -> bool:
        return 1 <= cell.x <= self.cols and 1 <= cell.y <= self.rows

    def cells(self):
        for y in range(1, self.rows + 1):
            for x in range(1, self.cols + 1):
                yield CellIndex(x, y)

    def labels(self) -> list[str]:
        return [label_for_index(self, c) for c in self.cells()]


@dataclass(frozen=True)
class MapGeoreference:
    """Everything needed to map between image pixels, cells and coordinates."""

    extent: MapExtent
    grid: GridSpec
    image_width_px: int
    image_height_px: int
    projection: str = PROJECTION

    def __post_init__(self) -> None:
        if self.image_width_px <= 0 or self.image_height_px <= 0:
            raise ValueError("image dimensions must be positive")
        if self.projection != PROJECTION:
            raise ValueError(f"unsupported projection {self.projection!r}")

    @property
    def cell_side_m(self) -> float:
        """Cell side length in projected metres."""
        x0, _, x1, _ = self.extent.projected()
        return (x1 - x0) / self.grid.cols

    def to_pixel(self, lat: float, lon: float) -> tuple[float, float]:
        x0, y0, x1, y1 = self.extent.projected()
        x, y = to_mercator(lat, lon)
        px = (x - x0) / (x1 - x0) * self.image_width_px
        py = (y1 - y) / (y1 - y0) * self.image_height_px
        return px, py

    def to_dict(self) -> dict:
        return {
            "extent": self.extent.to_dict(),
            "cols": self.grid.cols,
            "rows": self.grid.rows,
            "cell_km": self.grid.cell_km,
            "labeling": self.grid.labeling,
            "image_width_px": self.image_width_px,
            "image_height_px": self.image_height_px,
            "projection": self.projection,
        }

    @classmethod
    def from_dict(cls, data: dict) -> MapGeoreference:
        return cls(
            extent=MapExtent.from_dict(data["extent"]),
            grid=GridSpec(
                int(data["cols"]),
                int(data["rows"]),
                float(data["cell_km"]),
                data.get("labeling", LABELING),
            ),
            image_width_px=int(data["image_width_px"]),
            image_height_px=int(data["image_height_px"]),
            projection=data.get("projection", PROJECTION),
        )


def column_letters(n: int) -> str:
    """Bijective base-26: 1 -> A, 26 -> Z, 27 -> AA."""
    if n < 1:
        raise GridError(f"column index must be >= 1, got {n}")
    out = []
    while n:
        n, rem = divmod(n - 1, 26)
        out.append(chr(ord("A") + rem))
    return "".join(reversed(out))


def column_number(letters: str) -> int:
    n = 0
    for ch in letters:
        n = n * 26 + (ord(ch) - ord("A") + 1)
    return n


def label_for_index(grid: GridSpec, cell: CellIndex) -> str:
    if not grid.contains(cell):
        raise GridError(f"cell {cell} outside {grid.cols}x{grid.rows} grid")
    return f"{column_letters(cell.x)}{cell.y}"


def index_for_label(grid: GridSpec, label: str) -> CellIndex:
    m = _LABEL_RE.match(label.strip().upper())
    if not m:
        raise GridError(f"malformed grid label {label!r}")
    cell = CellIndex(column_number(m.group(1)), int(m.group(2)))
    if not grid.contains(cell):
        raise GridError(f"label {label!r} outside {grid.cols}x{grid.rows} grid")
    return cell


def _snap_floor(v: float) -> int:
    r = round(v)
    if abs(v - r) < _SNAP * max(1.0, abs(v)):
        return int(r)
    return math.floor(v)


def point_to_cell(georef: MapGeoreference, p: GeoPoint) -> CellIndex:
    """Cell containing ``p``; a point on an interior gridline goes east/south."""
    if not georef.extent.contains_point(p):
        raise GridError(f"point {p} outside map extent")
    x0, _, x1, y1 = georef.extent.projected()
    side = (x1 - x0) / georef.grid.cols
    x, y = to_mercator(p.lat, p.lon)
    col = _snap_floor((x - x0) / side) + 1
    row = _snap_floor((y1 - y) / side) + 1
    # the closed east/south edges belong to the last column/row
    col = min(max(col, 1), georef.grid.cols)
    row = min(max(row, 1), georef.grid.rows)
    return CellIndex(col, row)


def cell_centroid(georef: MapGeoreference, cell: CellIndex) -> GeoPoint:
    if not georef.grid.contains(cell):
        raise GridError(f"cell {cell} outside grid")
    x0, _, x1, y1 = georef.extent.projected()
    side = (x1 - x0) / georef.grid.cols
    cx = x0 + (cell.x - 0.5) * side
    cy = y1 - (cell.y - 0.5) * side
    lat, lon = from_mercator(cx, cy)
    return GeoPoint(lat, lon)


def cell_bounds(georef: MapGeoreference, cell: CellIndex) -> MapExtent:
    x0, _, x1, y1 = georef.extent.projected()
    side = (x1 - x0) / georef.grid.cols
    return MapExtent.from_projected(
        x0 + (cell.x - 1) * side,
        y1 - cell.y * side,
        x0 + cell.x * side,
        y1 - (cell.y - 1) * side,
    )


def _cell_width_km(x0: float, side: float, y_mid: float) -> float:
    lat, lon_a = from_mercator(x0, y_mid)
    _, lon_b = from_mercator(x0 + side, y_mid)
    return haversine_km(GeoPoint(lat, lon_a), GeoPoint(lat, lon_b))


def _side_for_km(extent: MapExtent, km: float) -> float:
    """Projected side length whose geodesic width on the central parallel is ``km``."""
    x0, y0, x1, y1 = extent.projected()
    per_metre = _cell_width_km(x0, 1000.0, (y0 + y1) / 2) / 1000.0
    return km / per_metre


def make_grid(
    extent: MapExtent, target_cell_km: float, max_cells_per_axis: int = 12
) -> tuple[GridSpec, MapExtent]:
    """Lay square cells over ``extent``.

    Returns the grid and the extent grown east/south so the cells tile it
    exactly. ``cell_km`` is the true geodesic cell width along the central
    parallel of the returned extent.
    """
    if not target_cell_km > 0:
        raise ValueError("target_cell_km must be positive")
    if max_cells_per_axis < 1:
        raise ValueError("max_cells_per_axis must be >= 1")
    x0, y0, x1, y1 = extent.projected()
    w, h = x1 - x0, y1 - y0
    side = _side_for_km(extent, target_cell_km)

    def count(length: float, s: float) -> int:
        return max(1, math.ceil(length / s - _SNAP))

    cols, rows = count(w, side), count(h, side)
    limit = min(max_cells_per_axis, MAX_COLS)
    row_limit = min(max_cells_per_axis, MAX_ROWS)
    if cols > limit or rows > row_limit:
        side = max(w / limit, h / row_limit)
        cols, rows = count(w, side), count(h, side)

    tiled = MapExtent.from_projected(x0, y1 - rows * side, x0 + cols * side, y1)
    tx0, ty0, _, ty1 = tiled.projected()
    cell_km = _cell_width_km(tx0, side, (ty0 + ty1) / 2)
    if cell_km < 0.01:
        raise ValueError(f"degenerate extent: cell size {cell_km:.4f} km < 0.01 km")
    return GridSpec(cols, rows, cell_km), tiled


def recomputed_scale_km(georef: MapGeoreference) -> float:
    """Geodesic cell width on the central parallel, from the extent alone."""
    x0, y0, x1, y1 = georef.extent.projected()
    return _cell_width_km(x0, (x1 - x0) / georef.grid.cols, (y0 + y1) / 2)
