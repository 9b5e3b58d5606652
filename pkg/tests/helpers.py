"""Builders for synthetic dataset items shared by several test modules."""

from __future__ import annotations

from pathlib import Path

from PIL import Image

from gridgeoref.mapgen.grid import (
    CellIndex,
    MapExtent,
    MapGeoreference,
    cell_centroid,
    label_for_index,
    make_grid,
)
from gridgeoref.records import CollectionRecord, DatasetItem


def synthetic_georef(lat: float, lon: float, cell_km: float, n: int = 10, px: int = 40) -> MapGeoreference:
    """An n x n grid of roughly ``cell_km`` cells with its NW corner at (lat, lon)."""
    span = cell_km * n / 111.0
    extent = MapExtent(lat - span, lon, lat, lon + span / 0.75)
    grid, tiled = make_grid(extent, cell_km, max_cells_per_axis=n)
    return MapGeoreference(tiled, grid, px * grid.cols, px * grid.rows)


def synthetic_item(item_id: str, truth: CellIndex, cell_km: float = 1.0, map_dir: Path | None = None,
                   lat: float = -41.0, lon: float = 175.0) -> DatasetItem:
    georef = synthetic_georef(lat, lon, cell_km)
    point = cell_centroid(georef, truth)
    record = CollectionRecord(item_id, f"synthetic locality {item_id}", "New Zealand", "Wellington", point)
    path = (map_dir or Path(".")) / f"{item_id}.png"
    if map_dir is not None:
        Image.new("RGB", (georef.image_width_px, georef.image_height_px), "white").save(path)
    return DatasetItem(record, path, georef, label_for_index(georef.grid, truth), georef.grid.cell_km)


def plan_for_text(text: str, gazetteer, region: str = ""):
    """Parse ``text`` and resolve its places against ``gazetteer``.

    Returns (features, triples, containment, unresolved) as the pipeline would.
    """
    from gridgeoref.gazetteer import resolve_places
    from gridgeoref.parser import parse
    from gridgeoref.parser.containment import detect_containment

    parsed = parse(text)
    features, unresolved = resolve_places(parsed.place_names(), "New Zealand", region, [gazetteer])
    containment = detect_containment(parsed.mentions, features, text)
    return features, parsed.triples, containment, unresolved
