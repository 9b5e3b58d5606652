"""Map excerpt generation: extent, grid overlay and rendering."""

from __future__ import annotations

import logging
from typing import Mapping, Sequence

from ..gazetteer import GazetteerFeature
from .extent import (
    BUFFER_FACTOR,
    MapGenError,
    clip_linear_features,
    compute_extent,
    containment_parents,
    plan_extent,
)
from .grid import (
    CellIndex,
    GridError,
    GridSpec,
    MapExtent,
    MapGeoreference,
    cell_bounds,
    cell_centroid,
    column_letters,
    index_for_label,
    label_for_index,
    make_grid,
    point_to_cell,
    recomputed_scale_km,
)
from .render import MapExcerpt, load_style, render_map
from .tiles import BasemapError, BlankBasemap, TileBasemap

log = logging.getLogger(__name__)

__all__ = [
    "BUFFER_FACTOR",
    "BasemapError",
    "BlankBasemap",
    "CellIndex",
    "GridError",
    "GridSpec",
    "MapExcerpt",
    "MapExtent",
    "MapGenError",
    "MapGeoreference",
    "TileBasemap",
    "cell_bounds",
    "cell_centroid",
    "clip_linear_features",
    "column_letters",
    "compute_extent",
    "containment_parents",
    "default_target_cell_km",
    "generate_map",
    "index_for_label",
    "label_for_index",
    "load_style",
    "make_grid",
    "plan_extent",
    "point_to_cell",
    "recomputed_scale_km",
    "render_map",
]

DEFAULT_IMAGE_WIDTH_PX = 1024
DEFAULT_CELLS_ACROSS = 10


def default_target_cell_km(extent: MapExtent, cells_across: int = DEFAULT_CELLS_ACROSS) -> float:
    """About ``cells_across`` cells along the longer side of the extent."""
    return max(extent.width_km(), extent.height_km()) / cells_across


def generate_map(
    features: Mapping[str, GazetteerFeature],
    triples: Sequence = (),
    containment: Sequence = (),
    unresolved: Sequence[str] = (),
    *,
    buffer_factor: float = BUFFER_FACTOR,
    image_width_px: int = DEFAULT_IMAGE_WIDTH_PX,
    aspect_ratio: float = 1.0,
    target_cell_km: float | None = None,
    max_cells_per_axis: int = 12,
    clip_lines: bool = True,
    style: dict | None = None,
    basemap=None,
) -> MapExcerpt:
    """Extent, grid and rendered excerpt for one record's resolved places."""
    if not features:
        raise MapGenError("nothing to map" + (f" (unresolved: {', '.join(unresolved)})" if unresolved else ""))
    extent, drawn = plan_extent(features, triples, containment, buffer_factor, aspect_ratio, clip_lines)
    target = target_cell_km or default_target_cell_km(extent)
    grid, tiled = make_grid(extent, target, max_cells_per_axis)
    px_per_cell = max(1, image_width_px // grid.cols)
    georef = MapGeoreference(tiled, grid, px_per_cell * grid.cols, px_per_cell * grid.rows)
    log.info("excerpt %dx%d cells of %.3f km", grid.cols, grid.rows, grid.cell_km)
    parents = containment_parents(features, containment)
    return render_map(georef, drawn, style, basemap, unresolved, sorted(parents))
