"""Map excerpt extent from resolved features, relations and containment.

Rules, in order:

1. a feature that contains another resolved feature is left out (the finer
   place is enough; the parent only helped disambiguation),
2. the remaining features are included in full,
3. a relatum with an absolute distance is buffered by distance * factor,
4. the box is padded by 10% on every side,
5. the shorter axis is widened to the target image aspect ratio.

Long linear features (rivers, roads) can blow the excerpt up; see
:func:`clip_linear_features`.
"""

from __future__ import annotations

import logging
from dataclasses import replace
from typing import Mapping, Sequence

import shapely
from shapely.geometry import box
from shapely.ops import nearest_points

from ..gazetteer import GazetteerFeature, Geometry
from ..geo import BBox, from_mercator, to_mercator
from .grid import MapExtent

log = logging.getLogger(__name__)

BUFFER_FACTOR = 1.5
PAD_FRACTION = 0.10
MIN_EXTENT_KM = 1.0
LINEAR_AREA_RATIO = 4.0


class MapGenError(ValueError):
    pass


def _name(m) -> str:
    return m if isinstance(m, str) else m.name


def containment_parents(features: Mapping[str, GazetteerFeature], containment) -> set[str]:
    """Parents (mentions or plain names) whose child is also resolved."""
    return {_name(p) for p, c in containment if _name(p) in features and _name(c) in features}


def _floor(bbox: BBox, min_km: float) -> BBox:
    """Widen a too-small box symmetrically to ``min_km`` per side."""
    w, h = bbox.width_km(), bbox.height_km()
    out = bbox
    if w < min_km:
        half = (min_km - w) / 2
        grown = out.buffered(half)
        out = BBox(out.min_lat, grown.min_lon, out.max_lat, grown.max_lon)
    if h < min_km:
        half = (min_km - h) / 2
        grown = out.buffered(half)
        out = BBox(grown.min_lat, out.min_lon, grown.max_lat, out.max_lon)
    return out


def _pad_and_fit(bbox: BBox, pad: float, aspect: float) -> MapExtent:
    x0, y0 = to_mercator(bbox.min_lat, bbox.min_lon)
    x1, y1 = to_mercator(bbox.max_lat, bbox.max_lon)
    w, h = x1 - x0, y1 - y0
    x0, x1 = x0 - pad * w, x1 + pad * w
    y0, y1 = y0 - pad * h, y1 + pad * h
    w, h = x1 - x0, y1 - y0
    if w / h < aspect:
        grow = (aspect * h - w) / 2
        x0, x1 = x0 - grow, x1 + grow
    else:
        grow = (w / aspect - h) / 2
        y0, y1 = y0 - grow, y1 + grow
    lat0, lon0 = from_mercator(x0, y0)
    lat1, lon1 = from_mercator(x1, y1)
    if lon0 < -180.0 or lon1 > 180.0:
        raise MapGenError("map extent crosses the antimeridian")
    return MapExtent(lat0, lon0, lat1, lon1)


def required_boxes(
    features: Mapping[str, GazetteerFeature],
    triples: Sequence,
    containment: Sequence = (),
    buffer_factor: float = BUFFER_FACTOR,
    unbuffered: frozenset[str] | set[str] = frozenset(),
) -> list[BBox]:
    """Boxes the excerpt must cover: surviving features and buffered relata."""
    parents = containment_parents(features, containment)
    survivors = {n: f for n, f in features.items() if n not in parents}
    boxes = [f.geometry.bbox for f in survivors.values()]
    for t in triples:
        name = t.relatum.name
        if t.distance_km and name in survivors and name not in unbuffered:
            boxes.append(survivors[name].geometry.bbox.buffered(t.distance_km * buffer_factor))
    return boxes


def compute_extent(
    features: Mapping[str, GazetteerFeature],
    triples: Sequence = (),
    containment: Sequence = (),
    buffer_factor: float = BUFFER_FACTOR,
    aspect_ratio: float = 1.0,
    pad_fraction: float = PAD_FRACTION,
    min_extent_km: float = MIN_EXTENT_KM,
    unbuffered: frozenset[str] | set[str] = frozenset(),
) -> MapExtent:
    """Excerpt extent for resolved ``features`` (name -> feature).

    ``unbuffered`` names relata whose distance buffer is skipped (linear
    features that were clipped: their distance is measured from an unknown
    point along the line).
    """
    if not features:
        raise MapGenError("nothing to map")
    boxes = required_boxes(features, triples, containment, buffer_factor, unbuffered)
    union = boxes[0]
    for b in boxes[1:]:
        union = union.union(b)
    union = _floor(union, min_extent_km)
    return _pad_and_fit(union, pad_fraction, aspect_ratio)


def _line_clip(geometry: Geometry, window: BBox) -> Geometry:
    g = geometry.shape
    rect = box(window.min_lon, window.min_lat, window.max_lon, window.max_lat)
    clipped = shapely.clip_by_rect(g, *rect.bounds)
    if clipped.is_empty or shapely.get_dimensions(clipped) < 1:
        # keep the stretch of line closest to the window
        near = nearest_points(g, rect)[0]
        reach = window.union(BBox(near.y, near.x, near.y, near.x))
        grown = reach.buffered(0.1 * max(reach.width_km(), reach.height_km()))
        clipped = shapely.clip_by_rect(g, grown.min_lon, grown.min_lat, grown.max_lon, grown.max_lat)
    lines = [p for p in getattr(clipped, "geoms", [clipped]) if shapely.get_dimensions(p) == 1]
    if not lines:
        return geometry
    merged = lines[0] if len(lines) == 1 else shapely.MultiLineString(
        [c for ln in lines for c in getattr(ln, "geoms", [ln])]
    )
    return Geometry.from_shape(merged)


def clip_linear_features(
    features: Mapping[str, GazetteerFeature], extent: BBox
) -> dict[str, GazetteerFeature]:
    """Clip line features far larger than the non-linear features.

    A line whose bbox area exceeds four times the non-linear features'
    union bbox (or ``extent``, whichever is larger) is cut to ``extent`` (normally the extent computed
    from the non-linear features alone). When the line misses ``extent``
    entirely, the stretch nearest to it is kept.
    """
    nonlinear = [f for f in features.values() if f.geometry.dimension != 1]
    if not nonlinear or len(nonlinear) == len(features):
        return dict(features)
    union = nonlinear[0].geometry.bbox
    for f in nonlinear[1:]:
        union = union.union(f.geometry.bbox)
    # a lone point has no area; compare against the window instead
    ref_area = max(union.area_km2(), extent.area_km2())
    out = {}
    for name, f in features.items():
        if f.geometry.dimension == 1 and f.geometry.bbox.area_km2() > LINEAR_AREA_RATIO * ref_area:
            if extent.contains_bbox(f.geometry.bbox):
                out[name] = f
                continue
            out[name] = replace(f, geometry=_line_clip(f.geometry, extent))
            log.info("clipped linear feature %s to the non-linear extent", name)
        else:
            out[name] = f
    return out


def plan_extent(
    features: Mapping[str, GazetteerFeature],
    triples: Sequence = (),
    containment: Sequence = (),
    buffer_factor: float = BUFFER_FACTOR,
    aspect_ratio: float = 1.0,
    clip_lines: bool = True,
) -> tuple[MapExtent, dict[str, GazetteerFeature]]:
    """Extent plus the (possibly clipped) features to draw."""
    if not features:
        raise MapGenError("nothing to map")
    parents = containment_parents(features, containment)
    survivors = {n: f for n, f in features.items() if n not in parents}
    drawn = dict(features)
    unbuffered: set[str] = set()
    if clip_lines:
        nonlinear = {n: f for n, f in survivors.items() if f.geometry.dimension != 1}
        if nonlinear and len(nonlinear) < len(survivors):
            window = BBox.from_dict(
                compute_extent(nonlinear, triples, (), buffer_factor, aspect_ratio).to_dict()
            )
            clipped = clip_linear_features(survivors, window)
            unbuffered = {n for n in clipped if clipped[n] is not survivors[n]}
            drawn.update(clipped)
            survivors = clipped
    extent = compute_extent(
        survivors, triples, (), buffer_factor, aspect_ratio, unbuffered=unbuffered
    )
    return extent, drawn
