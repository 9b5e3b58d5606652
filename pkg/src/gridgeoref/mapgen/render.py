"""Draw a map excerpt: basemap, feature overlays, grid and cell labels."""

from __future__ import annotations

import copy
import hashlib
import io
import json
import logging
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

import shapely
from PIL import Image, ImageColor, ImageDraw, ImageFont
from shapely.geometry import box

from ..gazetteer import GazetteerFeature
from .grid import MapGeoreference, label_for_index
from .tiles import BasemapError, BlankBasemap

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1


def load_style(path=None) -> dict:
    """The packaged default style, overlaid with ``path`` if given."""
    text = resources.files(__package__).joinpath("default_style.json").read_text(encoding="utf-8")
    style = json.loads(text)
    if path is not None:
        user = json.loads(Path(path).read_text(encoding="utf-8"))
        for section, values in user.items():
            style.setdefault(section, {}).update(values)
    return style


@dataclass
class MapExcerpt:
    image: bytes  # PNG
    georef: MapGeoreference
    features_drawn: list[str] = field(default_factory=list)
    unresolved_names: list[str] = field(default_factory=list)
    no_basemap: bool = False

    @property
    def image_sha256(self) -> str:
        return hashlib.sha256(self.image).hexdigest()

    def sidecar(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "georef": self.georef.to_dict(),
            "features_drawn": self.features_drawn,
            "unresolved_names": self.unresolved_names,
            "no_basemap": self.no_basemap,
            "image_sha256": self.image_sha256,
        }

    def save(self, png_path) -> Path:
        """Write the PNG and a ``.json`` sidecar next to it; returns the sidecar path."""
        png_path = Path(png_path)
        png_path.parent.mkdir(parents=True, exist_ok=True)
        png_path.write_bytes(self.image)
        meta = png_path.with_suffix(".json")
        meta.write_text(json.dumps(self.sidecar(), indent=2, sort_keys=True), encoding="utf-8")
        return meta

    @classmethod
    def load(cls, png_path) -> MapExcerpt:
        png_path = Path(png_path)
        meta = json.loads(png_path.with_suffix(".json").read_text(encoding="utf-8"))
        return cls(
            image=png_path.read_bytes(),
            georef=MapGeoreference.from_dict(meta["georef"]),
            features_drawn=list(meta.get("features_drawn", [])),
            unresolved_names=list(meta.get("unresolved_names", [])),
            no_basemap=bool(meta.get("no_basemap", False)),
        )


def _font(size: int) -> ImageFont.ImageFont:
    return ImageFont.load_default(size=size)


def _rgba(color: str, alpha: int = 255) -> tuple[int, int, int, int]:
    r, g, b = ImageColor.getrgb(color)[:3]
    return r, g, b, alpha


class _Painter:
    def __init__(self, georef: MapGeoreference, style: dict, base: Image.Image) -> None:
        self.georef = georef
        self.style = style
        self.base = base.convert("RGBA")
        self.fill_layer = Image.new("RGBA", self.base.size, (0, 0, 0, 0))
        self.line_layer = Image.new("RGBA", self.base.size, (0, 0, 0, 0))
        self.labels: list[tuple[tuple[float, float], str, int, str]] = []
        self.corner_labels: list[tuple[str, int]] = []

    def px(self, coords) -> list[tuple[float, float]]:
        return [self.georef.to_pixel(lat, lon) for lon, lat in coords]

    def inside(self, xy) -> bool:
        w, h = self.base.size
        return 0 <= xy[0] < w and 0 <= xy[1] < h

    def polygon(self, poly, st: dict, filled: bool) -> None:
        fill = ImageDraw.Draw(self.fill_layer)
        lines = ImageDraw.Draw(self.line_layer)
        if filled:
            fill.polygon(self.px(poly.exterior.coords), fill=_rgba(st["fill"], st["fill_alpha"]))
            for hole in poly.interiors:
                fill.polygon(self.px(hole.coords), fill=(0, 0, 0, 0))
        for ring in [poly.exterior, *poly.interiors]:
            lines.line(self.px(ring.coords), fill=_rgba(st["stroke"]), width=st["width"], joint="curve")

    def line(self, ln, st: dict) -> list[tuple[float, float]]:
        pts = self.px(ln.coords)
        ImageDraw.Draw(self.line_layer).line(pts, fill=_rgba(st["stroke"]), width=st["width"], joint="curve")
        return pts

    def point(self, pt, st: dict) -> tuple[float, float]:
        x, y = self.georef.to_pixel(pt.y, pt.x)
        r = st["radius"]
        ImageDraw.Draw(self.line_layer).ellipse(
            (x - r, y - r, x + r, y + r), fill=_rgba(st["fill"]), outline=_rgba(st["stroke"]), width=2
        )
        return x, y

    def label(self, xy, text: str, size: int, anchor: str = "mm") -> None:
        self.labels.append((xy, text, size, anchor))

    def grid(self) -> None:
        g = self.style["grid"]
        draw = ImageDraw.Draw(self.line_layer)
        w, h = self.base.size
        cols, rows = self.georef.grid.cols, self.georef.grid.rows
        color = _rgba(g["stroke"], g["alpha"])
        for i in range(cols + 1):
            x = min(round(i * w / cols), w - 1)
            draw.line([(x, 0), (x, h - 1)], fill=color, width=g["width"])
        for j in range(rows + 1):
            y = min(round(j * h / rows), h - 1)
            draw.line([(0, y), (w - 1, y)], fill=color, width=g["width"])

    def finish(self) -> Image.Image:
        img = Image.alpha_composite(self.base, self.fill_layer)
        img = Image.alpha_composite(img, self.line_layer)
        draw = ImageDraw.Draw(img)
        lab = self.style["label"]
        for xy, text, size, anchor in self.labels:
            draw.text(
                xy, text, fill=_rgba(lab["color"]), font=_font(size), anchor=anchor,
                stroke_width=lab["halo_width"], stroke_fill=_rgba(lab["halo"]),
            )
        w, h = img.size
        y = h - 6
        for text, size in self.corner_labels:
            draw.text(
                (w - 6, y), text, fill=_rgba(lab["color"]), font=_font(size), anchor="rb",
                stroke_width=lab["halo_width"], stroke_fill=_rgba(lab["halo"]),
            )
            y -= size + 6
        # cell labels go last so nothing hides them
        g = self.style["grid"]
        cols, rows = self.georef.grid.cols, self.georef.grid.rows
        font = _font(g["font_size"])
        for cell in self.georef.grid.cells():
            text = label_for_index(self.georef.grid, cell)
            xy = (round((cell.x - 1) * w / cols) + 3, round((cell.y - 1) * h / rows) + 2)
            draw.text(xy, text, fill=_rgba(g["label_color"]), font=font,
                      stroke_width=2, stroke_fill=(255, 255, 255, 255))
        return img.convert("RGB")


def _parts(shape) -> list:
    return list(getattr(shape, "geoms", [shape]))


def _along(pts: Sequence[tuple[float, float]], spacing: float) -> list[tuple[float, float]]:
    """Points every ``spacing`` pixels along a polyline, starting half-way in."""
    seglens = [math.dist(a, b) for a, b in zip(pts, pts[1:])]
    total = sum(seglens)
    if total == 0:
        return [pts[0]] if pts else []
    targets = [spacing / 2 + k * spacing for k in range(int((total - spacing / 2) // spacing) + 1)]
    if not targets or targets[0] > total:
        targets = [total / 2]
    out, acc, seg = [], 0.0, 0
    for t in targets:
        while seg < len(seglens) - 1 and acc + seglens[seg] < t:
            acc += seglens[seg]
            seg += 1
        frac = (t - acc) / seglens[seg] if seglens[seg] else 0.0
        (x0, y0), (x1, y1) = pts[seg], pts[seg + 1]
        out.append((x0 + frac * (x1 - x0), y0 + frac * (y1 - y0)))
    return out


def render_map(
    georef: MapGeoreference,
    features: Mapping[str, GazetteerFeature],
    style: dict | None = None,
    basemap=None,
    unresolved: Sequence[str] = (),
    parents: Sequence[str] = (),
) -> MapExcerpt:
    """Render ``features`` over a basemap with the grid of ``georef``.

    ``parents`` are containing features; they are outlined but not filled
    so they do not tint the whole excerpt. When the basemap cannot be
    fetched the excerpt is drawn on a blank background and flagged.
    """
    style = copy.deepcopy(style) if style is not None else load_style()
    w, h = georef.image_width_px, georef.image_height_px
    basemap = basemap or BlankBasemap(style["basemap"]["background"])
    no_basemap = isinstance(basemap, BlankBasemap)
    try:
        base = basemap.render(georef.extent, w, h)
    except (BasemapError, OSError) as exc:
        log.warning("basemap unavailable, drawing on blank background: %s", exc)
        base = BlankBasemap(style["basemap"]["background"]).render(georef.extent, w, h)
        no_basemap = True

    ext = georef.extent
    window = box(ext.min_lon, ext.min_lat, ext.max_lon, ext.max_lat)
    painter = _Painter(georef, style, base)
    drawn: list[str] = []
    # big features first so small ones sit on top
    order = sorted(features.items(), key=lambda kv: -kv[1].geometry.bbox.area_km2())
    for name, feat in order:
        shape = feat.geometry.shape
        if not shape.intersects(window):
            log.info("feature %s lies outside the excerpt", name)
            continue
        visible = shapely.intersection(shape, window)
        dim = feat.geometry.dimension
        if dim == 2:
            st = style["parent"] if name in parents else style["polygon"]
            for poly in _parts(shape):
                if poly.geom_type == "Polygon":
                    painter.polygon(poly, {**style["polygon"], **st}, filled=name not in parents)
            if name in parents:
                # a containing area usually covers the whole excerpt; label it in the corner
                painter.corner_labels.append((name, st["font_size"]))
            else:
                anchor = visible.representative_point()
                painter.label(georef.to_pixel(anchor.y, anchor.x), name, st["font_size"])
        elif dim == 1:
            st = style["line"]
            placed = False
            for ln in _parts(shape):
                painter.line(ln, st)
            for part in _parts(visible):
                if part.geom_type != "LineString":
                    continue
                for xy in _along(painter.px(part.coords), st["label_spacing_px"]):
                    painter.label(xy, name, st["font_size"])
                    placed = True
            if not placed:
                mid = visible.representative_point()
                painter.label(georef.to_pixel(mid.y, mid.x), name, st["font_size"])
        else:
            st = style["point"]
            for pt in _parts(shape):
                x, y = painter.point(pt, st)
                if painter.inside((x, y)):
                    painter.label((x + st["radius"] + 4, y), name, st["font_size"], anchor="lm")
        drawn.append(name)
    painter.grid()
    img = painter.finish()
    buf = io.BytesIO()
    img.save(buf, format="PNG", optimize=False)
    return MapExcerpt(
        image=buf.getvalue(),
        georef=georef,
        features_drawn=sorted(drawn),
        unresolved_names=list(unresolved),
        no_basemap=no_basemap,
    )
