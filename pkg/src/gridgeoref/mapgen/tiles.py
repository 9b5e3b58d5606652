"""Slippy-map tile basemaps and the offline blank basemap."""

from __future__ import annotations

import hashlib
import io
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import httpx
from PIL import Image

from ..gazetteer.sources import DEFAULT_USER_AGENT, RateLimiter
from ..geo import MERCATOR_RADIUS_M
from .grid import MapExtent

log = logging.getLogger(__name__)

TILE_SIZE = 256
DEFAULT_TILE_URL = "https://tile.openstreetmap.org/{z}/{x}/{y}.png"
MAX_ZOOM = 19
_WORLD_M = 2 * math.pi * MERCATOR_RADIUS_M


class BasemapError(RuntimeError):
    pass


class BlankBasemap:
    """Solid light background; needs no network and is byte-deterministic."""

    def __init__(self, color: str = "#f2efe9") -> None:
        self.color = color

    def render(self, extent: MapExtent, width: int, height: int) -> Image.Image:
        return Image.new("RGBA", (width, height), self.color)


def choose_zoom(extent: MapExtent, width_px: int) -> int:
    """Smallest zoom at which the extent spans at least ``width_px`` pixels."""
    x0, _, x1, _ = extent.projected()
    for z in range(MAX_ZOOM + 1):
        if (x1 - x0) / _WORLD_M * TILE_SIZE * 2**z >= width_px:
            return z
    return MAX_ZOOM


def _global_px(x: float, y: float, z: int) -> tuple[float, float]:
    scale = TILE_SIZE * 2**z / _WORLD_M
    return (x + _WORLD_M / 2) * scale, (_WORLD_M / 2 - y) * scale


class TileBasemap:
    """Raster tiles from a z/x/y URL template, cached on disk."""

    def __init__(
        self,
        url_template: str = DEFAULT_TILE_URL,
        cache_dir=None,
        user_agent: str = DEFAULT_USER_AGENT,
        max_workers: int = 4,
        rate_limit: float = 10.0,
        timeout: float = 30.0,
        client: httpx.Client | None = None,
    ) -> None:
        self.url_template = url_template
        self.cache_dir = Path(cache_dir) if cache_dir else None
        self.max_workers = max_workers
        self.limiter = RateLimiter(rate_limit)
        self.client = client or httpx.Client(timeout=timeout, headers={"User-Agent": user_agent})
        self._server = hashlib.sha256(url_template.encode()).hexdigest()[:16]

    def _cache_path(self, z: int, x: int, y: int) -> Path | None:
        if self.cache_dir is None:
            return None
        return self.cache_dir / self._server / str(z) / str(x) / f"{y}.png"

    def fetch_tile(self, z: int, x: int, y: int) -> Image.Image:
        path = self._cache_path(z, x, y)
        if path is not None and path.exists():
            return Image.open(path).convert("RGBA")
        self.limiter.wait()
        url = self.url_template.format(z=z, x=x, y=y)
        try:
            resp = self.client.get(url)
            resp.raise_for_status()
        except httpx.HTTPError as exc:
            raise BasemapError(f"tile {z}/{x}/{y}: {exc}") from exc
        data = resp.content
        if path is not None:
            path.parent.mkdir(parents=True, exist_ok=True)
            tmp = path.with_suffix(".tmp")
            tmp.write_bytes(data)
            tmp.replace(path)
        return Image.open(io.BytesIO(data)).convert("RGBA")

    def render(self, extent: MapExtent, width: int, height: int) -> Image.Image:
        z = choose_zoom(extent, width)
        x0, y0, x1, y1 = extent.projected()
        left, top = _global_px(x0, y1, z)
        right, bottom = _global_px(x1, y0, z)
        tx0, ty0 = int(left // TILE_SIZE), int(top // TILE_SIZE)
        tx1, ty1 = int(right // TILE_SIZE), int(bottom // TILE_SIZE)
        n = 2**z
        coords = [(tx, ty) for ty in range(ty0, ty1 + 1) for tx in range(tx0, tx1 + 1)]
        with ThreadPoolExecutor(max_workers=self.max_workers) as pool:
            tiles = list(pool.map(lambda c: self.fetch_tile(z, c[0] % n, c[1]), coords))
        mosaic = Image.new("RGBA", ((tx1 - tx0 + 1) * TILE_SIZE, (ty1 - ty0 + 1) * TILE_SIZE))
        for (tx, ty), tile in zip(coords, tiles):
            mosaic.paste(tile, ((tx - tx0) * TILE_SIZE, (ty - ty0) * TILE_SIZE))
        box = (
            left - tx0 * TILE_SIZE,
            top - ty0 * TILE_SIZE,
            right - tx0 * TILE_SIZE,
            bottom - ty0 * TILE_SIZE,
        )
        return mosaic.resize((width, height), Image.Resampling.LANCZOS, box=box)
