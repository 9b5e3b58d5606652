"""Gazetteer sources (local GeoJSON file, HTTP feature service) and caching."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
import threading
import time
from pathlib import Path
from typing import Protocol, Sequence

import httpx

from .resolve import CandidateSet, GazetteerFeature, fold
from .geometry import Geometry, GeometryError

log = logging.getLogger(__name__)

DEFAULT_USER_AGENT = "gridgeoref/0.1 (natural-history georeferencing research)"
NOMINATIM_ENDPOINT = "https://nominatim.openstreetmap.org/search"
NOMINATIM_PARAMS = {
    "q": "{name}, {region}, {country}",
    "format": "geojson",
    "polygon_geojson": "1",
    "addressdetails": "1",
    "limit": "10",
}


class SourceError(RuntimeError):
    """One source could not answer a query."""


class GazetteerError(RuntimeError):
    """Every configured source failed."""

    def __init__(self, name: str, causes: dict[str, str]) -> None:
        self.causes = causes
        detail = "; ".join(f"{k}: {v}" for k, v in causes.items())
        super().__init__(f"all sources failed for {name!r}: {detail}")


class Source(Protocol):
    source_id: str
    authority_rank: int

    def query(self, name: str, country: str, region: str) -> list[GazetteerFeature]: ...


class RateLimiter:
    """Spaces calls at least ``1 / per_second`` seconds apart across threads."""

    def __init__(self, per_second: float) -> None:
        self.interval = 1.0 / per_second if per_second > 0 else 0.0
        self._lock = threading.Lock()
        self._next = 0.0

    def wait(self) -> None:
        if not self.interval:
            return
        with self._lock:
            now = time.monotonic()
            delay = self._next - now
            self._next = max(now, self._next) + self.interval
        if delay > 0:
            time.sleep(delay)


class LocalGazetteer:
    """A GeoJSON FeatureCollection on disk.

    Feature properties: ``name``, ``category``, ``country``, ``region``,
    ``authority_rank`` and optionally ``alt_names`` (a list).
    """

    def __init__(self, path, source_id: str = "local", authority_rank: int | None = None) -> None:
        self.path = Path(path)
        self.source_id = source_id
        doc = json.loads(self.path.read_text(encoding="utf-8"))
        if doc.get("type") != "FeatureCollection":
            raise ValueError(f"{self.path}: not a GeoJSON FeatureCollection")
        ranks = []
        self._index: dict[str, list[GazetteerFeature]] = {}
        for raw in doc.get("features", []):
            props = raw.get("properties") or {}
            rank = authority_rank if authority_rank is not None else int(props.get("authority_rank", 0))
            ranks.append(rank)
            feat = GazetteerFeature.from_geojson(raw, source=source_id, authority_rank=rank)
            for alias in [feat.name, *props.get("alt_names", [])]:
                self._index.setdefault(fold(alias), []).append(feat)
        self.authority_rank = authority_rank if authority_rank is not None else min(ranks, default=0)

    def query(self, name: str, country: str, region: str) -> list[GazetteerFeature]:
        return list(self._index.get(fold(name), []))


class HttpGazetteer:
    """A GeoJSON-returning search endpoint (Nominatim protocol by default)."""

    def __init__(
        self,
        source_id: str = "osm",
        endpoint: str = NOMINATIM_ENDPOINT,
        authority_rank: int = 1,
        params: dict[str, str] | None = None,
        rate_limit: float = 1.0,
        user_agent: str = DEFAULT_USER_AGENT,
        timeout: float = 30.0,
        client: httpx.Client | None = None,
    ) -> None:
        self.source_id = source_id
        self.endpoint = endpoint
        self.authority_rank = authority_rank
        self.params = dict(params or NOMINATIM_PARAMS)
        self.limiter = RateLimiter(rate_limit)
        self.client = client or httpx.Client(timeout=timeout, headers={"User-Agent": user_agent})

    def _params(self, name: str, country: str, region: str) -> dict[str, str]:
        out = {}
        for k, v in self.params.items():
            text = v.format(name=name, country=country or "", region=region or "")
            out[k] = ", ".join(p.strip() for p in text.split(",") if p.strip())
        return out

    def query(self, name: str, country: str, region: str) -> list[GazetteerFeature]:
        self.limiter.wait()
        try:
            resp = self.client.get(self.endpoint, params=self._params(name, country, region))
            resp.raise_for_status()
            doc = resp.json()
        except (httpx.HTTPError, ValueError) as exc:
            raise SourceError(f"{self.source_id}: {exc}") from exc
        out = []
        for raw in doc.get("features", []):
            props = raw.get("properties") or {}
            addr = props.get("address") or {}
            fname = props.get("name") or (props.get("display_name") or "").split(",")[0].strip()
            try:
                geom = Geometry.from_geojson(raw["geometry"])
            except (KeyError, GeometryError) as exc:
                log.warning("%s: skipping malformed feature for %r: %s", self.source_id, name, exc)
                continue
            if not fname:
                continue
            out.append(
                GazetteerFeature(
                    name=fname,
                    source=self.source_id,
                    authority_rank=self.authority_rank,
                    geometry=geom,
                    category=props.get("type") or props.get("category") or "",
                    country=addr.get("country"),
                    region=addr.get("state") or addr.get("region") or addr.get("county"),
                )
            )
        return out


class FeatureCache:
    """Content-addressed JSON files keyed by (source, name, country)."""

    def __init__(self, root) -> None:
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._locks: dict[str, threading.Lock] = {}
        self._guard = threading.Lock()

    @staticmethod
    def key(source_id: str, name: str, country: str) -> str:
        blob = json.dumps([source_id, fold(name), fold(country)], ensure_ascii=False)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def _path(self, key: str) -> Path:
        return self.root / key[:2] / f"{key}.json"

    def get(self, key: str) -> list[GazetteerFeature] | None:
        path = self._path(key)
        if not path.exists():
            return None
        doc = json.loads(path.read_text(encoding="utf-8"))
        return [GazetteerFeature.from_geojson(f) for f in doc["features"]]

    def put(self, key: str, features: Sequence[GazetteerFeature]) -> None:
        with self._guard:
            lock = self._locks.setdefault(key, threading.Lock())
        path = self._path(key)
        path.parent.mkdir(parents=True, exist_ok=True)
        doc = {"type": "FeatureCollection", "features": [f.to_geojson() for f in features]}
        with lock:
            fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                json.dump(doc, fh, ensure_ascii=False)
            os.replace(tmp, path)


def query_sources(
    name: str,
    country: str,
    region: str,
    sources: Sequence[Source],
    cache: FeatureCache | None = None,
    refresh: bool = False,
) -> CandidateSet:
    """Union of every source's candidates for ``name``.

    A failing source is logged and skipped; if all of them fail a
    :class:`GazetteerError` carries the per-source causes.
    """
    if not name:
        raise ValueError("name must be non-empty")
    if not sources:
        raise ValueError("at least one source must be configured")
    candidates: list[GazetteerFeature] = []
    causes: dict[str, str] = {}
    for src in sources:
        key = FeatureCache.key(src.source_id, name, country)
        found = None if (cache is None or refresh) else cache.get(key)
        if found is None:
            try:
                found = src.query(name, country, region)
            except (SourceError, OSError) as exc:
                log.warning("source %s failed for %r: %s", src.source_id, name, exc)
                causes[src.source_id] = str(exc)
                continue
            if cache is not None:
                cache.put(key, found)
        candidates.extend(found)
    if len(causes) == len(sources):
        raise GazetteerError(name, causes)
    return CandidateSet(name, candidates)
