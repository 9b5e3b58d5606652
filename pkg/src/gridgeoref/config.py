"""Pipeline configuration (one JSON document).

Relative paths are resolved against the config file's directory. API keys
never appear here: a provider names the environment variable holding its key.

Example::

    {
      "sources": [
        {"type": "local", "path": "gazetteer.geojson", "source_id": "linz", "authority_rank": 0},
        {"type": "http", "source_id": "osm", "authority_rank": 1, "rate_limit": 1.0}
      ],
      "tiles": {"url": "https://tile.openstreetmap.org/{z}/{x}/{y}.png"},
      "providers": {
        "openai": {"type": "chat_completions", "endpoint": "https://api.openai.com/v1/chat/completions",
                   "model_id": "gpt-4o-2024-08-06", "api_key_env": "OPENAI_API_KEY"}
      },
      "default_provider": "openai"
    }
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .gazetteer import FeatureCache, HttpGazetteer, LocalGazetteer, Source
from .gazetteer.sources import DEFAULT_USER_AGENT, NOMINATIM_ENDPOINT
from .georeferencer import (
    DEFAULT_TEMPLATE,
    ChatCompletionsProvider,
    MockProvider,
    PromptTemplate,
    Provider,
    ResponseCache,
)
from .mapgen import BUFFER_FACTOR, BlankBasemap, TileBasemap, load_style

DEFAULT_MIN_LENGTH = 60


class ConfigError(ValueError):
    pass


@dataclass
class PipelineConfig:
    base_dir: Path
    sources: list[dict] = field(default_factory=list)
    tiles: dict | None = None
    style: Path | None = None
    max_cells_per_axis: int = 12
    cells_across: int = 10
    image_width_px: int = 1024
    aspect_ratio: float = 1.0
    clip_lines: bool = True
    providers: dict[str, dict] = field(default_factory=dict)
    default_provider: str | None = None
    template: PromptTemplate = DEFAULT_TEMPLATE
    cache_dir: Path | None = None
    annotations_dir: Path | None = None
    buffer_factor: float = BUFFER_FACTOR
    min_length: int = DEFAULT_MIN_LENGTH
    workers: int = 4
    user_agent: str = DEFAULT_USER_AGENT
    offline: bool = False
    refresh_cache: bool = False

    def _path(self, value) -> Path:
        p = Path(value)
        return p if p.is_absolute() else (self.base_dir / p)

    def validate(self) -> None:
        positive = {
            "max_cells_per_axis": self.max_cells_per_axis,
            "cells_across": self.cells_across,
            "image_width_px": self.image_width_px,
            "aspect_ratio": self.aspect_ratio,
            "buffer_factor": self.buffer_factor,
            "workers": self.workers,
        }
        for name, value in positive.items():
            if not value > 0:
                raise ConfigError(f"{name} must be positive, got {value!r}")
        if self.min_length < 0:
            raise ConfigError("min_length must be >= 0")
        if not self.sources:
            raise ConfigError("at least one gazetteer source is required")
        for i, src in enumerate(self.sources):
            kind = src.get("type")
            if kind not in ("local", "http"):
                raise ConfigError(f"sources[{i}]: unknown type {kind!r}")
            if kind == "local":
                if "path" not in src:
                    raise ConfigError(f"sources[{i}]: local source needs a path")
                if not self._path(src["path"]).exists():
                    raise ConfigError(f"sources[{i}]: {self._path(src['path'])} does not exist")
        if self.style is not None and not self.style.exists():
            raise ConfigError(f"style file {self.style} does not exist")
        if self.annotations_dir is not None and not self.annotations_dir.is_dir():
            raise ConfigError(f"annotations directory {self.annotations_dir} does not exist")
        for name, prov in self.providers.items():
            kind = prov.get("type")
            if kind == "mock":
                fx = prov.get("fixtures")
                if isinstance(fx, str) and not self._path(fx).exists():
                    raise ConfigError(f"provider {name}: fixture file {self._path(fx)} does not exist")
            elif kind == "chat_completions":
                for key in ("endpoint", "model_id"):
                    if not prov.get(key):
                        raise ConfigError(f"provider {name}: missing {key}")
                if "api_key" in prov:
                    raise ConfigError(f"provider {name}: put the key in an environment variable, not the config")
            else:
                raise ConfigError(f"provider {name}: unknown type {kind!r}")
        if self.default_provider is not None and self.default_provider not in self.providers:
            raise ConfigError(f"default_provider {self.default_provider!r} is not configured")

    # -- builders -----------------------------------------------------------

    def build_sources(self) -> list[Source]:
        out: list[Source] = []
        for src in self.sources:
            if src["type"] == "local":
                out.append(
                    LocalGazetteer(
                        self._path(src["path"]),
                        source_id=src.get("source_id", "local"),
                        authority_rank=src.get("authority_rank"),
                    )
                )
            elif not self.offline:
                out.append(
                    HttpGazetteer(
                        source_id=src.get("source_id", "osm"),
                        endpoint=src.get("endpoint", NOMINATIM_ENDPOINT),
                        authority_rank=int(src.get("authority_rank", 1)),
                        params=src.get("params"),
                        rate_limit=float(src.get("rate_limit", 1.0)),
                        user_agent=src.get("user_agent", self.user_agent),
                    )
                )
        if not out:
            raise ConfigError("no usable gazetteer source (offline mode disables HTTP sources)")
        return out

    def feature_cache(self) -> FeatureCache | None:
        return FeatureCache(self.cache_dir / "gazetteer") if self.cache_dir else None

    def response_cache(self) -> ResponseCache | None:
        return ResponseCache(self.cache_dir / "responses") if self.cache_dir else None

    def build_basemap(self):
        if self.offline or not self.tiles:
            return None
        return TileBasemap(
            url_template=self.tiles.get("url", "https://tile.openstreetmap.org/{z}/{x}/{y}.png"),
            cache_dir=self.cache_dir / "tiles" if self.cache_dir else None,
            user_agent=self.tiles.get("user_agent", self.user_agent),
            max_workers=int(self.tiles.get("max_workers", 4)),
            rate_limit=float(self.tiles.get("rate_limit", 10.0)),
        )

    def load_style(self) -> dict:
        return load_style(self.style)

    def blank_basemap(self) -> BlankBasemap:
        return BlankBasemap(self.load_style()["basemap"]["background"])

    def build_provider(self, name: str | None = None) -> Provider:
        name = name or self.default_provider
        if name is None:
            raise ConfigError("no provider selected and no default_provider configured")
        if name not in self.providers:
            raise ConfigError(f"provider {name!r} is not configured")
        prov = self.providers[name]
        if prov["type"] == "mock":
            fx = prov.get("fixtures", {})
            if isinstance(fx, str):
                return MockProvider.from_file(self._path(fx), prov.get("model_id", "mock"))
            return MockProvider(fx, prov.get("model_id", "mock"))
        if self.offline:
            raise ConfigError(f"provider {name!r} needs the network but --offline is set")
        return ChatCompletionsProvider(
            endpoint=prov["endpoint"],
            model_id=prov["model_id"],
            api_key_env=prov.get("api_key_env", "OPENAI_API_KEY"),
            max_retries=int(prov.get("max_retries", 4)),
            rate_limit=float(prov.get("rate_limit", 0.0)),
        )


def load_config(path, **overrides) -> PipelineConfig:
    """Read and validate a config file; ``overrides`` that are not None win."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError(f"config file {path} not found") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return config_from_dict(doc, path.resolve().parent, **overrides)


def config_from_dict(doc: dict, base_dir, **overrides) -> PipelineConfig:
    base_dir = Path(base_dir)
    known = {
        "sources", "tiles", "style", "grid", "image", "clip_lines", "providers", "default_provider",
        "template", "cache_dir", "annotations_dir", "buffer_factor", "min_length", "workers", "user_agent",
    }
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    grid = doc.get("grid") or {}
    image = doc.get("image") or {}
    try:
        cfg = PipelineConfig(
            base_dir=base_dir,
            sources=list(doc.get("sources") or []),
            tiles=doc.get("tiles"),
            max_cells_per_axis=int(grid.get("max_cells_per_axis", 12)),
            cells_across=int(grid.get("cells_across", 10)),
            image_width_px=int(image.get("width_px", 1024)),
            aspect_ratio=float(image.get("aspect_ratio", 1.0)),
            clip_lines=bool(doc.get("clip_lines", True)),
            providers=dict(doc.get("providers") or {}),
            default_provider=doc.get("default_provider"),
            template=PromptTemplate(doc.get("template", DEFAULT_TEMPLATE.value)),
            buffer_factor=float(doc.get("buffer_factor", BUFFER_FACTOR)),
            min_length=int(doc.get("min_length", DEFAULT_MIN_LENGTH)),
            workers=int(doc.get("workers", 4)),
            user_agent=doc.get("user_agent", DEFAULT_USER_AGENT),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    for key in ("style", "cache_dir", "annotations_dir"):
        if doc.get(key):
            setattr(cfg, key, cfg._path(doc[key]))
    for key, value in overrides.items():
        if value is not None:
            if not hasattr(cfg, key):
                raise ConfigError(f"unknown override {key}")
            setattr(cfg, key, PromptTemplate(value) if key == "template" else value)
    cfg.validate()
    return cfg
