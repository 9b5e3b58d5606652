"""Ask a vision-capable model for the grid cell of a described location."""

from __future__ import annotations

import json
import logging
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from ..geo import GeoPoint
from ..mapgen.grid import GridSpec
from .parsing import parse_cells, parse_coordinates
from .prompts import (
    BASELINES,
    DEFAULT_TEMPLATE,
    GRIDDED,
    TEMPLATES,
    PromptError,
    PromptTemplate,
    build_prompt,
    format_grid_size,
)
from .providers import (
    DEFAULT_MAX_TOKENS,
    DEFAULT_TEMPERATURE,
    ChatCompletionsProvider,
    LmmRequest,
    MockProvider,
    NoFixtureError,
    Provider,
    ProviderError,
    ResponseCache,
)

log = logging.getLogger(__name__)

__all__ = [
    "AuditLog",
    "BASELINES",
    "ChatCompletionsProvider",
    "CoordinatePrediction",
    "DEFAULT_TEMPLATE",
    "GRIDDED",
    "LmmRequest",
    "MockProvider",
    "NoFixtureError",
    "Prediction",
    "PromptError",
    "PromptTemplate",
    "Provider",
    "ProviderError",
    "ResponseCache",
    "TEMPLATES",
    "build_prompt",
    "format_grid_size",
    "georeference",
    "parse_cells",
    "parse_coordinates",
    "predictions_from_audit",
    "text_only_georeference",
]


@dataclass
class Prediction:
    cells: list[str]
    primary: str | None = None
    rationale: str = ""
    request_fingerprint: str = ""
    item_id: str | None = None
    template: str | None = None
    flagged: bool = False

    def __post_init__(self) -> None:
        self.cells = list(self.cells)
        if self.primary is None and self.cells:
            self.primary = self.cells[0]
        expected = self.cells[0] if self.cells else None
        if self.primary != expected:
            raise ValueError(f"primary {self.primary!r} must be the first cell ({expected!r})")

    def to_dict(self) -> dict:
        return {
            "item_id": self.item_id,
            "template": self.template,
            "cells": self.cells,
            "primary": self.primary,
            "rationale": self.rationale,
            "request_fingerprint": self.request_fingerprint,
            "flagged": self.flagged,
        }

    @classmethod
    def from_dict(cls, data: dict) -> Prediction:
        return cls(
            cells=list(data.get("cells") or []),
            primary=data.get("primary"),
            rationale=data.get("rationale", ""),
            request_fingerprint=data.get("request_fingerprint", ""),
            item_id=data.get("item_id"),
            template=data.get("template"),
            flagged=bool(data.get("flagged", False)),
        )


@dataclass
class CoordinatePrediction:
    point: GeoPoint | None
    rationale: str = ""
    request_fingerprint: str = ""
    item_id: str | None = None
    template: str | None = None
    flagged: bool = field(default=False)

    def __post_init__(self) -> None:
        if self.point is None:
            self.flagged = True

    def to_dict(self) -> dict:
        return {
            "item_id": self.item_id,
            "template": self.template,
            "point": self.point.to_dict() if self.point else None,
            "rationale": self.rationale,
            "request_fingerprint": self.request_fingerprint,
            "flagged": self.flagged,
        }

    @classmethod
    def from_dict(cls, data: dict) -> CoordinatePrediction:
        pt = data.get("point")
        return cls(
            point=GeoPoint.from_dict(pt) if pt else None,
            rationale=data.get("rationale", ""),
            request_fingerprint=data.get("request_fingerprint", ""),
            item_id=data.get("item_id"),
            template=data.get("template"),
            flagged=bool(data.get("flagged", False)),
        )


class AuditLog:
    """Append-only JSON-lines record of every prompt and response."""

    def __init__(self, path) -> None:
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def append(self, entry: dict) -> None:
        line = json.dumps(entry, ensure_ascii=False, sort_keys=True)
        with self._lock, self.path.open("a", encoding="utf-8") as fh:
            fh.write(line + "\n")

    def entries(self) -> list[dict]:
        if not self.path.exists():
            return []
        lines = self.path.read_text(encoding="utf-8").splitlines()
        return [json.loads(ln) for ln in lines if ln.strip()]


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _ask(provider: Provider, request: LmmRequest, cache: ResponseCache | None) -> str:
    fp = request.fingerprint
    if cache is not None:
        hit = cache.get(fp)
        if hit is not None:
            log.debug("cache hit for %s", request.item_id or fp[:12])
            return hit
    response = provider.complete(request)
    if cache is not None:
        cache.put(fp, response)
    return response


def georeference(
    description: str,
    excerpt,
    provider: Provider,
    template: PromptTemplate | str = DEFAULT_TEMPLATE,
    *,
    item_id: str | None = None,
    cache: ResponseCache | None = None,
    audit: AuditLog | None = None,
    temperature: float = DEFAULT_TEMPERATURE,
    max_output_tokens: int = DEFAULT_MAX_TOKENS,
) -> Prediction:
    """Predict grid cells for ``description`` on ``excerpt`` (a MapExcerpt).

    Provider failures propagate once the provider's own retries are spent.
    A response without any in-bounds label gives an empty, flagged Prediction.
    """
    template = PromptTemplate(template)
    if not template.gridded:
        raise PromptError(f"{template.value} is a text-only template")
    grid: GridSpec = excerpt.georef.grid
    prompt = build_prompt(template, description, cell_km=grid.cell_km)
    request = LmmRequest(
        prompt=prompt,
        model_id=provider.model_id,
        image=excerpt.image,
        temperature=temperature,
        max_output_tokens=max_output_tokens,
        item_id=item_id,
    )
    response = _ask(provider, request, cache)
    cells = parse_cells(response, grid)
    if not cells:
        log.warning("no grid label in response for %s", item_id)
    pred = Prediction(
        cells=cells,
        rationale=response,
        request_fingerprint=request.fingerprint,
        item_id=item_id,
        template=template.value,
        flagged=not cells,
    )
    if audit is not None:
        audit.append(
            {
                "item_id": item_id,
                "template": template.value,
                "model_id": request.model_id,
                "fingerprint": request.fingerprint,
                "prompt": prompt,
                "image_sha256": request.image_sha256,
                "response": response,
                "cells": cells,
                "timestamp": _now(),
            }
        )
    return pred


def text_only_georeference(
    description: str,
    provider: Provider,
    template: PromptTemplate | str = PromptTemplate.BASELINE_TEXT,
    region: str | None = None,
    country: str | None = None,
    *,
    item_id: str | None = None,
    cache: ResponseCache | None = None,
    audit: AuditLog | None = None,
    temperature: float = DEFAULT_TEMPERATURE,
    max_output_tokens: int = DEFAULT_MAX_TOKENS,
) -> CoordinatePrediction:
    """Coordinates from a text-only prompt (no map)."""
    template = PromptTemplate(template)
    if template not in BASELINES:
        raise PromptError(f"{template.value} is not a text-only template")
    prompt = build_prompt(template, description, region=region, country=country)
    request = LmmRequest(
        prompt=prompt,
        model_id=provider.model_id,
        temperature=temperature,
        max_output_tokens=max_output_tokens,
        item_id=item_id,
    )
    response = _ask(provider, request, cache)
    point = parse_coordinates(response)
    if point is None:
        log.warning("no coordinate pair in response for %s", item_id)
    if audit is not None:
        audit.append(
            {
                "item_id": item_id,
                "template": template.value,
                "model_id": request.model_id,
                "fingerprint": request.fingerprint,
                "prompt": prompt,
                "image_sha256": None,
                "response": response,
                "cells": [],
                "point": point.to_dict() if point else None,
                "timestamp": _now(),
            }
        )
    return CoordinatePrediction(
        point=point,
        rationale=response,
        request_fingerprint=request.fingerprint,
        item_id=item_id,
        template=template.value,
    )


def predictions_from_audit(entries, grids: dict[str, GridSpec] | None = None) -> dict:
    """Rebuild predictions (item id -> prediction) from audit-log entries.

    With ``grids`` the raw responses are re-parsed; otherwise the logged
    cells are used. The last entry for an item wins.
    """
    out: dict = {}
    for e in entries:
        item_id = e["item_id"]
        template = PromptTemplate(e["template"])
        if template in BASELINES:
            point = parse_coordinates(e["response"])
            out[item_id] = CoordinatePrediction(
                point, e["response"], e.get("fingerprint", ""), item_id, template.value
            )
            continue
        if grids is not None and item_id in grids:
            cells = parse_cells(e["response"], grids[item_id])
        else:
            cells = list(e.get("cells") or [])
        out[item_id] = Prediction(
            cells=cells,
            rationale=e["response"],
            request_fingerprint=e.get("fingerprint", ""),
            item_id=item_id,
            template=template.value,
            flagged=not cells,
        )
    return out
