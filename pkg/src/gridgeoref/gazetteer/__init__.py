"""Place-name resolution against one or more gazetteer sources."""

from __future__ import annotations

import logging
from typing import Sequence

from .geometry import Geometry, GeometryError, contains, representative_point
from .resolve import (
    CandidateSet,
    GazetteerFeature,
    conflate,
    disambiguate,
    filter_by_region,
    fold,
)
from .sources import (
    FeatureCache,
    GazetteerError,
    HttpGazetteer,
    LocalGazetteer,
    RateLimiter,
    Source,
    SourceError,
    query_sources,
)

log = logging.getLogger(__name__)

__all__ = [
    "CandidateSet",
    "FeatureCache",
    "GazetteerError",
    "GazetteerFeature",
    "Geometry",
    "GeometryError",
    "HttpGazetteer",
    "LocalGazetteer",
    "RateLimiter",
    "Source",
    "SourceError",
    "conflate",
    "contains",
    "disambiguate",
    "filter_by_region",
    "fold",
    "query_sources",
    "representative_point",
    "resolve_places",
]


def resolve_places(
    names: Sequence[str],
    country: str,
    region: str,
    sources: Sequence[Source],
    cache: FeatureCache | None = None,
    refresh: bool = False,
) -> tuple[dict[str, GazetteerFeature], list[str]]:
    """Resolve every name to one preferred feature.

    Candidates are region-filtered, disambiguated jointly within each source
    (one feature per name per source), then conflated across sources.
    Returns ``(features by name, unresolved names)``.
    """
    filtered: dict[str, CandidateSet] = {}
    for name in names:
        cands = query_sources(name, country, region, sources, cache=cache, refresh=refresh)
        filtered[name] = filter_by_region(cands, country, region)

    per_name: dict[str, list[GazetteerFeature]] = {n: [] for n in names}
    for src in sources:
        sets = []
        for name in names:
            own = [f for f in filtered[name].candidates if f.source == src.source_id]
            if own:
                sets.append(CandidateSet(name, own))
        for name, feat in disambiguate(sets).items():
            per_name[name].append(feat)

    resolved = {n: conflate(fs) for n, fs in per_name.items() if fs}
    unresolved = [n for n in names if n not in resolved]
    if unresolved:
        log.info("unresolved place names: %s", ", ".join(unresolved))
    return resolved, unresolved
