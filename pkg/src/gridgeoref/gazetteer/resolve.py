"""Candidate filtering, spatial-minimality disambiguation and conflation."""

from __future__ import annotations

import itertools
import logging
import math
import unicodedata
from dataclasses import dataclass, field, replace
from typing import Sequence

from ..geo import GeoPoint, haversine_km, spherical_mean
from .geometry import Geometry, representative_point

log = logging.getLogger(__name__)

# above this many combinations each candidate list is pruned before search
MAX_COMBINATIONS = 10_000
PRUNE_TO = 10


@dataclass(frozen=True)
class GazetteerFeature:
    name: str
    source: str
    authority_rank: int
    geometry: Geometry
    category: str = ""
    country: str | None = None
    region: str | None = None

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("feature name must be non-empty")
        if self.authority_rank < 0:
            raise ValueError("authority_rank must be >= 0")

    def to_geojson(self) -> dict:
        return {
            "type": "Feature",
            "geometry": self.geometry.to_geojson(),
            "properties": {
                "name": self.name,
                "source": self.source,
                "authority_rank": self.authority_rank,
                "category": self.category,
                "country": self.country,
                "region": self.region,
            },
        }

    @classmethod
    def from_geojson(cls, data: dict, source: str | None = None, authority_rank: int | None = None):
        props = data.get("properties") or {}
        return cls(
            name=props["name"],
            source=source if source is not None else props.get("source", ""),
            authority_rank=int(authority_rank if authority_rank is not None else props.get("authority_rank", 0)),
            geometry=Geometry.from_geojson(data["geometry"]),
            category=props.get("category") or "",
            country=props.get("country"),
            region=props.get("region"),
        )


@dataclass
class CandidateSet:
    query_name: str
    candidates: list[GazetteerFeature] = field(default_factory=list)
    unfiltered: bool = False


def fold(s: str | None) -> str:
    """Case- and diacritic-insensitive form of a name."""
    if not s:
        return ""
    decomposed = unicodedata.normalize("NFKD", s)
    return "".join(c for c in decomposed if not unicodedata.combining(c)).casefold().strip()


def filter_by_region(cands: CandidateSet, country: str, region: str) -> CandidateSet:
    """Keep candidates in the collection region, falling back to country only."""
    if not cands.candidates:
        return replace(cands, candidates=[])
    c, r = fold(country), fold(region)
    both = [f for f in cands.candidates if fold(f.country) == c and fold(f.region) == r]
    if both:
        return replace(cands, candidates=both, unfiltered=False)
    country_only = [f for f in cands.candidates if fold(f.country) == c]
    if country_only:
        return replace(cands, candidates=country_only, unfiltered=False)
    return replace(cands, candidates=list(cands.candidates), unfiltered=True)


def _total_pairwise(points: Sequence[GeoPoint]) -> float:
    return sum(haversine_km(a, b) for a, b in itertools.combinations(points, 2))


def _prune(sets: Sequence[CandidateSet], points: dict, anchor: GeoPoint | None) -> list[list[int]]:
    singles = [points[(i, 0)] for i, s in enumerate(sets) if len(s.candidates) == 1]
    if singles:
        anchor = spherical_mean(singles)
    elif anchor is None:
        anchor = spherical_mean(points.values())
    keep = []
    for i, s in enumerate(sets):
        order = sorted(range(len(s.candidates)), key=lambda j: (haversine_km(points[(i, j)], anchor), j))
        keep.append(sorted(order[:PRUNE_TO]))
    return keep


def disambiguate(
    sets: Sequence[CandidateSet],
    anchor: GeoPoint | None = None,
    max_combinations: int = MAX_COMBINATIONS,
) -> dict[str, GazetteerFeature]:
    """Pick one candidate per name so the chosen set is spatially tightest.

    The objective is the summed pairwise great-circle distance between
    representative points. Ties go to the lower summed authority rank, then
    the lexicographically smaller source ids, then earlier-listed candidates.
    ``anchor`` (e.g. a region centroid) guides pruning of huge searches when
    no name has a single candidate.
    """
    for s in sets:
        if not s.candidates:
            raise ValueError(f"no candidates for {s.query_name!r}")
    if not sets:
        return {}
    points = {
        (i, j): representative_point(f.geometry)
        for i, s in enumerate(sets)
        for j, f in enumerate(s.candidates)
    }
    choices = [list(range(len(s.candidates))) for s in sets]
    if math.prod(len(c) for c in choices) > max_combinations:
        choices = _prune(sets, points, anchor)
        log.info("pruned disambiguation search to %d combinations", math.prod(len(c) for c in choices))

    best_key, best = None, None
    for combo in itertools.product(*choices):
        feats = [sets[i].candidates[j] for i, j in enumerate(combo)]
        total = _total_pairwise([points[(i, j)] for i, j in enumerate(combo)])
        key = (
            round(total, 6),  # millimetre resolution so symmetric layouts tie
            sum(f.authority_rank for f in feats),
            tuple(f.source for f in feats),
            combo,
        )
        if best_key is None or key < best_key:
            best_key, best = key, feats
    return {s.query_name: f for s, f in zip(sets, best)}


def conflate(per_source: Sequence[GazetteerFeature]) -> GazetteerFeature:
    """Prefer areas over lines over points, then authority, then larger extent."""
    if not per_source:
        raise ValueError("conflate needs at least one feature")
    ranked = sorted(
        enumerate(per_source),
        key=lambda jf: (
            -jf[1].geometry.dimension,
            jf[1].authority_rank,
            -jf[1].geometry.bbox.area_km2(),
            jf[0],
        ),
    )
    return ranked[0][1]
