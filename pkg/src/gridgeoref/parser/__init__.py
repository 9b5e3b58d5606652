"""Locality description parsing: place names, spatial relations, containment."""

from __future__ import annotations

from dataclasses import dataclass, field

from .containment import check_acyclic, detect_containment
from .mentions import (
    AnnotationExtractor,
    HeuristicExtractor,
    MentionError,
    PlaceMention,
    PlaceNameExtractor,
    extract_place_names,
    is_bare_reference,
    mention_category,
)
from .relations import (
    APPROXIMATE,
    EXACT,
    NotADistance,
    RelationTriple,
    extract_relations,
    parse_distance_phrase,
)

__all__ = [
    "APPROXIMATE",
    "EXACT",
    "AnnotationExtractor",
    "HeuristicExtractor",
    "MentionError",
    "NotADistance",
    "ParseResult",
    "PlaceMention",
    "PlaceNameExtractor",
    "RelationTriple",
    "detect_containment",
    "extract_place_names",
    "extract_relations",
    "is_bare_reference",
    "mention_category",
    "parse",
    "parse_distance_phrase",
]


@dataclass
class ParseResult:
    mentions: list[PlaceMention]
    triples: list[RelationTriple] = field(default_factory=list)
    containment: list[tuple[PlaceMention, PlaceMention]] = field(default_factory=list)

    def __post_init__(self) -> None:
        known = set(self.mentions)
        for t in self.triples:
            if t.relatum not in known:
                raise ValueError(f"relatum {t.relatum.surface!r} is not among the mentions")
        check_acyclic(self.containment)

    def place_names(self) -> list[str]:
        """Distinct names worth looking up, in text order."""
        out: list[str] = []
        for m in self.mentions:
            if is_bare_reference(m) and m.normalized is None:
                continue
            if m.name not in out:
                out.append(m.name)
        return out

    def to_dict(self) -> dict:
        return {
            "mentions": [m.to_dict() for m in self.mentions],
            "triples": [t.to_dict() for t in self.triples],
            "containment": [[p.to_dict(), c.to_dict()] for p, c in self.containment],
        }

    @classmethod
    def from_dict(cls, data: dict) -> ParseResult:
        return cls(
            mentions=[PlaceMention.from_dict(m) for m in data["mentions"]],
            triples=[RelationTriple.from_dict(t) for t in data.get("triples", [])],
            containment=[
                (PlaceMention.from_dict(p), PlaceMention.from_dict(c))
                for p, c in data.get("containment", [])
            ],
        )


def parse(text: str, annotation: dict | None = None) -> ParseResult:
    """Parse a locality description.

    ``annotation`` is a manual sidecar with ``mentions`` and optionally
    ``triples`` and ``containment`` in the :meth:`ParseResult.to_dict`
    shape; any part it supplies replaces the automatic one.
    """
    override = None
    if annotation is not None:
        override = [PlaceMention.from_dict(m) for m in annotation["mentions"]]
    mentions = extract_place_names(text, override)
    if annotation is not None and "triples" in annotation:
        triples = [RelationTriple.from_dict(t) for t in annotation["triples"]]
    else:
        triples = extract_relations(text, mentions)
    if annotation is not None and "containment" in annotation:
        containment = [
            (PlaceMention.from_dict(p), PlaceMention.from_dict(c)) for p, c in annotation["containment"]
        ]
    else:
        containment = detect_containment(mentions, text=text) if mentions else []
    all_mentions = list(mentions)
    for t in triples:
        for m in (t.relatum, t.locatum):
            if m is not None and m not in all_mentions:
                m.check(text)
                all_mentions.append(m)
    all_mentions.sort(key=lambda m: (m.start, m.end))
    return ParseResult(all_mentions, triples, containment)
