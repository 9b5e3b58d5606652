"""Spatial relation triples driven by the indicator lexicon."""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Sequence

from .mentions import BARE_NOUNS, PlaceMention, mention_category

EXACT = "exact"
APPROXIMATE = "approximate"
COMPASS = ("N", "NE", "E", "SE", "S", "SW", "W", "NW")

_UNITS_KM = {
    "km": 1.0,
    "kms": 1.0,
    "kilometre": 1.0,
    "kilometres": 1.0,
    "kilometer": 1.0,
    "kilometers": 1.0,
    "m": 0.001,
    "metre": 0.001,
    "metres": 0.001,
    "meter": 0.001,
    "meters": 0.001,
    "mi": 1.609344,
    "mile": 1.609344,
    "miles": 1.609344,
}
_HEDGE = r"(?:ca\.?|c\.|circa|about|approx\.?|approximately|around|roughly|~)"
_NUMBER = r"\d+(?:\.\d+)?"
_UNIT = r"(?:kilometres|kilometers|kilometre|kilometer|kms|km|metres|meters|metre|meter|miles|mile|mi|m)"
DISTANCE_RE = (
    rf"(?:(?<![\w]){_HEDGE}\s*)?{_NUMBER}(?:\s*(?:-|–|to)\s*{_NUMBER})?\s*{_UNIT}(?![\w])"
)
_DISTANCE_PARSE = re.compile(
    rf"(?P<hedge>(?<![\w]){_HEDGE}\s*)?(?P<a>{_NUMBER})(?:\s*(?:-|–|to)\s*(?P<b>{_NUMBER}))?\s*(?P<unit>{_UNIT})(?![\w])",
    re.IGNORECASE,
)
_BEARING_WORDS = {
    "north": "N",
    "northern": "N",
    "south": "S",
    "southern": "S",
    "east": "E",
    "eastern": "E",
    "west": "W",
    "western": "W",
    "northeast": "NE",
    "north-east": "NE",
    "northwest": "NW",
    "north-west": "NW",
    "southeast": "SE",
    "south-east": "SE",
    "southwest": "SW",
    "south-west": "SW",
}
_BEARING_RE = (
    r"(?:(?-i:NNE|ENE|ESE|SSE|SSW|WSW|WNW|NNW|NE|NW|SE|SW|N|S|E|W)"
    r"|north-east|north-west|south-east|south-west|northeast|northwest|southeast|southwest"
    r"|northern|southern|eastern|western|north|south|east|west)"
)


class NotADistance(ValueError):
    """The phrase has no number with a recognised unit."""


@dataclass(frozen=True)
class RelationTriple:
    indicator: str
    relatum: PlaceMention
    locatum: PlaceMention | None = None
    distance_km: float | None = None
    bearing: str | None = None
    precision: str = EXACT

    def __post_init__(self) -> None:
        if not self.indicator:
            raise ValueError("indicator must be non-empty")
        if self.distance_km is not None and not self.distance_km > 0:
            raise ValueError("distance_km must be positive")
        if self.precision not in (EXACT, APPROXIMATE):
            raise ValueError(f"unknown precision {self.precision!r}")

    @property
    def degenerate(self) -> bool:
        return self.locatum is None

    def to_dict(self) -> dict:
        return {
            "locatum": self.locatum.to_dict() if self.locatum else None,
            "indicator": self.indicator,
            "relatum": self.relatum.to_dict(),
            "distance_km": self.distance_km,
            "bearing": self.bearing,
            "precision": self.precision,
        }

    @classmethod
    def from_dict(cls, data: dict) -> RelationTriple:
        loc = data.get("locatum")
        return cls(
            indicator=data["indicator"],
            relatum=PlaceMention.from_dict(data["relatum"]),
            locatum=PlaceMention.from_dict(loc) if loc else None,
            distance_km=data.get("distance_km"),
            bearing=data.get("bearing"),
            precision=data.get("precision", EXACT),
        )


def parse_distance_phrase(phrase: str) -> tuple[float, str]:
    """Distance in km and its precision from e.g. "Ca 2km" or "400m".

    A range ("2-3 km") gives its upper bound, marked approximate.
    """
    m = _DISTANCE_PARSE.search(phrase)
    if not m:
        raise NotADistance(f"no distance in {phrase!r}")
    factor = _UNITS_KM[m.group("unit").lower()]
    value = float(m.group("b") or m.group("a"))
    if value <= 0:
        raise NotADistance(f"non-positive distance in {phrase!r}")
    approximate = bool(m.group("hedge")) or m.group("b") is not None
    if not approximate:
        approximate = bool(re.search(rf"(?i)(?<![\w]){_HEDGE}\s*$", phrase[: m.start()]))
    return value * factor, APPROXIMATE if approximate else EXACT


@dataclass(frozen=True)
class _Pattern:
    source: str
    regex: re.Pattern
    binary: tuple[str, str] | None = None  # (trigger, connector) for {place} patterns


def _literal(token: str) -> str:
    esc = re.escape(token)
    if token.isupper():
        esc = f"(?-i:{esc})"
    return rf"(?<![\w-]){esc}(?![\w-])"


def compile_pattern(line: str) -> _Pattern:
    tokens = line.split()
    if "{place}" in tokens:
        lits = [t for t in tokens if t != "{place}"]
        if tokens.count("{place}") != 2 or len(lits) != 2 or tokens[0] == "{place}":
            raise ValueError(f"unsupported two-place pattern: {line!r}")
        return _Pattern(line, re.compile(_literal(lits[0]), re.IGNORECASE), (lits[0], lits[1]))
    parts = []
    for i, tok in enumerate(tokens):
        if tok == "{distance}":
            parts.append(rf"(?P<distance>{DISTANCE_RE})\s*")
        elif tok == "{distance?}":
            parts.append(rf"(?:(?P<distance>{DISTANCE_RE})\s*)?")
        elif tok == "{bearing?}":
            parts.append(rf"(?:(?P<bearing>(?<![\w-]){_BEARING_RE})\s+)?")
        elif tok.startswith("{"):
            raise ValueError(f"unknown placeholder {tok} in {line!r}")
        else:
            # placeholders swallow their trailing whitespace; literals need a gap
            after_literal = i > 0 and not tokens[i - 1].startswith("{")
            parts.append((r"\s+" if after_literal else "") + _literal(tok))
    if all(t.startswith("{") for t in tokens):
        raise ValueError(f"pattern without literal tokens: {line!r}")
    return _Pattern(line, re.compile("".join(parts), re.IGNORECASE))


def load_lexicon(text: str) -> list[_Pattern]:
    patterns = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            patterns.append(compile_pattern(line))
    return patterns


@lru_cache(maxsize=1)
def default_lexicon() -> tuple[_Pattern, ...]:
    text = resources.files(__package__).joinpath("lexicon.txt").read_text(encoding="utf-8")
    return tuple(load_lexicon(text))


_CLAUSE_BREAK = re.compile(r"[,;:()]|\.(?:\s|$)")


def _bare_nouns(text: str, mentions: Sequence[PlaceMention]) -> list[PlaceMention]:
    out = []
    for m in re.finditer(r"(?<![\w-])([a-z]+)(?![\w-])", text):
        if m.group(1) not in BARE_NOUNS:
            continue
        if any(n.start <= m.start() < n.end for n in mentions):
            continue
        out.append(PlaceMention(m.group(1), m.start(), m.end()))
    return out


def resolve_coreference(noun: PlaceMention, mentions: Sequence[PlaceMention]) -> PlaceMention:
    """Link a bare noun to the unique earlier named mention of the same type."""
    kind = BARE_NOUNS[noun.surface.lower()]
    earlier = {m.name for m in mentions if m.end <= noun.start and mention_category(m) == kind}
    if len(earlier) == 1:
        return PlaceMention(noun.surface, noun.start, noun.end, earlier.pop())
    return noun


def _bearing_of(indicator: str, bearing_group: str | None) -> str | None:
    word = bearing_group or indicator.split()[0]
    if word in COMPASS:
        return word
    if word.isupper() and re.fullmatch(r"[NSEW]{3}", word):
        return word  # free phrase, e.g. NNE
    return _BEARING_WORDS.get(word.lower())


def _next_place(text: str, places: Sequence[PlaceMention], pos: int) -> PlaceMention | None:
    for p in places:
        if p.start < pos:
            continue
        if _CLAUSE_BREAK.search(text[pos : p.start]):
            return None
        return p
    return None


def _locatum_before(
    text: str, mentions: Sequence[PlaceMention], pos: int, taken: Sequence[tuple[int, int]] = ()
) -> PlaceMention | None:
    for m in reversed(mentions):
        if m.end <= pos:
            if text[m.end : pos].strip() or any(s <= m.start and m.end <= e for s, e in taken):
                return None
            return m
    return None


def extract_relations(
    text: str, mentions: Sequence[PlaceMention], lexicon: Sequence[_Pattern] | None = None
) -> list[RelationTriple]:
    """One triple per recognised indicator (two for "between A and B")."""
    for m in mentions:
        m.check(text)
    lexicon = default_lexicon() if lexicon is None else lexicon
    mentions = sorted(mentions, key=lambda m: m.start)
    nouns = [resolve_coreference(n, mentions) for n in _bare_nouns(text, mentions)]
    places = sorted([*mentions, *nouns], key=lambda m: m.start)

    hits = []
    for pat in lexicon:
        for m in pat.regex.finditer(text):
            if m.end() > m.start():
                hits.append((m.start(), -(m.end() - m.start()), pat, m))
    hits.sort(key=lambda h: (h[0], h[1]))
    taken: list[tuple[int, int]] = []
    triples: list[RelationTriple] = []
    for start, _, pat, m in hits:
        end = m.end()
        if any(start < e and s < end for s, e in taken):
            continue
        # a match must not cut through a place name
        if any(p.start < start < p.end or p.start < end < p.end for p in mentions):
            continue
        if pat.binary:
            first = _next_place(text, places, end)
            if first is None:
                continue
            second = _next_place(text, places, first.end)
            if second is None or not re.search(_literal(pat.binary[1]), text[first.end : second.start], re.IGNORECASE):
                continue
            taken.append((start, second.end))
            locatum = _locatum_before(text, mentions, start, taken[:-1])
            for rel in (first, second):
                triples.append(RelationTriple(pat.binary[0].lower(), rel, locatum, precision=APPROXIMATE))
            continue
        relatum = _next_place(text, places, end)
        if relatum is None:
            continue
        taken.append((start, end))
        groups = m.groupdict()
        dist_text = groups.get("distance")
        indicator_start = m.start("distance") if dist_text else start
        if dist_text:
            indicator = text[m.end("distance") : end].strip()
            distance_km, precision = parse_distance_phrase(dist_text)
        else:
            indicator = text[start:end].strip()
            distance_km, precision = None, APPROXIMATE
        triples.append(
            RelationTriple(
                indicator=re.sub(r"\s+", " ", indicator),
                relatum=relatum,
                locatum=_locatum_before(text, mentions, indicator_start, taken[:-1]),
                distance_km=distance_km,
                bearing=_bearing_of(indicator, groups.get("bearing")),
                precision=precision,
            )
        )
    return triples
