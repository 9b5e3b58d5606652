"""Place-name mentions and the two shipped extractors.

``HeuristicExtractor`` finds runs of capitalised words ("Bay of Islands
County", "L. Wairarapa", "J.K. Donald Wildlife Reserve") and drops runs that
are only hedges, compass words or generic feature words. ``AnnotationExtractor``
returns manually annotated mentions after checking their spans.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Protocol, Sequence


class MentionError(ValueError):
    """An annotated mention does not index its text correctly."""


@dataclass(frozen=True)
class PlaceMention:
    surface: str
    start: int
    end: int
    normalized: str | None = None

    @property
    def name(self) -> str:
        """Canonical name used for gazetteer lookup."""
        return self.normalized or self.surface

    def check(self, text: str) -> None:
        if not (0 <= self.start < self.end <= len(text)):
            raise MentionError(
                f"mention {self.surface!r}: span ({self.start}, {self.end}) out of bounds"
            )
        if text[self.start : self.end] != self.surface:
            raise MentionError(
                f"mention {self.surface!r}: text at span is {text[self.start:self.end]!r}"
            )

    def to_dict(self) -> dict:
        d = {"surface": self.surface, "start": self.start, "end": self.end}
        if self.normalized is not None:
            d["normalized"] = self.normalized
        return d

    @classmethod
    def from_dict(cls, data: dict) -> PlaceMention:
        return cls(data["surface"], int(data["start"]), int(data["end"]), data.get("normalized"))


# head nouns at the end of a name, e.g. "Elizabeth Burn", "Bay of Islands County"
SUFFIX_CUES = {
    "lake": "lake",
    "lagoon": "lake",
    "tarn": "lake",
    "river": "river",
    "stream": "river",
    "burn": "river",
    "creek": "river",
    "brook": "river",
    "reserve": "reserve",
    "park": "reserve",
    "sanctuary": "reserve",
    "forest": "forest",
    "point": "point",
    "head": "point",
    "bay": "bay",
    "harbour": "bay",
    "inlet": "bay",
    "sound": "bay",
    "county": "county",
    "district": "district",
    "region": "region",
    "island": "island",
    "islands": "island",
    "peak": "peak",
    "hill": "peak",
    "range": "range",
    "ridge": "range",
    "saddle": "saddle",
    "pass": "saddle",
    "valley": "valley",
    "gorge": "valley",
    "beach": "beach",
    "road": "road",
    "highway": "road",
    "track": "road",
}
# leading words, e.g. "Mount George", "L. Wairarapa"
PREFIX_CUES = {
    "lake": "lake",
    "l.": "lake",
    "mount": "peak",
    "mt": "peak",
    "mt.": "peak",
    "cape": "point",
    "port": "bay",
    "bay": "bay",
    "isle": "island",
    "glen": "valley",
}
ABBREVIATIONS = {"L.": "Lake", "Mt": "Mount", "Mt.": "Mount", "Pt": "Point", "Pt.": "Point"}

# lowercase generic nouns that may corefer with an earlier named feature
BARE_NOUNS = {
    "lake": "lake",
    "lagoon": "lake",
    "river": "river",
    "stream": "river",
    "burn": "river",
    "creek": "river",
    "peak": "peak",
    "summit": "peak",
    "mountain": "peak",
    "mount": "peak",
    "hill": "peak",
    "reserve": "reserve",
    "bay": "bay",
    "harbour": "bay",
    "island": "island",
    "forest": "forest",
    "range": "range",
    "ridge": "range",
    "valley": "valley",
}

ADMIN_RANK = {"country": 6, "island": 5, "region": 5, "county": 4, "district": 4}
LINEAR_CATEGORIES = frozenset({"river", "road"})

COMPASS_WORDS = frozenset(
    "n s e w ne nw se sw nne ene ese sse ssw wsw wnw nnw north south east west "
    "northern southern eastern western central upper lower mid".split()
)
_STOP = frozenset(
    "ca c circa about approx approximately near nr between and on in at of the from "
    "to by along above below behind off opposite beside towards toward up down via "
    "collected coll just beyond past".split()
)
_GENERIC = frozenset(
    "roadside track summit slope slopes cliffs cliff bush scrub coast shore beach "
    "forest swamp wetland gully stream river lake mount peak hill reserve point "
    "bay head mouth side end edge ridge saddle".split()
)
# allowed lowercase joiners inside a name, only after one of these words
_JOINER_HEADS = frozenset("bay isle gulf cape port sound firth lake mouth head vale".split())
_JOINERS = frozenset({"of", "the"})
_KEEP_DOT = frozenset({"mt", "st", "pt", "mtn", "rd", "co", "is", "hd", "l"})

_TOKEN_RE = re.compile(r"[^\W\d_](?:[\w'’\-]|\.(?=\w))*\.?")


@dataclass(frozen=True)
class _Tok:
    text: str
    start: int
    end: int

    @property
    def key(self) -> str:
        return self.text.rstrip(".").lower()


def _tokens(text: str) -> list[_Tok]:
    out = []
    for m in _TOKEN_RE.finditer(text):
        word, start, end = m.group(), m.start(), m.end()
        if word.endswith("."):
            core = word[:-1]
            if not (len(core) <= 2 or "." in core or core.lower() in _KEEP_DOT):
                word, end = core, end - 1
        out.append(_Tok(word, start, end))
    return out


def _is_cap(tok: _Tok) -> bool:
    return tok.text[0].isupper() and tok.key not in _STOP


def _runs(text: str) -> list[list[_Tok]]:
    toks = _tokens(text)
    runs: list[list[_Tok]] = []
    cur: list[_Tok] = []
    i = 0
    while i < len(toks):
        tok = toks[i]
        adjacent = bool(cur) and text[cur[-1].end : tok.start].isspace()
        if _is_cap(tok) and (not cur or adjacent):
            cur.append(tok)
            i += 1
            continue
        # "Bay of Islands", "Mouth of the Waikato": joiners between capitalised words
        if cur and adjacent and tok.key in _JOINERS and cur[-1].key in _JOINER_HEADS:
            j = i
            while j < len(toks) and toks[j].key in _JOINERS and text[toks[j - 1].end : toks[j].start].isspace():
                j += 1
            if j < len(toks) and _is_cap(toks[j]) and text[toks[j - 1].end : toks[j].start].isspace():
                cur.extend(toks[i:j])
                i = j
                continue
        if cur:
            runs.append(cur)
            cur = []
        if _is_cap(tok):
            continue  # re-examined as the start of a new run
        i += 1
    if cur:
        runs.append(cur)
    return runs


def _keep_run(run: Sequence[_Tok]) -> bool:
    keys = [t.key for t in run]
    if all(k in COMPASS_WORDS for k in keys):
        return False
    if all(k in _GENERIC or k in PREFIX_CUES or k in SUFFIX_CUES for k in keys):
        return False
    if all(len(t.text.rstrip(".")) == 1 for t in run):
        return False
    return True


def normalize_surface(surface: str) -> str | None:
    """Expand leading abbreviations ("L. Wairarapa" -> "Lake Wairarapa")."""
    words = surface.split()
    if words and words[0] in ABBREVIATIONS:
        return " ".join([ABBREVIATIONS[words[0]], *words[1:]])
    return None


def mention_category(mention: PlaceMention) -> str | None:
    """Feature type implied by cue words in the mention's surface."""
    words = mention.surface.split()
    if not words:
        return None
    last = words[-1].lower()
    if len(words) > 1 and last in SUFFIX_CUES:
        return SUFFIX_CUES[last]
    first = words[0].lower()
    if len(words) > 1 and first in PREFIX_CUES:
        return PREFIX_CUES[first]
    if first in COMPASS_WORDS and len(words) > 1:
        # "North Canterbury", "Central Otago"
        return "region"
    return None


def admin_rank(mention: PlaceMention) -> int:
    return ADMIN_RANK.get(mention_category(mention) or "", 0)


def is_bare_reference(mention: PlaceMention) -> bool:
    """True for a generic noun ("lake") standing in for a named place."""
    return mention.surface.lower() in BARE_NOUNS and mention.surface[:1].islower()


class PlaceNameExtractor(Protocol):
    def extract(self, text: str) -> list[PlaceMention]: ...


class HeuristicExtractor:
    """Capitalised-phrase extractor with feature-type cue words."""

    def extract(self, text: str) -> list[PlaceMention]:
        out = []
        for run in _runs(text):
            if not _keep_run(run):
                continue
            # strip a leading compass abbreviation: "NE Puketi" -> "Puketi"
            while len(run) > 1 and run[0].key in COMPASS_WORDS and run[0].text.isupper():
                run = run[1:]
            start, end = run[0].start, run[-1].end
            surface = text[start:end]
            out.append(PlaceMention(surface, start, end, normalize_surface(surface)))
        return out


class AnnotationExtractor:
    """Returns manually annotated mentions verbatim after span validation."""

    def __init__(self, mentions: Sequence[PlaceMention]) -> None:
        self.mentions = list(mentions)

    def extract(self, text: str) -> list[PlaceMention]:
        for m in self.mentions:
            m.check(text)
        ordered = sorted(self.mentions, key=lambda m: (m.start, m.end))
        for a, b in zip(ordered, ordered[1:]):
            if b.start < a.end:
                raise MentionError(f"mentions {a.surface!r} and {b.surface!r} overlap")
        return ordered


def extract_place_names(text: str, override: Sequence[PlaceMention] | None = None) -> list[PlaceMention]:
    """Place mentions in ``text``; manual ``override`` wins when given."""
    if not text or not text.strip():
        raise ValueError("text must be non-empty")
    extractor: PlaceNameExtractor
    extractor = AnnotationExtractor(override) if override is not None else HeuristicExtractor()
    return extractor.extract(text)
