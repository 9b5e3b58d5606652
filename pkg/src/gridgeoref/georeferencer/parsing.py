"""Pull grid labels and coordinate pairs out of free-form model responses."""

from __future__ import annotations

import re

from ..geo import GeoPoint
from ..mapgen.grid import GridError, GridSpec, index_for_label

# a label is one or two capital letters then a row number, not glued to other word characters
_LABEL_TOKEN = re.compile(r"(?<![A-Za-z0-9])([A-Z]{1,2})([1-9][0-9]?)(?![A-Za-z0-9])")

_NUM = r"[-+−]?\d{1,3}(?:\.\d+)?"
_HEMI_PAIR = re.compile(
    rf"({_NUM})\s*°?\s*([NSns])\b[\s,;/]*({_NUM})\s*°?\s*([EWew])\b"
)
_NAMED_PAIR = re.compile(
    rf"\b(?:lat(?:itude)?)\b\s*[:=]?\s*({_NUM})\s*°?\s*([NSns])?\b.{{0,20}}?"
    rf"\b(?:lon(?:gitude)?|lng)\b\s*[:=]?\s*({_NUM})\s*°?\s*([EWew])?\b",
    re.IGNORECASE | re.DOTALL,
)
_SIGNED_PAIR = re.compile(rf"(?<![\w.])({_NUM})\s*°?\s*,\s*({_NUM})\s*°?(?![\w.])")


def parse_cells(response: str, grid: GridSpec) -> list[str]:
    """In-bounds grid labels in first-occurrence order, without duplicates."""
    out: list[str] = []
    for m in _LABEL_TOKEN.finditer(response or ""):
        label = m.group(1) + m.group(2)
        try:
            index_for_label(grid, label)
        except GridError:
            continue
        if label not in out:
            out.append(label)
    return out


def _num(s: str) -> float:
    return float(s.replace("−", "-"))


def _signed(value: float, hemi: str | None) -> float:
    if hemi and hemi.upper() in "SW":
        return -abs(value)
    return value


def _plausible(lat: float, lon: float) -> bool:
    return -90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0


def parse_coordinates(response: str) -> GeoPoint | None:
    """First decimal-degree pair in the text, or None.

    Accepted forms: ``-41.25, 175.16``; ``Latitude: -41.2, Longitude: 175.1``;
    ``41.25° S, 175.16° E``. When several forms occur the earliest wins.
    """
    text = response or ""
    found: list[tuple[int, float, float]] = []
    for m in _HEMI_PAIR.finditer(text):
        found.append((m.start(), _signed(_num(m.group(1)), m.group(2)), _signed(_num(m.group(3)), m.group(4))))
    for m in _NAMED_PAIR.finditer(text):
        found.append((m.start(), _signed(_num(m.group(1)), m.group(2)), _signed(_num(m.group(3)), m.group(4))))
    for m in _SIGNED_PAIR.finditer(text):
        if "." in m.group(1) or "." in m.group(2):
            found.append((m.start(), _num(m.group(1)), _num(m.group(2))))
    for _, lat, lon in sorted(found, key=lambda t: t[0]):
        if _plausible(lat, lon):
            return GeoPoint(lat, lon)
    return None
