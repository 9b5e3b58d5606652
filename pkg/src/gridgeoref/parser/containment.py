"""Parent/child containment between mentioned places."""

from __future__ import annotations

import re
from typing import Mapping, Sequence

from .mentions import PlaceMention, admin_rank

# parents in the comma-list heuristic must be at least county-like
_MIN_PARENT_RANK = 4
_SEGMENT_SPLIT = re.compile(r"[,;]|\.(?:\s|$)")


class ContainmentCycle(ValueError):
    pass


def _standalone(text: str, m: PlaceMention) -> bool:
    """True when the mention fills its comma/period delimited segment."""
    left = max((x.end() for x in _SEGMENT_SPLIT.finditer(text, 0, m.start)), default=0)
    right_match = _SEGMENT_SPLIT.search(text, m.end)
    right = right_match.start() if right_match else len(text)
    seg = text[left:right].strip()
    return seg == m.surface or seg.lower() == f"in {m.surface}".lower()


def _heuristic(mentions: Sequence[PlaceMention], text: str | None) -> list[tuple[PlaceMention, PlaceMention]]:
    pairs = []
    for a, b in zip(mentions, mentions[1:]):
        ra, rb = admin_rank(a), admin_rank(b)
        if ra < _MIN_PARENT_RANK or ra <= rb:
            continue
        if text is not None and not _standalone(text, a):
            continue
        pairs.append((a, b))
    return pairs


def _geometric(mentions, features) -> list[tuple[PlaceMention, PlaceMention]]:
    from ..gazetteer.geometry import contains  # local: parser stays importable alone

    by_name: dict[str, PlaceMention] = {}
    for m in mentions:
        if m.name in features and m.name not in by_name:
            by_name[m.name] = m
    names = list(by_name)
    parents_of: dict[str, list[str]] = {n: [] for n in names}
    for a in names:
        for b in names:
            if a != b and contains(features[a].geometry, features[b].geometry):
                parents_of[b].append(a)
    pairs = []
    for child, parents in parents_of.items():
        # transitive reduction: keep only parents that contain no other parent
        direct = [p for p in parents if not any(q in parents_of and p in parents_of[q] for q in parents)]
        for p in direct:
            pairs.append((by_name[p], by_name[child]))
    pairs.sort(key=lambda pc: (pc[0].start, pc[1].start))
    return pairs


def detect_containment(
    mentions: Sequence[PlaceMention],
    features: Mapping | None = None,
    text: str | None = None,
) -> list[tuple[PlaceMention, PlaceMention]]:
    """Ordered (parent, child) pairs.

    With resolved ``features`` (name -> GazetteerFeature) containment is
    geometric; mentions without a feature fall back to the comma-list
    heuristic, which nests a county/island/region-like name over the next
    finer name.
    """
    if not mentions:
        raise ValueError("at least one mention required")
    mentions = sorted(mentions, key=lambda m: m.start)
    if features:
        pairs = _geometric(mentions, features)
        resolved = {m.name for m in mentions if m.name in features}
        pairs += [
            (a, b)
            for a, b in _heuristic(mentions, text)
            if not (a.name in resolved and b.name in resolved)
        ]
    else:
        pairs = _heuristic(mentions, text)
    check_acyclic(pairs)
    return pairs


def check_acyclic(pairs) -> None:
    graph: dict[str, set[str]] = {}
    for parent, child in pairs:
        graph.setdefault(parent.name, set()).add(child.name)
    state: dict[str, int] = {}

    def visit(node: str) -> None:
        state[node] = 1
        for nxt in graph.get(node, ()):
            s = state.get(nxt, 0)
            if s == 1:
                raise ContainmentCycle(f"containment cycle through {nxt!r}")
            if s == 0:
                visit(nxt)
        state[node] = 2

    for node in list(graph):
        if state.get(node, 0) == 0:
            visit(node)
