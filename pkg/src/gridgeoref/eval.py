"""Grid-aware distance metrics, coordinate error and Table-style reports.

The three grid metrics compare a true and a predicted cell on a grid of
square cells of side ``scale_km``:

* centroid distance: between the two cell centres,
* max distance: between the two furthest corners (upper bound),
* min distance: between the two closest points (zero for same/adjacent).

Accuracy ``acc@r`` uses a strict ``score < r`` test. With that choice the
centroid ``acc@scale`` equals the exact-cell hit rate, because the nearest
non-identical centroid is exactly one scale away, and the max-distance
``acc@scale`` is always 0 since max distance is at least sqrt(2) * scale.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

from .geo import GeoPoint, haversine_km
from .mapgen.grid import CellIndex, GridError, index_for_label

RADII_KM = (1.0, 3.0, 10.0)
GRID_METRICS = ("min", "max", "centroid")
REPORT_COLUMNS = (
    "method",
    "metric",
    "average_km",
    "acc@1km",
    "acc@3km",
    "acc@10km",
    "acc@scale",
    "n_items",
    "n_unparseable",
)


def _deltas(a: CellIndex, b: CellIndex) -> tuple[int, int]:
    return abs(b.x - a.x), abs(b.y - a.y)


def _check_scale(scale_km: float) -> None:
    if not scale_km > 0:
        raise ValueError("scale_km must be positive")


def _scaled_norm(u: int, v: int, s: float) -> float:
    # scale each leg first so one cell gives exactly sqrt(s**2 + s**2)
    return math.sqrt((u * s) ** 2 + (v * s) ** 2)


def centroid_distance(a: CellIndex, b: CellIndex, scale_km: float) -> float:
    _check_scale(scale_km)
    dx, dy = _deltas(a, b)
    return _scaled_norm(dx, dy, scale_km)


def max_distance(a: CellIndex, b: CellIndex, scale_km: float) -> float:
    _check_scale(scale_km)
    dx, dy = _deltas(a, b)
    return _scaled_norm(dx + 1, dy + 1, scale_km)


def min_distance(a: CellIndex, b: CellIndex, scale_km: float) -> float:
    _check_scale(scale_km)
    dx, dy = _deltas(a, b)
    gx = min(abs(dx - 1), dx)
    gy = min(abs(dy - 1), dy)
    return _scaled_norm(gx, gy, scale_km)


METRIC_FUNCS = {"min": min_distance, "max": max_distance, "centroid": centroid_distance}


def sae(pred: GeoPoint, truth: GeoPoint) -> float:
    """Simple accuracy error: great-circle distance in km."""
    return haversine_km(pred, truth)


def acc_at(scores: Sequence[float], radius_km) -> float | None:
    """Percentage of scores strictly below the radius.

    ``radius_km`` is a constant or a per-item sequence aligned with
    ``scores``. Returns None for an empty score list.
    """
    if not scores:
        return None
    if isinstance(radius_km, (int, float)):
        radii = [float(radius_km)] * len(scores)
    else:
        radii = [float(r) for r in radius_km]
        if len(radii) != len(scores):
            raise ValueError("per-item radii must align with scores")
    if any(r <= 0 for r in radii):
        raise ValueError("radius must be positive")
    hits = sum(1 for s, r in zip(scores, radii) if s < r)
    return 100.0 * hits / len(scores)


@dataclass(frozen=True)
class ItemScore:
    item_id: str
    centroid_km: float | None = None
    max_km: float | None = None
    min_km: float | None = None
    sae_km: float | None = None
    scale_km: float | None = None
    imputed: bool = False

    def __post_init__(self) -> None:
        if None not in (self.min_km, self.centroid_km, self.max_km):
            if self.min_km > self.centroid_km + 1e-9 or self.centroid_km > self.max_km + 1e-9:
                raise ValueError(f"metric ordering violated for {self.item_id}")


@dataclass
class MetricReport:
    method: str
    metric: str
    average_km: float | None
    acc_1km: float | None
    acc_3km: float | None
    acc_10km: float | None
    acc_scale: float | None
    n_items: int
    n_unparseable: int
    scores: list[ItemScore] = field(default_factory=list, repr=False)

    def row(self, rounded: bool = False) -> dict:
        def fmt(v):
            if v is None:
                return None
            return round(v, 2) if rounded else v

        return {
            "method": self.method,
            "metric": self.metric,
            "average_km": fmt(self.average_km),
            "acc@1km": fmt(self.acc_1km),
            "acc@3km": fmt(self.acc_3km),
            "acc@10km": fmt(self.acc_10km),
            "acc@scale": fmt(self.acc_scale),
            "n_items": self.n_items,
            "n_unparseable": self.n_unparseable,
        }


def _summarise(method, metric, values, scales, n_items, n_unparseable, scores) -> MetricReport:
    average = sum(values) / len(values) if values else None
    return MetricReport(
        method=method,
        metric=metric,
        average_km=average,
        acc_1km=acc_at(values, RADII_KM[0]),
        acc_3km=acc_at(values, RADII_KM[1]),
        acc_10km=acc_at(values, RADII_KM[2]),
        acc_scale=acc_at(values, scales) if values else None,
        n_items=n_items,
        n_unparseable=n_unparseable,
        scores=scores,
    )


def _worst_case(truth: CellIndex, item, metric: str) -> float:
    grid = item.map_meta.grid
    func = METRIC_FUNCS[metric]
    return max(func(truth, c, item.scale_km) for c in grid.cells())


def aggregate_report(items, predictions, method: str, impute: str = "exclude") -> list[MetricReport]:
    """Score predictions against dataset items.

    ``predictions`` maps item id to either a grid Prediction (anything with a
    ``cells`` attribute) or a CoordinatePrediction (anything with a
    ``point`` attribute). Grid methods give min/max/centroid rows; coordinate
    methods give one ``sae`` row. Empty predictions are counted as
    unparseable and left out of averages, unless ``impute="worst"``, which
    scores them at the worst cell of the grid.
    """
    if impute not in ("exclude", "worst"):
        raise ValueError(f"unknown impute mode {impute!r}")
    items = list(items)
    ids = {it.record.id for it in items}
    extra = set(predictions) - ids
    missing = ids - set(predictions)
    if extra or missing:
        raise ValueError(
            f"prediction/item id mismatch: missing={sorted(missing)} extra={sorted(extra)}"
        )
    kinds = {"coordinate" if hasattr(p, "point") else "grid" for p in predictions.values()}
    if len(kinds) > 1:
        raise ValueError("mixed grid and coordinate predictions")
    kind = kinds.pop() if kinds else "grid"
    n = len(items)

    if kind == "coordinate":
        scores, values, scales, bad = [], [], [], 0
        for it in items:
            pred = predictions[it.record.id]
            if pred.point is None:
                bad += 1
                continue
            d = sae(pred.point, it.record.ground_truth)
            scores.append(ItemScore(it.record.id, sae_km=d, scale_km=it.scale_km))
            values.append(d)
            scales.append(it.scale_km)
        return [_summarise(method, "sae", values, scales, n, bad, scores)]

    per_metric: dict[str, list[float]] = {m: [] for m in GRID_METRICS}
    scales: list[float] = []
    scores: list[ItemScore] = []
    bad = 0
    for it in items:
        pred = predictions[it.record.id]
        truth = index_for_label(it.map_meta.grid, it.label)
        guess = None
        if pred.cells:
            try:
                guess = index_for_label(it.map_meta.grid, pred.cells[0])
            except GridError:
                guess = None
        if guess is None:
            bad += 1
            if impute == "exclude":
                continue
            vals = {m: _worst_case(truth, it, m) for m in GRID_METRICS}
            imputed = True
        else:
            vals = {m: METRIC_FUNCS[m](truth, guess, it.scale_km) for m in GRID_METRICS}
            imputed = False
        for m in GRID_METRICS:
            per_metric[m].append(vals[m])
        scales.append(it.scale_km)
        scores.append(
            ItemScore(
                it.record.id,
                centroid_km=vals["centroid"],
                max_km=vals["max"],
                min_km=vals["min"],
                scale_km=it.scale_km,
                imputed=imputed,
            )
        )
    return [_summarise(method, m, per_metric[m], scales, n, bad, scores) for m in GRID_METRICS]


def report_to_json(reports: Iterable[MetricReport]) -> str:
    """Full-precision machine-readable report."""
    doc = {
        "schema_version": 1,
        "rows": [r.row() for r in reports],
    }
    return json.dumps(doc, indent=2, sort_keys=False) + "\n"


def report_to_csv(reports: Iterable[MetricReport]) -> str:
    """Human-facing report; distances and percentages rounded to 2 decimals."""
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=REPORT_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for r in reports:
        row = r.row(rounded=True)
        writer.writerow({k: ("" if v is None else v) for k, v in row.items()})
    return buf.getvalue()


def scores_to_json(reports: Iterable[MetricReport]) -> list[dict]:
    seen, out = set(), []
    for r in reports:
        for s in r.scores:
            if s.item_id not in seen:
                seen.add(s.item_id)
                out.append(asdict(s))
    return out
