import json
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from gridgeoref.eval import (
    REPORT_COLUMNS,
    ItemScore,
    acc_at,
    aggregate_report,
    centroid_distance,
    max_distance,
    min_distance,
    report_to_csv,
    report_to_json,
    sae,
    scores_to_json,
)
from gridgeoref.geo import GeoPoint
from gridgeoref.georeferencer import CoordinatePrediction, Prediction
from gridgeoref.mapgen.grid import CellIndex

from helpers import synthetic_item
from oracles import centroid_distance_direct, max_distance_corners, min_distance_rectangles

cells = st.tuples(st.integers(1, 40), st.integers(1, 40))
scales = st.floats(0.01, 50)


@given(cells, cells, scales)
def test_metrics_match_oracles(a, b, s):
    ca, cb = CellIndex(*a), CellIndex(*b)
    assert max_distance(ca, cb, s) == pytest.approx(max_distance_corners(a, b, s), rel=1e-12)
    assert min_distance(ca, cb, s) == pytest.approx(min_distance_rectangles(a, b, s), abs=1e-9 * s)
    assert centroid_distance(ca, cb, s) == pytest.approx(centroid_distance_direct(a, b, s), rel=1e-12)


@given(cells, cells, scales, st.floats(0.1, 10))
def test_metrics_symmetric_and_scale_linear(a, b, s, k):
    ca, cb = CellIndex(*a), CellIndex(*b)
    for f in (min_distance, max_distance, centroid_distance):
        assert f(ca, cb, s) == f(cb, ca, s)
        assert f(ca, cb, k * s) == pytest.approx(k * f(ca, cb, s), rel=1e-12)
        assert min_distance(ca, cb, s) <= centroid_distance(ca, cb, s) + 1e-12
        assert centroid_distance(ca, cb, s) <= max_distance(ca, cb, s)


def test_metric_examples():
    a = CellIndex(3, 3)
    assert max_distance(a, a, 1.0) == math.sqrt(2)
    assert min_distance(a, CellIndex(4, 4), 1.0) == 0
    assert min_distance(a, CellIndex(5, 3), 2.0) == 2.0
    assert centroid_distance(a, CellIndex(6, 7), 1.0) == 5.0
    with pytest.raises(ValueError):
        centroid_distance(a, a, 0)


def test_acc_at_is_strict():
    assert acc_at([0.5, 1.0, 1.5], 1.0) == pytest.approx(100 / 3)
    assert acc_at([1.0, 1.0], [1.0, 2.0]) == 50.0
    assert acc_at([], 1.0) is None
    with pytest.raises(ValueError):
        acc_at([1.0], [1.0, 2.0])


def test_sae_is_haversine():
    assert sae(GeoPoint(0, 0), GeoPoint(0, 1)) == pytest.approx(111.19508, rel=1e-6)


def test_item_score_ordering_checked():
    with pytest.raises(ValueError):
        ItemScore("x", centroid_km=1.0, max_km=0.5, min_km=0.0)


def _items():
    return [synthetic_item(f"i{k}", CellIndex(5, 5), cell_km=0.5 + 0.25 * k) for k in range(4)]


def test_aggregate_grid_report():
    items = _items()
    preds = {
        "i0": Prediction(["E5"]),
        "i1": Prediction(["F5", "E5"]),
        "i2": Prediction(["H9"]),
        "i3": Prediction([]),
    }
    rows = {r.metric: r for r in aggregate_report(items, preds, "m")}
    assert set(rows) == {"min", "max", "centroid"}
    c = rows["centroid"]
    assert c.n_items == 4 and c.n_unparseable == 1
    expected = [0.0, items[1].scale_km, 5 * items[2].scale_km]
    assert c.average_km == pytest.approx(sum(expected) / 3)
    assert c.acc_scale == pytest.approx(100 / 3)  # exact hit only
    assert rows["max"].acc_scale == 0.0
    assert rows["min"].acc_scale == pytest.approx(200 / 3)


def test_worst_case_imputation():
    items = _items()[:1]
    rows = {r.metric: r for r in aggregate_report(items, {"i0": Prediction([])}, "m", impute="worst")}
    s = items[0].scale_km
    # truth E5 on a 10x10 grid: furthest cell is J10 (dx = dy = 5)
    assert rows["centroid"].average_km == pytest.approx(math.hypot(5, 5) * s)
    assert rows["max"].average_km == pytest.approx(math.hypot(6, 6) * s)
    assert rows["centroid"].n_unparseable == 1
    assert rows["centroid"].scores[0].imputed


def test_out_of_grid_prediction_counts_unparseable():
    items = _items()[:1]
    rows = aggregate_report(items, {"i0": Prediction(["Z99"])}, "m")
    assert rows[0].n_unparseable == 1 and rows[0].average_km is None


def test_coordinate_report():
    items = _items()[:2]
    t0 = items[0].record.ground_truth
    preds = {"i0": CoordinatePrediction(GeoPoint(t0.lat, t0.lon)), "i1": CoordinatePrediction(None)}
    (row,) = aggregate_report(items, preds, "text")
    assert row.metric == "sae" and row.average_km == pytest.approx(0.0, abs=1e-9)
    assert row.n_unparseable == 1 and row.acc_1km == 100.0


def test_id_mismatch_and_mixed_kinds():
    items = _items()[:2]
    with pytest.raises(ValueError, match="mismatch"):
        aggregate_report(items, {"i0": Prediction(["E5"])}, "m")
    with pytest.raises(ValueError, match="mixed"):
        aggregate_report(items, {"i0": Prediction(["E5"]), "i1": CoordinatePrediction(None)}, "m")


def test_report_serialisation():
    items = _items()
    preds = {f"i{k}": Prediction(["E6"]) for k in range(4)}
    reports = aggregate_report(items, preds, "m")
    lines = report_to_csv(reports).splitlines()
    assert lines[0].split(",") == list(REPORT_COLUMNS)
    assert len(lines) == 4
    doc = json.loads(report_to_json(reports))
    assert doc["schema_version"] == 1
    centroid = [r for r in doc["rows"] if r["metric"] == "centroid"][0]
    assert centroid["average_km"] == pytest.approx(sum(it.scale_km for it in items) / 4, rel=1e-15)
    assert [s["item_id"] for s in scores_to_json(reports)] == ["i0", "i1", "i2", "i3"]
