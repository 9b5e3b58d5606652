import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gridgeoref.geo import GeoPoint, from_mercator, haversine_km, to_mercator
from gridgeoref.mapgen.grid import (
    CellIndex,
    GridError,
    GridSpec,
    MapExtent,
    MapGeoreference,
    cell_bounds,
    cell_centroid,
    column_letters,
    column_number,
    index_for_label,
    label_for_index,
    make_grid,
    point_to_cell,
    recomputed_scale_km,
)

from oracles import spreadsheet_columns

WAIRARAPA = MapExtent(-41.33, 175.10, -41.10, 175.40)


def fixture_georef(n=12):
    grid, tiled = make_grid(WAIRARAPA, 0.5, max_cells_per_axis=n)
    return MapGeoreference(tiled, grid, 50 * grid.cols, 50 * grid.rows)


def test_column_letters_match_enumeration():
    names = spreadsheet_columns(702)
    assert [column_letters(i) for i in range(1, 703)] == names
    assert all(column_number(s) == i for i, s in enumerate(names, start=1))


def test_label_bijection_random_cells():
    grid = GridSpec(702, 99, 1.0)
    rng = random.Random(7)
    for _ in range(10_000):
        c = CellIndex(rng.randint(1, 702), rng.randint(1, 99))
        assert index_for_label(grid, label_for_index(grid, c)) == c


@given(st.integers(1, 702), st.integers(1, 99))
def test_label_bijection_property(cols, rows):
    grid = GridSpec(cols, rows, 1.0)
    c = CellIndex(cols, rows)
    assert index_for_label(grid, label_for_index(grid, c)) == c


@pytest.mark.parametrize("label", ["", "A0", "A100", "AAA1", "1A", "A-1"])
def test_malformed_labels(label):
    with pytest.raises(GridError):
        index_for_label(GridSpec(12, 12, 1.0), label)


def test_out_of_bounds_label():
    with pytest.raises(GridError):
        index_for_label(GridSpec(12, 12, 1.0), "M13")
    with pytest.raises(GridError):
        label_for_index(GridSpec(12, 12, 1.0), CellIndex(13, 1))


def test_grid_spec_limits():
    with pytest.raises(ValueError):
        GridSpec(703, 1, 1.0)
    with pytest.raises(ValueError):
        GridSpec(1, 100, 1.0)
    with pytest.raises(ValueError):
        GridSpec(1, 1, 0.0)


def test_centroid_round_trip_every_cell():
    georef = fixture_georef()
    assert (georef.grid.cols, georef.grid.rows) == (12, 12)
    for c in georef.grid.cells():
        assert point_to_cell(georef, cell_centroid(georef, c)) == c


def _brute_cell(georef, p):
    """Linear scan over cell rectangles with the east/south tie rule."""
    x, y = to_mercator(p.lat, p.lon)
    x0, _, x1, y1 = georef.extent.projected()
    side = (x1 - x0) / georef.grid.cols
    found = None
    for c in georef.grid.cells():
        left = x0 + (c.x - 1) * side
        top = y1 - (c.y - 1) * side
        inside_x = left <= x < left + side or (c.x == georef.grid.cols and x == left + side)
        inside_y = top - side < y <= top or (c.y == georef.grid.rows and y == top - side)
        if inside_x and inside_y:
            found = c
    return found


@settings(max_examples=300)
@given(st.floats(0, 1), st.floats(0, 1))
def test_point_to_cell_agrees_with_scan(fx, fy):
    georef = fixture_georef()
    x0, y0, x1, y1 = georef.extent.projected()
    lat, lon = from_mercator(x0 + fx * (x1 - x0), y0 + fy * (y1 - y0))
    lat = min(max(lat, georef.extent.min_lat), georef.extent.max_lat)
    lon = min(max(lon, georef.extent.min_lon), georef.extent.max_lon)
    p = GeoPoint(lat, lon)
    expected = _brute_cell(georef, p)
    if expected is not None:
        assert point_to_cell(georef, p) == expected


def test_gridline_tie_goes_east_and_south():
    georef = fixture_georef()
    x0, _, x1, y1 = georef.extent.projected()
    side = (x1 - x0) / georef.grid.cols
    # the corner shared by B2, C2, B3, C3
    lat, lon = from_mercator(x0 + 2 * side, y1 - 2 * side)
    assert point_to_cell(georef, GeoPoint(lat, lon)) == CellIndex(3, 3)


def test_extent_edges_and_outside():
    georef = fixture_georef()
    e = georef.extent
    assert point_to_cell(georef, GeoPoint(e.max_lat, e.min_lon)) == CellIndex(1, 1)
    assert point_to_cell(georef, GeoPoint(e.min_lat, e.max_lon)) == CellIndex(12, 12)
    with pytest.raises(GridError):
        point_to_cell(georef, GeoPoint(e.max_lat + 0.01, e.min_lon))


def test_make_grid_tiles_extent_exactly():
    grid, tiled = make_grid(WAIRARAPA, 1.7)
    x0, y0, x1, y1 = tiled.projected()
    side = (x1 - x0) / grid.cols
    assert (y1 - y0) == pytest.approx(side * grid.rows, rel=1e-9)
    # grown only east and south
    assert tiled.min_lon == pytest.approx(WAIRARAPA.min_lon)
    assert tiled.max_lat == pytest.approx(WAIRARAPA.max_lat)
    assert tiled.max_lon >= WAIRARAPA.max_lon - 1e-12
    assert tiled.min_lat <= WAIRARAPA.min_lat + 1e-12


def test_make_grid_caps_cells_per_axis():
    grid, _ = make_grid(WAIRARAPA, 0.1, max_cells_per_axis=12)
    assert grid.cols <= 12 and grid.rows <= 12
    assert grid.cell_km > 0.1


def test_cell_km_is_geodesic_width_on_central_parallel():
    grid, tiled = make_grid(WAIRARAPA, 2.5)
    x0, y0, x1, y1 = tiled.projected()
    side = (x1 - x0) / grid.cols
    lat, lon_a = from_mercator(x0, (y0 + y1) / 2)
    _, lon_b = from_mercator(x0 + side, (y0 + y1) / 2)
    assert grid.cell_km == pytest.approx(haversine_km(GeoPoint(lat, lon_a), GeoPoint(lat, lon_b)), rel=1e-12)
    georef = MapGeoreference(tiled, grid, 100, 100)
    assert recomputed_scale_km(georef) == pytest.approx(grid.cell_km, rel=1e-12)


def test_degenerate_extent_rejected():
    tiny = MapExtent(-41.0, 175.0, -41.0 + 1e-6, 175.0 + 1e-6)
    with pytest.raises(ValueError):
        make_grid(tiny, 0.0001)


def test_map_extent_rejects_antimeridian():
    with pytest.raises(ValueError):
        MapExtent(-10, 179, 10, 181)


def test_cell_bounds_contain_centroid():
    georef = fixture_georef()
    c = CellIndex(4, 9)
    assert cell_bounds(georef, c).contains_point(cell_centroid(georef, c))


def test_georef_dict_round_trip_and_pixels():
    georef = fixture_georef()
    assert MapGeoreference.from_dict(georef.to_dict()) == georef
    e = georef.extent
    assert georef.to_pixel(e.max_lat, e.min_lon) == pytest.approx((0, 0), abs=1e-6)
    assert georef.to_pixel(e.min_lat, e.max_lon) == pytest.approx(
        (georef.image_width_px, georef.image_height_px), abs=1e-6
    )
