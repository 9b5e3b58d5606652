import itertools
import json

import httpx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gridgeoref.geo import GeoPoint, haversine_km
from gridgeoref.gazetteer import (
    CandidateSet,
    FeatureCache,
    GazetteerError,
    GazetteerFeature,
    Geometry,
    GeometryError,
    HttpGazetteer,
    LocalGazetteer,
    SourceError,
    conflate,
    contains,
    disambiguate,
    filter_by_region,
    fold,
    query_sources,
    representative_point,
    resolve_places,
)


def square(lat, lon, half):
    ring = [(lon - half, lat - half), (lon + half, lat - half), (lon + half, lat + half), (lon - half, lat + half)]
    return Geometry.from_geojson({"type": "Polygon", "coordinates": [ring + [ring[0]]]})


def feat(name, lat, lon, source="a", rank=0, country="NZ", region="R", geometry=None):
    return GazetteerFeature(name, source, rank, geometry or Geometry.point(lat, lon), "", country, region)


# -- geometry -------------------------------------------------------------------


def test_geometry_validation():
    with pytest.raises(GeometryError):
        Geometry.from_geojson({"type": "Circle", "coordinates": [0, 0]})
    with pytest.raises(GeometryError):
        Geometry.from_geojson({"type": "Polygon", "coordinates": [[[0, 0], [1, 0], [1, 1]]]})
    with pytest.raises(GeometryError):
        Geometry.from_geojson({"type": "LineString", "coordinates": []})
    with pytest.raises(GeometryError):
        Geometry.from_geojson({"type": "Point"})


def test_geometry_round_trip():
    g = square(-41.0, 175.0, 0.1)
    assert Geometry.from_geojson(g.to_geojson()) == g
    assert g.kind == "polygon" and g.dimension == 2


def test_representative_point_on_concave_polygon():
    # a U shape whose centroid falls in the notch
    ring = [(0, 0), (3, 0), (3, 3), (2, 3), (2, 1), (1, 1), (1, 3), (0, 3), (0, 0)]
    g = Geometry.from_geojson({"type": "Polygon", "coordinates": [ring]})
    p = representative_point(g)
    import shapely.geometry

    assert g.shape.covers(shapely.geometry.Point(p.lon, p.lat))


def test_representative_point_line_and_point():
    line = Geometry.from_geojson({"type": "LineString", "coordinates": [[170, -40], [171, -40], [172, -40]]})
    assert representative_point(line) == GeoPoint(-40, 171)
    assert representative_point(Geometry.point(-40, 170)) == GeoPoint(-40, 170)


def test_contains():
    big, small = square(-41, 175, 1.0), square(-41, 175, 0.1)
    assert contains(big, small)
    assert not contains(small, big)
    assert not contains(big, square(-45, 175, 0.1))
    assert not contains(Geometry.point(-41, 175), small)


# -- candidate filtering -------------------------------------------------------


def test_fold_is_case_and_accent_insensitive():
    assert fold("Ōtira") == fold("otira") == "otira"


def test_region_filter_fallbacks():
    a = feat("X", 0, 0, country="New Zealand", region="Northland")
    b = feat("X", 1, 1, country="New Zealand", region="Waikato")
    c = feat("X", 2, 2, country="Australia", region="Victoria")
    out = filter_by_region(CandidateSet("X", [a, b, c]), "new zealand", "NORTHLAND")
    assert out.candidates == [a] and not out.unfiltered
    out = filter_by_region(CandidateSet("X", [a, b, c]), "New Zealand", "Otago")
    assert out.candidates == [a, b]
    out = filter_by_region(CandidateSet("X", [c]), "New Zealand", "Otago")
    assert out.candidates == [c] and out.unfiltered
    assert filter_by_region(CandidateSet("X", []), "NZ", "R").candidates == []


# -- disambiguation ---------------------------------------------------------------


def brute_force(sets):
    best = None
    for combo in itertools.product(*[s.candidates for s in sets]):
        pts = [representative_point(f.geometry) for f in combo]
        total = sum(haversine_km(p, q) for p, q in itertools.combinations(pts, 2))
        if best is None or total < best[0] - 1e-9:
            best = (total, combo)
    return best[0]


coords = st.tuples(st.floats(-46, -34), st.floats(166, 179))


@settings(max_examples=60, deadline=None)
@given(st.lists(st.lists(coords, min_size=1, max_size=4), min_size=1, max_size=4))
def test_disambiguate_matches_brute_force(data):
    sets = [
        CandidateSet(f"n{i}", [feat(f"n{i}", lat, lon) for lat, lon in cands]) for i, cands in enumerate(data)
    ]
    chosen = disambiguate(sets)
    pts = [representative_point(chosen[s.query_name].geometry) for s in sets]
    total = sum(haversine_km(p, q) for p, q in itertools.combinations(pts, 2))
    assert total == pytest.approx(brute_force(sets), abs=1e-5)


def test_disambiguate_picks_tight_cluster():
    sets = [
        CandidateSet("A", [feat("A", -35.2, 173.7), feat("A", -38.0, 175.5)]),
        CandidateSet("B", [feat("B", -35.3, 173.8)]),
    ]
    assert representative_point(disambiguate(sets)["A"].geometry) == GeoPoint(-35.2, 173.7)


def test_disambiguate_tie_breaks():
    # identical distances: lower authority rank wins, then source id, then list order
    sets = [CandidateSet("A", [feat("A", 0, 0, source="z", rank=1), feat("A", 0, 0, source="y", rank=0)])]
    assert disambiguate(sets)["A"].source == "y"
    sets = [CandidateSet("A", [feat("A", 0, 0, source="z"), feat("A", 0, 0, source="b")])]
    assert disambiguate(sets)["A"].source == "b"
    first, second = feat("A", 0, 0), feat("A", 0, 0)
    assert disambiguate([CandidateSet("A", [first, second])])["A"] is first


def test_disambiguate_prunes_large_searches():
    far = [feat("A", -35 - i * 0.5, 170 + i * 0.3) for i in range(30)]
    sets = [
        CandidateSet("A", far + [feat("A", -41.0, 175.0)]),
        CandidateSet("B", [feat("B", -41 + i, 175) for i in range(-20, 20)]),
        CandidateSet("C", [feat("C", -41.01, 175.01)]),
    ]
    chosen = disambiguate(sets, max_combinations=100)
    assert representative_point(chosen["A"].geometry) == GeoPoint(-41.0, 175.0)
    assert representative_point(chosen["B"].geometry) == GeoPoint(-41, 175)


def test_disambiguate_requires_candidates():
    with pytest.raises(ValueError):
        disambiguate([CandidateSet("A", [])])
    assert disambiguate([]) == {}


def test_conflate_order():
    pt = feat("X", -41, 175, source="osm", rank=1)
    area_low = feat("X", 0, 0, source="linz", rank=0, geometry=square(-41, 175, 0.1))
    area_high = feat("X", 0, 0, source="osm", rank=1, geometry=square(-41, 175, 0.3))
    area_big = feat("X", 0, 0, source="gn", rank=0, geometry=square(-41, 175, 0.2))
    assert conflate([pt, area_high, area_low]) is area_low
    assert conflate([area_low, area_big]) is area_big
    assert conflate([pt]) is pt
    with pytest.raises(ValueError):
        conflate([])


# -- sources ------------------------------------------------------------------------


def test_local_gazetteer_alt_names(gazetteer):
    hits = gazetteer.query("napenape", "", "")
    assert [f.name for f in hits] == ["Napenape Scenic Reserve"]
    assert len(gazetteer.query("PUKETI", "", "")) == 2
    assert gazetteer.query("Nowhere", "", "") == []


class Failing:
    source_id = "down"
    authority_rank = 2

    def query(self, name, country, region):
        raise SourceError("down: boom")


def test_query_sources_skips_failures_and_raises_when_all_fail(gazetteer):
    got = query_sources("Fiordland", "New Zealand", "Southland", [Failing(), gazetteer])
    assert [f.name for f in got.candidates] == ["Fiordland"]
    with pytest.raises(GazetteerError) as err:
        query_sources("Fiordland", "New Zealand", "Southland", [Failing()])
    assert "down" in err.value.causes


def test_feature_cache_round_trip_and_reuse(tmp_path, gazetteer):
    cache = FeatureCache(tmp_path)
    first = query_sources("Puketi", "New Zealand", "Northland", [gazetteer], cache=cache)

    class Exploding:
        source_id = gazetteer.source_id
        authority_rank = 0

        def query(self, *a):
            raise AssertionError("cache should have answered")

    again = query_sources("puketi", "new zealand", "Northland", [Exploding()], cache=cache)
    assert again.candidates == first.candidates
    with pytest.raises(AssertionError):
        query_sources("Puketi", "New Zealand", "Northland", [Exploding()], cache=cache, refresh=True)


def nominatim_handler(calls):
    def handler(request):
        calls.append(request)
        body = {
            "type": "FeatureCollection",
            "features": [
                {
                    "type": "Feature",
                    "properties": {
                        "display_name": "Otira, Westland District, West Coast, New Zealand",
                        "type": "village",
                        "address": {"country": "New Zealand", "state": "West Coast"},
                    },
                    "geometry": {"type": "Point", "coordinates": [171.56, -42.83]},
                },
                {"type": "Feature", "properties": {"name": "bad"}, "geometry": {"type": "Polygon", "coordinates": [[[0, 0]]]}},
            ],
        }
        return httpx.Response(200, json=body)

    return handler


def test_http_gazetteer_parses_geojson():
    calls = []
    client = httpx.Client(transport=httpx.MockTransport(nominatim_handler(calls)))
    src = HttpGazetteer(client=client, rate_limit=0)
    (f,) = src.query("Otira", "New Zealand", "")
    assert f.name == "Otira" and f.region == "West Coast" and f.authority_rank == 1
    assert representative_point(f.geometry) == GeoPoint(-42.83, 171.56)
    params = calls[0].url.params
    assert params["format"] == "geojson"
    assert params["q"] == "Otira, New Zealand"


def test_http_gazetteer_errors_become_source_errors():
    client = httpx.Client(transport=httpx.MockTransport(lambda r: httpx.Response(503)))
    with pytest.raises(SourceError):
        HttpGazetteer(client=client, rate_limit=0).query("Otira", "NZ", "")


# -- end to end ---------------------------------------------------------------------


def test_resolve_places_uses_neighbours(gazetteer):
    names = ["Puketi", "Bay of Islands County", "Missing Place"]
    resolved, unresolved = resolve_places(names, "New Zealand", "", [gazetteer])
    assert unresolved == ["Missing Place"]
    assert resolved["Puketi"].region == "Northland"

    names = ["Fiordland", "Elizabeth Burn", "Mount George"]
    resolved, _ = resolve_places(names, "New Zealand", "", [gazetteer])
    assert resolved["Mount George"].region == "Southland"


def test_feature_geojson_round_trip(gazetteer):
    f = gazetteer.query("Lake Wairarapa", "", "")[0]
    assert GazetteerFeature.from_geojson(json.loads(json.dumps(f.to_geojson()))) == f
