import pytest
from hypothesis import given
from hypothesis import strategies as st

from gridgeoref.parser import ParseResult, parse
from gridgeoref.parser.containment import ContainmentCycle, check_acyclic, detect_containment
from gridgeoref.parser.mentions import (
    AnnotationExtractor,
    MentionError,
    PlaceMention,
    admin_rank,
    extract_place_names,
    mention_category,
    normalize_surface,
)
from gridgeoref.parser.relations import (
    APPROXIMATE,
    EXACT,
    NotADistance,
    RelationTriple,
    compile_pattern,
    default_lexicon,
    extract_relations,
    load_lexicon,
    parse_distance_phrase,
    resolve_coreference,
)

PUKETI = "Puketi Forest, 2 km north of Puketi, Bay of Islands County, North Island"
WAIRARAPA = "J.K. Donald Wildlife Reserve, NE shore of L. Wairarapa - about 400m from lake"
NAPENAPE = "North Canterbury, Napenape Scenic Reserve, 3km south of mouth of Blythe River on coast."
AZIMUTH = "Mount Azimuth, cliffs between Azimuth and Courrejolles Point near low point in ridge"


def names(mentions):
    return [m.name for m in mentions]


# -- mentions -----------------------------------------------------------------


def test_mentions_keep_text_order_and_spans():
    ms = extract_place_names(PUKETI)
    assert names(ms) == ["Puketi Forest", "Puketi", "Bay of Islands County", "North Island"]
    for m in ms:
        assert PUKETI[m.start : m.end] == m.surface


def test_abbreviation_normalised():
    ms = extract_place_names(WAIRARAPA)
    lake = [m for m in ms if m.surface == "L. Wairarapa"][0]
    assert lake.name == "Lake Wairarapa"
    assert normalize_surface("Mt Cook") == "Mount Cook"


def test_categories_and_ranks():
    m = PlaceMention("Bay of Islands County", 0, 21)
    assert mention_category(m) == "county"
    assert admin_rank(m) == 4
    assert admin_rank(PlaceMention("North Island", 0, 12)) == 5
    assert mention_category(PlaceMention("Blythe River", 0, 12)) == "river"


def test_empty_text_rejected():
    with pytest.raises(ValueError):
        extract_place_names("   ")


def test_annotation_override_validates_spans():
    text = "near Otira"
    good = [PlaceMention("Otira", 5, 10)]
    assert extract_place_names(text, good) == good
    with pytest.raises(MentionError):
        AnnotationExtractor([PlaceMention("Otira", 4, 9)]).extract(text)


def test_mention_round_trip():
    m = PlaceMention("L. Wairarapa", 3, 15, "Lake Wairarapa")
    assert PlaceMention.from_dict(m.to_dict()) == m


# -- distances and lexicon --------------------------------------------------------


@pytest.mark.parametrize(
    "phrase,km,precision",
    [
        ("2 km", 2.0, EXACT),
        ("Ca 2km", 2.0, APPROXIMATE),
        ("about 400m", 0.4, APPROXIMATE),
        ("3 miles", 3 * 1.609344, EXACT),
        ("2-3 km", 3.0, APPROXIMATE),
        ("~1.5 km", 1.5, APPROXIMATE),
    ],
)
def test_distance_phrases(phrase, km, precision):
    value, prec = parse_distance_phrase(phrase)
    assert value == pytest.approx(km)
    assert prec == precision


def test_not_a_distance():
    with pytest.raises(NotADistance):
        parse_distance_phrase("north")
    with pytest.raises(NotADistance):
        parse_distance_phrase("0 km")


def test_hedge_inside_word_does_not_count():
    # "Inca 2 km" must not read "ca" as a hedge
    assert parse_distance_phrase("Inca 2 km")[1] == EXACT


def test_lexicon_file_loads_seed_entries():
    sources = {p.source for p in default_lexicon()}
    for seed in ("{distance?} north of", "{bearing?} shore of", "between {place} and {place}", "near", "mouth of", "along", "{distance} from"):
        assert seed in sources


def test_custom_lexicon_and_case_sensitive_compass():
    lex = load_lexicon("# comment\n{distance?} NE of\n\nup {distance?}\n")
    assert len(lex) == 2
    pat = compile_pattern("{distance?} NE of")
    assert pat.regex.search("2 km NE of Hill")
    assert not pat.regex.search("one of the ne of them")


# -- relations ------------------------------------------------------------------


def test_degenerate_north_of_with_distance():
    r = parse(PUKETI)
    (t,) = r.triples
    assert t.indicator == "north of"
    assert t.relatum.name == "Puketi"
    assert t.degenerate
    assert t.distance_km == 2.0 and t.bearing == "N"


def test_coreference_to_lake():
    r = parse(WAIRARAPA)
    by_ind = {t.indicator: t for t in r.triples}
    assert by_ind["NE shore of"].relatum.name == "Lake Wairarapa"
    assert by_ind["NE shore of"].bearing == "NE"
    frm = by_ind["from"]
    assert frm.relatum.surface == "lake" and frm.relatum.name == "Lake Wairarapa"
    assert frm.distance_km == pytest.approx(0.4) and frm.precision == APPROXIMATE
    assert r.place_names() == ["J.K. Donald Wildlife Reserve", "Lake Wairarapa"]


def test_ambiguous_bare_noun_left_unresolved():
    text = "Lake Ohau and Lake Pukaki, north of lake"
    ms = extract_place_names(text)
    noun = PlaceMention("lake", text.rindex("lake"), len(text))
    assert resolve_coreference(noun, ms).normalized is None


def test_between_gives_two_triples():
    r = parse(AZIMUTH)
    between = [t for t in r.triples if t.indicator == "between"]
    assert [t.relatum.name for t in between] == ["Azimuth", "Courrejolles Point"]


def test_mouth_and_offset():
    r = parse(NAPENAPE)
    inds = {(t.indicator, t.relatum.name) for t in r.triples}
    assert ("south of", "Blythe River") in inds and ("mouth of", "Blythe River") in inds
    south = [t for t in r.triples if t.indicator == "south of"][0]
    assert south.distance_km == 3.0 and south.bearing == "S"


def test_locatum_when_adjacent():
    text = "Hut Creek 2 km north of Otira"
    r = parse(text)
    (t,) = r.triples
    assert t.locatum is not None and t.locatum.name == "Hut Creek"
    assert not t.degenerate


def test_triple_validation_and_round_trip():
    rel = PlaceMention("Otira", 0, 5)
    with pytest.raises(ValueError):
        RelationTriple("", rel)
    with pytest.raises(ValueError):
        RelationTriple("near", rel, distance_km=0.0)
    t = RelationTriple("north of", rel, None, 2.0, "N", APPROXIMATE)
    assert RelationTriple.from_dict(t.to_dict()) == t


def test_relations_reject_bad_mentions():
    with pytest.raises(MentionError):
        extract_relations("near Otira", [PlaceMention("Otira", 0, 5)])


# -- containment ------------------------------------------------------------------


def test_heuristic_containment_chain():
    # coarse-to-fine comma lists nest each admin name over the next one
    r = parse(NAPENAPE)
    pairs = [(p.name, c.name) for p, c in r.containment]
    assert pairs == [("North Canterbury", "Napenape Scenic Reserve")]
    assert parse("Otira, North Canterbury").containment == []


def test_geometric_containment(gazetteer):
    ms = extract_place_names(PUKETI)
    feats = {n: gazetteer.query(n, "", "")[0] for n in ("Puketi", "Bay of Islands County", "North Island")}
    pairs = [(p.name, c.name) for p, c in detect_containment(ms, feats, PUKETI)]
    assert pairs == [("Bay of Islands County", "Puketi"), ("North Island", "Bay of Islands County")]


def test_cycle_detected():
    a, b = PlaceMention("A", 0, 1), PlaceMention("B", 2, 3)
    with pytest.raises(ContainmentCycle):
        check_acyclic([(a, b), (b, a)])


def test_parse_result_round_trip_and_validation():
    r = parse(NAPENAPE)
    assert ParseResult.from_dict(r.to_dict()) == r
    with pytest.raises(ValueError):
        ParseResult([], [RelationTriple("near", PlaceMention("X", 0, 1))])


def test_manual_annotation_overrides_parser():
    text = "Fiordland, Elizabeth Burn below Mount George"
    ann = {"mentions": [{"surface": "Elizabeth Burn", "start": 11, "end": 25}], "triples": []}
    r = parse(text, ann)
    assert r.place_names() == ["Elizabeth Burn"] and r.triples == []


@given(st.text(alphabet="abcdefghij ,.", min_size=1).filter(str.strip))
def test_lowercase_noise_never_crashes(text):
    r = parse(text)
    assert all(text[m.start : m.end] == m.surface for m in r.mentions)
