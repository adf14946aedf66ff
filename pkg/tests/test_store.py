import random
from collections import Counter

import pytest
from hypothesis import given, settings, strategies as st

from geopol.errors import (
    DuplicateDataset, DuplicateFeatureIri, InvalidBaseIri, InvalidDatasetLabel, MissingGeometry,
    MissingProvenance, NTriplesSyntaxError, UnknownFeature,
)
from geopol.geometry import Point, bbox, sf_within_point
from geopol.shapefile import RawDataset, RawEntry, RawShape, ShapeType
from geopol.store import (
    GEO_AS_WKT, PROV_DERIVED_FROM, FeatureStore, Literal, build_store, candidates, format_timestamp,
    load_ntriples, parse_ntriples, provenance_trace, serialize_ntriples, store_triples,
)

from conftest import ETL_AT
from gen import random_store

GEO = "http://www.opengis.net/ont/geosparql#"


def point_dataset(source="sites.shp", ids=("F1",)):
    raw = RawDataset(source, ShapeType.POINT)
    for n, i in enumerate(ids, 1):
        raw.entries.append(RawEntry(i, "Site " + i, RawShape(n, ShapeType.POINT, (((1.0, 2.0),),))))
    return raw


# -- build -------------------------------------------------------------------

def test_fixture_store_features(fixture_store):
    assert list(fixture_store.features) == [
        "ex:sites/CAMPPARKS", "ex:sites/FAIRBANKS", "ex:states/A1", "ex:states/B2", "ex:states/C3"]
    a1 = fixture_store.feature("ex:states/A1")
    assert a1.legal_name == "State A"
    assert a1.dataset == "urn:geopol:dataset:states"
    assert a1.source_record == 1
    d = fixture_store.datasets["urn:geopol:dataset:states"]
    assert (d.source_file, d.started_at) == ("states_mini.shp", ETL_AT)


def test_duplicate_feature_iri():
    with pytest.raises(DuplicateFeatureIri):
        build_store([(point_dataset(), "ex:a/", "one"), (point_dataset(), "ex:a/", "two")], ETL_AT)


def test_distinct_bases_with_same_ids_are_fine():
    s = build_store([(point_dataset(), "ex:a/", "one"), (point_dataset(), "ex:b/", "two")], ETL_AT)
    assert list(s.features) == ["ex:a/F1", "ex:b/F1"]


@pytest.mark.parametrize("base", ["states/", "", "ex:with space/", None])
def test_invalid_base_iri(base):
    with pytest.raises(InvalidBaseIri):
        build_store([(point_dataset(), base, "one")], ETL_AT)


def test_bad_and_duplicate_labels():
    with pytest.raises(InvalidDatasetLabel):
        build_store([(point_dataset(), "ex:a/", "has space")], ETL_AT)
    with pytest.raises(DuplicateDataset):
        build_store([(point_dataset(), "ex:a/", "x"), (point_dataset(ids=("F2",)), "ex:b/", "x")], ETL_AT)


def test_ids_are_percent_escaped():
    s = build_store([(point_dataset(ids=("a b", "c<d>")), "ex:a/", "one")], ETL_AT)
    assert list(s.features) == ["ex:a/a%20b", "ex:a/c%3Cd%3E"]


def test_timestamps_normalised_to_utc():
    assert format_timestamp("2020-06-01T14:00:00+02:00") == "2020-06-01T12:00:00Z"
    assert format_timestamp("2020-06-01T12:00:00.250Z") == "2020-06-01T12:00:00.250000Z"
    with pytest.raises(ValueError):
        format_timestamp("yesterday")


def test_feature_with_unknown_dataset_rejected(fixture_store):
    f = fixture_store.feature("ex:states/A1")
    with pytest.raises(MissingProvenance):
        FeatureStore([f], [])


# -- serialize ---------------------------------------------------------------

def test_serialize_point_feature_line():
    text = serialize_ntriples(build_store([(point_dataset(), "ex:sites/", "sites")], ETL_AT))
    lines = text.splitlines()
    assert "<ex:sites/F1> <%shasGeometry> <ex:sites/F1/geom> ." % GEO in lines
    assert '<ex:sites/F1/geom> <%sasWKT> "POINT(1 2)"^^<%swktLiteral> .' % (GEO, GEO) in lines
    assert lines == sorted(lines)
    assert text.endswith(" .\n")


def test_empty_store_serializes_to_empty_text():
    assert serialize_ntriples(FeatureStore()) == ""


def test_serialize_is_deterministic(fixture_store, states_raw, sites_raw):
    again = build_store([(sites_raw, "ex:sites/", "sites"), (states_raw, "ex:states/", "states")], ETL_AT)
    assert again == fixture_store
    assert serialize_ntriples(again) == serialize_ntriples(fixture_store)


def test_every_feature_has_one_wkt_and_provenance():
    rng = random.Random(11)
    for _ in range(50):
        s = random_store(rng)
        triples = store_triples(s)
        wkt = Counter(t[0] for t in triples if t[1] == GEO_AS_WKT)
        derived = {t[0] for t in triples if t[1] == PROV_DERIVED_FROM}
        for iri in s.features:
            assert wkt[iri + "/geom"] == 1
            assert iri in derived


# -- load --------------------------------------------------------------------

def test_load_round_trip_fixture(fixture_store):
    text = serialize_ntriples(fixture_store)
    loaded = load_ntriples(text)
    assert loaded == fixture_store
    assert serialize_ntriples(loaded) == text


def test_load_round_trip_random_stores():
    rng = random.Random(3)
    for _ in range(200):
        s = random_store(rng)
        text = serialize_ntriples(s)
        loaded = load_ntriples(text)
        assert loaded == s
        assert serialize_ntriples(loaded) == text


@settings(max_examples=50, deadline=None)
@given(st.randoms(use_true_random=False))
def test_load_round_trip_property(rng):
    s = random_store(rng)
    assert load_ntriples(serialize_ntriples(s)) == s


def test_missing_terminator_reports_line(fixture_store):
    lines = serialize_ntriples(fixture_store).splitlines()
    lines[4] = lines[4][:-2]
    with pytest.raises(NTriplesSyntaxError) as info:
        load_ntriples("\n".join(lines))
    assert info.value.line == 5


def test_parse_comments_blank_lines_and_escapes():
    text = ('# header\n\n<ex:s> <ex:p> "a\\"b\\n\\u00e9" .\n'
            '<ex:s> <ex:p> "x"@en .  # trailing\n<ex:s> <ex:q> <ex:o> .\n')
    assert parse_ntriples(text) == {
        ("ex:s", "ex:p", Literal('a"b\né')),
        ("ex:s", "ex:p", Literal("x", language="en")),
        ("ex:s", "ex:q", "ex:o"),
    }


@pytest.mark.parametrize("line", ["_:b0 <ex:p> <ex:o> .", "<ex:s> <ex:p> .",
                                  '<ex:s> <ex:p> "bad\\q" .', "<ex:s> <ex:p> <ex:o>"])
def test_unsupported_or_malformed_lines(line):
    with pytest.raises(NTriplesSyntaxError):
        parse_ntriples(line)


def test_feature_without_geometry(fixture_store):
    text = "".join(l + "\n" for l in serialize_ntriples(fixture_store).splitlines()
                   if "A1/geom> <%sasWKT>" % GEO not in l)
    with pytest.raises(MissingGeometry):
        load_ntriples(text)


def test_feature_without_activity(fixture_store):
    text = "".join(l + "\n" for l in serialize_ntriples(fixture_store).splitlines()
                   if not l.startswith("<ex:states/A1> <http://www.w3.org/ns/prov#wasGeneratedBy>"))
    with pytest.raises(MissingProvenance):
        load_ntriples(text)


def test_unknown_triples_preserved(fixture_store):
    extra = '<ex:states/A1> <ex:note> "kept"@en .\n<ex:other> <ex:p> <ex:o> .\n'
    text = serialize_ntriples(fixture_store) + extra
    loaded = load_ntriples(text)
    assert loaded.features == fixture_store.features
    assert loaded.annotations == {("ex:states/A1", "ex:note", Literal("kept", language="en")),
                                  ("ex:other", "ex:p", "ex:o")}
    assert sorted(serialize_ntriples(loaded).splitlines()) == sorted(text.splitlines())


def test_skipped_records_survive_round_trip():
    rng = random.Random(0)
    found = 0
    for _ in range(40):
        s = random_store(rng)
        if any(d.skipped for d in s.datasets.values()):
            found += 1
            assert load_ntriples(serialize_ntriples(s)).datasets == s.datasets
    assert found


# -- provenance --------------------------------------------------------------

def test_provenance_chain(fixture_store):
    chain = provenance_trace(fixture_store, "ex:states/A1")
    first, record, source = chain.steps
    assert first.entity == "ex:states/A1"
    assert first.derived_from == record.entity == "urn:geopol:dataset:states:record:1"
    assert first.generated_by == "urn:geopol:dataset:states:etl"
    assert first.at == ETL_AT
    assert record.derived_from == source.entity == "urn:geopol:dataset:states:source"
    assert chain.source_file == "states_mini.shp"


def test_provenance_unknown_feature(fixture_store):
    with pytest.raises(UnknownFeature):
        provenance_trace(fixture_store, "ex:states/ZZ")


def test_provenance_survives_round_trip(fixture_store):
    loaded = load_ntriples(serialize_ntriples(fixture_store))
    for iri in fixture_store.features:
        assert provenance_trace(loaded, iri) == provenance_trace(fixture_store, iri)


# -- candidates --------------------------------------------------------------

def test_candidates_examples(fixture_store):
    assert "ex:states/A1" in candidates(fixture_store, Point(0.5, 0.5))
    assert candidates(fixture_store, Point(0.5, 0.5)) == ["ex:sites/FAIRBANKS", "ex:states/A1"]
    assert candidates(fixture_store, Point(50, 50)) == []


def test_index_soundness():
    rng = random.Random(21)
    stores = [random_store(rng, n_datasets=3, max_features=8) for _ in range(10)]
    hits = 0
    for i in range(1000):
        s = stores[i % len(stores)]
        if not len(s):
            continue
        # aim near a random feature half the time so containment actually occurs
        if rng.random() < 0.5:
            f = rng.choice(list(s))
            box = bbox(f.geometry)
            p = Point(rng.uniform(box.xmin, box.xmax), rng.uniform(box.ymin, box.ymax))
        else:
            p = Point(rng.uniform(-180, 180), rng.uniform(-90, 90))
        cand = candidates(s, p)
        assert cand == sorted(cand)
        full = {f.iri for f in s if sf_within_point(p, f.geometry)}
        via_index = {iri for iri in cand if sf_within_point(p, s.feature(iri).geometry)}
        assert full == via_index
        hits += len(full)
    assert hits > 50
