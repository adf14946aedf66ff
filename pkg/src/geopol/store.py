"""Named geographic features with ETL provenance, persisted as N-Triples.

Each ingested dataset gets a PROV-style description under
``urn:geopol:dataset:<label>``::

    <dataset>                 rdfs:label, prov:wasDerivedFrom <dataset:source>,
                              prov:wasGeneratedBy <dataset:etl>
    <dataset:source>          rdfs:label "<file name>"
    <dataset:etl>             prov:startedAtTime "<timestamp>"^^xsd:dateTime
    <dataset:record:N>        prov:wasDerivedFrom <dataset:source>

and every feature ``<base><id>`` is a ``geo:Feature`` and ``prov:Location``
with a ``geo:hasGeometry`` node ``<base><id>/geom`` carrying ``geo:asWKT``,
derived from its source record and generated by the dataset's ETL activity.
"""

import re
from collections import defaultdict
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import NamedTuple, Optional, Tuple

from .errors import (
    DuplicateDataset, DuplicateFeatureIri, InvalidBaseIri, InvalidDatasetLabel,
    MissingGeometry, MissingProvenance, NTriplesSyntaxError, UnknownFeature,
)
from .geometry import bbox
from .shapefile import SkipEvent, shape_to_geometry
from .wkt import emit_wkt, parse_wkt

RDF_TYPE = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type"
RDFS_LABEL = "http://www.w3.org/2000/01/rdf-schema#label"
GEO = "http://www.opengis.net/ont/geosparql#"
GEO_FEATURE = GEO + "Feature"
GEO_HAS_GEOMETRY = GEO + "hasGeometry"
GEO_AS_WKT = GEO + "asWKT"
GEO_WKT_LITERAL = GEO + "wktLiteral"
PROV = "http://www.w3.org/ns/prov#"
PROV_LOCATION = PROV + "Location"
PROV_DERIVED_FROM = PROV + "wasDerivedFrom"
PROV_GENERATED_BY = PROV + "wasGeneratedBy"
PROV_STARTED_AT = PROV + "startedAtTime"
XSD_STRING = "http://www.w3.org/2001/XMLSchema#string"
XSD_DATETIME = "http://www.w3.org/2001/XMLSchema#dateTime"

DATASET_PREFIX = "urn:geopol:dataset:"
SKIPPED_PREFIX = "skipped: "

_IRI_BODY = r'[^\x00-\x20<>"{}|^`\\]*'
_ABSOLUTE_IRI = re.compile(r"[A-Za-z][A-Za-z0-9+.\-]*:" + _IRI_BODY + r"\Z")
_LABEL = re.compile(r"[A-Za-z0-9._\-]+\Z")


class Literal(NamedTuple):
    lexical: str
    datatype: Optional[str] = None
    language: Optional[str] = None


@dataclass(frozen=True)
class Feature:
    iri: str
    legal_name: str
    geometry: object
    dataset: str
    source_record: int


@dataclass(frozen=True)
class DatasetRecord:
    iri: str
    label: str
    source_file: str
    started_at: str
    skipped: Tuple[SkipEvent, ...] = ()

    @property
    def activity(self):
        return self.iri + ":etl"

    @property
    def source(self):
        return self.iri + ":source"

    def record_iri(self, number):
        return "%s:record:%d" % (self.iri, number)


@dataclass(frozen=True)
class ProvenanceStep:
    entity: str
    derived_from: Optional[str] = None
    generated_by: Optional[str] = None
    at: Optional[str] = None
    label: Optional[str] = None


@dataclass(frozen=True)
class ProvenanceChain:
    steps: Tuple[ProvenanceStep, ...]

    @property
    def source_file(self):
        return self.steps[-1].label


class FeatureStore:
    """Immutable collection of features plus a bounding-box candidate index.

    The index is a flat list of (bbox, iri) sorted by box; lookups scan it
    linearly, which is adequate for datasets of a few thousand features.
    """

    def __init__(self, features=(), datasets=(), annotations=()):
        self.datasets = {d.iri: d for d in sorted(datasets, key=lambda d: d.iri)}
        self.features = {}
        for f in sorted(features, key=lambda f: f.iri):
            if f.iri in self.features:
                raise DuplicateFeatureIri(f.iri)
            if f.dataset not in self.datasets:
                raise MissingProvenance("feature %s refers to unknown dataset %s"
                                        % (f.iri, f.dataset))
            self.features[f.iri] = f
        self.annotations = frozenset(annotations)
        boxes = [(bbox(f.geometry), f.iri) for f in self.features.values()]
        boxes.sort(key=lambda e: (e[0].xmin, e[0].ymin, e[0].xmax, e[0].ymax, e[1]))
        self._index = tuple(boxes)

    def __len__(self):
        return len(self.features)

    def __contains__(self, iri):
        return iri in self.features

    def __iter__(self):
        return iter(self.features.values())

    def __eq__(self, other):
        if not isinstance(other, FeatureStore):
            return NotImplemented
        return (self.features == other.features and self.datasets == other.datasets
                and self.annotations == other.annotations)

    def __repr__(self):
        return "FeatureStore(%d features, %d datasets)" % (len(self.features), len(self.datasets))

    def feature(self, iri):
        try:
            return self.features[iri]
        except KeyError:
            raise UnknownFeature("unknown feature %s" % iri) from None

    def candidates(self, p):
        """IRIs whose bounding box contains ``p``, sorted."""
        return sorted(iri for box, iri in self._index if box.contains(p.lon, p.lat))


def candidates(store, p):
    return store.candidates(p)


def iri_escape(text):
    return "".join(c if re.match(_IRI_BODY + r"\Z", c) else
                   "".join("%%%02X" % b for b in c.encode("utf-8")) for c in text)


def format_timestamp(at):
    """Normalise a datetime or ISO-8601 string to UTC ``YYYY-MM-DDTHH:MM:SS[.ffffff]Z``."""
    if isinstance(at, str):
        try:
            at = datetime.fromisoformat(at.replace("Z", "+00:00"))
        except ValueError:
            raise ValueError("invalid timestamp %r" % at) from None
    if at.tzinfo is None:
        at = at.replace(tzinfo=timezone.utc)
    at = at.astimezone(timezone.utc)
    fmt = "%Y-%m-%dT%H:%M:%S.%fZ" if at.microsecond else "%Y-%m-%dT%H:%M:%SZ"
    return at.strftime(fmt)


def build_store(datasets, at):
    """Build a store from ``(RawDataset, base_iri, label)`` triples.

    ``at`` is the ETL start timestamp recorded for every dataset; it is
    passed in rather than read from the clock so output is reproducible.
    """
    stamp = format_timestamp(at)
    records = []
    features = []
    seen = set()
    for raw, base_iri, label in datasets:
        if not isinstance(base_iri, str) or not _ABSOLUTE_IRI.match(base_iri):
            raise InvalidBaseIri("base IRI %r is not an absolute IRI" % (base_iri,))
        if not isinstance(label, str) or not _LABEL.match(label):
            raise InvalidDatasetLabel("dataset label %r must match [A-Za-z0-9._-]+" % (label,))
        rec = DatasetRecord(DATASET_PREFIX + label, label, raw.source, stamp, tuple(raw.skipped))
        if rec.iri in (r.iri for r in records):
            raise DuplicateDataset("dataset label %r used twice" % label)
        records.append(rec)
        for entry in raw.entries:
            iri = base_iri + iri_escape(entry.id)
            if iri in seen:
                raise DuplicateFeatureIri(iri)
            seen.add(iri)
            features.append(Feature(iri, entry.legal_name, shape_to_geometry(entry.shape),
                                    rec.iri, entry.shape.record_number))
    return FeatureStore(features, records)


# -- N-Triples ---------------------------------------------------------------

def _escape_literal(text):
    return (text.replace("\\", "\\\\").replace('"', '\\"')
            .replace("\n", "\\n").replace("\r", "\\r").replace("\t", "\\t"))


def _term(t):
    if isinstance(t, Literal):
        out = '"%s"' % _escape_literal(t.lexical)
        if t.language:
            return out + "@" + t.language
        if t.datatype:
            return out + "^^<%s>" % t.datatype
        return out
    return "<%s>" % t


def _string(text):
    return Literal(text, XSD_STRING)


def store_triples(store):
    triples = set(store.annotations)
    for d in store.datasets.values():
        triples.add((d.iri, RDFS_LABEL, _string(d.label)))
        triples.add((d.iri, PROV_DERIVED_FROM, d.source))
        triples.add((d.iri, PROV_GENERATED_BY, d.activity))
        triples.add((d.source, RDFS_LABEL, _string(d.source_file)))
        triples.add((d.activity, PROV_STARTED_AT, Literal(d.started_at, XSD_DATETIME)))
        for skip in d.skipped:
            rec = d.record_iri(skip.record_number)
            triples.add((rec, PROV_DERIVED_FROM, d.source))
            triples.add((rec, RDFS_LABEL, _string(SKIPPED_PREFIX + skip.reason)))
    for f in store.features.values():
        d = store.datasets[f.dataset]
        geom = f.iri + "/geom"
        rec = d.record_iri(f.source_record)
        triples.add((f.iri, RDF_TYPE, GEO_FEATURE))
        triples.add((f.iri, RDF_TYPE, PROV_LOCATION))
        triples.add((f.iri, RDFS_LABEL, _string(f.legal_name)))
        triples.add((f.iri, GEO_HAS_GEOMETRY, geom))
        triples.add((geom, GEO_AS_WKT, Literal(emit_wkt(f.geometry), GEO_WKT_LITERAL)))
        triples.add((f.iri, PROV_DERIVED_FROM, rec))
        triples.add((f.iri, PROV_GENERATED_BY, d.activity))
        triples.add((rec, PROV_DERIVED_FROM, d.source))
    return triples


def serialize_ntriples(store):
    rows = sorted(tuple(_term(t) for t in triple) for triple in store_triples(store))
    return "".join("%s %s %s .\n" % row for row in rows)


_IRIREF = r"<(" + _IRI_BODY + r")>"
_LINE = re.compile(
    r"\s*" + _IRIREF + r"\s*" + _IRIREF + r"\s*(?:" + _IRIREF
    + r'|"((?:[^"\\\n\r]|\\.)*)"(?:\^\^' + _IRIREF + r"|@([A-Za-z]+(?:-[A-Za-z0-9]+)*))?)"
    + r"\s*\.\s*(?:#.*)?\Z"
)
_ESCAPE = re.compile(r"\\(?:u([0-9A-Fa-f]{4})|U([0-9A-Fa-f]{8})|(.))", re.DOTALL)
_SIMPLE_ESCAPES = {"t": "\t", "n": "\n", "r": "\r", '"': '"', "'": "'", "\\": "\\",
                   "b": "\b", "f": "\f"}


def _unescape(text, lineno):
    def sub(m):
        code = m.group(1) or m.group(2)
        if code:
            value = int(code, 16)
            if value > 0x10FFFF or 0xD800 <= value <= 0xDFFF:
                raise NTriplesSyntaxError("invalid code point \\u%s" % code, line=lineno)
            return chr(value)
        char = m.group(3)
        if char not in _SIMPLE_ESCAPES:
            raise NTriplesSyntaxError("invalid escape \\%s" % char, line=lineno)
        return _SIMPLE_ESCAPES[char]
    return _ESCAPE.sub(sub, text)


def parse_ntriples(text):
    """Parse the N-Triples subset (IRIs and literals, no blank nodes)."""
    triples = set()
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        m = _LINE.match(line)
        if m is None:
            raise NTriplesSyntaxError("malformed triple", line=lineno)
        s, p, o_iri, lex, dt, lang = m.groups()
        if o_iri is not None:
            obj = o_iri
        else:
            obj = Literal(_unescape(lex, lineno), dt, lang)
        triples.add((s, p, obj))
    return triples


def _label_text(obj):
    if isinstance(obj, Literal) and obj.datatype in (None, XSD_STRING) and not obj.language:
        return obj.lexical
    return None


def load_ntriples(text):
    """Rebuild a :class:`FeatureStore` from :func:`serialize_ntriples` output.

    Triples outside the fixed vocabulary are kept as opaque annotations.
    """
    triples = parse_ntriples(text)
    by_sp = defaultdict(list)
    for s, p, o in triples:
        by_sp[s, p].append(o)
    used = set()

    def objects(s, p):
        return by_sp.get((s, p), [])

    def one(s, p, kind=None):
        objs = [o for o in objects(s, p)
                if kind is None or (kind == "iri") == isinstance(o, str)]
        return objs[0] if len(objs) == 1 else None

    feature_iris = sorted(s for s, p, o in triples if p == RDF_TYPE and o == GEO_FEATURE)
    feature_set = set(feature_iris)

    datasets = {}
    by_activity = {}
    for s, p, o in sorted(triples, key=lambda t: (t[0], t[1])):
        if p != PROV_GENERATED_BY or s in feature_set or s in datasets:
            continue
        if not s.startswith(DATASET_PREFIX):
            continue
        activity = o
        source = one(s, PROV_DERIVED_FROM, "iri")
        label = one(s, RDFS_LABEL)
        started = one(activity, PROV_STARTED_AT) if isinstance(activity, str) else None
        file_label = one(source, RDFS_LABEL) if source else None
        label_text = _label_text(label) if label is not None else None
        file_text = _label_text(file_label) if file_label is not None else None
        if (label_text is None or file_text is None or not isinstance(started, Literal)
                or started.datatype != XSD_DATETIME):
            continue
        rec = DatasetRecord(s, label_text, file_text, started.lexical)
        if activity != rec.activity or source != rec.source:
            continue
        datasets[s] = rec
        by_activity[activity] = rec
        used.update({
            (s, RDFS_LABEL, label), (s, PROV_DERIVED_FROM, source),
            (s, PROV_GENERATED_BY, activity), (source, RDFS_LABEL, file_label),
            (activity, PROV_STARTED_AT, started),
        })

    # skipped-record descriptions
    skipped = defaultdict(list)
    for rec in datasets.values():
        prefix = rec.iri + ":record:"
        for s, p, o in triples:
            if p != RDFS_LABEL or not s.startswith(prefix):
                continue
            text = _label_text(o)
            number = s[len(prefix):]
            if text is None or not text.startswith(SKIPPED_PREFIX) or not number.isdigit():
                continue
            if rec.source not in objects(s, PROV_DERIVED_FROM):
                continue
            skipped[rec.iri].append(SkipEvent(int(number), text[len(SKIPPED_PREFIX):]))
            used.update({(s, p, o), (s, PROV_DERIVED_FROM, rec.source)})
    for iri, events in skipped.items():
        rec = datasets[iri]
        datasets[iri] = DatasetRecord(rec.iri, rec.label, rec.source_file, rec.started_at,
                                      tuple(sorted(events, key=lambda e: e.record_number)))

    features = []
    for iri in feature_iris:
        geom_node = iri + "/geom"
        wkts = objects(geom_node, GEO_AS_WKT)
        if geom_node not in objects(iri, GEO_HAS_GEOMETRY) or len(wkts) != 1 \
                or not isinstance(wkts[0], Literal):
            raise MissingGeometry("feature %s needs exactly one geo:asWKT literal on %s"
                                  % (iri, geom_node))
        geometry = parse_wkt(wkts[0].lexical)
        activity = one(iri, PROV_GENERATED_BY, "iri")
        rec = by_activity.get(activity)
        if rec is None:
            raise MissingProvenance("feature %s has no known generating activity" % iri)
        prefix = rec.iri + ":record:"
        sources = [o for o in objects(iri, PROV_DERIVED_FROM)
                   if isinstance(o, str) and o.startswith(prefix) and o[len(prefix):].isdigit()]
        if len(sources) != 1:
            raise MissingProvenance("feature %s has no source record" % iri)
        record_iri = sources[0]
        label = one(iri, RDFS_LABEL)
        name = _label_text(label) if label is not None else None
        features.append(Feature(iri, name or "", geometry, rec.iri, int(record_iri[len(prefix):])))
        used.update({
            (iri, RDF_TYPE, GEO_FEATURE), (iri, GEO_HAS_GEOMETRY, geom_node),
            (geom_node, GEO_AS_WKT, wkts[0]), (iri, PROV_GENERATED_BY, activity),
            (iri, PROV_DERIVED_FROM, record_iri), (record_iri, PROV_DERIVED_FROM, rec.source),
        })
        if (iri, RDF_TYPE, PROV_LOCATION) in triples:
            used.add((iri, RDF_TYPE, PROV_LOCATION))
        if name is not None:
            used.add((iri, RDFS_LABEL, label))

    return FeatureStore(features, datasets.values(), triples - used)


def provenance_trace(store, feature_iri):
    """Derivation chain from a feature back to its source file."""
    f = store.feature(feature_iri)
    d = store.datasets[f.dataset]
    record = d.record_iri(f.source_record)
    return ProvenanceChain((
        ProvenanceStep(f.iri, record, d.activity, d.started_at, f.legal_name),
        ProvenanceStep(record, d.source, label="record %d" % f.source_record),
        ProvenanceStep(d.source, label=d.source_file),
    ))
