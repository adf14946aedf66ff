"""Shapefile-backed geospatial reasoning for location-sensitive policies.

Typical use::

    from geopol import (FieldMapping, load_dataset, build_store, parse_policy_doc,
                        parse_request, evaluate_request)

    raw = load_dataset(shp_bytes, dbf_bytes, FieldMapping("GEOID", "NAME"), source="states.shp")
    store = build_store([(raw, "https://example.org/states/", "states")], at="2020-01-01T00:00:00Z")
    decision = evaluate_request(parse_request(text), store, parse_policy_doc(policy_text))
"""

from .geometry import (
    BBox, MultiPolygon, Orientation, Point, Polygon, Ring, bbox, distance_point_geometry_km,
    haversine_km, point_in_ring, ring_orientation, sf_within_point,
)
from .pipeline import (
    Decision, TransmissionRequest, decision_document, evaluate_request, explain, parse_request,
)
from .policy import (
    And, ClassDef, ClassRef, DistanceLE, Or, PolicySet, Provision, Within, classify,
    eval_class_expr, parse_policy_doc, validate_policy_set,
)
from .relations import LocationFacts, apply_relations, infer_relations
from .shapefile import FieldMapping, load_dataset, parse_dbf, parse_shp, shape_to_geometry
from .store import (
    Feature, FeatureStore, build_store, candidates, load_ntriples, provenance_trace,
    serialize_ntriples,
)
from .wkt import emit_wkt, parse_wkt

__version__ = "0.1.0"

__all__ = [
    "And", "apply_relations", "BBox", "bbox", "build_store", "candidates", "ClassDef",
    "classify", "ClassRef", "Decision", "decision_document", "distance_point_geometry_km",
    "DistanceLE", "emit_wkt", "eval_class_expr", "evaluate_request", "explain", "Feature",
    "FeatureStore", "FieldMapping", "haversine_km", "infer_relations", "load_dataset",
    "load_ntriples", "LocationFacts", "MultiPolygon", "Or", "Orientation", "parse_dbf",
    "parse_policy_doc", "parse_request", "parse_shp", "parse_wkt", "Point", "point_in_ring",
    "PolicySet", "Polygon", "provenance_trace", "Provision", "Ring", "ring_orientation",
    "serialize_ntriples", "sf_within_point", "shape_to_geometry", "TransmissionRequest",
    "validate_policy_set", "Within",
]
