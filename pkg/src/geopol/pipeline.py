"""End-to-end evaluation of transmission requests against a policy set.

Request documents are flat ``key = value`` text::

    id = r1
    requester = agentX
    location_wkt = POINT(0.5 0.5)
    frequency_mhz = 1770..1770
    attr.service = space-operation

Decision documents are JSON with sorted keys and two-space indentation;
distances in them are rounded to 1e-6 km.
"""

import enum
import json
import re
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

from .errors import (
    CyclicDefinition, DanglingClassRef, DanglingProvisionClass, MissingLocation, NotAPoint,
    RequestSyntaxError,
)
from .geometry import Point
from .policy import classify_trace, distance_targets, format_expr, validate_policy_set
from .relations import LocationFacts, apply_relations, infer_relations
from .store import iri_escape
from .wkt import format_number, parse_wkt

DISTANCE_DIGITS = 6

_REQUIRED = ("id", "requester")
_KNOWN = {"id", "requester", "location_wkt", "frequency_mhz"}
_BAND = re.compile(r"\s*(\d+(?:\.\d+)?)\s*(?:\.\.\s*(\d+(?:\.\d+)?)\s*)?\Z")


@dataclass(frozen=True)
class TransmissionRequest:
    """A request to transmit: an activity by a requester at a point location."""

    id: str
    requester: str
    location_wkt: str
    point: Point
    frequency_mhz: Optional[Tuple[float, float]] = None
    attributes: Dict[str, str] = field(default_factory=dict)
    facts: Optional[LocationFacts] = None

    def __post_init__(self):
        if self.facts is None:
            object.__setattr__(self, "facts", LocationFacts(self.location_node, self.point))

    __hash__ = None

    @property
    def location_node(self):
        return "urn:geopol:request:%s:location" % iri_escape(self.id)


def parse_request(text):
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        key, sep, value = stripped.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise RequestSyntaxError("expected 'key = value'", line=lineno)
        if key not in _KNOWN and not (key.startswith("attr.") and len(key) > 5):
            raise RequestSyntaxError("unknown key %r" % key, line=lineno)
        if key in values:
            raise RequestSyntaxError("duplicate key %r" % key, line=lineno)
        values[key] = (value, lineno)

    for key in _REQUIRED:
        if not values.get(key, ("",))[0]:
            raise RequestSyntaxError("missing required key %r" % key)
    if not values.get("location_wkt", ("",))[0]:
        raise MissingLocation("request has no location_wkt")
    wkt_text = values["location_wkt"][0]
    point = parse_wkt(wkt_text)
    if not isinstance(point, Point):
        raise NotAPoint("request location must be a POINT, got %s" % wkt_text.split("(")[0].strip())

    band = None
    if "frequency_mhz" in values:
        raw, lineno = values["frequency_mhz"]
        m = _BAND.match(raw)
        if m is None:
            raise RequestSyntaxError("frequency_mhz must be 'low..high'", line=lineno)
        low = float(m.group(1))
        high = float(m.group(2)) if m.group(2) is not None else low
        if low > high:
            raise RequestSyntaxError("frequency_mhz low edge exceeds high edge", line=lineno)
        band = (low, high)

    attrs = {k[5:]: v for k, (v, _) in sorted(values.items()) if k.startswith("attr.")}
    return TransmissionRequest(values["id"][0], values["requester"][0], wkt_text, point,
                               band, attrs)


class StepKind(enum.Enum):
    RELATION_INFERRED = "RelationInferred"
    CLASS_ENTERED = "ClassEntered"
    PROVISION_MATCHED = "ProvisionMatched"
    PROVISION_REJECTED = "ProvisionRejected"


@dataclass(frozen=True)
class TraceStep:
    kind: StepKind
    detail: str
    support: Tuple[tuple, ...] = ()


@dataclass(frozen=True)
class ProvisionResult:
    policy_id: str
    provision_id: str
    applicable: bool
    effect: str
    reasons: Tuple[str, ...]


@dataclass(frozen=True)
class Decision:
    request_id: str
    memberships: frozenset
    relations: LocationFacts
    provision_results: Tuple[ProvisionResult, ...]
    trace: Tuple[TraceStep, ...]

    def to_document(self):
        return decision_document(self)


def _km(d):
    return format_number(round(d, DISTANCE_DIGITS))


def _band_text(band):
    return "%s..%s MHz" % (format_number(band[0]), format_number(band[1]))


def _atom_text(atom):
    kind = atom[0]
    if kind == "within":
        return "within %s" % atom[1]
    if kind == "class":
        return "member of %s" % atom[1]
    if len(atom) == 4:
        return "distance %s = %s km <= %s km" % (atom[1], _km(atom[2]), format_number(atom[3]))
    return "distance %s = %s km" % (atom[1], _km(atom[2]))


_VALIDATION_ERRORS = {
    "CyclicDefinition": CyclicDefinition,
    "DanglingClassRef": DanglingClassRef,
    "DanglingProvisionClass": DanglingProvisionClass,
}


def _band_verdict(request, provision):
    if provision.band is None:
        return True, None
    if request.frequency_mhz is None:
        return False, "request has no frequency; provision requires %s" % _band_text(provision.band)
    lo, hi = request.frequency_mhz
    plo, phi = provision.band
    if lo <= phi and plo <= hi:
        return True, "request band %s overlaps provision band %s" % (
            _band_text(request.frequency_mhz), _band_text(provision.band))
    return False, "band mismatch: request band %s does not overlap provision band %s" % (
        _band_text(request.frequency_mhz), _band_text(provision.band))


def evaluate_request(request, store, ps):
    """Infer relations, classify the location, and judge every provision."""
    report = validate_policy_set(ps, store)
    if report.errors:
        first = report.errors[0]
        raise _VALIDATION_ERRORS[first.code](first.message)

    targets = sorted(f for f in distance_targets(ps) if f in store)
    facts = infer_relations(request.point, store, targets, node=request.location_node)
    request = apply_relations(request, facts)
    facts = request.facts
    result = classify_trace(facts, ps, known_features=store.features.keys())

    trace = []
    for f in sorted(facts.within):
        trace.append(TraceStep(StepKind.RELATION_INFERRED,
                               "%s geo:sfWithin %s" % (facts.node, f), (("within", f),)))
    for f, d in facts.distances.items():
        trace.append(TraceStep(StepKind.RELATION_INFERRED,
                               "%s distance to %s = %s km" % (facts.node, f, _km(d)),
                               (("distance", f, d),)))
    for entry in result.entries:
        if entry.via == "subclass-of":
            detail = "%s entered as superclass of %s" % (entry.iri, entry.support[0][1])
        else:
            detail = "%s entered via %s (definition: %s)" % (
                entry.iri, " and ".join(_atom_text(a) for a in entry.support),
                format_expr(ps.classes[entry.iri].equivalent_to))
        trace.append(TraceStep(StepKind.CLASS_ENTERED, detail, entry.support))

    results = []
    for p in ps.provisions:
        reasons = []
        in_class = p.location_class in result.memberships
        if in_class:
            reasons.append("location class %s entered" % p.location_class)
        else:
            reasons.append("location class %s not entered" % p.location_class)
        band_ok, band_reason = _band_verdict(request, p)
        if band_reason:
            reasons.append(band_reason)
        applicable = in_class and band_ok
        results.append(ProvisionResult(p.policy_id, p.id, applicable, p.effect.value,
                                       tuple(reasons)))
        kind = StepKind.PROVISION_MATCHED if applicable else StepKind.PROVISION_REJECTED
        verdict = "applicable" if applicable else "not applicable"
        trace.append(TraceStep(kind, "%s %s: %s (%s): %s" % (
            p.policy_id, p.id, verdict, p.effect.value, "; ".join(reasons)),
            (("class", p.location_class),) if in_class else ()))

    return Decision(request.id, result.memberships, facts, tuple(results), tuple(trace))


def _support_json(atom):
    return [round(x, DISTANCE_DIGITS) if isinstance(x, float) else x for x in atom]


def decision_document(d):
    doc = {
        "request_id": d.request_id,
        "memberships": sorted(d.memberships),
        "relations": {
            "location": d.relations.node,
            "point": "POINT(%s %s)" % (format_number(d.relations.point.lon),
                                       format_number(d.relations.point.lat)),
            "within": sorted(d.relations.within),
            "distances": {k: round(v, DISTANCE_DIGITS) for k, v in d.relations.distances.items()},
        },
        "provision_results": [
            {"policy_id": r.policy_id, "provision_id": r.provision_id,
             "applicable": r.applicable, "effect": r.effect, "reasons": list(r.reasons)}
            for r in d.provision_results
        ],
        "trace": [
            {"kind": s.kind.value, "detail": s.detail,
             "support": [_support_json(a) for a in s.support]}
            for s in d.trace
        ],
    }
    return json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def explain(d):
    """Human-readable rendering of a decision's trace."""
    lines = ["Decision for request %s" % d.request_id]
    if d.memberships:
        lines.append("Location classes: %s" % ", ".join(sorted(d.memberships)))
    else:
        lines.append("Location classes: none")
    width = max((len(k.value) for k in StepKind), default=0)
    for step in d.trace:
        lines.append("  %-*s  %s" % (width, step.kind.value, step.detail))
    return "\n".join(lines) + "\n"
