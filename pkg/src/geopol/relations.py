"""Infer within/distance relations for a request point and assert them on a request."""

import dataclasses
from dataclasses import dataclass, field
from typing import FrozenSet, Mapping

from .errors import NodeMismatch, UnknownFeature
from .geometry import Point, distance_point_geometry_km, sf_within_point

DEFAULT_NODE = "urn:geopol:location"


@dataclass(frozen=True)
class WithinRelation:
    subject: str
    feature: str


@dataclass(frozen=True)
class DistanceAttribute:
    subject: str
    feature: str
    value: float


@dataclass(frozen=True, eq=True)
class LocationFacts:
    node: str
    point: Point
    within: FrozenSet[str] = frozenset()
    distances: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "within", frozenset(self.within))
        object.__setattr__(self, "distances", dict(sorted(self.distances.items())))

    __hash__ = None

    def relations(self):
        """The facts as relation records, within first, each group sorted by feature."""
        out = [WithinRelation(self.node, f) for f in sorted(self.within)]
        out += [DistanceAttribute(self.node, f, d) for f, d in self.distances.items()]
        return out


def infer_relations(p, store, distance_targets=(), node=DEFAULT_NODE):
    """Within relations for every feature containing ``p`` and distances to each target.

    Within is evaluated only over the bounding-box candidates of ``p``.
    """
    targets = sorted(set(distance_targets))
    for iri in targets:
        if iri not in store:
            raise UnknownFeature("distance target %s is not in the store" % iri)
    within = {iri for iri in store.candidates(p)
              if sf_within_point(p, store.feature(iri).geometry)}
    distances = {iri: distance_point_geometry_km(p, store.feature(iri).geometry)
                 for iri in targets}
    return LocationFacts(node, p, frozenset(within), distances)


def apply_relations(request, facts):
    """Return ``request`` with ``facts`` merged into its fact set (idempotent)."""
    if facts.node != request.location_node:
        raise NodeMismatch("facts are about %s, request location is %s"
                           % (facts.node, request.location_node))
    prior = request.facts
    if prior is None:
        merged = facts
    else:
        distances = dict(prior.distances)
        distances.update(facts.distances)
        merged = LocationFacts(prior.node, prior.point, prior.within | facts.within, distances)
    return dataclasses.replace(request, facts=merged)
