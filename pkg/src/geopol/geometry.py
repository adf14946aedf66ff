"""Geometry values and the spatial computations behind within/distance.

Coordinates are WGS84 degrees in (lon, lat) order throughout. Containment is
planar in degree space; distance is spherical.
"""

import enum
import math
from dataclasses import dataclass
from typing import Tuple, Union

from .errors import CoordinateOutOfRange, InvalidRing, UnsupportedGeometryPair

# Chosen so that pi * R = 20015.087 km (antipodal) and R * pi / 180 = 111.195 km.
EARTH_RADIUS_KM = 6371.0

DEGENERATE_AREA = 1e-12

Vertex = Tuple[float, float]


class Orientation(enum.Enum):
    CLOCKWISE = "Clockwise"
    COUNTER_CLOCKWISE = "CounterClockwise"
    DEGENERATE = "Degenerate"


def _check_coordinate(lon, lat):
    if not (math.isfinite(lon) and math.isfinite(lat)):
        raise CoordinateOutOfRange("non-finite coordinate (%r, %r)" % (lon, lat))
    if not -180.0 <= lon <= 180.0:
        raise CoordinateOutOfRange("longitude %r outside [-180, 180]" % lon)
    if not -90.0 <= lat <= 90.0:
        raise CoordinateOutOfRange("latitude %r outside [-90, 90]" % lat)


@dataclass(frozen=True)
class Point:
    lon: float
    lat: float

    def __post_init__(self):
        object.__setattr__(self, "lon", float(self.lon))
        object.__setattr__(self, "lat", float(self.lat))
        _check_coordinate(self.lon, self.lat)


def shoelace_sum(vertices):
    """Twice the signed area of a closed vertex sequence (negative = clockwise)."""
    total = 0.0
    for (x1, y1), (x2, y2) in zip(vertices, vertices[1:]):
        total += x1 * y2 - x2 * y1
    return total


def _orientation_of(vertices):
    s = shoelace_sum(vertices)
    if abs(s) < DEGENERATE_AREA:
        return Orientation.DEGENERATE
    return Orientation.CLOCKWISE if s < 0 else Orientation.COUNTER_CLOCKWISE


@dataclass(frozen=True)
class Ring:
    """A closed ring: first vertex repeated as the last one."""

    vertices: Tuple[Vertex, ...]

    def __post_init__(self):
        verts = tuple((float(x), float(y)) for x, y in self.vertices)
        object.__setattr__(self, "vertices", verts)
        if len(verts) < 4:
            raise InvalidRing("ring needs at least 4 vertices, got %d" % len(verts))
        if verts[0] != verts[-1]:
            raise InvalidRing("ring is not closed")
        for lon, lat in verts:
            _check_coordinate(lon, lat)
        for a, b in zip(verts, verts[1:]):
            if a == b:
                raise InvalidRing("consecutive duplicate vertex %r" % (a,))
            if abs(a[0] - b[0]) > 180.0:
                raise InvalidRing("edge spans more than 180 degrees of longitude")
        if _orientation_of(verts) is Orientation.DEGENERATE:
            raise InvalidRing("ring has zero area")


@dataclass(frozen=True)
class Polygon:
    outer: Ring
    holes: Tuple[Ring, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "holes", tuple(self.holes))


@dataclass(frozen=True)
class MultiPolygon:
    polygons: Tuple[Polygon, ...]

    def __post_init__(self):
        object.__setattr__(self, "polygons", tuple(self.polygons))
        if not self.polygons:
            raise InvalidRing("MULTIPOLYGON needs at least one polygon")


Geometry = Union[Point, Polygon, MultiPolygon]


@dataclass(frozen=True)
class BBox:
    xmin: float
    ymin: float
    xmax: float
    ymax: float

    def contains(self, lon, lat):
        return self.xmin <= lon <= self.xmax and self.ymin <= lat <= self.ymax


def ring_orientation(ring):
    """Classify a ring by the sign of its shoelace sum.

    Accepts a :class:`Ring` or any closed sequence of (x, y) pairs, so that
    raw shapefile parts can be classified before they are validated.
    """
    vertices = ring.vertices if isinstance(ring, Ring) else tuple(ring)
    return _orientation_of(vertices)


def on_ring_boundary(p, ring):
    px, py = p
    for (x1, y1), (x2, y2) in zip(ring.vertices, ring.vertices[1:]):
        if not (min(x1, x2) <= px <= max(x1, x2) and min(y1, y2) <= py <= max(y1, y2)):
            continue
        if (x2 - x1) * (py - y1) - (px - x1) * (y2 - y1) == 0.0:
            return True
    return False


def point_in_ring(p, ring):
    """Even-odd ray crossing test; points on the boundary are outside."""
    if on_ring_boundary(p, ring):
        return False
    px, py = p
    inside = False
    for (x1, y1), (x2, y2) in zip(ring.vertices, ring.vertices[1:]):
        if (y1 > py) != (y2 > py):
            x_cross = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
            if px < x_cross:
                inside = not inside
    return inside


def _polygons(g):
    if isinstance(g, Polygon):
        return (g,)
    if isinstance(g, MultiPolygon):
        return g.polygons
    raise UnsupportedGeometryPair("within(Point, %s) is not supported" % type(g).__name__)


def _in_polygon(xy, poly):
    if not point_in_ring(xy, poly.outer):
        return False
    for hole in poly.holes:
        if point_in_ring(xy, hole) or on_ring_boundary(xy, hole):
            return False
    return True


def sf_within_point(p, g):
    """True iff ``p`` lies in the interior of polygonal geometry ``g``."""
    xy = (p.lon, p.lat)
    return any(_in_polygon(xy, poly) for poly in _polygons(g))


def haversine_km(a, b):
    phi1 = math.radians(a.lat)
    phi2 = math.radians(b.lat)
    dphi = phi2 - phi1
    dlam = math.radians(b.lon - a.lon)
    h = math.sin(dphi / 2) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlam / 2) ** 2
    h = min(1.0, max(0.0, h))
    return 2 * EARTH_RADIUS_KM * math.asin(math.sqrt(h))


def _wrap_lon(d):
    if d > 180.0:
        d -= 360.0
    elif d < -180.0:
        d += 360.0
    return d


def _segment_distance_km(p, a, b):
    # Closest point found in an equirectangular plane centred on p, then
    # measured on the sphere. Good to well under 0.1% for segments < 100 km.
    k = math.cos(math.radians(p.lat))
    ax, ay = _wrap_lon(a[0] - p.lon) * k, a[1] - p.lat
    dlon = _wrap_lon(b[0] - a[0])
    dx, dy = dlon * k, b[1] - a[1]
    seg2 = dx * dx + dy * dy
    t = 0.0 if seg2 == 0.0 else min(1.0, max(0.0, -(ax * dx + ay * dy) / seg2))
    lon = _wrap_lon(a[0] + t * dlon)
    lat = min(90.0, max(-90.0, a[1] + t * dy))
    best = haversine_km(p, Point(lon, lat))
    best = min(best, haversine_km(p, Point(*a)), haversine_km(p, Point(*b)))
    return best


def _rings(g):
    for poly in _polygons(g):
        yield poly.outer
        yield from poly.holes


def distance_point_geometry_km(p, g):
    """Kilometres from point ``p`` to ``g`` (0 when ``p`` is within ``g``)."""
    if isinstance(g, Point):
        return haversine_km(p, g)
    if sf_within_point(p, g):
        return 0.0
    best = math.inf
    for ring in _rings(g):
        for a, b in zip(ring.vertices, ring.vertices[1:]):
            best = min(best, _segment_distance_km(p, a, b))
    return best


def bbox(g):
    if isinstance(g, Point):
        return BBox(g.lon, g.lat, g.lon, g.lat)
    xs = []
    ys = []
    for ring in _rings(g):
        for x, y in ring.vertices:
            xs.append(x)
            ys.append(y)
    return BBox(min(xs), min(ys), max(xs), max(ys))
