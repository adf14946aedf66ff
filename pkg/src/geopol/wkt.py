"""WKT reading and canonical writing for POINT, POLYGON and MULTIPOLYGON."""

import re
from decimal import Decimal

from .errors import UnsupportedWktType, WktSyntaxError
from .geometry import MultiPolygon, Point, Polygon, Ring

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>[-+]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][-+]?\d+)?)
  | (?P<word>[A-Za-z]+)
  | (?P<punct>[(),])
    """,
    re.VERBOSE,
)

_OTHER_TYPES = {
    "LINESTRING", "MULTIPOINT", "MULTILINESTRING", "GEOMETRYCOLLECTION",
    "CIRCULARSTRING", "COMPOUNDCURVE", "CURVEPOLYGON", "MULTICURVE",
    "MULTISURFACE", "POLYHEDRALSURFACE", "TIN", "TRIANGLE",
}


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise WktSyntaxError("unexpected character %r" % text[pos], position=pos)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append((kind, m.group(), pos))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def next(self):
        tok = self.tokens[self.i]
        if tok[0] != "end":
            self.i += 1
        return tok

    def expect(self, value):
        kind, text, pos = self.next()
        if text != value or kind == "end":
            found = "end of input" if kind == "end" else repr(text)
            raise WktSyntaxError("expected %r, found %s" % (value, found), position=pos)

    def number(self):
        kind, text, pos = self.next()
        if kind != "num":
            found = "end of input" if kind == "end" else repr(text)
            raise WktSyntaxError("expected a number, found %s" % found, position=pos)
        return float(text)

    def coordinate(self):
        return (self.number(), self.number())

    def ring(self):
        self.expect("(")
        verts = [self.coordinate()]
        while self.peek()[1] == ",":
            self.next()
            verts.append(self.coordinate())
        self.expect(")")
        return Ring(verts)

    def polygon_body(self):
        self.expect("(")
        rings = [self.ring()]
        while self.peek()[1] == ",":
            self.next()
            rings.append(self.ring())
        self.expect(")")
        return Polygon(rings[0], tuple(rings[1:]))

    def geometry(self):
        kind, word, pos = self.next()
        if kind != "word":
            raise WktSyntaxError("expected a geometry keyword", position=pos)
        keyword = word.upper()
        if keyword in _OTHER_TYPES:
            raise UnsupportedWktType("%s is not supported" % keyword)
        if keyword not in ("POINT", "POLYGON", "MULTIPOLYGON"):
            raise WktSyntaxError("unknown geometry keyword %r" % word, position=pos)
        nkind, nword, npos = self.peek()
        if nkind == "word":
            # EMPTY, Z, M, ZM
            raise UnsupportedWktType("%s %s is not supported" % (keyword, nword.upper()))
        if keyword == "POINT":
            self.expect("(")
            lon, lat = self.coordinate()
            self.expect(")")
            return Point(lon, lat)
        if keyword == "POLYGON":
            return self.polygon_body()
        self.expect("(")
        polys = [self.polygon_body()]
        while self.peek()[1] == ",":
            self.next()
            polys.append(self.polygon_body())
        self.expect(")")
        return MultiPolygon(tuple(polys))


def parse_wkt(text):
    """Parse WKT text into a validated geometry (coordinate order lon lat)."""
    parser = _Parser(text)
    geom = parser.geometry()
    kind, tok, pos = parser.peek()
    if kind != "end":
        raise WktSyntaxError("trailing input %r" % tok, position=pos)
    return geom


def format_number(x):
    """Shortest round-tripping plain decimal (never scientific notation)."""
    if x == 0:
        return "0"
    d = Decimal(repr(float(x))).normalize()
    return format(d, "f")


def _ring_text(ring):
    return "(" + ",".join("%s %s" % (format_number(x), format_number(y))
                          for x, y in ring.vertices) + ")"


def _polygon_text(poly):
    return "(" + ",".join(_ring_text(r) for r in (poly.outer,) + poly.holes) + ")"


def emit_wkt(g):
    if isinstance(g, Point):
        return "POINT(%s %s)" % (format_number(g.lon), format_number(g.lat))
    if isinstance(g, Polygon):
        return "POLYGON" + _polygon_text(g)
    if isinstance(g, MultiPolygon):
        return "MULTIPOLYGON(" + ",".join(_polygon_text(p) for p in g.polygons) + ")"
    raise TypeError("not a geometry: %r" % (g,))
