"""Exception hierarchy.

Every malformed input maps to one of the named classes below; callers that
only care about "bad input vs. bug" can catch :class:`GeopolError`.
"""


class GeopolError(Exception):
    """Base class for all input errors raised by geopol."""


class ParseError(GeopolError):
    """A text or binary document could not be parsed.

    ``line``/``column`` are 1-based when known; ``position`` is a 0-based
    character or byte offset when known.
    """

    def __init__(self, message, line=None, column=None, position=None):
        self.line = line
        self.column = column
        self.position = position
        where = []
        if line is not None:
            where.append("line %d" % line)
        if column is not None:
            where.append("column %d" % column)
        if position is not None and line is None:
            where.append("position %d" % position)
        if where:
            message = "%s (%s)" % (message, ", ".join(where))
        super().__init__(message)


# -- shapefile / dBASE ingestion ------------------------------------------

class ShapefileError(GeopolError):
    pass


class BadMagic(ShapefileError):
    pass


class UnsupportedShapeType(ShapefileError):
    pass


class Truncated(ShapefileError):
    pass


class NonFiniteCoordinate(ShapefileError):
    pass


class InvalidRecord(ShapefileError):
    """A record's structure is inconsistent (bad part index, open ring...)."""


class FileLengthMismatch(ShapefileError):
    pass


class BadVersionByte(ShapefileError):
    pass


class BadFieldDescriptor(ShapefileError):
    pass


class RowFieldMismatch(ShapefileError):
    pass


class CountMismatch(ShapefileError):
    pass


class MissingField(ShapefileError):
    pass


class UnsupportedFieldType(ShapefileError):
    pass


# -- geometry / WKT --------------------------------------------------------

class GeometryError(GeopolError):
    pass


class WktSyntaxError(ParseError, GeometryError):
    pass


class UnsupportedWktType(GeometryError):
    pass


class InvalidRing(GeometryError):
    pass


class CoordinateOutOfRange(GeometryError):
    pass


class UnsupportedGeometryPair(GeometryError):
    pass


# -- feature store ---------------------------------------------------------

class StoreError(GeopolError):
    pass


class DuplicateFeatureIri(StoreError):
    pass


class InvalidBaseIri(StoreError):
    pass


class DuplicateDataset(StoreError):
    pass


class InvalidDatasetLabel(StoreError):
    pass


class MissingProvenance(StoreError):
    pass


class NTriplesSyntaxError(ParseError, StoreError):
    pass


class MissingGeometry(StoreError):
    pass


class UnknownFeature(StoreError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


# -- relations / policy / requests -----------------------------------------

class NodeMismatch(GeopolError):
    pass


class PolicyError(GeopolError):
    pass


class PolicySyntaxError(ParseError, PolicyError):
    pass


class DuplicateDefinition(PolicyError):
    pass


class CyclicDefinition(PolicyError):
    pass


class DanglingClassRef(PolicyError):
    pass


class DanglingProvisionClass(PolicyError):
    pass


class MissingDistanceFact(PolicyError):
    pass


class RequestError(GeopolError):
    pass


class RequestSyntaxError(ParseError, RequestError):
    pass


class NotAPoint(RequestError):
    pass


class MissingLocation(RequestError):
    pass


class ConfigError(ParseError):
    pass
