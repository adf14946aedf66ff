"""Reading ESRI shapefiles (.shp) and their dBASE III attribute tables (.dbf).

Only null, Point and Polygon shapes are understood. Records are scanned
sequentially; the .shx index is not needed.
"""

import enum
import logging
import math
import struct
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

from .errors import (
    BadFieldDescriptor, BadMagic, BadVersionByte, CountMismatch, FileLengthMismatch,
    InvalidRecord, InvalidRing, MissingField, NonFiniteCoordinate, RowFieldMismatch,
    Truncated, UnsupportedFieldType, UnsupportedShapeType,
)
from .geometry import MultiPolygon, Orientation, Point, Polygon, Ring, point_in_ring, ring_orientation, shoelace_sum

log = logging.getLogger(__name__)

FILE_CODE = 9994
VERSION = 1000
HEADER_SIZE = 100


class ShapeType(enum.IntEnum):
    NULL = 0
    POINT = 1
    POLYGON = 5


@dataclass(frozen=True)
class RawShape:
    record_number: int
    shape_type: ShapeType
    parts: Tuple[Tuple[Tuple[float, float], ...], ...] = ()


@dataclass
class ShpDataset:
    shape_type: ShapeType
    bbox: Tuple[float, float, float, float]
    records: List[RawShape] = field(default_factory=list)


@dataclass(frozen=True)
class FieldDescriptor:
    name: str
    type: str  # 'C' Character, 'N' Numeric; anything else is opaque text
    length: int
    decimals: int = 0


@dataclass
class AttributeTable:
    fields: List[FieldDescriptor]
    rows: List[Dict[str, object]] = field(default_factory=list)

    @property
    def field_names(self):
        return [f.name for f in self.fields]


@dataclass(frozen=True)
class FieldMapping:
    """Which .dbf columns hold the feature id and its legal name."""

    id_field: str
    name_field: str


@dataclass(frozen=True)
class RawEntry:
    id: str
    legal_name: str
    shape: RawShape


@dataclass(frozen=True)
class SkipEvent:
    record_number: int
    reason: str


@dataclass
class RawDataset:
    source: str
    shape_type: ShapeType
    entries: List[RawEntry] = field(default_factory=list)
    skipped: List[SkipEvent] = field(default_factory=list)


def _check_finite(values, recno):
    for v in values:
        if not math.isfinite(v):
            raise NonFiniteCoordinate("record %d has a non-finite coordinate" % recno)


def _decode_record(buf, recno, header_type):
    stype = struct.unpack_from("<i", buf, 0)[0]
    if stype not in (0, 1, 5):
        raise UnsupportedShapeType("record %d has shape type %d" % (recno, stype))
    if stype == ShapeType.NULL:
        return RawShape(recno, ShapeType.NULL)
    if stype != header_type:
        raise InvalidRecord("record %d has shape type %d but the file declares %d"
                            % (recno, stype, header_type))
    if stype == ShapeType.POINT:
        if len(buf) < 20:
            raise Truncated("record %d: point payload shorter than 20 bytes" % recno)
        x, y = struct.unpack_from("<2d", buf, 4)
        _check_finite((x, y), recno)
        return RawShape(recno, ShapeType.POINT, (((x, y),),))

    if len(buf) < 44:
        raise Truncated("record %d: polygon payload shorter than 44 bytes" % recno)
    nparts, npoints = struct.unpack_from("<2i", buf, 36)
    if nparts < 0 or npoints < 0:
        raise InvalidRecord("record %d: negative part or point count" % recno)
    need = 44 + 4 * nparts + 16 * npoints
    if need > len(buf):
        raise Truncated("record %d: needs %d bytes, content length is %d" % (recno, need, len(buf)))
    if nparts == 0 and npoints == 0:
        return RawShape(recno, ShapeType.POLYGON)
    starts = struct.unpack_from("<%di" % nparts, buf, 44)
    if not starts or starts[0] != 0 or any(b <= a for a, b in zip(starts, starts[1:])) \
            or starts[-1] >= npoints:
        raise InvalidRecord("record %d: inconsistent part indices" % recno)
    coords = struct.unpack_from("<%dd" % (2 * npoints), buf, 44 + 4 * nparts)
    _check_finite(coords, recno)
    points = list(zip(coords[0::2], coords[1::2]))
    ends = starts[1:] + (npoints,)
    parts = []
    for s, e in zip(starts, ends):
        part = tuple(points[s:e])
        if len(part) < 4 or part[0] != part[-1]:
            raise InvalidRecord("record %d: ring is open or has fewer than 4 vertices" % recno)
        parts.append(part)
    return RawShape(recno, ShapeType.POLYGON, tuple(parts))


def parse_shp(data):
    """Decode a .shp main file into a :class:`ShpDataset`."""
    data = bytes(data)
    if len(data) < HEADER_SIZE:
        raise Truncated("shapefile header needs 100 bytes, got %d" % len(data))
    if struct.unpack_from(">i", data, 0)[0] != FILE_CODE:
        raise BadMagic("not a shapefile (file code is not 9994)")
    file_length = struct.unpack_from(">i", data, 24)[0] * 2
    version, header_type = struct.unpack_from("<2i", data, 28)
    if version != VERSION:
        raise BadMagic("unsupported shapefile version %d" % version)
    if header_type not in (0, 1, 5):
        raise UnsupportedShapeType("shape type %d is not supported" % header_type)
    bbox = struct.unpack_from("<4d", data, 36)
    if file_length > len(data):
        raise Truncated("header declares %d bytes, file has %d" % (file_length, len(data)))
    if file_length < len(data) or file_length < HEADER_SIZE:
        raise FileLengthMismatch("header declares %d bytes, file has %d"
                                 % (file_length, len(data)))

    records = []
    offset = HEADER_SIZE
    view = memoryview(data)
    while offset < file_length:
        if offset + 8 > file_length:
            raise Truncated("record header at byte %d is cut short" % offset)
        recno, content_words = struct.unpack_from(">2i", data, offset)
        start = offset + 8
        end = start + content_words * 2
        if content_words < 2:
            raise InvalidRecord("record at byte %d has content length %d" % (offset, content_words))
        if end > file_length:
            raise Truncated("record %d extends past end of file" % recno)
        if recno != len(records) + 1:
            raise InvalidRecord("record number %d out of sequence (expected %d)"
                                % (recno, len(records) + 1))
        records.append(_decode_record(view[start:end], recno, header_type))
        offset = end
    return ShpDataset(ShapeType(header_type), bbox, records)


def _decode_numeric(raw, fd):
    try:
        text = raw.decode("ascii").strip()
    except UnicodeDecodeError:
        raise RowFieldMismatch("field %s: non-ASCII numeric cell" % fd.name) from None
    if not text or set(text) == {"*"}:
        return None
    try:
        value = int(text)
    except ValueError:
        try:
            value = float(text)
        except ValueError:
            raise RowFieldMismatch("field %s: %r is not numeric" % (fd.name, text)) from None
        if not math.isfinite(value):
            raise RowFieldMismatch("field %s: %r is not finite" % (fd.name, text))
    return value


def parse_dbf(data, encoding="utf-8"):
    """Decode a dBASE III table. Deleted rows are dropped."""
    data = bytes(data)
    if len(data) < 32:
        raise Truncated("dBASE header needs 32 bytes, got %d" % len(data))
    if data[0] != 0x03:
        raise BadVersionByte("dBASE version byte is 0x%02X, expected 0x03" % data[0])
    nrecords, header_length, record_length = struct.unpack_from("<IHH", data, 4)

    fields = []
    pos = 32
    while True:
        if pos >= len(data):
            raise Truncated("field descriptor array is not terminated")
        if data[pos] == 0x0D:
            break
        if pos + 32 > len(data):
            raise Truncated("field descriptor at byte %d is cut short" % pos)
        raw = data[pos:pos + 32]
        name = raw[:11].split(b"\x00", 1)[0].decode("ascii", "replace").strip()
        length, decimals = raw[16], raw[17]
        if not name or length == 0 or name in (f.name for f in fields):
            raise BadFieldDescriptor("bad field descriptor at byte %d" % pos)
        fields.append(FieldDescriptor(name, chr(raw[11]), length, decimals))
        pos += 32
    if header_length < pos + 1:
        raise BadFieldDescriptor("header length %d is shorter than the descriptor array"
                                 % header_length)
    if record_length != 1 + sum(f.length for f in fields):
        raise RowFieldMismatch("record length %d does not match field widths" % record_length)
    if header_length + nrecords * record_length > len(data):
        raise Truncated("table declares %d rows that do not fit in %d bytes"
                        % (nrecords, len(data)))

    rows = []
    offset = header_length
    for _ in range(nrecords):
        rec = data[offset:offset + record_length]
        offset += record_length
        flag = rec[0]
        if flag == 0x2A:
            continue
        if flag != 0x20:
            raise RowFieldMismatch("bad deletion flag 0x%02X" % flag)
        row = {}
        col = 1
        for fd in fields:
            raw = rec[col:col + fd.length]
            col += fd.length
            if fd.type == "N":
                row[fd.name] = _decode_numeric(raw, fd)
            else:
                row[fd.name] = raw.decode(encoding, "replace").rstrip(" \x00")
        rows.append(row)
    return AttributeTable(fields, rows)


def _cell_text(value):
    if value is None:
        return ""
    if isinstance(value, float) and value.is_integer():
        return str(int(value))
    return str(value)


def load_dataset(shp, dbf, mapping, source="", encoding="utf-8"):
    """Join .shp records with .dbf rows by record order.

    Null shapes, empty geometries and rows without an id are skipped; each
    skip is logged and kept on the returned dataset for provenance.
    """
    dataset = parse_shp(shp)
    table = parse_dbf(dbf, encoding)
    by_name = {f.name: f for f in table.fields}
    for column in (mapping.id_field, mapping.name_field):
        fd = by_name.get(column)
        if fd is None:
            raise MissingField("field %r not present in .dbf (has %s)"
                               % (column, ", ".join(table.field_names)))
        if fd.type not in ("C", "N"):
            raise UnsupportedFieldType("field %r has type %r; only C and N can be mapped"
                                       % (column, fd.type))
    if len(dataset.records) != len(table.rows):
        raise CountMismatch("%d shapes but %d attribute rows"
                            % (len(dataset.records), len(table.rows)))

    out = RawDataset(source, dataset.shape_type)
    for shape, row in zip(dataset.records, table.rows):
        reason = None
        ident = _cell_text(row[mapping.id_field])
        if shape.shape_type == ShapeType.NULL:
            reason = "null shape"
        elif not shape.parts:
            reason = "empty geometry"
        elif not ident:
            reason = "empty id"
        if reason:
            log.info("%s: skipping record %d (%s)", source or "<shp>", shape.record_number, reason)
            out.skipped.append(SkipEvent(shape.record_number, reason))
            continue
        out.entries.append(RawEntry(ident, _cell_text(row[mapping.name_field]), shape))
    return out


def _dedupe(part):
    out = [part[0]]
    for v in part[1:]:
        if v != out[-1]:
            out.append(v)
    return out


def _hole_probe_points(hole):
    yield from hole.vertices[:-1]
    for (x1, y1), (x2, y2) in zip(hole.vertices, hole.vertices[1:]):
        yield ((x1 + x2) / 2, (y1 + y2) / 2)


def shape_to_geometry(shape):
    """Convert a decoded record into a geometry value.

    Clockwise parts are outer boundaries and counter-clockwise parts are
    holes; each hole is attached to the smallest outer ring containing it.
    Consecutive duplicate vertices are dropped first.
    """
    recno = shape.record_number
    if shape.shape_type == ShapeType.POINT:
        (x, y), = shape.parts[0]
        return Point(x, y)
    if shape.shape_type != ShapeType.POLYGON or not shape.parts:
        raise InvalidRecord("record %d has no geometry" % recno)

    outers, holes = [], []
    for part in shape.parts:
        verts = _dedupe(part)
        orient = ring_orientation(verts)
        if orient is Orientation.DEGENERATE:
            raise InvalidRing("record %d has a zero-area ring" % recno)
        try:
            ring = Ring(verts)
        except InvalidRing as exc:
            raise InvalidRing("record %d: %s" % (recno, exc)) from None
        (outers if orient is Orientation.CLOCKWISE else holes).append(ring)
    if not outers:
        raise InvalidRing("record %d has holes but no outer ring" % recno)

    assigned = [[] for _ in outers]
    for hole in holes:
        hosts = [i for i, outer in enumerate(outers)
                 if any(point_in_ring(p, outer) for p in _hole_probe_points(hole))]
        if not hosts:
            raise InvalidRing("record %d has a hole outside every outer ring" % recno)
        host = min(hosts, key=lambda i: abs(shoelace_sum(outers[i].vertices)))
        assigned[host].append(hole)

    polys = [Polygon(outer, tuple(hs)) for outer, hs in zip(outers, assigned)]
    return polys[0] if len(polys) == 1 else MultiPolygon(tuple(polys))
