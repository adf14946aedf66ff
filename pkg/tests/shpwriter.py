"""Test-only shapefile and dBASE writers (the package itself never writes these)."""

import struct

from geopol.shapefile import ShapeType


def _content(rec):
    if rec.shape_type == ShapeType.NULL:
        return struct.pack("<i", 0)
    if rec.shape_type == ShapeType.POINT:
        (x, y), = rec.parts[0]
        return struct.pack("<i2d", 1, x, y)
    points = [v for part in rec.parts for v in part]
    starts = []
    n = 0
    for part in rec.parts:
        starts.append(n)
        n += len(part)
    if points:
        xs = [x for x, _ in points]
        ys = [y for _, y in points]
        box = (min(xs), min(ys), max(xs), max(ys))
    else:
        box = (0.0, 0.0, 0.0, 0.0)
    flat = [c for v in points for c in v]
    return (struct.pack("<i4d2i", 5, *box, len(starts), len(points))
            + struct.pack("<%di" % len(starts), *starts)
            + struct.pack("<%dd" % len(flat), *flat))


def write_shp(dataset):
    body = b""
    for rec in dataset.records:
        content = _content(rec)
        body += struct.pack(">2i", rec.record_number, len(content) // 2) + content
    header = (struct.pack(">7i", 9994, 0, 0, 0, 0, 0, (100 + len(body)) // 2)
              + struct.pack("<2i", 1000, int(dataset.shape_type))
              + struct.pack("<4d", *dataset.bbox)
              + struct.pack("<4d", 0.0, 0.0, 0.0, 0.0))
    return header + body


def write_dbf(fields, rows, deleted=()):
    """``fields``: (name, type, length, decimals); ``rows``: sequences of cell text."""
    record_length = 1 + sum(f[2] for f in fields)
    header_length = 32 + 32 * len(fields) + 1
    out = struct.pack("<B3BIHH20x", 0x03, 120, 1, 1, len(rows), header_length, record_length)
    for name, ftype, length, decimals in fields:
        out += (name.encode("ascii").ljust(11, b"\x00") + ftype.encode("ascii")
                + b"\x00" * 4 + struct.pack("<BB", length, decimals) + b"\x00" * 14)
    out += b"\x0d"
    for i, row in enumerate(rows):
        out += b"*" if i in deleted else b" "
        for (name, ftype, length, _), cell in zip(fields, row):
            raw = str(cell).encode("utf-8")
            out += raw.rjust(length) if ftype == "N" else raw.ljust(length)
    return out + b"\x1a"
