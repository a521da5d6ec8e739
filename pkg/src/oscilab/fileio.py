"""Bit-stable field (OLF1) and mask (OLM1) file I/O.

Layout of both formats: an ASCII magic line, one JSON header line, then
a raw little-endian payload.  Field payloads are 64-bit reals, row-major
over grid indices then components; mask payloads are one byte per cell
(0/1).  Symmetric-matrix fields are stored in full, so the symmetry tag
is not round-tripped; they read back as plain matrix fields.
"""

from __future__ import annotations

import json

import numpy as np

from .grid import CELL, MATRIX, NODE, SCALAR, VECTOR, Field, Grid

FIELD_MAGIC = b"OLF1"
MASK_MAGIC = b"OLM1"

_FIELD_KEYS = {"n", "cells", "h", "origin", "placement", "components", "dtype", "layout"}
_MASK_KEYS = {"n", "cells", "h", "origin", "dtype", "layout"}


class FileFormatError(ValueError):
    """Malformed or inconsistent OLF1/OLM1 file."""


def _header_bytes(doc):
    return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("ascii") + b"\n"


def _read_header(fh, magic, allowed_keys, path):
    first = fh.readline().rstrip(b"\n")
    if first != magic:
        raise FileFormatError(f"{path}: bad magic {first!r}, expected {magic!r}")
    line = fh.readline()
    if not line.endswith(b"\n"):
        raise FileFormatError(f"{path}: truncated header")
    try:
        doc = json.loads(line.decode("ascii"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FileFormatError(f"{path}: header is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise FileFormatError(f"{path}: header must be a JSON object")
    if set(doc) != allowed_keys:
        raise FileFormatError(
            f"{path}: header keys {sorted(doc)} != expected {sorted(allowed_keys)}"
        )
    return doc


def write_field(path, field):
    """Write a Field as OLF1."""
    g = field.grid
    doc = {
        "n": g.n,
        "cells": list(g.cells),
        "h": g.h,
        "origin": [float(x) for x in g.origin],
        "placement": field.placement,
        "components": field.ncomp,
        "dtype": "f64-le",
        "layout": "row-major",
    }
    payload = np.ascontiguousarray(field.values, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(FIELD_MAGIC + b"\n")
        fh.write(_header_bytes(doc))
        fh.write(payload.tobytes())


def _kind_from_components(ncomp, n):
    if ncomp == 1:
        return SCALAR
    if ncomp == n:
        return VECTOR
    if ncomp == n * n:
        return MATRIX
    raise FileFormatError(f"component count {ncomp} not scalar/vector/matrix for n={n}")


def read_field(path, grid=None):
    """Read an OLF1 field.

    If ``grid`` is given (e.g. one carrying a mask from OLM1) its
    geometry must match the header and the field is attached to it;
    otherwise a fully active grid is built from the header.
    """
    with open(path, "rb") as fh:
        doc = _read_header(fh, FIELD_MAGIC, _FIELD_KEYS, path)
        raw = fh.read()
    try:
        n = int(doc["n"])
        cells = tuple(int(c) for c in doc["cells"])
        h = float(doc["h"])
        origin = [float(x) for x in doc["origin"]]
        placement = doc["placement"]
        ncomp = int(doc["components"])
    except (TypeError, ValueError) as exc:
        raise FileFormatError(f"{path}: malformed header values: {exc}") from exc
    if doc["dtype"] != "f64-le" or doc["layout"] != "row-major":
        raise FileFormatError(f"{path}: unsupported dtype/layout")
    if placement not in (NODE, CELL):
        raise FileFormatError(f"{path}: unknown placement {placement!r}")
    if len(cells) != n or len(origin) != n:
        raise FileFormatError(f"{path}: cells/origin do not match n={n}")
    if grid is None:
        grid = Grid(cells, h=h, origin=origin)
    elif grid.geometry_signature() != (cells, h, tuple(origin)):
        raise FileFormatError(f"{path}: header geometry does not match supplied grid")
    kind = _kind_from_components(ncomp, n)
    sites = grid.node_shape if placement == NODE else grid.cells
    count = int(np.prod(sites)) * ncomp
    vals = np.frombuffer(raw, dtype="<f8")
    if vals.size != count:
        raise FileFormatError(f"{path}: payload has {vals.size} values, expected {count}")
    try:
        return Field(grid, placement, kind, vals.astype(np.float64))
    except ValueError as exc:
        raise FileFormatError(f"{path}: {exc}") from exc


def write_mask(path, grid):
    """Write a grid's geometry and active mask as OLM1."""
    doc = {
        "n": grid.n,
        "cells": list(grid.cells),
        "h": grid.h,
        "origin": [float(x) for x in grid.origin],
        "dtype": "u8",
        "layout": "row-major",
    }
    with open(path, "wb") as fh:
        fh.write(MASK_MAGIC + b"\n")
        fh.write(_header_bytes(doc))
        fh.write(np.ascontiguousarray(grid.mask, dtype=np.uint8).tobytes())


def read_mask(path, boundary=None):
    """Read an OLM1 file into a Grid (all-Dirichlet unless relabeled)."""
    with open(path, "rb") as fh:
        doc = _read_header(fh, MASK_MAGIC, _MASK_KEYS, path)
        raw = fh.read()
    try:
        cells = tuple(int(c) for c in doc["cells"])
        h = float(doc["h"])
        origin = [float(x) for x in doc["origin"]]
        n = int(doc["n"])
    except (TypeError, ValueError) as exc:
        raise FileFormatError(f"{path}: malformed header values: {exc}") from exc
    if doc["dtype"] != "u8" or doc["layout"] != "row-major":
        raise FileFormatError(f"{path}: unsupported dtype/layout")
    if len(cells) != n:
        raise FileFormatError(f"{path}: cells do not match n={n}")
    count = int(np.prod(cells))
    mask = np.frombuffer(raw, dtype=np.uint8)
    if mask.size != count:
        raise FileFormatError(f"{path}: payload has {mask.size} bytes, expected {count}")
    if not np.isin(mask, (0, 1)).all():
        raise FileFormatError(f"{path}: mask bytes must be 0 or 1")
    try:
        return Grid(cells, h=h, origin=origin, mask=mask.reshape(cells).astype(bool),
                    boundary=boundary)
    except ValueError as exc:
        raise FileFormatError(f"{path}: {exc}") from exc
