import numpy as np
import pytest

from oscilab.fileio import (
    FileFormatError,
    read_field,
    read_mask,
    write_field,
    write_mask,
)
from oscilab.grid import CELL, NODE, Grid

from conftest import random_cell_field, random_node_vector


def test_field_round_trip_bit_exact(tmp_path, rng):
    g = Grid((5, 4), h=0.25, origin=[1.0, -2.0])
    f = random_cell_field(g, "matrix", rng)
    path = tmp_path / "f.olf"
    write_field(path, f)
    back = read_field(path)
    assert back.grid.geometry_signature() == g.geometry_signature()
    assert back.placement == CELL
    assert (back.values == f.values).all()


def test_node_vector_round_trip(tmp_path, rng):
    g = Grid((3, 3, 3), h=0.5)
    f = random_node_vector(g, rng)
    path = tmp_path / "u.olf"
    write_field(path, f)
    back = read_field(path)
    assert back.placement == NODE
    assert back.kind == "vector"
    assert (back.values == f.values).all()


def test_symmetric_reads_back_as_matrix(tmp_path, rng):
    g = Grid((4, 4))
    f = random_cell_field(g, "sym", rng)
    path = tmp_path / "s.olf"
    write_field(path, f)
    back = read_field(path)
    assert back.kind == "matrix"
    assert (back.values == f.values).all()


def test_write_is_deterministic(tmp_path, rng):
    g = Grid((4, 4))
    f = random_cell_field(g, "scalar", rng)
    p1, p2 = tmp_path / "a.olf", tmp_path / "b.olf"
    write_field(p1, f)
    write_field(p2, f)
    assert p1.read_bytes() == p2.read_bytes()


def test_mask_round_trip(tmp_path):
    mask = np.ones((4, 5), dtype=bool)
    mask[3, 4] = False
    g = Grid((4, 5), h=0.2, mask=mask)
    path = tmp_path / "m.olm"
    write_mask(path, g)
    back = read_mask(path)
    assert (back.mask == mask).all()
    assert back.geometry_signature() == g.geometry_signature()


def test_field_with_mask_grid(tmp_path, rng):
    mask = np.ones((4, 4), dtype=bool)
    mask[0, 3] = False
    g = Grid((4, 4), h=0.25, mask=mask)
    fpath, mpath = tmp_path / "f.olf", tmp_path / "m.olm"
    write_field(fpath, random_cell_field(g, "scalar", rng))
    write_mask(mpath, g)
    back = read_field(fpath, grid=read_mask(mpath))
    assert (back.grid.mask == mask).all()


def test_bad_magic(tmp_path):
    path = tmp_path / "bad.olf"
    path.write_bytes(b"NOPE\n{}\n")
    with pytest.raises(FileFormatError, match="magic"):
        read_field(path)


def test_header_key_mismatch(tmp_path):
    path = tmp_path / "bad.olf"
    path.write_bytes(b'OLF1\n{"n": 2}\n')
    with pytest.raises(FileFormatError, match="header keys"):
        read_field(path)


def test_truncated_payload(tmp_path, rng):
    g = Grid((4, 4))
    f = random_cell_field(g, "scalar", rng)
    path = tmp_path / "f.olf"
    write_field(path, f)
    data = path.read_bytes()
    path.write_bytes(data[:-8])
    with pytest.raises(FileFormatError, match="payload"):
        read_field(path)


def test_geometry_mismatch_with_grid(tmp_path, rng):
    g = Grid((4, 4))
    path = tmp_path / "f.olf"
    write_field(path, random_cell_field(g, "scalar", rng))
    other = Grid((4, 4), h=0.5)
    with pytest.raises(FileFormatError, match="geometry"):
        read_field(path, grid=other)


def test_mask_bad_bytes(tmp_path):
    g = Grid((2, 2))
    path = tmp_path / "m.olm"
    write_mask(path, g)
    data = bytearray(path.read_bytes())
    data[-1] = 7
    path.write_bytes(bytes(data))
    with pytest.raises(FileFormatError, match="0 or 1"):
        read_mask(path)
