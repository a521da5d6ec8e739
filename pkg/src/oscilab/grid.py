"""Uniform Cartesian grids, sampled fields, cubes, and prefix-sum tables.

Everything downstream (seminorms, strains, energies) is built on the
types in this module.  All types are immutable after construction and
every operation is a pure function, so values can be shared freely
between workers.

Conventions:
    * cells are indexed by integer multi-indices, row-major;
    * nodes are cell corners, so a grid with ``cells=(nx, ny)`` has
      ``(nx+1, ny+1)`` nodes;
    * cell fields carry one value block per cell of the bounding box;
      values on inactive cells are stored but never enter any reduction.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass

import numpy as np

NODE = "node"
CELL = "cell"

DIRICHLET = "dirichlet"
TRACTION = "traction"

SCALAR = "scalar"
VECTOR = "vector"
MATRIX = "matrix"
SYMMETRIC = "sym"

_KINDS = (SCALAR, VECTOR, MATRIX, SYMMETRIC)


class InvalidCubeError(ValueError):
    """Cube leaves the grid or overlaps inactive cells."""


def _check_connected(mask):
    """Require the active cells to form a single face-connected component."""
    idx = np.argwhere(mask)
    if idx.shape[0] == 0:
        raise ValueError("grid needs at least one active cell")
    start = tuple(idx[0])
    seen = np.zeros(mask.shape, dtype=bool)
    seen[start] = True
    frontier = deque([start])
    shape = mask.shape
    n = len(shape)
    while frontier:
        cur = frontier.popleft()
        for a in range(n):
            for step in (-1, 1):
                nxt = list(cur)
                nxt[a] += step
                if not 0 <= nxt[a] < shape[a]:
                    continue
                nxt = tuple(nxt)
                if mask[nxt] and not seen[nxt]:
                    seen[nxt] = True
                    frontier.append(nxt)
    if seen.sum() != mask.sum():
        raise ValueError("active cells must form one connected component")


@dataclass(frozen=True)
class BoundaryFace:
    """Exterior face of the active region: cell, axis, and outward sign."""

    cell: tuple
    axis: int
    sign: int  # -1: low side of the cell, +1: high side

    def node_indices(self, n):
        """Node multi-indices of the 2^(n-1) corners of this face."""
        plane = self.cell[self.axis] + (1 if self.sign > 0 else 0)
        spans = []
        for a in range(n):
            if a == self.axis:
                spans.append((plane,))
            else:
                spans.append((self.cell[a], self.cell[a] + 1))
        return list(itertools.product(*spans))


class Grid:
    """Uniform Cartesian grid with an active-cell mask and labeled boundary.

    Parameters
    ----------
    cells : sequence of int
        Cells per axis; length 2 or 3, each entry >= 2.
    h : float
        Uniform spacing, > 0.
    origin : sequence of float, optional
        Coordinates of the low corner; defaults to zero.
    mask : bool array, optional
        Active-cell mask; defaults to fully active.  Must be a single
        connected component.
    boundary : callable, optional
        ``boundary(face) -> DIRICHLET | TRACTION`` applied to every
        exterior face; defaults to all-Dirichlet.
    """

    def __init__(self, cells, h=1.0, origin=None, mask=None, boundary=None):
        cells = tuple(int(c) for c in cells)
        if len(cells) not in (2, 3):
            raise ValueError("grid dimension must be 2 or 3")
        if any(c < 2 for c in cells):
            raise ValueError("need at least 2 cells per axis")
        if not h > 0:
            raise ValueError("spacing h must be positive")
        self.cells = cells
        self.n = len(cells)
        self.h = float(h)
        origin = np.zeros(self.n) if origin is None else np.asarray(origin, dtype=float)
        if origin.shape != (self.n,):
            raise ValueError("origin must have one coordinate per axis")
        self.origin = origin
        self.origin.setflags(write=False)

        if mask is None:
            mask = np.ones(cells, dtype=bool)
        else:
            mask = np.asarray(mask, dtype=bool).copy()
            if mask.shape != cells:
                raise ValueError("mask shape must match cells")
        _check_connected(mask)
        self.mask = mask
        self.mask.setflags(write=False)

        self._faces = self._exterior_faces()
        labeler = boundary if boundary is not None else (lambda _face: DIRICHLET)
        labels = []
        for f in self._faces:
            lab = labeler(f)
            if lab not in (DIRICHLET, TRACTION):
                raise ValueError(f"unknown boundary label {lab!r}")
            labels.append(lab)
        self._labels = tuple(labels)
        self._mask_prefix = _padded_cumsum(self.mask.astype(np.int64))
        self._mask_prefix.setflags(write=False)

    # -- geometry ---------------------------------------------------------

    @property
    def node_shape(self):
        return tuple(c + 1 for c in self.cells)

    @property
    def cell_count(self):
        return int(self.mask.sum())

    def node_coords(self):
        """Array of node coordinates, shape node_shape + (n,)."""
        axes = [self.origin[a] + self.h * np.arange(self.cells[a] + 1) for a in range(self.n)]
        grids = np.meshgrid(*axes, indexing="ij")
        return np.stack(grids, axis=-1)

    def cell_centers(self):
        """Array of cell-center coordinates, shape cells + (n,)."""
        axes = [
            self.origin[a] + self.h * (np.arange(self.cells[a]) + 0.5) for a in range(self.n)
        ]
        grids = np.meshgrid(*axes, indexing="ij")
        return np.stack(grids, axis=-1)

    def rescaled(self, scale, shift=None):
        """Same cells/values-layout grid mapped to ``scale*U + shift``."""
        if not scale > 0:
            raise ValueError("scale must be positive")
        shift = np.zeros(self.n) if shift is None else np.asarray(shift, dtype=float)
        g = Grid.__new__(Grid)
        g.cells = self.cells
        g.n = self.n
        g.h = self.h * scale
        g.origin = self.origin * scale + shift
        g.origin.setflags(write=False)
        g.mask = self.mask
        g._faces = self._faces
        g._labels = self._labels
        g._mask_prefix = self._mask_prefix
        return g

    # -- boundary ---------------------------------------------------------

    def _exterior_faces(self):
        faces = []
        for cell in np.ndindex(*self.cells):
            if not self.mask[cell]:
                continue
            for a in range(self.n):
                for sign in (-1, 1):
                    nbr = list(cell)
                    nbr[a] += sign
                    outside = not 0 <= nbr[a] < self.cells[a]
                    if outside or not self.mask[tuple(nbr)]:
                        faces.append(BoundaryFace(tuple(int(i) for i in cell), a, sign))
        return tuple(faces)

    @property
    def boundary_faces(self):
        return self._faces

    @property
    def boundary_labels(self):
        return self._labels

    def faces_labeled(self, label):
        return [f for f, lab in zip(self._faces, self._labels) if lab == label]

    def dirichlet_node_mask(self):
        """Boolean node mask: nodes lying on a Dirichlet-labeled face."""
        out = np.zeros(self.node_shape, dtype=bool)
        for f, lab in zip(self._faces, self._labels):
            if lab == DIRICHLET:
                for node in f.node_indices(self.n):
                    out[node] = True
        return out

    def active_node_mask(self):
        """Nodes touching at least one active cell."""
        out = np.zeros(self.node_shape, dtype=bool)
        m = self.mask
        for corner in itertools.product((0, 1), repeat=self.n):
            sl = tuple(slice(c, c + s) for c, s in zip(corner, self.cells))
            out[sl] |= m
        return out

    # -- cube support -----------------------------------------------------

    def cube_cell_count(self, anchor, side):
        """Number of active cells covered by the cube (prefix-sum lookup)."""
        return int(_box_value(self._mask_prefix, anchor, side))

    def cube_valid(self, cube, margin=0):
        a, s = cube.anchor, cube.side
        lo = tuple(x - margin for x in a)
        size = s + 2 * margin
        if any(x < 0 for x in lo) or any(x + size > c for x, c in zip(lo, self.cells)):
            return False
        return self.cube_cell_count(lo, size) == size**self.n

    def require_valid(self, cube):
        if not self.cube_valid(cube):
            raise InvalidCubeError(f"cube {cube} is not contained in the active region")

    def valid_anchor_mask(self, side):
        """Validity of every anchor of the given side, vectorized."""
        counts = _box_all(self._mask_prefix, side, self.n)
        return counts == side**self.n

    def geometry_signature(self):
        return (self.cells, self.h, tuple(self.origin))


# -- prefix-sum helpers -----------------------------------------------------


def _padded_cumsum(arr, ngrid=None):
    """Cumulative sum along the leading ``ngrid`` axes, zero-padded in front.

    Trailing axes (components) are left untouched.
    """
    if ngrid is None:
        ngrid = arr.ndim
    out = arr
    for a in range(ngrid):
        out = np.cumsum(out, axis=a)
    pad = [(1, 0)] * ngrid + [(0, 0)] * (arr.ndim - ngrid)
    return np.pad(out, pad)


def _box_value(prefix, anchor, side):
    """Inclusion-exclusion sum of one cube from a padded prefix array."""
    ngrid = len(anchor)
    total = 0
    for corner in itertools.product((0, 1), repeat=ngrid):
        idx = tuple(a + side * c for a, c in zip(anchor, corner))
        sign = (-1) ** (ngrid - sum(corner))
        total = total + sign * prefix[idx]
    return total


def _box_all(prefix, side, ngrid):
    """Inclusion-exclusion sums for every anchor of a given side at once."""
    shape = prefix.shape[:ngrid]

    def view(corner):
        sl = []
        for a, c in zip(range(ngrid), corner):
            hi = shape[a] - side + side * c  # anchors run 0 .. shape-1-side
            sl.append(slice(side * c, hi))
        return prefix[tuple(sl)]

    total = None
    for corner in itertools.product((0, 1), repeat=ngrid):
        sign = (-1) ** (ngrid - sum(corner))
        term = view(corner)
        total = sign * term if total is None else total + sign * term
    return total


# -- fields -----------------------------------------------------------------


class Field:
    """Values sampled on the nodes or cells of a grid.

    ``kind`` is one of ``scalar``, ``vector``, ``matrix``, ``sym``;
    symmetric matrices are stored in full.  Values are 64-bit reals,
    row-major over grid indices then components, and must be finite.
    """

    def __init__(self, grid, placement, kind, values):
        if placement not in (NODE, CELL):
            raise ValueError(f"unknown placement {placement!r}")
        if kind not in _KINDS:
            raise ValueError(f"unknown component kind {kind!r}")
        self.grid = grid
        self.placement = placement
        self.kind = kind
        sites = grid.node_shape if placement == NODE else grid.cells
        comp = component_shape(kind, grid.n)
        values = np.asarray(values, dtype=np.float64)
        expect = sites + comp
        if values.shape == expect:
            values = values.copy()
        elif values.size == int(np.prod(expect)):
            values = values.reshape(expect).copy()
        else:
            raise ValueError(f"value count {values.size} != sites x components {expect}")
        if not np.isfinite(values).all():
            raise ValueError("field values must be finite")
        self.values = np.ascontiguousarray(values)
        self.values.setflags(write=False)

    # constructors

    @classmethod
    def zeros(cls, grid, placement, kind):
        sites = grid.node_shape if placement == NODE else grid.cells
        return cls(grid, placement, kind, np.zeros(sites + component_shape(kind, grid.n)))

    @classmethod
    def from_function(cls, grid, placement, kind, fn):
        """Sample ``fn(coords) -> component values`` at sites.

        ``coords`` has shape ``sites + (n,)``; ``fn`` must broadcast and
        return ``sites + component_shape``.
        """
        pts = grid.node_coords() if placement == NODE else grid.cell_centers()
        vals = np.asarray(fn(pts), dtype=np.float64)
        sites = grid.node_shape if placement == NODE else grid.cells
        comp = component_shape(kind, grid.n)
        vals = np.broadcast_to(vals, sites + comp)
        return cls(grid, placement, kind, vals)

    # properties

    @property
    def comp_shape(self):
        return component_shape(self.kind, self.grid.n)

    @property
    def ncomp(self):
        return int(np.prod(self.comp_shape)) if self.comp_shape else 1

    def flat_components(self):
        """View shaped (sites..., ncomp); scalar fields get a length-1 axis."""
        sites = self.grid.node_shape if self.placement == NODE else self.grid.cells
        return self.values.reshape(sites + (self.ncomp,))

    def active_values(self):
        """Values on active cells, shape (n_active,) + comp_shape."""
        if self.placement != CELL:
            raise ValueError("active_values is defined for cell fields")
        return self.values[self.grid.mask]

    def with_values(self, values):
        return Field(self.grid, self.placement, self.kind, values)

    def copy(self):
        return self.with_values(self.values)

    # arithmetic (same grid geometry, placement, kind)

    def _check_compatible(self, other):
        if self.placement != other.placement or self.kind != other.kind:
            raise ValueError("fields have mismatched placement or kind")
        if self.grid.cells != other.grid.cells or self.grid.n != other.grid.n:
            raise ValueError("fields live on different grids")

    def __add__(self, other):
        self._check_compatible(other)
        return self.with_values(self.values + other.values)

    def __sub__(self, other):
        self._check_compatible(other)
        return self.with_values(self.values - other.values)

    def __mul__(self, scalar):
        return self.with_values(self.values * float(scalar))

    __rmul__ = __mul__

    def __neg__(self):
        return self.with_values(-self.values)


def component_shape(kind, n):
    if kind == SCALAR:
        return ()
    if kind == VECTOR:
        return (n,)
    return (n, n)


def active_mean(field):
    """Component-wise average over active cells."""
    return field.active_values().mean(axis=0)


def active_max_norm(field):
    """Sup over active cells of the per-cell Euclidean component norm."""
    vals = field.active_values().reshape(-1, field.ncomp)
    return float(np.sqrt((vals * vals).sum(axis=1)).max())


# -- cubes ------------------------------------------------------------------


@dataclass(frozen=True)
class Cube:
    """Axis-aligned cube of ``side`` cells anchored at integer coordinates."""

    anchor: tuple
    side: int

    def __post_init__(self):
        object.__setattr__(self, "anchor", tuple(int(a) for a in self.anchor))
        if self.side < 1:
            raise ValueError("cube side must be >= 1")

    @property
    def slices(self):
        return tuple(slice(a, a + self.side) for a in self.anchor)

    @property
    def cell_count(self):
        return self.side ** len(self.anchor)


ALL = "all"
DYADIC = "dyadic"
SHIFTED_DYADIC = "shifted-dyadic"


@dataclass(frozen=True)
class CubeFamily:
    """Which cubes a supremum ranges over.

    ``shifts`` are the thirds used by the shifted-dyadic family: at each
    dyadic side ``s`` the anchor lattices are offset by ``floor(k*s/3)``
    for ``k`` in ``shifts`` (plus the aligned lattice).  ``margin``
    demands that many extra active cells around each cube.
    """

    kind: str = ALL
    max_side: int | None = None
    shifts: tuple = (1, 2)
    margin: int = 0

    def __post_init__(self):
        if self.kind not in (ALL, DYADIC, SHIFTED_DYADIC):
            raise ValueError(f"unknown cube family kind {self.kind!r}")

    def sides(self, grid):
        cap = min(grid.cells)
        if self.max_side is not None:
            cap = min(cap, self.max_side)
        if self.kind == ALL:
            return list(range(1, cap + 1))
        sides = []
        s = 1
        while s <= cap:
            sides.append(s)
            s *= 2
        return sides

    def axis_anchors(self, side, extent):
        """Sorted anchor coordinates along one axis with ``extent`` cells."""
        hi = extent - side
        if hi < 0:
            return []
        if self.kind == ALL:
            return list(range(hi + 1))
        offsets = {0}
        if self.kind == SHIFTED_DYADIC:
            offsets.update((k * side) // 3 for k in self.shifts)
        anchors = set()
        for off in offsets:
            anchors.update(range(off, hi + 1, side))
        return sorted(anchors)


FAMILY_ALL = CubeFamily(ALL)
FAMILY_DYADIC = CubeFamily(DYADIC)
FAMILY_SHIFTED = CubeFamily(SHIFTED_DYADIC)


def enumerate_cubes(grid, family=FAMILY_ALL):
    """Yield the valid cubes of a family, ascending side then lex anchor."""
    for side in family.sides(grid):
        per_axis = [family.axis_anchors(side, grid.cells[a]) for a in range(grid.n)]
        for anchor in itertools.product(*per_axis):
            cube = Cube(anchor, side)
            if grid.cube_valid(cube, margin=family.margin):
                yield cube


# -- per-cube statistics ----------------------------------------------------


def cube_average(field, cube):
    """Arithmetic mean of field values over the cube's cells."""
    if field.placement != CELL:
        raise ValueError("cube averages are defined for cell fields")
    field.grid.require_valid(cube)
    block = field.values[cube.slices]
    axes = tuple(range(field.grid.n))
    return block.mean(axis=axes)


def mean_oscillation(field, cube, q=1.0):
    """q-mean deviation from the cube average.

    Matrix and vector components are collapsed with the Euclidean
    (Frobenius) norm before taking the q-power mean.
    """
    if q < 1:
        raise ValueError("oscillation exponent q must be >= 1")
    avg = cube_average(field, cube)
    block = field.values[cube.slices]
    dev = (block - avg).reshape(cube.cell_count, -1)
    norms = np.sqrt((dev * dev).sum(axis=1))
    if q == 1.0:
        return float(norms.mean())
    if q == 2.0:
        return float(np.sqrt((norms * norms).mean()))
    return float((norms**q).mean() ** (1.0 / q))


class PrefixSums:
    """Cumulative sum and sum-of-squares tables for O(1) cube statistics.

    Values on inactive cells are zeroed before accumulation; any cube
    accepted by the grid covers active cells only, so this never changes
    a valid cube sum.
    """

    def __init__(self, field):
        if field.placement != CELL:
            raise ValueError("prefix sums are defined for cell fields")
        self.grid = field.grid
        self.ncomp = field.ncomp
        vals = field.flat_components() * field.grid.mask[..., None]
        self.sum1 = _padded_cumsum(vals, ngrid=field.grid.n)
        self.sum2 = _padded_cumsum(vals * vals, ngrid=field.grid.n)
        self.sum1.setflags(write=False)
        self.sum2.setflags(write=False)

    def cube_sum(self, cube):
        return _box_value(self.sum1, cube.anchor, cube.side)

    def cube_sum_sq(self, cube):
        return _box_value(self.sum2, cube.anchor, cube.side)

    def side_tables(self, side):
        """(sum, sum of squares) for every anchor of the given side."""
        n = self.grid.n
        return _box_all(self.sum1, side, n), _box_all(self.sum2, side, n)
