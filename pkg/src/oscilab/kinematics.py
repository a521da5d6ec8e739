"""Discrete gradients, strain tensors, and rotation-distance probes.

Gradients are element-style: each cell takes the average of its corner
one-sided differences, which is the bilinear/trilinear gradient at the
cell center.  Every cell, including boundary-adjacent ones, uses the
same stencil, so near-boundary oscillation statistics carry no
one-sided-stencil bias.  The stencil is exact on affine maps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bmo import bmo_seminorm
from .grid import CELL, MATRIX, NODE, SYMMETRIC, VECTOR, SCALAR, Field, active_mean


@dataclass(frozen=True)
class DeformationField:
    """Node-placed vector field read as a map u or a displacement w (u = id + w)."""

    field: Field
    displacement: bool = False

    def __post_init__(self):
        if self.field.placement != NODE or self.field.kind != VECTOR:
            raise ValueError("deformations are node-placed vector fields")

    def map_field(self):
        """The deformation u itself."""
        if self.displacement:
            return identity_map(self.field.grid) + self.field
        return self.field

    def displacement_field(self):
        """The displacement w = u - id."""
        if self.displacement:
            return self.field
        return self.field - identity_map(self.field.grid)


def identity_map(grid):
    """Node field holding the coordinates of each node."""
    return Field(grid, NODE, VECTOR, grid.node_coords())


def _as_map(u):
    return u.map_field() if isinstance(u, DeformationField) else u


def gradient(u):
    """Cell matrix field of partial derivatives (rows: components).

    Per cell, the average of the 2^n corner one-sided differences along
    each axis; inactive cells hold zeros.
    """
    u = _as_map(u)
    if u.placement != NODE or u.kind != VECTOR:
        raise ValueError("gradient expects a node-placed vector field")
    grid = u.grid
    n = grid.n
    vals = u.values
    cols = []
    for axis in range(n):
        d = np.diff(vals, axis=axis) / grid.h
        for other in range(n):
            if other == axis:
                continue
            lo = tuple(slice(None, -1) if a == other else slice(None) for a in range(n))
            hi = tuple(slice(1, None) if a == other else slice(None) for a in range(n))
            d = 0.5 * (d[lo] + d[hi])
        cols.append(d)  # (cells..., n) = d u_i / d x_axis for all i
    g = np.stack(cols, axis=-1)  # (cells..., i, axis)
    g = g * grid.mask[..., None, None]
    return Field(grid, CELL, MATRIX, g)


def sym_gradient(u):
    """Symmetric part of the gradient, per cell."""
    g = gradient(u)
    sym = 0.5 * (g.values + np.swapaxes(g.values, -1, -2))
    return Field(g.grid, CELL, SYMMETRIC, sym)


def cauchy_green(u):
    """Right Cauchy-Green tensor C = F^T F per cell."""
    g = gradient(u)
    c = np.einsum("...ki,...kj->...ij", g.values, g.values)
    return Field(g.grid, CELL, SYMMETRIC, c)


def green_st_venant(u):
    """Nonlinear strain E = (C - I)/2; vanishes at rigid motions."""
    c = cauchy_green(u)
    n = c.grid.n
    e = 0.5 * (c.values - np.eye(n) * c.grid.mask[..., None, None])
    return Field(c.grid, CELL, SYMMETRIC, e)


def jacobian(f_field):
    """Cell scalar field of determinants of a cell matrix field."""
    if f_field.placement != CELL or f_field.kind not in (MATRIX, SYMMETRIC):
        raise ValueError("jacobian expects a cell matrix field")
    det = np.linalg.det(f_field.values)
    return Field(f_field.grid, CELL, SCALAR, det * f_field.grid.mask)


def min_jacobian(u):
    """Smallest det(grad u) over active cells."""
    j = jacobian(gradient(u))
    return float(j.values[j.grid.mask].min())


def polar_rotation(f, rtol=1e-12):
    """Rotation factor of F via eigen-decomposition of F^T F.

    Applies a determinant-sign correction so the result lies in SO(n)
    even when det F < 0 (the closest-rotation fit flips the weakest
    principal direction).  Raises on (numerically) singular input.
    """
    f = np.asarray(f, dtype=float)
    n = f.shape[0]
    b = f.T @ f
    lam, v = np.linalg.eigh(b)  # ascending
    if lam[0] <= rtol * max(lam[-1], 1.0):
        raise ValueError("matrix is singular; no polar rotation")
    u_inv = v @ np.diag(1.0 / np.sqrt(lam)) @ v.T
    r = f @ u_inv
    if np.linalg.det(f) < 0:
        d = np.ones(n)
        d[0] = -1.0  # flip the smallest-stretch direction
        r = f @ v @ np.diag(d / np.sqrt(lam)) @ v.T
    return r


def distance_to_rotations(f):
    """Frobenius distance from F to its polar rotation factor."""
    f = np.asarray(f, dtype=float)
    if np.linalg.det(f) <= 0:
        raise ValueError("distance to rotations requires det F > 0")
    r = polar_rotation(f)
    return float(np.linalg.norm(f - r))


def best_fit_rotation(f_field):
    """Rotation minimizing the summed squared distance to a gradient field.

    The minimizer over SO(n) of sum |F - Q|^2 is the (sign-corrected)
    polar factor of the cell average of F.  Returns (Q, |<F - Q>|).
    """
    mean = active_mean(f_field)
    q = polar_rotation(mean)
    residual = float(np.linalg.norm(mean - q))
    return q, residual


def rigidity_probe(u, family=None):
    """Rotation-neighborhood ratio for a deformation.

    (seminorm of grad u + |<grad u - Q_u>|) / sup|C_u - I|; running
    maxima over sample sets estimate the rigidity constant.  Returns
    None when C_u is the identity up to roundoff (degenerate input).
    """
    u = _as_map(u)
    g = gradient(u)
    c = cauchy_green(u)
    n = c.grid.n
    dev = c.values - np.eye(n) * c.grid.mask[..., None, None]
    dev_active = dev[c.grid.mask].reshape(-1, n * n)
    denom = float(np.sqrt((dev_active * dev_active).sum(axis=1)).max())
    strain_scale = float(np.abs(c.values).max())
    if denom <= 1e-12 * (1.0 + strain_scale):
        return None
    _, residual = best_fit_rotation(g)
    sem = bmo_seminorm(g, family).value
    return (sem + residual) / denom
