"""Mean-oscillation seminorms, norms, and equivalence-constant probes.

Two integral conventions coexist, matching how the quantities are used:
cube statistics are normalized averages (per cell, independent of the
spacing ``h``), while the ``lq_norm`` quadrature is unnormalized and
carries the cell volume ``h**n``.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import kernels
from .grid import (
    CELL,
    FAMILY_ALL,
    FAMILY_SHIFTED,
    ALL,
    Cube,
    CubeFamily,
    PrefixSums,
    active_max_norm,
    active_mean,
    enumerate_cubes,
    mean_oscillation,
)

# exact-enumeration limits; larger grids default to the shifted-dyadic family
EXACT_LIMIT_2D = 64
EXACT_LIMIT_3D = 16


@dataclass(frozen=True)
class SeminormReport:
    """Supremum value with the first cube attaining it."""

    value: float
    argmax: Cube | None
    family: CubeFamily
    q: float
    cubes: int


def default_family(grid):
    """Exact enumeration on small grids, shifted-dyadic beyond."""
    limit = EXACT_LIMIT_2D if grid.n == 2 else EXACT_LIMIT_3D
    return FAMILY_ALL if max(grid.cells) <= limit else FAMILY_SHIFTED


def _q2_side_sweep(prefix, grid, side, valid):
    s1, s2 = prefix.side_tables(side)
    m = float(side**grid.n)
    mean = s1 / m
    var = s2 / m - mean * mean
    osc = np.sqrt(np.clip(var.sum(axis=-1), 0.0, None))
    osc[~valid] = -1.0
    return osc


def _dense_side_sweep(vals, prefix, grid, side, q):
    valid = grid.valid_anchor_mask(side)
    if q == 2.0:
        osc = _q2_side_sweep(prefix, grid, side, valid)
    else:
        valid_u8 = np.ascontiguousarray(valid, dtype=np.uint8)
        sweep = kernels.osc_sweep_2d if grid.n == 2 else kernels.osc_sweep_3d
        osc = sweep(vals, valid_u8, side, float(q))
    count = int(valid.sum())
    if count == 0:
        return side, None, None, 0
    flat = np.argmax(osc)  # first maximum in C order == lexicographic anchor
    anchor = np.unravel_index(flat, osc.shape)
    return side, float(osc[anchor]), tuple(int(a) for a in anchor), count


def bmo_seminorm(field, family=None, q=1.0, threads=1):
    """Supremum of the q-mean oscillation over a cube family.

    For ``q=1`` this is the discrete mean-oscillation seminorm; ``q=2``
    runs entirely on prefix sums, other exponents use the sweep kernels.
    Ties are broken by enumeration order (ascending side, then
    lexicographic anchor), so results do not depend on scheduling.
    """
    if field.placement != CELL:
        raise ValueError("seminorms are defined for cell fields")
    if q < 1:
        raise ValueError("oscillation exponent q must be >= 1")
    grid = field.grid
    if family is None:
        family = default_family(grid)

    if family.kind == ALL and family.margin == 0:
        vals = np.ascontiguousarray(field.flat_components())
        prefix = PrefixSums(field) if q == 2.0 else None
        sides = family.sides(grid)
        if threads == 0:
            threads = os.cpu_count() or 1
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = list(
                    pool.map(lambda s: _dense_side_sweep(vals, prefix, grid, s, q), sides)
                )
        else:
            results = [_dense_side_sweep(vals, prefix, grid, s, q) for s in sides]
        best = None
        total = 0
        for side, value, anchor, count in results:  # ascending side order
            total += count
            if count == 0:
                continue
            if best is None or value > best[0]:
                best = (value, Cube(anchor, side))
        if best is None:
            raise ValueError("cube family is empty on this grid")
        return SeminormReport(best[0], best[1], family, float(q), total)

    # sparse families: walk the enumeration directly
    prefix = PrefixSums(field) if q == 2.0 else None
    best = None
    total = 0
    for cube in enumerate_cubes(grid, family):
        total += 1
        if cube.side == 1:
            value = 0.0  # single cell: deviation from its own average
        elif q == 2.0:
            m = float(cube.cell_count)
            s1 = prefix.cube_sum(cube)
            s2 = prefix.cube_sum_sq(cube)
            mean = s1 / m
            value = float(np.sqrt(max((s2 / m - mean * mean).sum(), 0.0)))
        else:
            value = mean_oscillation(field, cube, q)
        if best is None or value > best[0]:
            best = (value, cube)
    if best is None:
        raise ValueError("cube family is empty on this grid")
    return SeminormReport(best[0], best[1], family, float(q), total)


def bmo_norm(field):
    """Seminorm (exhaustive cubes, q=1) plus the norm of the domain average."""
    sem = bmo_seminorm(field, FAMILY_ALL, 1.0)
    mean = np.atleast_1d(active_mean(field))
    return sem.value + float(np.sqrt((mean * mean).sum()))


def star_seminorm(field, family=None):
    """Supremum of the double average of |psi(z) - psi(x)| over cube pairs.

    Computed by a direct pair loop per cube; intended for small grids
    where exhaustive enumeration is cheap.
    """
    if field.placement != CELL:
        raise ValueError("seminorms are defined for cell fields")
    grid = field.grid
    family = family or FAMILY_ALL
    best = None
    for cube in enumerate_cubes(grid, family):
        block = field.values[cube.slices].reshape(cube.cell_count, -1)
        diff = block[:, None, :] - block[None, :, :]
        value = float(np.sqrt((diff * diff).sum(axis=2)).mean())
        if best is None or value > best[0]:
            best = (value, cube)
    if best is None:
        raise ValueError("cube family is empty on this grid")
    return best[0]


def jn_equivalence_ratio(field, q, family=None):
    """Ratio of the q-oscillation supremum to the q=1 seminorm.

    Returns None for degenerate fields (zero q=1 seminorm); otherwise
    the ratio is >= 1 and its running maximum over a sample family
    lower-bounds the exponent-equivalence constant.
    """
    if q < 1:
        raise ValueError("q must be >= 1")
    family = family or FAMILY_ALL
    base = bmo_seminorm(field, family, 1.0)
    if base.value == 0.0:
        return None
    top = bmo_seminorm(field, family, q)
    return top.value / base.value


def lq_norm(field, r):
    """Unnormalized L^r norm with cell-volume quadrature h**n."""
    if r < 1:
        raise ValueError("r must be >= 1")
    vals = field.active_values().reshape(-1, field.ncomp)
    norms = np.sqrt((vals * vals).sum(axis=1))
    hn = field.grid.h ** field.grid.n
    return float(((norms**r).sum() * hn) ** (1.0 / r))


def interpolation_ratio(field, p, q):
    """L^q norm over its interpolation bound between the BMO norm and L^p.

    Running maxima over sample families lower-bound the interpolation
    constant.  Exactly invariant under grid rescaling and translation.
    Returns None for the identically zero field.
    """
    if not 1 <= p < q:
        raise ValueError("need 1 <= p < q")
    norm_bmo = bmo_norm(field)
    norm_p = lq_norm(field, p)
    denom = norm_bmo ** (1.0 - p / q) * norm_p ** (p / q)
    if denom == 0.0:
        return None
    return lq_norm(field, q) / denom


def j1_ratio(field, q):
    """Normalized L^q mean over the BMO norm (embedding-constant probe)."""
    if q < 1:
        raise ValueError("q must be >= 1")
    norm_bmo = bmo_norm(field)
    if norm_bmo == 0.0:
        return None
    vals = field.active_values().reshape(-1, field.ncomp)
    norms = np.sqrt((vals * vals).sum(axis=1))
    return float((norms**q).mean() ** (1.0 / q)) / norm_bmo


def linfty_domination_check(field):
    """Verify seminorm <= 2 * sup-norm; returns (ok, slack)."""
    sem = bmo_seminorm(field, FAMILY_ALL, 1.0).value
    cap = 2.0 * active_max_norm(field)
    slack = cap - sem
    ok = slack >= -1e-12 * max(cap, 1.0)
    return ok, slack


class ConstantEstimate:
    """Running maximum of ratio samples for one empirical constant.

    Monotone nondecreasing as samples are added; accumulators merge by
    max, so the result is independent of partitioning order.
    """

    NAMES = ("J1", "J2", "N(n,q)", "D", "star-ratio")

    def __init__(self, name, description=""):
        if name not in self.NAMES:
            raise ValueError(f"unknown constant name {name!r}")
        self.name = name
        self.description = description
        self.value = 0.0
        self.samples = 0
        self.resolutions = []

    def update(self, value, resolution=None):
        if value is None:
            return self
        if value < 0:
            raise ValueError("constant samples must be nonnegative")
        self.value = max(self.value, float(value))
        self.samples += 1
        if resolution is not None and resolution not in self.resolutions:
            self.resolutions.append(resolution)
        return self

    def merge(self, other):
        if other.name != self.name:
            raise ValueError("cannot merge estimates of different constants")
        self.value = max(self.value, other.value)
        self.samples += other.samples
        for r in other.resolutions:
            if r not in self.resolutions:
                self.resolutions.append(r)
        return self

    def __repr__(self):
        return (
            f"ConstantEstimate({self.name}={self.value:.6g}, "
            f"samples={self.samples})"
        )
