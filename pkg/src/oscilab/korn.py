"""Empirical Korn quotients: domains, ratios, and an adversarial search.

The mean-oscillation form of the gradient/symmetric-gradient quotient
has a domain-independent supremum, while the classical L^p form
degenerates on narrow-passage geometries; the search below produces
empirical lower bounds for both so that contrast can be measured.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bmo import bmo_seminorm
from .grid import FAMILY_ALL, NODE, VECTOR, Field, Grid
from .kinematics import gradient, sym_gradient

SQUARE = "square"
LSHAPE = "lshape"
ROOMS_AND_PASSAGES = "rooms-and-passages"


@dataclass(frozen=True)
class DomainSpec:
    """Test-domain description; resolution is cells per unit room edge."""

    kind: str = SQUARE
    resolution: int = 16
    rooms: int = 2
    passage_width: float = 0.25

    def __post_init__(self):
        if self.kind not in (SQUARE, LSHAPE, ROOMS_AND_PASSAGES):
            raise ValueError(f"unknown domain kind {self.kind!r}")
        if self.resolution < 2:
            raise ValueError("resolution must be >= 2")
        if not 0 < self.passage_width <= 0.5:
            raise ValueError("passage width fraction must lie in (0, 1/2]")
        if self.rooms < 2 and self.kind == ROOMS_AND_PASSAGES:
            raise ValueError("rooms-and-passages needs at least two rooms")

    def label(self):
        if self.kind == ROOMS_AND_PASSAGES:
            return f"{self.kind}(k={self.rooms},w={self.passage_width:g})"
        return self.kind


def generate_domain(spec):
    """Deterministic mask for a DomainSpec, spacing 1/resolution."""
    res = spec.resolution
    h = 1.0 / res
    if spec.kind == SQUARE:
        return Grid((res, res), h=h)
    if spec.kind == LSHAPE:
        mask = np.ones((res, res), dtype=bool)
        mask[res // 2:, res // 2:] = False  # drop one quadrant
        return Grid((res, res), h=h, mask=mask)
    # rooms in a row joined by centered passages of half-room length
    k = spec.rooms
    passage_len = res // 2
    width = max(1, round(spec.passage_width * res))
    nx = k * res + (k - 1) * passage_len
    mask = np.zeros((nx, res), dtype=bool)
    y0 = (res - width) // 2
    for room in range(k):
        x0 = room * (res + passage_len)
        mask[x0:x0 + res, :] = True
        if room < k - 1:
            mask[x0 + res:x0 + res + passage_len, y0:y0 + width] = True
    return Grid((nx, res), h=h, mask=mask)


@dataclass(frozen=True)
class KornReport:
    """Gradient-over-symmetric-gradient quotient for one displacement."""

    ratio: float
    numerator: float
    denominator: float
    mode: str
    domain: str
    field_desc: str
    degenerate: bool
    counterexample: bool = False
    numerator_report: object = None
    denominator_report: object = None
    trial: int = -1


# relative noise floor separating roundoff from a genuinely nonconstant
# gradient (constant gradients only vanish up to rounding of the stencil)
_DEGENERATE_RTOL = 1e-13


def korn_ratio_bmo(w, family=None, domain="", field_desc="", trial=-1):
    """Seminorm quotient of a displacement's gradient over its symmetric part.

    Both seminorms range over the same cube family.  A constant gradient
    makes both sides vanish (degenerate); a vanishing denominator with a
    nonzero numerator is flagged as a counterexample candidate for
    stencil audit (it cannot occur for exact fields).
    """
    grad = gradient(w)
    num = bmo_seminorm(grad, family)
    den = bmo_seminorm(sym_gradient(w), family)
    floor = _DEGENERATE_RTOL * (1.0 + float(np.abs(grad.values).max()))
    if den.value <= floor:
        return KornReport(float("nan"), num.value, den.value, "BMO", domain,
                          field_desc, degenerate=num.value <= floor,
                          counterexample=num.value > floor,
                          numerator_report=num, denominator_report=den, trial=trial)
    return KornReport(num.value / den.value, num.value, den.value, "BMO", domain,
                      field_desc, degenerate=False,
                      numerator_report=num, denominator_report=den, trial=trial)


def korn_ratio_lp(w, p=2.0, domain="", field_desc="", trial=-1):
    """Mean-subtracted L^p quotient over active cells (classical form)."""
    if p < 1:
        raise ValueError("p must be >= 1")
    g = gradient(w).active_values()
    gs = sym_gradient(w).active_values()
    scale = 1.0 + float(np.abs(g).max())
    g = g - g.mean(axis=0)
    gs = gs - gs.mean(axis=0)
    num = float((np.linalg.norm(g, axis=(1, 2)) ** p).sum()) ** (1.0 / p)
    den = float((np.linalg.norm(gs, axis=(1, 2)) ** p).sum()) ** (1.0 / p)
    mode = f"LP({p:g})"
    floor = _DEGENERATE_RTOL * scale
    if den <= floor:
        return KornReport(float("nan"), num, den, mode, domain, field_desc,
                          degenerate=num <= floor, counterexample=num > floor,
                          trial=trial)
    return KornReport(num / den, num, den, mode, domain, field_desc,
                      degenerate=False, trial=trial)


# -- displacement dictionary -------------------------------------------------


def displacement_modes(grid):
    """Named scalar mode shapes on the nodes (<= 32 per component).

    Polynomials in centered coordinates plus low-order Fourier modes and
    Fourier-times-coordinate cross terms; the bilinear monomial comes
    first so cheap searches already cover the classical shear test
    field.
    """
    coords = grid.node_coords()
    extent = np.array([c * grid.h for c in grid.cells])
    scale = float(extent.max())
    centered = (coords - grid.origin - 0.5 * extent) / scale
    unit = (coords - grid.origin) / extent
    n = grid.n
    modes = []

    def c(a):
        return centered[..., a]

    if n == 2:
        x, y = c(0), c(1)
        modes.append(("xy", x * y))
        for name, val in (("x", x), ("y", y), ("x2", x * x), ("y2", y * y),
                          ("x2y", x * x * y), ("xy2", x * y * y)):
            modes.append((name, val))
        for k in (1, 2, 3):
            for a, nm in ((0, "x"), (1, "y")):
                t = k * np.pi * unit[..., a]
                modes.append((f"sin{k}{nm}", np.sin(t)))
                modes.append((f"cos{k}{nm}", np.cos(t)))
        for k in (1, 2):
            tx = k * np.pi * unit[..., 0]
            ty = k * np.pi * unit[..., 1]
            modes.append((f"sin{k}x*y", np.sin(tx) * y))
            modes.append((f"cos{k}x*y", np.cos(tx) * y))
            modes.append((f"sin{k}y*x", np.sin(ty) * x))
            modes.append((f"cos{k}y*x", np.cos(ty) * x))
    else:
        xs = [c(a) for a in range(3)]
        names = "xyz"
        for a in range(3):
            for b in range(a + 1, 3):
                modes.append((names[a] + names[b], xs[a] * xs[b]))
        for a in range(3):
            modes.append((names[a], xs[a]))
            modes.append((names[a] + "2", xs[a] * xs[a]))
        for k in (1, 2):
            for a in range(3):
                t = k * np.pi * unit[..., a]
                modes.append((f"sin{k}{names[a]}", np.sin(t)))
                modes.append((f"cos{k}{names[a]}", np.cos(t)))
    assert len(modes) <= 32
    return modes


def _rotation_pair(grid, axis, profile):
    """Differential-rotation field from a 1-D angle profile along an axis.

    The companion component is the trapezoidal antiderivative of the
    profile over the node line, which cancels the shear entry of the
    element-wise symmetric gradient exactly; the remaining symmetric
    part is supported where the profile varies.
    """
    n = grid.n
    other = 1 - axis
    extent = np.array([c * grid.h for c in grid.cells])
    center = grid.origin[other] + 0.5 * extent[other]
    line = grid.origin[axis] + grid.h * np.arange(grid.cells[axis] + 1)
    anti = np.concatenate(
        ([0.0], np.cumsum(0.5 * (profile[1:] + profile[:-1]) * np.diff(line)))
    )
    coords = grid.node_coords()
    vals = np.zeros(grid.node_shape + (n,))
    reshaper = (slice(None),) + (None,) * (n - 1 - axis)
    prof_nd = profile[(None,) * axis + reshaper]
    anti_nd = anti[(None,) * axis + reshaper]
    vals[..., axis] = -prof_nd * (coords[..., other] - center)
    vals[..., other] = anti_nd
    return vals


def _smoothstep(t):
    t = np.clip(t, 0.0, 1.0)
    return t * t * (3.0 - 2.0 * t)


def _narrow_intervals(grid, axis):
    """Interior index ranges along an axis where the active section thins."""
    counts = grid.mask.sum(axis=tuple(a for a in range(grid.n) if a != axis))
    narrow = counts < counts.max()
    intervals = []
    start = None
    for i, flag in enumerate(list(narrow) + [False]):
        if flag and start is None:
            start = i
        elif not flag and start is not None:
            if start > 0 and i < len(counts):  # interior only: a room on each side
                intervals.append((start, i))
            start = None
    return intervals


def paired_modes(grid):
    """Vector-valued rotation modes (2-D grids).

    Global Fourier angle profiles plus, on masked domains, smoothstep
    profiles that swing the rotation angle across each detected narrow
    passage so the symmetric gradient concentrates there.
    """
    if grid.n != 2:
        return []
    modes = []
    for axis in (0, 1):
        m = grid.cells[axis] + 1
        unit = np.arange(m) / (m - 1)
        for k in (1, 2, 3):
            profile = -np.cos(k * np.pi * unit)
            modes.append((f"crot{k}{'xy'[axis]}", _rotation_pair(grid, axis, profile)))
        for lo, hi in _narrow_intervals(grid, axis):
            t = (np.arange(m) - lo) / max(hi - lo, 1)
            profile = 2.0 * _smoothstep(t) - 1.0
            modes.append(
                (f"crot@{'xy'[axis]}{lo}:{hi}", _rotation_pair(grid, axis, profile))
            )
    return modes


class DisplacementSampler:
    """Sparse random combinations of scalar and paired dictionary modes."""

    def __init__(self, grid, n_terms=8):
        self.grid = grid
        self.modes = displacement_modes(grid)
        self.paired = paired_modes(grid)
        self.n_terms = n_terms

    def seed_fields(self):
        """Deterministic single-mode fields: paired modes, then scalars."""
        n = self.grid.n
        for name, vals in self.paired:
            yield name, vals.copy()
        for name, shape_fn in self.modes:
            for comp in range(n):
                vals = np.zeros(self.grid.node_shape + (n,))
                vals[..., comp] = shape_fn
                yield f"{name}->u{comp}", vals

    def sample(self, rng):
        n = self.grid.n
        n_scalar_slots = len(self.modes) * n
        vals = np.zeros(self.grid.node_shape + (n,))
        picks = rng.integers(0, n_scalar_slots + len(self.paired), size=self.n_terms)
        coeffs = rng.normal(size=self.n_terms)
        names = []
        for pick, coeff in zip(picks, coeffs):
            pick = int(pick)
            if pick < n_scalar_slots:
                mi, comp = divmod(pick, n)
                vals[..., comp] += coeff * self.modes[mi][1]
                names.append(self.modes[mi][0])
            else:
                name, pv = self.paired[pick - n_scalar_slots]
                vals += coeff * pv
                names.append(name)
        return "+".join(sorted(set(names))), vals


def korn_search(grid, mode, budget, seed, p=2.0, family=None, domain="",
                hill_fraction=0.4, sampler=None):
    """Maximize the Korn quotient over a displacement family.

    Three phases share the evaluation budget: deterministic single-mode
    seeds, sparse random combinations (per-trial seed streams), then
    coordinate-wise hill climbing on nodal values of the incumbent.
    Deterministic given the seed; returns (best report, improvement
    trace).
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    if mode not in ("BMO", "LP"):
        raise ValueError("mode must be 'BMO' or 'LP'")
    sampler = sampler or DisplacementSampler(grid)
    family = family or FAMILY_ALL

    evals = 0
    best = None
    best_vals = None
    trace = []

    def evaluate(desc, vals):
        nonlocal evals, best, best_vals
        w = Field(grid, NODE, VECTOR, vals)
        if mode == "BMO":
            rep = korn_ratio_bmo(w, family, domain, desc, trial=evals)
        else:
            rep = korn_ratio_lp(w, p, domain, desc, trial=evals)
        evals += 1
        if not rep.degenerate and not rep.counterexample:
            if best is None or rep.ratio > best.ratio:
                best = rep
                best_vals = vals.copy()
                trace.append((rep.trial, rep.ratio))
        return rep

    for desc, vals in sampler.seed_fields():
        if evals >= budget:
            break
        evaluate(desc, vals)

    hill_budget = int(budget * hill_fraction)
    trial = 0
    while evals < budget - hill_budget:
        rng = np.random.default_rng(np.random.SeedSequence((seed, 1, trial)))
        desc, vals = sampler.sample(rng)
        evaluate(f"rand{trial}:{desc}", vals)
        trial += 1

    if best_vals is not None:
        rng = np.random.default_rng(np.random.SeedSequence((seed, 2)))
        nodes = np.argwhere(grid.active_node_mask())
        step = 0.1 * float(np.abs(best_vals).max() or 1.0)
        stall = 0
        vals = best_vals.copy()
        while evals < budget and step > 1e-12:
            pick = nodes[int(rng.integers(0, len(nodes)))]
            comp = int(rng.integers(0, grid.n))
            sign = 1.0 if rng.random() < 0.5 else -1.0
            trial_vals = vals.copy()
            trial_vals[tuple(pick) + (comp,)] += sign * step
            before = best.ratio if best else -np.inf
            rep = evaluate(f"{best.field_desc}+climb", trial_vals)
            if best.ratio > before:
                vals = trial_vals
                stall = 0
            else:
                stall += 1
                if stall >= 20:
                    step *= 0.5
                    stall = 0
    if best is None:
        # every candidate degenerate: report the last one
        raise RuntimeError("search found only degenerate fields; enlarge the dictionary")
    return best, trace
