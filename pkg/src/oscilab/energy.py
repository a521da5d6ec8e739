"""Total energy, variations, and equilibrium solving.

Quadrature is midpoint/cell-sum throughout: volume terms carry h**n with
the displacement averaged to cell centers, surface terms carry h**(n-1)
with face-midpoint values.  Almost-everywhere statements of the
continuum theory become per-active-cell statements here.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .grid import CELL, NODE, TRACTION, VECTOR, Field
from .kinematics import gradient

_ARMIJO = 1e-4


class InadmissibleError(ValueError):
    """Deformation violates Dirichlet data or orientation."""


class BarrierStallError(RuntimeError):
    """Line search found no admissible decrease step."""

    def __init__(self, message, diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


def node_to_cell(field):
    """Cell-center values of a node field (corner average)."""
    if field.placement != NODE:
        raise ValueError("expected a node field")
    vals = field.values
    n = field.grid.n
    out = vals
    for a in range(n):
        lo = tuple(slice(None, -1) if b == a else slice(None) for b in range(n))
        hi = tuple(slice(1, None) if b == a else slice(None) for b in range(n))
        out = 0.5 * (out[lo] + out[hi])
    return out


class EnergyProblem:
    """Grid + material + dead loads + Dirichlet data + admissibility bounds.

    Parameters
    ----------
    grid : Grid
        Must have a nonempty Dirichlet part of the boundary.
    material : MaterialModel
    dirichlet : Field or callable
        Node vector field (or ``coords -> values``) prescribing the
        deformation on Dirichlet nodes; values elsewhere are ignored.
    body_force : Field, optional
        Cell vector field of dead body force per unit volume.
    traction : array-like, optional
        Either one vector applied on every traction face or an array
        aligned with ``grid.faces_labeled(TRACTION)``.
    epsilon : float
        Jacobian barrier threshold, in (0, 1).
    cap : float
        Strain cap X used by the uniqueness experiments, > 1.
    """

    def __init__(self, grid, material, dirichlet, body_force=None, traction=None,
                 epsilon=0.05, cap=4.0):
        if not 0 < epsilon < 1:
            raise ValueError("epsilon must lie in (0, 1)")
        if not cap > 1:
            raise ValueError("cap X must exceed 1")
        self.grid = grid
        self.material = material
        self.epsilon = float(epsilon)
        self.cap = float(cap)

        self.dirichlet_mask = grid.dirichlet_node_mask()
        if not self.dirichlet_mask.any():
            raise ValueError("energy problems need a nonempty Dirichlet boundary part")

        if callable(dirichlet) and not isinstance(dirichlet, Field):
            dirichlet = Field(grid, NODE, VECTOR, dirichlet(grid.node_coords()))
        if dirichlet.placement != NODE or dirichlet.kind != VECTOR:
            raise ValueError("dirichlet data must be a node vector field")
        self.dirichlet_values = dirichlet

        if body_force is None:
            body_force = Field.zeros(grid, CELL, VECTOR)
        if body_force.placement != CELL or body_force.kind != VECTOR:
            raise ValueError("body force must be a cell vector field")
        self.body_force = body_force

        tfaces = grid.faces_labeled(TRACTION)
        if traction is None:
            tr = np.zeros((len(tfaces), grid.n))
        else:
            tr = np.asarray(traction, dtype=float)
            if tr.shape == (grid.n,):
                tr = np.broadcast_to(tr, (len(tfaces), grid.n)).copy()
            if tr.shape != (len(tfaces), grid.n):
                raise ValueError("traction must be one vector or one per traction face")
        if not np.isfinite(tr).all():
            raise ValueError("traction values must be finite")
        self.traction_faces = tuple(tfaces)
        self.traction_values = tr
        self.traction_values.setflags(write=False)

        self.active_nodes = grid.active_node_mask()
        self.free_mask = self.active_nodes & ~self.dirichlet_mask
        self._cell_idx = np.nonzero(grid.mask)
        self._basis_norms = self._nodal_basis_norms()

    # -- bookkeeping ------------------------------------------------------

    def _nodal_basis_norms(self):
        """Discrete L2 norm of each nodal hat field (cell-average quadrature)."""
        g = self.grid
        counts = np.zeros(g.node_shape)
        for corner in itertools.product((0, 1), repeat=g.n):
            sl = tuple(slice(c, c + s) for c, s in zip(corner, g.cells))
            counts[sl] += g.mask
        per_cell = (0.5**g.n) ** 2 * g.h**g.n
        return np.sqrt(counts * per_cell)

    def with_dirichlet(self, field):
        """Copy of a node vector field with Dirichlet values imposed exactly."""
        vals = field.values.copy()
        vals[self.dirichlet_mask] = self.dirichlet_values.values[self.dirichlet_mask]
        return Field(self.grid, NODE, VECTOR, vals)

    def check_dirichlet(self, u, tol=1e-9):
        diff = u.values[self.dirichlet_mask] - self.dirichlet_values.values[self.dirichlet_mask]
        scale = 1.0 + np.abs(self.dirichlet_values.values).max()
        if diff.size and np.abs(diff).max() > tol * scale:
            raise InadmissibleError("deformation does not match the Dirichlet data")

    def check_variation(self, w, tol=1e-12):
        vals = w.values[self.dirichlet_mask]
        scale = 1.0 + np.abs(w.values).max()
        if vals.size and np.abs(vals).max() > tol * scale:
            raise ValueError("variations must vanish on the Dirichlet boundary")

    def strains(self, u):
        """(F, C) gathered over active cells, shapes (N, n, n)."""
        f = gradient(u).values[self.grid.mask]
        c = np.swapaxes(f, -1, -2) @ f
        return f, c

    def _traction_term(self, node_values):
        g = self.grid
        if not self.traction_faces:
            return 0.0
        area = g.h ** (g.n - 1)
        total = 0.0
        for face, s in zip(self.traction_faces, self.traction_values):
            nodes = face.node_indices(g.n)
            mid = sum(node_values[idx] for idx in nodes) / len(nodes)
            total += float(s @ mid) * area
        return total

    # -- energy and variations -------------------------------------------

    def total_energy(self, u):
        """Stored energy minus dead-load work of an admissible deformation."""
        self.check_dirichlet(u)
        g = self.grid
        f, c = self.strains(u)
        dets = np.linalg.det(f)
        if dets.min() <= 0.0:
            raise InadmissibleError("deformation has nonpositive Jacobian cells")
        hn = g.h**g.n
        energy = float(self.material.sigma(c, self._cell_idx).sum()) * hn
        ubar = node_to_cell(u)[g.mask]
        b = self.body_force.values[g.mask]
        energy -= float((b * ubar).sum()) * hn
        energy -= self._traction_term(u.values)
        return energy

    def first_variation(self, u, w):
        """Directional derivative of the energy at u along a variation w."""
        self.check_variation(w)
        g = self.grid
        f, c = self.strains(u)
        gw = gradient(w).values[g.mask]
        dsig = self.material.dsigma(c, self._cell_idx)
        e_dot = np.swapaxes(f, -1, -2) @ gw
        e_dot = e_dot + np.swapaxes(e_dot, -1, -2)
        hn = g.h**g.n
        val = float((dsig * e_dot).sum()) * hn
        wbar = node_to_cell(w)[g.mask]
        b = self.body_force.values[g.mask]
        val -= float((b * wbar).sum()) * hn
        val -= self._traction_term(w.values)
        return val

    def second_variation(self, u, w):
        """Quadratic form: stress-weighted gradient term plus stiffness term."""
        self.check_variation(w)
        g = self.grid
        f, c = self.strains(u)
        gw = gradient(w).values[g.mask]
        k = 2.0 * self.material.dsigma(c, self._cell_idx)
        gtg = np.swapaxes(gw, -1, -2) @ gw
        ehat = np.swapaxes(f, -1, -2) @ gw
        ehat = ehat + np.swapaxes(ehat, -1, -2)
        d2 = self.material.d2sigma(c, ehat, self._cell_idx)
        hn = g.h**g.n
        return float(((k * gtg).sum() + (ehat * d2).sum()) * hn)

    # -- discrete equilibrium ---------------------------------------------

    def nodal_gradient(self, u):
        """dE/d(node values): the assembled residual of the weak form."""
        g = self.grid
        n = g.n
        f, c = self.strains(u)
        k = 2.0 * self.material.dsigma(c, self._cell_idx)
        s_active = f @ k
        s_full = np.zeros(g.cells + (n, n))
        s_full[self._cell_idx] = s_active

        out = np.zeros(g.node_shape + (n,))
        w_face = g.h ** (n - 1) / 2 ** (n - 1)
        for axis in range(n):
            t = s_full[..., :, axis] * w_face
            for corner in itertools.product((0, 1), repeat=n):
                sl = tuple(slice(cb, cb + s) for cb, s in zip(corner, g.cells))
                if corner[axis] == 1:
                    out[sl] += t
                else:
                    out[sl] -= t

        w_cell = g.h**n / 2**n
        b_full = self.body_force.values * g.mask[..., None]
        for corner in itertools.product((0, 1), repeat=n):
            sl = tuple(slice(cb, cb + s) for cb, s in zip(corner, g.cells))
            out[sl] -= b_full * w_cell

        if self.traction_faces:
            w_tface = g.h ** (n - 1) / 2 ** (n - 1)
            for face, s in zip(self.traction_faces, self.traction_values):
                for idx in face.node_indices(n):
                    out[idx] -= s * w_tface
        return out

    def equilibrium_residual(self, u):
        """Max over nodal test fields of |first variation| / basis norm."""
        grad = self.nodal_gradient(u)
        free = self.free_mask
        if not free.any():
            return 0.0
        comp_max = np.abs(grad).max(axis=-1)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(free, comp_max / self._basis_norms, 0.0)
        return float(ratio.max())

    def min_active_jacobian(self, u):
        f = gradient(u).values[self.grid.mask]
        return float(np.linalg.det(f).min())


@dataclass(frozen=True)
class SolveResult:
    u: Field
    residual: float
    energy: float
    iterations: int
    converged: bool


def solve_equilibrium(problem, init, tol=1e-10, max_iters=2000):
    """Minimize the total energy over free nodal values.

    First-order descent with Barzilai-Borwein step guesses and a
    nonmonotone Armijo backtracking line search (decrease is measured
    against the worst of the last few energies, which BB steps need);
    any step driving a cell Jacobian to or below the barrier ``epsilon``
    is rejected.  Deterministic given the initial deformation.
    """
    problem.check_dirichlet(init)
    u = problem.with_dirichlet(init)
    if problem.min_active_jacobian(u) <= problem.epsilon:
        raise InadmissibleError("initial deformation already violates the Jacobian barrier")

    free = problem.free_mask[..., None]
    x = u.values.copy()

    def as_field(values):
        return Field(problem.grid, NODE, VECTOR, values)

    energy = problem.total_energy(u)
    grad = problem.nodal_gradient(u) * free
    residual = problem.equilibrium_residual(u)
    alpha = 1.0
    prev_step = None
    prev_grad_diff = None
    recent = [energy]

    iterations = 0
    while residual > tol and iterations < max_iters:
        iterations += 1
        gg = float((grad * grad).sum())
        if prev_step is not None:
            sy = float((prev_step * prev_grad_diff).sum())
            ss = float((prev_step * prev_step).sum())
            if sy > 0:
                alpha = min(max(ss / sy, 1e-12), 1e12)
        reference = max(recent)
        accepted = False
        a = alpha
        while a > 1e-18:
            x_try = x - a * grad
            u_try = as_field(x_try)
            if problem.min_active_jacobian(u_try) > problem.epsilon:
                e_try = problem.total_energy(u_try)
                if e_try <= reference - _ARMIJO * a * gg:
                    accepted = True
                    break
            a *= 0.5
        if not accepted:
            raise BarrierStallError(
                "no admissible descent step",
                {
                    "iteration": iterations,
                    "residual": residual,
                    "min_jacobian": problem.min_active_jacobian(as_field(x)),
                    "last_step": a,
                },
            )
        grad_new = problem.nodal_gradient(u_try) * free
        prev_step = x_try - x
        prev_grad_diff = grad_new - grad
        x, grad, energy = x_try, grad_new, e_try
        recent.append(energy)
        if len(recent) > 10:
            recent.pop(0)
        residual = problem.equilibrium_residual(as_field(x))

    u_final = as_field(x)
    return SolveResult(
        u=u_final,
        residual=residual,
        energy=problem.total_energy(u_final),
        iterations=iterations,
        converged=residual <= tol,
    )


def equilibrium_identity_check(problem, u_e, v):
    """Defect of the energy-difference identity at a solved state.

    Exactly zero when u_e satisfies the weak equilibrium equations; at a
    numerical solution the gap is controlled by the residual.
    """
    g = problem.grid
    w_vals = v.values - u_e.values
    f_e, c_e = problem.strains(u_e)
    _, c_v = problem.strains(v)
    gw = gradient(Field(g, NODE, VECTOR, w_vals)).values[g.mask]
    k = 2.0 * problem.material.dsigma(c_e, problem._cell_idx)
    s = f_e @ k
    hn = g.h**g.n
    interior = float(
        (
            problem.material.sigma(c_v, problem._cell_idx)
            - problem.material.sigma(c_e, problem._cell_idx)
        ).sum()
        * hn
        - (s * gw).sum() * hn
    )
    lhs = problem.total_energy(v) - problem.total_energy(u_e)
    return abs(lhs - interior)


def psd_quadratic_check(l_field, w, tol=1e-12):
    """Integral of (grad w)^T (grad w) : L for a pointwise-psd L field.

    Raises if L has a materially negative eigenvalue; the returned value
    is nonnegative up to roundoff of order |L| * |grad w|^2.
    """
    if l_field.placement != CELL:
        raise ValueError("L must be a cell matrix field")
    g = l_field.grid
    l_vals = l_field.values[g.mask]
    eigs = np.linalg.eigvalsh(0.5 * (l_vals + np.swapaxes(l_vals, -1, -2)))
    scale = 1.0 + np.abs(l_vals).max() if l_vals.size else 1.0
    if eigs.size and eigs.min() < -tol * scale:
        raise ValueError("L must be positive semidefinite per cell")
    gw = gradient(w).values[g.mask]
    gtg = np.swapaxes(gw, -1, -2) @ gw
    return float((gtg * l_vals).sum() * g.h**g.n)
