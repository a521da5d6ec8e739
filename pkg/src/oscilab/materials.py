"""Hyperelastic constitutive models in strain form.

The stored energy is a function of the right Cauchy-Green tensor,
``sigma(x, C)``; everything in deformation-gradient form (first
Piola-Kirchhoff stress, the spatial stiffness quadratic form) is derived
from it.  Evaluators are batched: ``C`` may carry leading axes, and
heterogeneous coefficient fields are gathered through the ``x`` cell
index.  Derivatives are analytic for the built-in models; custom models
that only define ``sigma`` inherit central-difference fallbacks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import CELL, SCALAR, Field

SPD_EIG_FLOOR = 1e-10

# noise floor for Taylor-remainder estimation: differences below this
# relative size are roundoff, not cubic remainder
_FP_NOISE = 1e-12


def _tr(a):
    return np.trace(a, axis1=-2, axis2=-1)


def _dot(a, b):
    return (a * b).sum(axis=(-2, -1))


def _norm(a):
    return np.sqrt((np.asarray(a) ** 2).sum(axis=(-2, -1)))


def _eye_like(c):
    n = c.shape[-1]
    return np.broadcast_to(np.eye(n), c.shape)


class MaterialModel:
    """Base class: stored energy density with strain derivatives.

    Subclasses must implement ``sigma``; ``dsigma``/``d2sigma`` default
    to central finite differences (``analytic_derivatives`` is False in
    that case).  Coefficients may be floats or cell scalar Fields.
    """

    name = "custom"
    analytic_derivatives = False

    def __init__(self, lam=1.0, mu=1.0):
        for p in (lam, mu):
            if isinstance(p, Field):
                if p.placement != CELL or p.kind != SCALAR:
                    raise ValueError("coefficient fields must be cell scalars")
            elif not np.isfinite(p):
                raise ValueError("coefficients must be finite")
        self.lam = lam
        self.mu = mu

    def param(self, p, x, batch_ndim=0):
        """Resolve a coefficient at cell index x, broadcastable over C."""
        if not isinstance(p, Field):
            return float(p)
        if x is None:
            raise ValueError(f"{self.name}: heterogeneous coefficients need a cell index")
        vals = p.values[x]
        return np.asarray(vals).reshape(np.shape(vals) + (1,) * batch_ndim)

    def sigma(self, c, x=None):
        raise NotImplementedError

    def dsigma(self, c, x=None):
        c = np.asarray(c, dtype=float)
        n = c.shape[-1]
        step = 1e-6 * (1.0 + _norm(c))[..., None, None]
        out = np.zeros_like(c)
        for eb in sym_basis(n):
            hi = self.sigma(c + step * eb, x)
            lo = self.sigma(c - step * eb, x)
            out = out + ((hi - lo)[..., None, None] / (2.0 * step)) * eb
        return out

    def d2sigma(self, c, b, x=None):
        c = np.asarray(c, dtype=float)
        b = np.broadcast_to(np.asarray(b, dtype=float), c.shape)
        bn = _norm(b)[..., None, None]
        step = 1e-6 * (1.0 + _norm(c))[..., None, None] / np.maximum(bn, 1e-30)
        hi = self.dsigma(c + step * b, x)
        lo = self.dsigma(c - step * b, x)
        return (hi - lo) / (2.0 * step)


class StVenantKirchhoff(MaterialModel):
    """Quadratic stored energy in the Green-St. Venant strain."""

    name = "svk"
    analytic_derivatives = True

    def sigma(self, c, x=None):
        c = np.asarray(c, dtype=float)
        lam = self.param(self.lam, x)
        mu = self.param(self.mu, x)
        e = 0.5 * (c - _eye_like(c))
        return 0.5 * lam * _tr(e) ** 2 + mu * _dot(e, e)

    def dsigma(self, c, x=None):
        c = np.asarray(c, dtype=float)
        lam = self.param(self.lam, x, 2)
        mu = self.param(self.mu, x, 2)
        e = 0.5 * (c - _eye_like(c))
        return 0.5 * (lam * _tr(e)[..., None, None] * _eye_like(c) + 2.0 * mu * e)

    def d2sigma(self, c, b, x=None):
        c = np.asarray(c, dtype=float)
        b = np.broadcast_to(np.asarray(b, dtype=float), c.shape)
        lam = self.param(self.lam, x, 2)
        mu = self.param(self.mu, x, 2)
        return 0.25 * lam * _tr(b)[..., None, None] * _eye_like(c) + 0.5 * mu * b


class NeoHookean(MaterialModel):
    """Compressible neo-Hookean energy with a logarithmic volume barrier."""

    name = "neo-hookean"
    analytic_derivatives = True

    def sigma(self, c, x=None):
        c = np.asarray(c, dtype=float)
        n = c.shape[-1]
        lam = self.param(self.lam, x)
        mu = self.param(self.mu, x)
        lnj = 0.5 * np.log(np.linalg.det(c))
        return 0.5 * mu * (_tr(c) - n) - mu * lnj + 0.5 * lam * lnj**2

    def dsigma(self, c, x=None):
        c = np.asarray(c, dtype=float)
        lam = self.param(self.lam, x, 2)
        mu = self.param(self.mu, x, 2)
        cinv = np.linalg.inv(c)
        lnj = 0.5 * np.log(np.linalg.det(c))[..., None, None]
        return 0.5 * mu * (_eye_like(c) - cinv) + 0.5 * lam * lnj * cinv

    def d2sigma(self, c, b, x=None):
        c = np.asarray(c, dtype=float)
        b = np.broadcast_to(np.asarray(b, dtype=float), c.shape)
        lam = self.param(self.lam, x, 2)
        mu = self.param(self.mu, x, 2)
        cinv = np.linalg.inv(c)
        lnj = 0.5 * np.log(np.linalg.det(c))[..., None, None]
        cbc = cinv @ b @ cinv
        cb = _dot(cinv, b)[..., None, None]
        return 0.5 * mu * cbc + 0.25 * lam * cb * cinv - 0.5 * lam * lnj * cbc


def make_material(doc):
    """Build a model from a config mapping {model, lambda, mu}."""
    kinds = {"svk": StVenantKirchhoff, "neo-hookean": NeoHookean}
    kind = doc.get("model")
    if kind not in kinds:
        raise ValueError(f"unknown material model {kind!r}")
    return kinds[kind](lam=doc.get("lambda", 1.0), mu=doc.get("mu", 1.0))


# -- pointwise stress and stiffness operations ------------------------------


def require_spd(c):
    """Reject strain tensors outside the SPD cone (threshold 1e-10)."""
    c = np.asarray(c, dtype=float)
    if not np.allclose(c, np.swapaxes(c, -1, -2), rtol=0, atol=1e-10 * (1 + _norm(c).max())):
        raise ValueError("strain tensor must be symmetric")
    if np.linalg.eigvalsh(c).min() <= SPD_EIG_FLOOR:
        raise ValueError("strain tensor must be symmetric positive definite")


def second_pk(model, x, c):
    """Second Piola-Kirchhoff stress K = 2 dsigma/dC."""
    require_spd(c)
    return 2.0 * model.dsigma(np.asarray(c, dtype=float), x)


def first_pk(model, x, f):
    """First Piola-Kirchhoff stress S = F K(F^T F)."""
    f = np.asarray(f, dtype=float)
    if np.linalg.det(f) <= 0:
        raise ValueError("first Piola-Kirchhoff stress requires det F > 0")
    k = 2.0 * model.dsigma(np.swapaxes(f, -1, -2) @ f, x)
    return f @ k


def cauchy_stress(model, x, f):
    """Cauchy stress T = F K F^T / det F (symmetric)."""
    f = np.asarray(f, dtype=float)
    det = np.linalg.det(f)
    if det <= 0:
        raise ValueError("Cauchy stress requires det F > 0")
    k = 2.0 * model.dsigma(np.swapaxes(f, -1, -2) @ f, x)
    return (f @ k @ np.swapaxes(f, -1, -2)) / det


def elasticity_tensor_apply(model, x, c, b):
    """Elasticity tensor action: 4 d2sigma/dC2 applied to B."""
    return 4.0 * model.d2sigma(np.asarray(c, dtype=float), np.asarray(b, dtype=float), x)


def spatial_tensor_quadratic(model, x, f, h, fd_step=1e-4):
    """H:A(x,F)[H] two ways: the strain-split identity and a second
    difference of W(F) = sigma(F^T F) along H.

    Returns (identity value, finite-difference value, relative gap).
    """
    f = np.asarray(f, dtype=float)
    h = np.asarray(h, dtype=float)
    if np.linalg.det(f) <= 0:
        raise ValueError("requires det F > 0")
    c = f.T @ f
    ehat = 0.5 * (h.T @ f + f.T @ h)
    k = 2.0 * model.dsigma(c, x)
    via_split = float(_dot(ehat, 4.0 * model.d2sigma(c, ehat, x)) + _dot(k, h.T @ h))

    hn = _norm(h)
    if hn == 0:
        return via_split, 0.0, abs(via_split)
    t = fd_step * (1.0 + _norm(f)) / hn

    def w(fm):
        return float(model.sigma(fm.T @ fm, x))

    via_fd = (w(f + t * h) - 2.0 * w(f) + w(f - t * h)) / (t * t)
    scale = max(abs(via_split), abs(via_fd), 1e-30)
    return via_split, via_fd, abs(via_split - via_fd) / scale


def principal_stresses(model, x, f, tol=1e-10):
    """Cauchy-stress eigenvalues (ascending) and the tension flag."""
    t = cauchy_stress(model, x, f)
    eigs = np.linalg.eigvalsh(0.5 * (t + t.T))
    scale = max(1.0, float(np.abs(eigs).max()))
    tension = bool(eigs[0] >= -tol * scale)
    return eigs, tension


# -- quadratic-form spectra --------------------------------------------------


def sym_basis(n):
    """Frobenius-orthonormal basis of the symmetric n x n matrices."""
    basis = []
    for i in range(n):
        e = np.zeros((n, n))
        e[i, i] = 1.0
        basis.append(e)
    root = 1.0 / np.sqrt(2.0)
    for i in range(n):
        for j in range(i + 1, n):
            e = np.zeros((n, n))
            e[i, j] = e[j, i] = root
            basis.append(e)
    return basis


def elasticity_matrix(model, x, c):
    """Quadratic form of the elasticity tensor on Sym(n) as a dense matrix."""
    basis = sym_basis(np.asarray(c).shape[-1])
    d = len(basis)
    m = np.empty((d, d))
    for jcol, eb in enumerate(basis):
        image = elasticity_tensor_apply(model, x, c, eb)
        for irow, ea in enumerate(basis):
            m[irow, jcol] = _dot(ea, image)
    return 0.5 * (m + m.T)


def positivity_margin(model, c_samples, x=None):
    """Half the smallest quadratic-form eigenvalue over strain samples.

    The convention matches the uniform-positivity hypothesis
    M:C_tensor[M] >= 2*beta*|M|^2, so the returned beta is min-eig / 2.
    """
    worst = np.inf
    count = 0
    for c in c_samples:
        eigs = np.linalg.eigvalsh(elasticity_matrix(model, x, c))
        worst = min(worst, float(eigs[0]))
        count += 1
    if count == 0:
        raise ValueError("positivity margin needs at least one strain sample")
    return 0.5 * worst


# -- Taylor-remainder constants ---------------------------------------------


@dataclass(frozen=True)
class TaylorConstants:
    """Empirical cubic-remainder and stiffness-Lipschitz constants."""

    c: float
    c_hat: float
    trials: int
    rejected: int
    description: str = ""


class SpdBoxSampler:
    """Rejection sampler of SPD matrices with eigenvalues in [lo, hi]."""

    def __init__(self, n, eig_lo, eig_hi):
        if not 0 < eig_lo < eig_hi:
            raise ValueError("need 0 < eig_lo < eig_hi")
        self.n = n
        self.lo = float(eig_lo)
        self.hi = float(eig_hi)
        self.rejected = 0

    def sample(self, rng, max_attempts=1000):
        mid = 0.5 * (self.lo + self.hi)
        spread = 0.25 * (self.hi - self.lo)
        for _ in range(max_attempts):
            a = rng.normal(scale=spread, size=(self.n, self.n))
            c = mid * np.eye(self.n) + 0.5 * (a + a.T)
            eigs = np.linalg.eigvalsh(c)
            if eigs[0] >= self.lo and eigs[-1] <= self.hi:
                return c
            self.rejected += 1
        raise RuntimeError("SPD sampler failed to land in the eigenvalue box")


def random_unit_sym(rng, n):
    a = rng.normal(size=(n, n))
    s = 0.5 * (a + a.T)
    return s / _norm(s)


def derivative_check(model, n=2, samples=100, seed=0, eig_lo=0.5, eig_hi=2.0,
                     step=1e-5, x=None):
    """Cross-check analytic strain derivatives against central differences.

    Returns the worst relative errors over random SPD strains: the
    stress against differences of the doubled energy, the stiffness
    application against differences of the stress, and the major-
    symmetry defect.
    """
    rng = np.random.default_rng(seed)
    sampler = SpdBoxSampler(n, eig_lo, eig_hi)
    basis = sym_basis(n)
    err_stress = err_stiff = err_sym = 0.0
    for _ in range(samples):
        c = sampler.sample(rng)
        delta = step * (1.0 + _norm(c))
        k_an = 2.0 * model.dsigma(c, x)
        k_fd = np.zeros_like(k_an)
        for eb in basis:
            d = (2.0 * model.sigma(c + delta * eb, x)
                 - 2.0 * model.sigma(c - delta * eb, x)) / (2.0 * delta)
            k_fd = k_fd + float(d) * eb
        err_stress = max(err_stress, _norm(k_an - k_fd) / max(_norm(k_an), 1e-12))

        b = random_unit_sym(rng, n)
        stiff_an = 4.0 * model.d2sigma(c, b, x)
        stiff_fd = (2.0 * model.dsigma(c + delta * b, x)
                    - 2.0 * model.dsigma(c - delta * b, x)) / delta
        err_stiff = max(err_stiff, _norm(stiff_an - stiff_fd) / max(_norm(stiff_an), 1e-12))

        e = random_unit_sym(rng, n)
        lhs = float(_dot(b, model.d2sigma(c, e, x)))
        rhs = float(_dot(e, model.d2sigma(c, b, x)))
        err_sym = max(err_sym, abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-12))
    return {
        "stress_vs_fd": err_stress,
        "stiffness_vs_fd": err_stiff,
        "major_symmetry": err_sym,
        "samples": samples,
    }


def random_orientation_preserving(rng, n, spread=0.3, det_floor=0.3):
    """Random matrix near the identity with comfortably positive determinant."""
    while True:
        f = np.eye(n) + rng.normal(scale=spread, size=(n, n))
        if np.linalg.det(f) > det_floor:
            return f


def spatial_identity_check(model, n=2, samples=100, seed=0, x=None):
    """Worst relative gap of the strain-split stiffness identity.

    Compares the split form of H:A[H] against the second difference of
    the gradient-form energy along H over random (F, H) pairs.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        f = random_orientation_preserving(rng, n)
        h = rng.normal(size=(n, n))
        _, _, gap = spatial_tensor_quadratic(model, x, f, h)
        worst = max(worst, gap)
    return worst


def taylor_constants(model, sampler, trials, seed=0, x=None):
    """Running maxima of the two Taylor-remainder ratios over SPD pairs.

    ``c`` bounds the cubic defect of the second-order expansion of the
    energy; ``c_hat`` bounds the strain-Lipschitz modulus of the
    stiffness quadratic form.  Both are exactly zero for energies
    quadratic in the strain.
    """
    rng = np.random.default_rng(seed)
    n = sampler.n
    c_max = 0.0
    chat_max = 0.0
    before = sampler.rejected
    for _ in range(trials):
        u = sampler.sample(rng)
        v = sampler.sample(rng)
        e = v - u
        en = _norm(e)
        if en > _FP_NOISE * (1.0 + _norm(u) + _norm(v)):
            expansion = (
                float(model.sigma(u, x))
                + float(_dot(e, model.dsigma(u, x)))
                + 0.5 * float(_dot(e, model.d2sigma(u, e, x)))
            )
            num = expansion - float(model.sigma(v, x))
            scale = abs(expansion) + abs(float(model.sigma(v, x))) + 1e-30
            if num > _FP_NOISE * scale:
                c_max = max(c_max, num / en**3)

            el = random_unit_sym(rng, n)
            qu = float(_dot(el, model.d2sigma(u, el, x)))
            qv = float(_dot(el, model.d2sigma(v, el, x)))
            diff = qu - qv
            if diff > _FP_NOISE * (abs(qu) + abs(qv) + 1e-30):
                chat_max = max(chat_max, diff / en)
    return TaylorConstants(
        c=c_max,
        c_hat=chat_max,
        trials=trials,
        rejected=sampler.rejected - before,
        description=f"eig box [{sampler.lo:g}, {sampler.hi:g}], {trials} pairs",
    )
