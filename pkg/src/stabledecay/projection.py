"""Directional projections: C+(u), C-(u), the positivity exponent beta(u),
and the boundary decay exponent.

For a unit vector u the projected process <X, u> is one-dimensional
strictly alpha-stable with Levy density C+(u) z^(-1-alpha) on z > 0 and
C-(u)|z|^(-1-alpha) on z < 0, where

    C+(u) = integral over {w in S : <u,w> > 0} of theta(w) <u,w>^alpha dw

and C-(u) = C+(-u).  The positivity exponent is

    beta(u) = alpha/2 + arctan(q tan(pi alpha/2)) / pi,   q = (C+-C-)/(C++C-)

for alpha != 1, and beta(u) = 1/2 + arctan(b / (pi C+)) / pi for alpha = 1
with b = <gamma, u>.  beta(u) equals alpha * P(<X_1, u> > 0).

Orientation note: the exponent that makes the half-space power
``dist^e`` harmonic on {x : <x - z, u> > 0} (u the inward normal), and
hence the boundary decay rate of harmonic functions at a boundary point
with inward normal u, is ``decay_exponent(u) = beta(-u) = alpha - beta(u)``;
see :func:`decay_exponent`.
"""

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy.special import gamma as _gamma
from scipy.special import roots_jacobi

from ._sphere import check_unit, circle_grid, direction_grid, rotation_to_axis, sobol_sphere
from .errors import NumericFailure
from .spectral import StableSpec

#: below this distance from alpha = 1 the tan(alpha pi / 2) formula is
#: rejected; use the exact alpha = 1 branch instead
ALPHA_ONE_GUARD = 1e-8


@dataclass(frozen=True)
class QuadConfig:
    """Hemisphere quadrature settings.

    The rule is Gauss-Jacobi in the polar distance from the equator
    (which absorbs the <u,w>^alpha endpoint factor exactly), times a
    periodic trapezoid rule in azimuth for d = 3.  Refinement doubles
    the node counts until the relative change drops below ``tol``.
    """

    tol: Optional[float] = None          # None: 1e-9 closed-form, 1e-6 tabulated
    n_nodes: int = 64
    n_azimuth: int = 64
    max_refine: int = 6
    qmc_points: int = 1 << 14            # d >= 4 only
    qmc_replicates: int = 8
    qmc_seed: int = 0
    qmc_tol: float = 1e-3

    def effective_tol(self, spec: StableSpec) -> float:
        if self.tol is not None:
            return self.tol
        return 1e-6 if spec.theta.kind == "tabulated" else 1e-9


DEFAULT_QUAD = QuadConfig()


@dataclass(frozen=True)
class DirectionalLaw:
    """Projected one-dimensional law in direction u."""

    u: np.ndarray
    c_plus: float
    c_minus: float
    beta: float
    drift_b: Optional[float] = None      # present only when alpha = 1
    quad_err: float = 0.0


@dataclass(frozen=True)
class BetaBounds:
    beta_min: float
    beta_max: float
    argmin_u: np.ndarray
    argmax_u: np.ndarray


@lru_cache(maxsize=64)
def _jacobi_rule(n: int, alpha: float):
    # weight (1+x)^alpha on [-1, 1]
    x, w = roots_jacobi(n, 0.0, alpha)
    return x, w


def _jacobi_nodes(n: int, alpha: float, length: float):
    """Nodes s_i in (0, length) and weights for integral f(s) s^alpha ds."""
    x, w = _jacobi_rule(n, alpha)
    s = (x + 1.0) * (length / 2.0)
    return s, w * (length / 2.0) ** (alpha + 1.0)


def _cplus_batch_d2(spec: StableSpec, U: np.ndarray, n: int) -> np.ndarray:
    """C+ for a batch of unit directions in R^2 with an n-node rule."""
    alpha = spec.alpha
    psi = np.arctan2(U[:, 1], U[:, 0])
    s, w = _jacobi_nodes(n, alpha, np.pi / 2.0)
    smooth = np.sinc(s / np.pi) ** alpha          # (sin s / s)^alpha
    # angles of the integration directions, both hemisphere halves
    ang1 = psi[:, None] + (np.pi / 2.0 - s)[None, :]
    ang2 = psi[:, None] - (np.pi / 2.0 - s)[None, :]
    ang = np.concatenate([ang1, ang2], axis=1)
    dirs = np.stack([np.cos(ang), np.sin(ang)], axis=-1)
    tv = np.asarray(spec.theta(dirs), dtype=float)
    f = tv[:, :n] + tv[:, n:]
    return f @ (w * smooth)


def _cplus_batch_d3(spec: StableSpec, U: np.ndarray, n: int, n_phi: int) -> np.ndarray:
    """C+ for a batch of unit directions in R^3, product rule."""
    alpha = spec.alpha
    s, w = _jacobi_nodes(n, alpha, np.pi / 2.0)   # s = polar distance from equator
    # <u, w> = sin s, surface factor cos s, and sin^alpha s = s^alpha (sinc)^alpha
    smooth = np.sinc(s / np.pi) ** alpha * np.cos(s)
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    wphi = 2.0 * np.pi / n_phi
    out = np.empty(U.shape[0])
    cos_s, sin_s = np.cos(s), np.sin(s)
    cphi, sphi = np.cos(phi), np.sin(phi)
    for i, u in enumerate(U):
        Q = rotation_to_axis(u)                   # Q @ u = e_z
        e1, e2 = Q.T[:, 0], Q.T[:, 1]
        # w(s, phi) = sin(s) u + cos(s)(cos phi e1 + sin phi e2)
        dirs = (sin_s[:, None, None] * u[None, None, :]
                + cos_s[:, None, None] * (cphi[None, :, None] * e1[None, None, :]
                                          + sphi[None, :, None] * e2[None, None, :]))
        tv = np.asarray(spec.theta(dirs), dtype=float)
        out[i] = (tv.sum(axis=1) * wphi) @ (w * smooth)
    return out


def _sphere_area(dim: int) -> float:
    return 2.0 * np.pi ** (dim / 2.0) / _gamma(dim / 2.0)


def _cplus_qmc(spec: StableSpec, u: np.ndarray, quad: QuadConfig):
    vals = np.empty(quad.qmc_replicates)
    area = _sphere_area(spec.dim)
    for r in range(quad.qmc_replicates):
        w = sobol_sphere(spec.dim, quad.qmc_points, seed=quad.qmc_seed + r)
        proj = np.maximum(w @ u, 0.0) ** spec.alpha
        vals[r] = area * np.mean(np.asarray(spec.theta(w)) * proj)
    value = float(np.mean(vals))
    err = float(np.std(vals, ddof=1) / np.sqrt(quad.qmc_replicates))
    return value, err


def c_plus_batch(spec: StableSpec, U: np.ndarray, quad: QuadConfig = DEFAULT_QUAD):
    """(values, err) of C+ at many directions, refined together."""
    U = np.atleast_2d(np.asarray(U, dtype=float))
    tol = quad.effective_tol(spec)
    if spec.dim == 2:
        evaluate = lambda k: _cplus_batch_d2(spec, U, quad.n_nodes << k)
    elif spec.dim == 3:
        evaluate = lambda k: _cplus_batch_d3(spec, U, quad.n_nodes << k,
                                             quad.n_azimuth << k)
    else:
        vals = np.empty(U.shape[0])
        errs = np.empty(U.shape[0])
        for i, u in enumerate(U):
            vals[i], errs[i] = _cplus_qmc(spec, u, quad)
        bad = errs > quad.qmc_tol * np.maximum(np.abs(vals), 1e-300)
        if np.any(bad):
            raise NumericFailure(
                f"QMC hemisphere quadrature above tolerance for {int(bad.sum())} directions",
                value=vals, err_estimate=float(errs.max()))
        return vals, errs

    prev = evaluate(0)
    for k in range(1, quad.max_refine + 1):
        cur = evaluate(k)
        err = np.abs(cur - prev)
        scale = np.maximum(np.abs(cur), 1e-300)
        if np.all(err <= tol * scale):
            return cur, err
        prev = cur
    raise NumericFailure(
        "hemisphere quadrature did not converge to the requested tolerance",
        value=cur, err_estimate=float((err / scale).max()))


def c_plus(spec: StableSpec, u, quad: QuadConfig = DEFAULT_QUAD) -> float:
    """Hemisphere integral C+(u); see module docstring."""
    u = check_unit(u)
    vals, _ = c_plus_batch(spec, u[None, :], quad)
    return float(vals[0])


def c_minus(spec: StableSpec, u, quad: QuadConfig = DEFAULT_QUAD) -> float:
    """C-(u) = C+(-u), same code path by definition."""
    u = check_unit(u)
    return c_plus(spec, -u, quad)


def beta_from_constants(alpha: float, cp: float, cm: float,
                        drift_b: float = 0.0) -> float:
    """Positivity exponent of the 1D law with coefficients (cp, cm).

    alpha != 1:  alpha/2 + arctan(((cp-cm)/(cp+cm)) tan(pi alpha/2)) / pi.
    alpha == 1:  requires cp == cm; the time-1 law is Cauchy with location
    b and scale pi*cp (the scale carries the factor pi because
    int (1-cos z) z^-2 dz = pi), so beta = 1/2 + arctan(b/(pi cp)) / pi.
    """
    if cp <= 0 or cm <= 0:
        raise ValueError("strict positivity of theta forces C+ > 0 and C- > 0")
    if alpha == 1.0:
        return 0.5 + np.arctan(drift_b / (np.pi * cp)) / np.pi
    if abs(alpha - 1.0) < ALPHA_ONE_GUARD:
        raise ValueError(
            "alpha is within 1e-8 of 1: the tan(pi alpha/2) formula is unstable; "
            "use alpha = 1 exactly (drift branch)")
    q = (cp - cm) / (cp + cm)
    return alpha / 2.0 + np.arctan(q * np.tan(np.pi * alpha / 2.0)) / np.pi


def beta(spec: StableSpec, u, quad: QuadConfig = DEFAULT_QUAD) -> float:
    """beta(u) = alpha * P(<X_1, u> > 0), via the explicit arctan formula."""
    u = check_unit(u)
    vals, _ = c_plus_batch(spec, np.array([u, -u]), quad)
    b = float(spec.drift() @ u) if spec.alpha == 1.0 else 0.0
    return beta_from_constants(spec.alpha, vals[0], vals[1], drift_b=b)


def decay_exponent(spec: StableSpec, u, quad: QuadConfig = DEFAULT_QUAD) -> float:
    """Boundary decay exponent at a boundary point with inward normal u.

    Equals beta(-u) = alpha - beta(u): the half-space power
    dist(x, complement)^e on {<x-z, u> > 0} is harmonic exactly for
    e = alpha * P(<X_1, u> < 0), the positivity exponent of the outward
    projection.  (Spectrally one-sided limits fix the orientation: a
    process whose projection onto u only jumps upward creeps across the
    boundary and decays linearly, exponent alpha * P(<X_1,u> < 0) -> 1.)
    """
    u = check_unit(u)
    return beta(spec, -u, quad)


def directional_law(spec: StableSpec, u, quad: QuadConfig = DEFAULT_QUAD) -> DirectionalLaw:
    """Full projected-law record for direction u."""
    u = check_unit(u)
    vals, errs = c_plus_batch(spec, np.array([u, -u]), quad)
    cp, cm = float(vals[0]), float(vals[1])
    b = float(spec.drift() @ u) if spec.alpha == 1.0 else None
    bval = beta_from_constants(spec.alpha, cp, cm, drift_b=b or 0.0)
    return DirectionalLaw(u=u, c_plus=cp, c_minus=cm, beta=bval, drift_b=b,
                          quad_err=float(np.max(errs)))


def projected_density(spec: StableSpec, u, z: float,
                      quad: QuadConfig = DEFAULT_QUAD) -> float:
    """Levy density of the projected law at z != 0."""
    if z == 0:
        raise ValueError("the projected Levy density is singular at 0")
    u = check_unit(u)
    c = c_plus(spec, u, quad) if z > 0 else c_minus(spec, u, quad)
    return c * abs(z) ** (-spec.alpha - 1.0)


def beta_bounds(spec: StableSpec, quad: QuadConfig = DEFAULT_QUAD,
                n_dirs: int = 256) -> BetaBounds:
    """min/max of beta over a quasi-uniform direction grid (n_dirs >= 128)."""
    n_dirs = max(int(n_dirs), 128)
    if spec.dim == 2 and n_dirs % 2:
        n_dirs += 1          # keep the grid antipodally symmetric
    U = direction_grid(spec.dim, n_dirs)
    cp, _ = c_plus_batch(spec, U, quad)
    cm, _ = c_plus_batch(spec, -U, quad)
    if spec.alpha == 1.0:
        drifts = U @ spec.drift()
        betas = 0.5 + np.arctan(drifts / (np.pi * cp)) / np.pi
    else:
        q = (cp - cm) / (cp + cm)
        betas = spec.alpha / 2.0 + np.arctan(q * np.tan(np.pi * spec.alpha / 2.0)) / np.pi
    imin, imax = int(np.argmin(betas)), int(np.argmax(betas))
    return BetaBounds(beta_min=float(betas[imin]), beta_max=float(betas[imax]),
                      argmin_u=U[imin], argmax_u=U[imax])


# ---------------------------------------------------------------------------
# fast directional-exponent fields


def wallis(dim: int, a: float) -> float:
    """Hemisphere moment W_a = int_{<u,w> > 0} <u,w>^a dw (independent of u)."""
    from scipy.special import beta as _beta_fn

    return _sphere_area(dim - 1) * 0.5 * _beta_fn((a + 1.0) / 2.0, (dim - 1.0) / 2.0)


class BetaField:
    """Evaluates u -> beta(u) (and its tangential gradient) in bulk.

    Closed forms cover the constant and cosine-tilt densities in any
    supported dimension; other d = 2 densities go through a dense
    periodic spline of the quadrature values.  The ``decay`` flag flips
    the orientation so the field returns the boundary decay exponent
    beta(-u) instead of beta(u).
    """

    def __init__(self, spec: StableSpec, quad: QuadConfig = DEFAULT_QUAD,
                 decay: bool = False, table_size: int = 4096):
        self.spec = spec
        self.alpha = spec.alpha
        self.decay = bool(decay)
        kind = spec.theta.kind
        self._mode = None
        if kind == "constant":
            self._mode = "closed"
            self._A = spec.theta.c0 * wallis(spec.dim, spec.alpha)
            self._B = 0.0
            self._axis = np.zeros(spec.dim)
        elif kind == "cosine-tilt":
            self._mode = "closed"
            self._A = spec.theta.c0 * wallis(spec.dim, spec.alpha)
            self._B = spec.theta.c1 * wallis(spec.dim, spec.alpha + 1.0)
            self._axis = spec.theta.axis
        elif spec.dim == 2:
            self._mode = "spline"
            self._build_spline(quad, table_size)
        else:
            raise NotImplementedError(
                "bulk beta fields need d = 2 or a closed-form density kind")

    def _build_spline(self, quad, table_size):
        from scipy.interpolate import CubicSpline

        psi = np.linspace(0.0, 2.0 * np.pi, table_size + 1)[:-1]
        U = np.column_stack([np.cos(psi), np.sin(psi)])
        cp, _ = c_plus_batch(self.spec, U, quad)
        cm = np.roll(cp, -table_size // 2)        # C-(psi) = C+(psi + pi)
        if self.alpha == 1.0:
            b = U @ self.spec.drift()
            betas = 0.5 + np.arctan(b / (np.pi * cp)) / np.pi
        else:
            q = (cp - cm) / (cp + cm)
            betas = self.alpha / 2.0 + np.arctan(q * np.tan(np.pi * self.alpha / 2.0)) / np.pi
        psi_ext = np.concatenate([psi, [2.0 * np.pi]])
        betas_ext = np.concatenate([betas, [betas[0]]])
        self._spline = CubicSpline(psi_ext, betas_ext, bc_type="periodic")
        self._dspline = self._spline.derivative()

    def _orient(self, u):
        return -u if self.decay else u

    def value(self, u) -> np.ndarray:
        """beta at unit directions u, shape (..., dim)."""
        u = self._orient(np.asarray(u, dtype=float))
        if self._mode == "closed":
            cp = self._A + self._B * (u @ self._axis)
            cm = self._A - self._B * (u @ self._axis)
            if self.alpha == 1.0:
                b = u @ self.spec.drift()
                return 0.5 + np.arctan(b / (np.pi * cp)) / np.pi
            q = (cp - cm) / (cp + cm)
            return self.alpha / 2.0 + np.arctan(q * np.tan(np.pi * self.alpha / 2.0)) / np.pi
        psi = np.mod(np.arctan2(u[..., 1], u[..., 0]), 2.0 * np.pi)
        return self._spline(psi)

    def gradient(self, u) -> np.ndarray:
        """Tangential gradient of the field at unit directions u."""
        uo = self._orient(np.asarray(u, dtype=float))
        sign = -1.0 if self.decay else 1.0
        if self._mode == "closed":
            p = np.asarray(uo @ self._axis)
            if self.alpha == 1.0:
                b = np.asarray(uo @ self.spec.drift())
                cp = self._A + self._B * p
                s = np.pi * cp
                num = (self.spec.drift() - uo * b[..., None]) * s[..., None] \
                    - b[..., None] * np.pi * self._B * (self._axis - uo * p[..., None])
                dbeta = num / (s**2 + b**2)[..., None] / np.pi
            else:
                T = np.tan(np.pi * self.alpha / 2.0)
                q = self._B * p / self._A
                dq_du = (self._B / self._A) * (self._axis - uo * p[..., None])
                dbeta = (T / (1.0 + (q * T) ** 2))[..., None] * dq_du / np.pi
            return sign * dbeta
        psi = np.mod(np.arctan2(uo[..., 1], uo[..., 0]), 2.0 * np.pi)
        tang = np.stack([-uo[..., 1], uo[..., 0]], axis=-1)
        return sign * self._dspline(psi)[..., None] * tang
