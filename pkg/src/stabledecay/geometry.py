"""C^{1,1} domains with exact distance, nearest boundary point and inward
normal, plus the normalized boundary coordinate frame.

Conventions: ``delta`` is the distance to the complement (0 outside the
domain), the normal ``n`` points inward, and ``x = z(x) + delta(x) n(x)``
for collar points.  The normalized frame at a boundary point maps the
point to the origin, the inward normal to e_d, and dilates so both
uniform ball radii are at least 2 (then the collar has width >= 1).
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._sphere import check_unit, rotation_to_axis
from .errors import NumericFailure

NEWTON_MAX_ITER = 64
NEWTON_RESIDUAL = 1e-12


class DomainGeometry:
    """Base class; subclasses implement the per-kind geometry."""

    kind = None
    dim = None

    # certified uniform ball radii; np.inf where any radius works
    interior_ball_r = np.inf
    exterior_ball_r = np.inf

    @property
    def collar_width(self) -> float:
        return 0.99 * min(self.interior_ball_r, self.exterior_ball_r)

    def contains(self, x) -> np.ndarray:
        raise NotImplementedError

    def delta(self, x) -> np.ndarray:
        """Distance to the complement; 0 for exterior points."""
        raise NotImplementedError

    def nearest_boundary(self, x):
        """(z(x), n(x)) for collar points; unique there by the ball condition."""
        raise NotImplementedError

    def boundary_gap(self, z) -> float:
        """Unsigned distance from z to the boundary (either side)."""
        raise NotImplementedError

    def boundary_normal(self, z) -> np.ndarray:
        """Inward unit normal at a boundary point."""
        raise NotImplementedError

    def boundary_frame(self, z, tol: float = 1e-10) -> "BoundaryFrame":
        z = np.asarray(z, dtype=float)
        if self.boundary_gap(z) > tol:
            raise ValueError("z is not on the boundary (within 1e-10)")
        n = self.boundary_normal(z)
        Q = rotation_to_axis(n)
        r = min(self.interior_ball_r, self.exterior_ball_r)
        scale = 1.0 if not np.isfinite(r) else 2.0 / r
        return BoundaryFrame(z=z, n=n, rotation=Q, scale=scale)

    def _check_collar(self, x, d):
        limit = min(self.interior_ball_r, self.exterior_ball_r)
        if np.any(d > limit * (1.0 + 1e-9)):
            raise ValueError(
                "point outside the collar: nearest boundary point may be non-unique")
        if np.any(d <= 0.0):
            raise ValueError("nearest_boundary expects strictly interior points")

    def to_dict(self) -> dict:
        raise NotImplementedError

    @staticmethod
    def from_dict(d: dict) -> "DomainGeometry":
        kind = d["kind"]
        if kind == "half-space":
            return HalfSpace(d["point"], d["normal"])
        if kind == "ball":
            return Ball(d["center"], d["radius"])
        if kind == "ellipsoid":
            return Ellipsoid(d["center"], d["semi_axes"])
        if kind == "perturbed-ball":
            return PerturbedBall(d["radius"], d["amplitude"], d["wavenumber"])
        raise ValueError(f"unknown domain kind {kind!r}")


class HalfSpace(DomainGeometry):
    """{x : <x - point, normal> > 0} with inward unit normal."""

    kind = "half-space"

    def __init__(self, point, normal):
        self.point = np.asarray(point, dtype=float)
        self.normal = check_unit(normal)
        self.dim = self.point.shape[0]

    def _h(self, x):
        return (np.asarray(x, dtype=float) - self.point) @ self.normal

    def contains(self, x):
        return self._h(x) > 0.0

    def delta(self, x):
        return np.maximum(self._h(x), 0.0)

    def nearest_boundary(self, x):
        x = np.asarray(x, dtype=float)
        h = self._h(x)
        if np.any(h <= 0.0):
            raise ValueError("nearest_boundary expects strictly interior points")
        z = x - (h[..., None] * self.normal if x.ndim > 1 else h * self.normal)
        n = np.broadcast_to(self.normal, x.shape).copy()
        return z, n

    def boundary_gap(self, z):
        return float(np.abs(self._h(z)))

    def boundary_normal(self, z):
        return self.normal

    def to_dict(self):
        return {"kind": self.kind, "point": self.point.tolist(),
                "normal": self.normal.tolist()}


class Ball(DomainGeometry):
    kind = "ball"

    def __init__(self, center, radius):
        if radius <= 0:
            raise ValueError("ball radius must be > 0")
        self.center = np.asarray(center, dtype=float)
        self.radius = float(radius)
        self.dim = self.center.shape[0]
        self.interior_ball_r = self.radius
        # the complement of a ball admits tangent balls of any radius
        self.exterior_ball_r = np.inf

    @property
    def collar_width(self):
        return 0.99 * self.radius

    def _r(self, x):
        return np.linalg.norm(np.asarray(x, dtype=float) - self.center, axis=-1)

    def contains(self, x):
        return self._r(x) < self.radius

    def delta(self, x):
        return np.maximum(self.radius - self._r(x), 0.0)

    def nearest_boundary(self, x):
        x = np.asarray(x, dtype=float)
        r = self._r(x)
        d = self.radius - r
        self._check_collar(x, d)
        out = (x - self.center) / r[..., None] if x.ndim > 1 else (x - self.center) / r
        z = self.center + self.radius * out
        return z, -out

    def boundary_gap(self, z):
        return float(np.abs(self._r(z) - self.radius))

    def boundary_normal(self, z):
        v = self.center - np.asarray(z, dtype=float)
        return v / np.linalg.norm(v)

    def to_dict(self):
        return {"kind": self.kind, "center": self.center.tolist(),
                "radius": self.radius}


class Ellipsoid(DomainGeometry):
    """Axis-aligned ellipsoid {sum((x_i - c_i)^2 / a_i^2) < 1}."""

    kind = "ellipsoid"

    def __init__(self, center, semi_axes):
        self.center = np.asarray(center, dtype=float)
        self.semi = np.asarray(semi_axes, dtype=float)
        if np.any(self.semi <= 0):
            raise ValueError("semi-axes must be > 0")
        if self.center.shape != self.semi.shape:
            raise ValueError("center/semi-axes dimension mismatch")
        self.dim = self.center.shape[0]
        a_min, a_max = float(self.semi.min()), float(self.semi.max())
        # interior balls are limited by the smallest curvature radius
        self.interior_ball_r = a_min**2 / a_max
        self.exterior_ball_r = np.inf      # convex body

    def contains(self, x):
        y = (np.asarray(x, dtype=float) - self.center) / self.semi
        return np.einsum("...i,...i->...", y, y) < 1.0

    def _project(self, x):
        """Nearest boundary points via a bracketed Newton iteration on the
        Lagrange multiplier; quadratically convergent off the medial set."""
        x = np.atleast_2d(np.asarray(x, dtype=float)) - self.center
        a2 = self.semi**2
        lam = np.zeros(x.shape[0])
        lo = np.full(x.shape[0], -a2.min() * (1.0 - 1e-12))
        converged = np.zeros(x.shape[0], dtype=bool)
        for _ in range(NEWTON_MAX_ITER):
            denom = a2[None, :] + lam[:, None]
            t = self.semi[None, :] * x / denom
            F = np.einsum("ij,ij->i", t, t) - 1.0
            converged = np.abs(F) <= NEWTON_RESIDUAL
            if np.all(converged):
                break
            dF = -2.0 * np.einsum("ij,ij->i", t * t, 1.0 / denom)
            step = np.where(np.abs(dF) > 0, F / np.where(dF == 0, 1.0, dF), 0.0)
            lam_new = lam - step
            # keep the iterate inside the admissible half-line
            lam = np.where(lam_new <= lo, 0.5 * (lam + lo), lam_new)
        if not np.all(converged):
            raise NumericFailure("ellipsoid projection Newton did not converge",
                                 value=lam, err_estimate=float(np.abs(F).max()))
        y = a2[None, :] * x / (a2[None, :] + lam[:, None])
        return y + self.center

    def delta(self, x):
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        pts = np.atleast_2d(x)
        inside = self.contains(pts)
        d = np.zeros(pts.shape[0])
        if np.any(inside):
            y = self._project(pts[inside])
            d[inside] = np.linalg.norm(pts[inside] - y, axis=1)
        return d[0] if single else d.reshape(x.shape[:-1])

    def nearest_boundary(self, x):
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        pts = np.atleast_2d(x)
        z = self._project(pts)
        diff = pts - z
        d = np.linalg.norm(diff, axis=1)
        inside = self.contains(pts)
        if not np.all(inside):
            raise ValueError("nearest_boundary expects strictly interior points")
        self._check_collar(pts, d)
        n = diff / d[:, None]
        if single:
            return z[0], n[0]
        return z, n

    def boundary_gap(self, z):
        z = np.asarray(z, dtype=float)
        y = self._project(z[None, :])
        return float(np.linalg.norm(z - y[0]))

    def boundary_normal(self, z):
        g = (np.asarray(z, dtype=float) - self.center) / self.semi**2
        return -g / np.linalg.norm(g)

    def to_dict(self):
        return {"kind": self.kind, "center": self.center.tolist(),
                "semi_axes": self.semi.tolist()}


class PerturbedBall(DomainGeometry):
    """d=2 star-shaped domain with polar boundary R(t) = R0 (1 + a cos k t).

    Admissibility requires |a| k^2 <= 0.1 so the curvature stays within a
    factor ~2 of the round ball's and the certified ball radii are simple.
    """

    kind = "perturbed-ball"
    dim = 2

    def __init__(self, radius, amplitude, wavenumber):
        if radius <= 0:
            raise ValueError("radius must be > 0")
        if abs(amplitude) * wavenumber**2 > 0.1:
            raise ValueError("inadmissible perturbation: require |a| k^2 <= 0.1")
        self.radius = float(radius)
        self.amplitude = float(amplitude)
        self.wavenumber = int(wavenumber)
        # certified radii from the extremal curvature on a dense grid
        t = np.linspace(0.0, 2.0 * np.pi, 4096, endpoint=False)
        r, r1, r2 = self._rth(t)
        kappa = (r**2 + 2 * r1**2 - r * r2) / (r**2 + r1**2) ** 1.5
        rho_min = float(1.0 / np.abs(kappa).max())
        self.interior_ball_r = min(rho_min, 0.9 * float(r.min()))
        self.exterior_ball_r = rho_min

    def _rth(self, t):
        k = self.wavenumber
        r = self.radius * (1.0 + self.amplitude * np.cos(k * t))
        r1 = -self.radius * self.amplitude * k * np.sin(k * t)
        r2 = -self.radius * self.amplitude * k**2 * np.cos(k * t)
        return r, r1, r2

    def _point(self, t):
        r = self.radius * (1.0 + self.amplitude * np.cos(self.wavenumber * t))
        return np.stack([r * np.cos(t), r * np.sin(t)], axis=-1)

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        t = np.arctan2(x[..., 1], x[..., 0])
        r_b = self.radius * (1.0 + self.amplitude * np.cos(self.wavenumber * t))
        return np.linalg.norm(x, axis=-1) < r_b

    def _nearest_t(self, x):
        """Newton on the stationarity condition <x - p(t), p'(t)> = 0,
        seeded from the radial angle."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        t = np.arctan2(x[:, 1], x[:, 0])
        scale = max(self.radius, 1.0)
        for _ in range(NEWTON_MAX_ITER):
            r, r1, r2 = self._rth(t)
            ct, st = np.cos(t), np.sin(t)
            p = np.stack([r * ct, r * st], axis=-1)
            p1 = np.stack([r1 * ct - r * st, r1 * st + r * ct], axis=-1)
            p2 = np.stack([r2 * ct - 2 * r1 * st - r * ct,
                           r2 * st + 2 * r1 * ct - r * st], axis=-1)
            diff = x - p
            g = np.einsum("ij,ij->i", diff, p1)
            if np.all(np.abs(g) <= NEWTON_RESIDUAL * scale**2):
                break
            h = -np.einsum("ij,ij->i", p1, p1) + np.einsum("ij,ij->i", diff, p2)
            t = t - g / np.where(np.abs(h) < 1e-30, -1.0, h)
        else:
            raise NumericFailure("perturbed-ball projection Newton did not converge",
                                 value=t, err_estimate=float(np.abs(g).max()))
        return t, p

    def delta(self, x):
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        pts = np.atleast_2d(x)
        inside = self.contains(pts)
        d = np.zeros(pts.shape[0])
        if np.any(inside):
            _, p = self._nearest_t(pts[inside])
            d[inside] = np.linalg.norm(pts[inside] - p, axis=1)
        return d[0] if single else d.reshape(x.shape[:-1])

    def nearest_boundary(self, x):
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        pts = np.atleast_2d(x)
        if not np.all(self.contains(pts)):
            raise ValueError("nearest_boundary expects strictly interior points")
        _, p = self._nearest_t(pts)
        diff = pts - p
        d = np.linalg.norm(diff, axis=1)
        self._check_collar(pts, d)
        n = diff / d[:, None]
        if single:
            return p[0], n[0]
        return p, n

    def boundary_gap(self, z):
        z = np.asarray(z, dtype=float)
        _, p = self._nearest_t(z[None, :])
        return float(np.linalg.norm(z - p[0]))

    def boundary_normal(self, z):
        t, _ = self._nearest_t(np.asarray(z, dtype=float)[None, :])
        r, r1, _ = self._rth(t[0])
        ct, st = np.cos(t[0]), np.sin(t[0])
        p1 = np.array([r1 * ct - r * st, r1 * st + r * ct])
        nu_out = np.array([p1[1], -p1[0]])
        return -nu_out / np.linalg.norm(nu_out)

    def to_dict(self):
        return {"kind": self.kind, "radius": self.radius,
                "amplitude": self.amplitude, "wavenumber": self.wavenumber}


class TransformedDomain(DomainGeometry):
    """Image of a base domain under y = scale * Q (x - shift)."""

    kind = "transformed"

    def __init__(self, base: DomainGeometry, rotation, shift, scale: float):
        self.base = base
        self.rotation = np.asarray(rotation, dtype=float)
        self.shift = np.asarray(shift, dtype=float)
        self.scale = float(scale)
        self.dim = base.dim
        self.interior_ball_r = base.interior_ball_r * self.scale
        self.exterior_ball_r = base.exterior_ball_r * self.scale

    def pull_back(self, y):
        y = np.asarray(y, dtype=float)
        return (y / self.scale) @ self.rotation + self.shift

    def push_forward(self, x):
        x = np.asarray(x, dtype=float)
        return self.scale * ((x - self.shift) @ self.rotation.T)

    def contains(self, y):
        return self.base.contains(self.pull_back(y))

    def delta(self, y):
        return self.scale * self.base.delta(self.pull_back(y))

    def nearest_boundary(self, y):
        z, n = self.base.nearest_boundary(self.pull_back(y))
        return self.push_forward(z), n @ self.rotation.T

    def boundary_gap(self, y):
        return self.scale * self.base.boundary_gap(self.pull_back(y))

    def boundary_normal(self, y):
        return self.rotation @ self.base.boundary_normal(self.pull_back(y))

    def to_dict(self):
        return {"kind": self.kind, "base": self.base.to_dict(),
                "rotation": self.rotation.tolist(),
                "shift": self.shift.tolist(), "scale": self.scale}


class BallIntersection(DomainGeometry):
    """D intersected with an open ball (the capped domain of the harmonic
    estimator).  Distance to the complement is the min of the two parts."""

    kind = "ball-intersection"

    def __init__(self, base: DomainGeometry, center, radius):
        self.base = base
        self.cap = Ball(center, radius)
        self.dim = base.dim

    def contains(self, x):
        return np.logical_and(self.base.contains(x), self.cap.contains(x))

    def delta(self, x):
        return np.minimum(self.base.delta(x), self.cap.delta(x))

    def to_dict(self):
        return {"kind": self.kind, "base": self.base.to_dict(),
                "center": self.cap.center.tolist(), "radius": self.cap.radius}


@dataclass(frozen=True)
class BoundaryFrame:
    """Isometry + dilation normalizing (domain, boundary point).

    Maps z to the origin and the inward normal to e_d; the dilation makes
    the certified ball radii at least 2, so the normalized collar has
    width >= 1 and the quadratic boundary-trap inequality applies on
    B(0, 1).
    """

    z: np.ndarray
    n: np.ndarray
    rotation: np.ndarray
    scale: float

    def apply_points(self, x):
        x = np.asarray(x, dtype=float)
        return self.scale * ((x - self.z) @ self.rotation.T)

    def invert_points(self, y):
        y = np.asarray(y, dtype=float)
        return (y / self.scale) @ self.rotation + self.z

    def apply_direction(self, u):
        return self.rotation @ np.asarray(u, dtype=float)

    def transform_domain(self, dom: DomainGeometry) -> TransformedDomain:
        return TransformedDomain(dom, rotation=self.rotation, shift=self.z,
                                 scale=self.scale)

    def transform_spec(self, spec):
        """Spec of the pushed-forward process s Q X; the spherical density
        picks up the factor s^alpha (a time change) and the drift scales."""
        out = spec.rotate(self.rotation)
        if self.scale != 1.0:
            theta = out.theta.scaled(self.scale**spec.alpha)
            gamma = None if out.gamma is None else self.scale * out.gamma
            out = type(spec)(alpha=spec.alpha, theta=theta, gamma=gamma)
        return out


def boundary_frame(dom: DomainGeometry, z, tol: float = 1e-10) -> BoundaryFrame:
    """Normalized coordinate frame of the domain at boundary point z."""
    return dom.boundary_frame(z, tol=tol)


def check_odl2(dom: DomainGeometry, z, grid) -> float:
    """Max over the grid of |delta(x) - x_d| - |x~|^2 / 2 in the normalized
    frame at z; a nonpositive value certifies the inequality on the grid.

    The grid is given in normalized coordinates and must lie in the closed
    normalized domain intersected with B(0, 1).
    """
    frame = boundary_frame(dom, z)
    dom_n = frame.transform_domain(dom)
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    if np.any(np.linalg.norm(grid, axis=1) > 1.0 + 1e-9):
        raise ValueError("grid points must lie in the normalized unit ball")
    d = dom_n.delta(grid)
    x_d = grid[:, -1]
    tilde = np.linalg.norm(grid[:, :-1], axis=1)
    return float(np.max(np.abs(d - x_d) - 0.5 * tilde**2))


def certify_ball_conditions(dom: DomainGeometry, n_boundary: int = 256,
                            n_probe: int = 512, slack: float = 1e-9) -> bool:
    """Sample boundary points and verify the stored interior/exterior ball
    radii: the tangent balls must not cross the boundary."""
    if dom.dim != 2:
        raise NotImplementedError("sampling certificate implemented for d = 2")
    t = np.linspace(0.0, 2.0 * np.pi, n_boundary, endpoint=False)
    if isinstance(dom, Ball):
        bd = dom.center + dom.radius * np.column_stack([np.cos(t), np.sin(t)])
    elif isinstance(dom, Ellipsoid):
        bd = dom.center + np.column_stack([dom.semi[0] * np.cos(t),
                                           dom.semi[1] * np.sin(t)])
    elif isinstance(dom, PerturbedBall):
        bd = dom._point(t)
    else:
        raise NotImplementedError(f"no boundary sampler for kind {dom.kind!r}")
    probes = np.linspace(0.0, 2.0 * np.pi, n_probe, endpoint=False)
    circle = np.column_stack([np.cos(probes), np.sin(probes)])
    r_int = dom.interior_ball_r
    r_ext = min(dom.exterior_ball_r, 1e3 * r_int)
    for z in bd:
        n = dom.boundary_normal(z)
        ci = z + r_int * n
        ce = z - r_ext * n
        if not np.all(dom.contains(ci + (1.0 - slack) * r_int * 0.999 * circle)):
            return False
        if np.any(dom.contains(ce + (1.0 - slack) * r_ext * 0.999 * circle)):
            return False
    return True
