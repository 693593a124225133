"""Pointwise nonlocal generator of the stable process, by singular
adaptive quadrature in polar coordinates.

The operator acts on a function f at a point x as

    A f(x) = integral of (f(y) - f(x) - compensation) nu(y - x) dy

with no compensation for alpha < 1, gradient compensation inside
B(x, trunc_radius) plus the drift term <gamma, grad f(x)> for alpha = 1,
and full gradient compensation for alpha > 1.  In polar coordinates
around x the kernel factorizes into the angular weight theta(w) and the
radial weight r^(-1-alpha); the radial integral is evaluated per ray with

  * a Gauss-Jacobi rule with weight r^(1-alpha) on [0, r_split] applied
    to the Taylor-compensated integrand (this tames the cancellation for
    every regime; for alpha < 1 and on [r_split, trunc] for alpha = 1 the
    gradient term is added back in closed form),
  * geometric Gauss-Legendre panels up to the outer cutoff, split and
    graded into every radius where f is not smooth along the ray
    (boundary crossings, collar cuts, half-space kinks),
  * exact or bounded tails beyond the cutoff supplied by the function
    kind (hypergeometric closed form for half-space powers, zero beyond
    the support for collar powers, sup-bounds otherwise).
"""

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from scipy.special import hyp2f1, roots_legendre

from ._sphere import check_unit, rotation_to_axis
from .errors import NumericFailure
from .geometry import Ball, DomainGeometry, TransformedDomain, boundary_frame
from .projection import BetaField, QuadConfig, decay_exponent
from .spectral import StableSpec


@dataclass(frozen=True)
class GeneratorQuad:
    """Discretization of the generator integral."""

    tol: float = 1e-7                 # requested absolute error
    r_split: Optional[float] = None   # None: min(smoothness radius, 1)/2
    outer_cutoff: float = 1e3
    trunc_radius: float = 1.0         # compensation ball radius, alpha = 1 only
    angular_panels: int = 32
    angular_nodes: int = 12
    radial_nodes: int = 384           # per-ray node budget at the base level
    inner_nodes: int = 48
    grading_depth: int = 24           # radial grading into breakpoints
    angular_grading: int = 20         # angular grading into tangency angles
    azimuth_nodes: int = 32           # d = 3 only
    max_refine: int = 2

    def __post_init__(self):
        if self.r_split is not None and self.outer_cutoff <= self.r_split:
            raise ValueError("outer_cutoff must exceed r_split")


DEFAULT_GENQUAD = GeneratorQuad()


@lru_cache(maxsize=64)
def _gl_rule(n: int):
    return roots_legendre(n)


# ---------------------------------------------------------------------------
# test-function kinds


class TestFunction:
    """Interface the generator quadrature needs from a function."""

    def __call__(self, y):
        raise NotImplementedError

    def gradient(self, x) -> Optional[np.ndarray]:
        """Gradient at the evaluation point, or None if unavailable."""
        return None

    def smoothness_radius(self, x) -> float:
        """Distance from x to the nearest set where f is not smooth."""
        return np.inf

    def ray_breakpoints(self, x, W) -> list:
        """Per ray: sorted radii r > 0 where f(x + r w) is not smooth."""
        return [() for _ in range(len(W))]

    def support_radius(self, x, W) -> np.ndarray:
        """Per ray: radius beyond which f vanishes identically (inf if never)."""
        return np.full(len(W), np.inf)

    def tail_integral(self, x, W, R, alpha):
        """Per ray: (value, err) of int_R^inf f(x + r w) r^(-1-alpha) dr."""
        raise NotImplementedError

    def bound(self) -> Optional[float]:
        return None

    def angular_breakpoints(self, x) -> np.ndarray:
        """d=2: angles where the ray integral loses smoothness."""
        return np.empty(0)

    def polar_axis(self, x) -> Optional[np.ndarray]:
        """d=3: symmetry axis for the polar rule, if any."""
        return None

    def polar_breakpoints(self, x) -> np.ndarray:
        return np.empty(0)


class HalfspacePower(TestFunction):
    """f(y) = <y - z, u>_+ ^ e on the half-space with inward normal u.

    With e = decay_exponent(spec, u) this is the harmonic profile whose
    generator vanishes on the half-space.
    """

    def __init__(self, z, u, exponent: float):
        self.z = np.asarray(z, dtype=float)
        self.u = check_unit(u)
        self.e = float(exponent)
        if not (0.0 < self.e < 1.0):
            raise ValueError("half-space exponent must lie in (0, 1)")

    def __call__(self, y):
        h = (np.asarray(y, dtype=float) - self.z) @ self.u
        return np.where(h > 0.0, np.maximum(h, 0.0) ** self.e, 0.0)

    def gradient(self, x):
        h = (np.asarray(x, dtype=float) - self.z) @ self.u
        if h <= 0:
            raise ValueError("gradient undefined outside the open half-space")
        return self.e * h ** (self.e - 1.0) * self.u

    def smoothness_radius(self, x):
        return float((np.asarray(x, dtype=float) - self.z) @ self.u)

    def ray_breakpoints(self, x, W):
        a = float((np.asarray(x, dtype=float) - self.z) @ self.u)
        b = W @ self.u
        out = []
        for bi in b:
            out.append((a / -bi,) if bi < 0 else ())
        return out

    def support_radius(self, x, W):
        a = float((np.asarray(x, dtype=float) - self.z) @ self.u)
        b = W @ self.u
        with np.errstate(divide="ignore"):
            return np.where(b < 0, a / np.where(b < 0, -b, 1.0), np.inf)

    def tail_integral(self, x, W, R, alpha):
        a = float((np.asarray(x, dtype=float) - self.z) @ self.u)
        b = np.asarray(W @ self.u)
        R = np.asarray(R, dtype=float)
        e = self.e
        val = np.zeros(len(W))
        pos = b > 0
        if np.any(pos):
            # int_R^inf (a + b r)^e r^(-1-alpha) dr, Euler-transformed 2F1
            c = alpha - e
            X = 1.0 / R[pos]
            val[pos] = (b[pos] ** e * X**c / c
                        * hyp2f1(-e, c, c + 1.0, -(a / b[pos]) * X))
        neg = b < 0
        if np.any(neg):
            rstar = a / -b[neg]
            s = np.minimum(R[neg] / rstar, 1.0)
            # int_R^rstar |b|^e (rstar - r)^e r^(-1-alpha) dr; zero once
            # R >= rstar.  Euler-transformed so the series converges at the
            # near-tangent limit s -> 0 (argument -> 1).
            tmp = ((-b[neg]) ** e * rstar ** (e - alpha)
                   * (1.0 - s) ** (e + 1.0) / (e + 1.0)
                   * np.where(s > 0, s, 1.0) ** (-alpha)
                   * hyp2f1(e + 1.0 - alpha, 1.0, e + 2.0, 1.0 - s))
            val[neg] = np.where(s < 1.0, tmp, 0.0)
        zer = b == 0
        if np.any(zer):
            val[zer] = a**e * R[zer] ** (-alpha) / alpha
        return val, np.zeros(len(W))

    def angular_breakpoints(self, x):
        phi_u = np.arctan2(self.u[1], self.u[0])
        return np.mod(np.array([phi_u + np.pi / 2, phi_u - np.pi / 2]), 2 * np.pi)

    def polar_axis(self, x):
        return self.u

    def polar_breakpoints(self, x):
        return np.array([np.pi / 2])


class ConstantField:
    """Exponent field with a fixed value (negative-control scans)."""

    def __init__(self, value: float):
        self._v = float(value)

    def value(self, u):
        u = np.asarray(u, dtype=float)
        return np.broadcast_to(np.float64(self._v), u.shape[:-1]).copy() \
            if u.ndim > 1 else np.float64(self._v)

    def gradient(self, u):
        return np.zeros_like(np.asarray(u, dtype=float))


class BoundaryPower(TestFunction):
    """g(y) = delta(y)^(field(n(y))) on the collar {0 < delta <= cut}.

    ``field`` maps inward normals to exponents; the decay-oriented
    BetaField makes g the candidate boundary profile of harmonic
    functions.  g jumps to 0 across the inner cut {delta = cut}.
    """

    def __init__(self, dom: DomainGeometry, field, cut: float = 1.0):
        self.dom = dom
        self.field = field
        self.cut = float(cut)
        ball = _as_ball(dom)
        self._ball = ball          # closed-form crossings when available

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        single = y.ndim == 1
        pts = np.atleast_2d(y)
        d = np.asarray(self.dom.delta(pts), dtype=float)
        out = np.zeros(pts.shape[0])
        mask = (d > 0.0) & (d <= self.cut)
        if np.any(mask):
            _, n = self.dom.nearest_boundary(pts[mask])
            expo = np.asarray(self.field.value(n), dtype=float)
            out[mask] = d[mask] ** expo
        return out[0] if single else out.reshape(y.shape[:-1])

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        d = float(self.dom.delta(x))
        if not (0.0 < d < self.cut):
            raise ValueError("gradient defined only inside the open collar")
        _, n = self.dom.nearest_boundary(x)
        e = float(self.field.value(n))
        dfield = np.asarray(self.field.gradient(n), dtype=float)
        grad_expo = _normal_jacobian(self.dom, x, n).T @ dfield
        return e * d ** (e - 1.0) * n + d**e * np.log(d) * grad_expo

    def smoothness_radius(self, x):
        d = float(self.dom.delta(x))
        if d <= 0 or d >= self.cut:
            return max(d - self.cut, 1e-12) if d > self.cut else 1e-12
        return 0.95 * min(d, self.cut - d)

    def _sphere_crossings(self, x, W, rho):
        """Ray-circle |x + r w - c| = rho crossing radii, NaN where absent."""
        c, _ = self._ball
        v = np.asarray(x, dtype=float) - c
        b = W @ v
        cc = v @ v - rho * rho
        disc = b * b - cc
        sq = np.sqrt(np.maximum(disc, 0.0))
        r1 = np.where(disc > 0, -b - sq, np.nan)
        r2 = np.where(disc > 0, -b + sq, np.nan)
        return r1, r2

    def _crossings(self, x, W):
        if self._ball is not None:
            c, R = self._ball
            radii = [R, R - self.cut] if R - self.cut > 0 else [R]
            per_ray = [[] for _ in range(len(W))]
            for rho in radii:
                r1, r2 = self._sphere_crossings(x, W, rho)
                for j in range(len(W)):
                    for r in (r1[j], r2[j]):
                        if np.isfinite(r) and r > 0:
                            per_ray[j].append(float(r))
            return [tuple(sorted(lst)) for lst in per_ray]
        return [_bisect_breakpoints(self.dom, self.cut, x, w) for w in W]

    def ray_breakpoints(self, x, W):
        return self._crossings(x, W)

    def support_radius(self, x, W):
        if self._ball is not None:
            _, r2 = self._sphere_crossings(x, W, self._ball[1])
            return np.where(np.isfinite(r2), r2, 0.0)
        out = np.empty(len(W))
        for j, bps in enumerate(self._crossings(x, W)):
            out[j] = bps[-1] if bps else 0.0
        return out

    def tail_integral(self, x, W, R, alpha):
        # g vanishes beyond the support radius, which callers use as cutoff
        return np.zeros(len(W)), np.zeros(len(W))

    def bound(self):
        return max(self.cut, 1.0)

    def angular_breakpoints(self, x):
        if self._ball is None or self.dom.dim != 2:
            return np.empty(0)
        return _tangency_angles_2d(x, self._ball, self.cut)

    def polar_axis(self, x):
        if self._ball is None:
            return None
        c, _ = self._ball
        v = c - np.asarray(x, dtype=float)
        return v / np.linalg.norm(v)

    def polar_breakpoints(self, x):
        if self._ball is None:
            return np.empty(0)
        c, R = self._ball
        rho_x = np.linalg.norm(c - np.asarray(x, dtype=float))
        out = []
        for rho in (R, R - self.cut):
            if 0 < rho < rho_x:
                out.append(np.arcsin(rho / rho_x))
        return np.asarray(out)


class GaussianBump(TestFunction):
    """f(y) = amp * exp(-|y - center|^2 / width^2); smooth everywhere."""

    def __init__(self, center, width: float = 1.0, amp: float = 1.0):
        self.center = np.asarray(center, dtype=float)
        self.width = float(width)
        self.amp = float(amp)

    def __call__(self, y):
        d2 = np.sum((np.asarray(y, dtype=float) - self.center) ** 2, axis=-1)
        return self.amp * np.exp(-d2 / self.width**2)

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        return self(x) * (-2.0 / self.width**2) * (x - self.center)

    def tail_integral(self, x, W, R, alpha):
        gap = np.maximum(R - np.linalg.norm(np.asarray(x) - self.center), 0.0)
        err = self.amp * np.exp(-((gap / self.width) ** 2)) * R ** (-alpha) / alpha
        return np.zeros(len(W)), err

    def bound(self):
        return self.amp


class GaussianMix(TestFunction):
    """Finite sum of Gaussian bumps; smooth with superexponential tails."""

    def __init__(self, bumps):
        self.bumps = list(bumps)

    def __call__(self, y):
        return sum(b(y) for b in self.bumps)

    def gradient(self, x):
        return sum(b.gradient(x) for b in self.bumps)

    def tail_integral(self, x, W, R, alpha):
        val = np.zeros(len(W))
        err = 0.0
        for b in self.bumps:
            _, e = b.tail_integral(x, W, R, alpha)
            err = err + np.max(np.asarray(e))
        return val, np.full(len(W), float(err))

    def bound(self):
        return sum(abs(b.amp) for b in self.bumps)


class CustomFunction(TestFunction):
    """User-supplied callable with optional gradient and global bound."""

    def __init__(self, fn: Callable, grad: Optional[Callable] = None,
                 bound: Optional[float] = None, smooth_radius: float = np.inf):
        self.fn = fn
        self.grad = grad
        self._bound = bound
        self._smooth = float(smooth_radius)

    def __call__(self, y):
        return self.fn(np.asarray(y, dtype=float))

    def gradient(self, x):
        return None if self.grad is None else np.asarray(self.grad(np.asarray(x)))

    def smoothness_radius(self, x):
        return self._smooth

    def tail_integral(self, x, W, R, alpha):
        if self._bound is None:
            raise ValueError("custom functions need a global bound for the tail")
        err = self._bound * R ** (-alpha) / alpha
        return np.zeros(len(W)), np.full(len(W), float(np.max(err)))

    def bound(self):
        return self._bound


def _as_ball(dom):
    """(center, radius) if the domain is a ball up to a rigid frame."""
    if isinstance(dom, Ball):
        return dom.center, dom.radius
    if isinstance(dom, TransformedDomain) and isinstance(dom.base, Ball):
        c = dom.push_forward(dom.base.center)
        return c, dom.base.radius * dom.scale
    return None


def _tangency_angles_2d(x, ball, cut):
    c, R = ball
    v = c - np.asarray(x, dtype=float)
    rho_x = np.linalg.norm(v)
    phi_c = np.arctan2(v[1], v[0])
    out = []
    for rho in (R, R - cut):
        if 0 < rho < rho_x:
            a = np.arcsin(rho / rho_x)
            out.extend([phi_c + a, phi_c - a, phi_c + np.pi - a, phi_c - np.pi + a])
    return np.mod(np.asarray(out), 2 * np.pi)


def _bisect_breakpoints(dom, cut, x, w, r_max=None, n_scan=256):
    """Scan the ray for sign changes of membership and of (delta - cut),
    then bisect each bracket to 1e-12."""
    x = np.asarray(x, dtype=float)
    if r_max is None:
        r_max = 16.0 * max(1.0, np.linalg.norm(x))
    rs = np.concatenate([[1e-9], np.geomspace(1e-6, r_max, n_scan)])
    pts = x[None, :] + rs[:, None] * w[None, :]
    d = np.asarray(dom.delta(pts), dtype=float)
    inside = np.asarray(dom.contains(pts))
    sign_a = inside.astype(int)
    sign_b = (d > cut).astype(int)
    out = []
    for sig in (sign_a, sign_b):
        idx = np.nonzero(np.diff(sig) != 0)[0]
        for i in idx:
            lo, hi = rs[i], rs[i + 1]
            flo = sig[i]
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                p = x + mid * w
                s = int(dom.contains(p)) if sig is sign_a else int(dom.delta(p) > cut)
                if s == flo:
                    lo = mid
                else:
                    hi = mid
                if hi - lo < 1e-12 * max(1.0, hi):
                    break
            out.append(0.5 * (lo + hi))
    return tuple(sorted(out))


def _normal_jacobian(dom, x, n):
    """Jacobian of the inward-normal map at a collar point (d x d)."""
    if isinstance(dom, Ball):
        rho = np.linalg.norm(dom.center - x)
        return (np.outer(n, n) - np.eye(dom.dim)) / rho
    if isinstance(dom, TransformedDomain):
        xb = dom.pull_back(x)
        nb = dom.rotation.T @ n
        Jb = _normal_jacobian(dom.base, xb, nb)
        return dom.rotation @ Jb @ dom.rotation.T / dom.scale
    # central differences; geometry kinds are exact to the Newton residual
    h = 1e-6
    J = np.empty((dom.dim, dom.dim))
    for i in range(dom.dim):
        dx = np.zeros(dom.dim)
        dx[i] = h
        _, np_ = dom.nearest_boundary(x + dx)
        _, nm_ = dom.nearest_boundary(x - dx)
        J[:, i] = (np_ - nm_) / (2 * h)
    return J


# ---------------------------------------------------------------------------
# quadrature assembly


def _graded_edges(lo, hi, toward_lo, toward_hi, depth):
    """Edges of [lo, hi] graded geometrically into the flagged endpoints."""
    if hi <= lo:
        return np.array([lo, hi])
    edges = [lo, hi]
    span = hi - lo
    if toward_lo:
        edges.extend(lo + span * 2.0 ** (-np.arange(1, depth + 1, dtype=float)))
    if toward_hi:
        edges.extend(hi - span * 2.0 ** (-np.arange(1, depth + 1, dtype=float)))
    e = np.unique(np.asarray(edges))
    return e[(e >= lo) & (e <= hi)]


def _radial_segments(r_split, r_out, breakpoints, depth):
    """Panel edges on [r_split, r_out]: geometric base spacing, graded into
    every breakpoint from both sides (including one sitting at r_out)."""
    eps = 1.0 - 1e-12
    bps = sorted({float(b) for b in breakpoints if r_split < b < r_out * eps})
    grade_end = any(b >= r_out * eps for b in breakpoints)
    anchors = [r_split] + bps + [r_out]
    edges = set()
    for a, b in zip(anchors[:-1], anchors[1:]):
        base = [a]
        step = max(a, 1e-300)
        while base[-1] + step < b:
            base.append(base[-1] + step)
            step *= 2.0
        base.append(b)
        edges.update(base)
        # grade over the whole block so no panel ends next to a kink
        lo_kink = a in bps
        hi_kink = b in bps or (b == r_out and grade_end)
        if lo_kink or hi_kink:
            edges.update(_graded_edges(a, b, lo_kink, hi_kink, depth).tolist())
    return np.unique(np.asarray(sorted(edges)))


def _angular_rule_2d(x, f, panels, nodes, breakpoints, grading):
    """(directions W, weights) for the circle integral with graded panels."""
    bps = np.sort(np.mod(breakpoints, 2 * np.pi))
    if bps.size == 0:
        edges = np.linspace(0.0, 2 * np.pi, panels + 1)
    else:
        # anchor panels at the breakpoints, fill uniformly, grade into them
        anchors = np.concatenate([bps, [bps[0] + 2 * np.pi]])
        edges = set()
        for a, b in zip(anchors[:-1], anchors[1:]):
            span = b - a
            k = max(1, int(np.ceil(span / (2 * np.pi / panels))))
            block = np.linspace(a, b, k + 1)
            edges.update(block.tolist())
            edges.update(_graded_edges(block[0], block[1], True, False, grading).tolist())
            edges.update(_graded_edges(block[-2], block[-1], False, True, grading).tolist())
        edges = np.unique(np.asarray(sorted(edges)))
    xg, wg = _gl_rule(nodes)
    mid = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * np.diff(edges)
    phi = (mid[:, None] + half[:, None] * xg[None, :]).ravel()
    wts = (half[:, None] * wg[None, :]).ravel()
    W = np.column_stack([np.cos(phi), np.sin(phi)])
    return W, wts


def _angular_rule_3d(x, f, panels, nodes, azimuth, grading):
    """Product rule on S^2 in the frame of the function's symmetry axis."""
    axis = f.polar_axis(x)
    if axis is None:
        axis = np.array([0.0, 0.0, 1.0])
    Q = rotation_to_axis(axis)          # Q @ axis = e_z
    bps = np.sort(f.polar_breakpoints(x))
    edges = set(np.linspace(0.0, np.pi, panels + 1).tolist())
    for b in bps:
        if 0 < b < np.pi:
            edges.add(float(b))
            edges.update(_graded_edges(max(b - 0.3, 0.0), b, False, True, grading).tolist())
            edges.update(_graded_edges(b, min(b + 0.3, np.pi), True, False, grading).tolist())
    edges = np.unique(np.asarray(sorted(edges)))
    xg, wg = _gl_rule(nodes)
    mid = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * np.diff(edges)
    theta = (mid[:, None] + half[:, None] * xg[None, :]).ravel()
    wth = ((half[:, None] * wg[None, :]).ravel()) * np.sin(theta)
    phi = 2.0 * np.pi * np.arange(azimuth) / azimuth
    wphi = 2.0 * np.pi / azimuth
    ct, st = np.cos(theta), np.sin(theta)
    cp, sp = np.cos(phi), np.sin(phi)
    local = np.stack([
        np.repeat(st, azimuth) * np.tile(cp, theta.size),
        np.repeat(st, azimuth) * np.tile(sp, theta.size),
        np.repeat(ct, azimuth),
    ], axis=-1)
    W = local @ Q                        # rows: Q.T @ local
    wts = np.repeat(wth, azimuth) * wphi
    return W, wts


@lru_cache(maxsize=64)
def _jacobi_inner(n, alpha):
    from scipy.special import roots_jacobi

    x, w = roots_jacobi(n, 0.0, 1.0 - alpha)   # weight (1+x)^(1-alpha)
    return x, w


def _inner_rule(n, alpha, r_split):
    x, w = _jacobi_inner(n, alpha)
    s = (x + 1.0) * (r_split / 2.0)
    wts = w * (r_split / 2.0) ** (2.0 - alpha)
    return s, wts


def _eval_once(spec, f, x, quad, level):
    alpha = spec.alpha
    d = spec.dim
    fx = float(f(x))
    grad = f.gradient(x)
    if grad is None and alpha >= 1.0:
        raise ValueError("gradient unavailable at x but required for alpha >= 1")

    smooth = f.smoothness_radius(x)
    r_split = quad.r_split if quad.r_split is not None else min(smooth, 1.0) / 2.0
    r_split = max(min(r_split, smooth), 1e-12)
    if alpha == 1.0:
        r_split = min(r_split, quad.trunc_radius)

    panels = quad.angular_panels << level
    gl_nodes = max(8, (quad.radial_nodes >> 4)) + 8 * level
    inner_nodes = quad.inner_nodes + 16 * level

    if d == 2:
        W, ang_w = _angular_rule_2d(x, f, panels, quad.angular_nodes,
                                    f.angular_breakpoints(x), quad.angular_grading)
    elif d == 3:
        W, ang_w = _angular_rule_3d(x, f, panels // 2, quad.angular_nodes,
                                    quad.azimuth_nodes << level, quad.angular_grading)
    else:
        raise NotImplementedError("generator quadrature supports d in {2, 3}")

    theta_w = np.asarray(spec.theta(W), dtype=float) * ang_w
    n_ray = W.shape[0]

    # ---- inner: gradient-compensated Jacobi rule on [0, r_split]
    use_inner = grad is not None
    inner = np.zeros(n_ray)
    err_inner = 0.0
    if use_inner:
        s, ws = _inner_rule(inner_nodes, alpha, r_split)
        Y = x[None, None, :] + s[None, :, None] * W[:, None, :]
        fy = np.asarray(f(Y.reshape(-1, d)), dtype=float).reshape(n_ray, s.size)
        gw = W @ grad
        psi = (fy - fx - s[None, :] * gw[:, None]) / s[None, :] ** 2
        inner = psi @ ws
    else:
        # no gradient: graded plain panels toward 0 (alpha < 1 only)
        depth = 40
        edges = r_split * 2.0 ** (-np.arange(depth + 1, dtype=float))[::-1]
        xg, wg = _gl_rule(gl_nodes)
        mid = 0.5 * (edges[:-1] + edges[1:])
        half = 0.5 * np.diff(edges)
        r = (mid[:, None] + half[:, None] * xg[None, :]).ravel()
        wr = (half[:, None] * wg[None, :]).ravel() * r ** (-1.0 - alpha)
        Y = x[None, None, :] + r[None, :, None] * W[:, None, :]
        fy = np.asarray(f(Y.reshape(-1, d)), dtype=float).reshape(n_ray, r.size)
        inner = (fy - fx) @ wr
        r0 = edges[0]
        slope = np.abs(fy[:, :gl_nodes] - fx).max() / max(edges[1], 1e-300)
        err_inner = float(slope * r0 ** (1.0 - alpha) / (1.0 - alpha) * theta_w.sum())

    # ---- mid panels: [r_split, R_out], split and graded at breakpoints.
    # Rays with finite support are integrated to the support end (the
    # geometric panel count stays logarithmic), so analytic tails are
    # needed only on rays where f extends to infinity.
    support = np.asarray(f.support_radius(x, W), dtype=float)
    r_out = np.where(np.isfinite(support),
                     np.maximum(support, r_split * 2.0),
                     quad.outer_cutoff)
    bps = f.ray_breakpoints(x, W)
    xg, wg = _gl_rule(gl_nodes)
    seg_lo, seg_hi, seg_ray = [], [], []
    for j in range(n_ray):
        e = _radial_segments(r_split, r_out[j], bps[j], quad.grading_depth)
        seg_lo.append(e[:-1])
        seg_hi.append(e[1:])
        seg_ray.append(np.full(e.size - 1, j))
    seg_lo = np.concatenate(seg_lo)
    seg_hi = np.concatenate(seg_hi)
    seg_ray = np.concatenate(seg_ray)
    mid = 0.5 * (seg_lo + seg_hi)
    half = 0.5 * (seg_hi - seg_lo)
    r = (mid[:, None] + half[:, None] * xg[None, :]).ravel()
    wr = (half[:, None] * wg[None, :]).ravel()
    ray_of_node = np.repeat(seg_ray, xg.size)
    Y = x[None, :] + r[:, None] * W[ray_of_node]
    fy = np.asarray(f(Y), dtype=float)
    node_val = (fy - fx) * r ** (-1.0 - alpha) * wr
    mids = np.bincount(ray_of_node, weights=node_val, minlength=n_ray)

    # ---- analytic pieces
    comp = np.zeros(n_ray)
    if use_inner:
        gw = W @ grad
        if alpha < 1.0:
            comp = gw * r_split ** (1.0 - alpha) / (1.0 - alpha)
        elif alpha == 1.0:
            comp = -gw * np.log(quad.trunc_radius / r_split)
        else:
            comp = -gw * r_split ** (1.0 - alpha) / (alpha - 1.0)
    tail_fx = -fx * r_out ** (-alpha) / alpha
    tail_f, tail_err = f.tail_integral(x, W, r_out, alpha)

    rays = inner + mids + comp + tail_fx + np.asarray(tail_f)
    total = float(theta_w @ rays)
    if alpha == 1.0:
        total += float(spec.drift() @ grad)
    err_tail = float(np.abs(theta_w) @ np.broadcast_to(np.asarray(tail_err), (n_ray,)))
    return total, err_inner + err_tail


def apply_generator(spec: StableSpec, f: TestFunction, x, quad: GeneratorQuad = DEFAULT_GENQUAD):
    """(value, err_estimate) of the pointwise generator at x.

    Raises NumericFailure (carrying the best value) when refinement stalls
    above ``quad.tol``; ValueError when alpha >= 1 and f has no gradient
    at x.
    """
    x = np.asarray(x, dtype=float)
    prev, err_prev = _eval_once(spec, f, x, quad, 0)
    best, errbest = prev, np.inf
    for level in range(1, quad.max_refine + 1):
        cur, err_cur = _eval_once(spec, f, x, quad, level)
        err = abs(cur - prev) + err_cur
        if err <= quad.tol:
            return cur, err
        if err < errbest:
            best, errbest = cur, err
        prev = cur
    raise NumericFailure("generator quadrature did not reach tolerance",
                         value=best, err_estimate=errbest)


def apply_generator_bruteforce(spec: StableSpec, f: TestFunction, x,
                               n_angular: int = 1000, n_radial: int = 10_000,
                               r_lo: float = 1e-6, r_hi: float = 1e3,
                               trunc_radius: float = 1.0):
    """Dense-grid polar oracle: midpoint rule in angle, log-trapezoid in
    radius, no adaptivity, no splitting.  Returns (value, err_estimate)
    with the error taken from one grid-halving Richardson step plus
    explicit small-radius and tail bounds.  Kept deliberately independent
    of the adaptive machinery."""
    x = np.asarray(x, dtype=float)

    def run(n_ang, n_rad, rlo):
        alpha, d = spec.alpha, spec.dim
        fx = float(f(x))
        grad = f.gradient(x) if alpha >= 1.0 else None
        if d == 2:
            phi = 2.0 * np.pi * (np.arange(n_ang) + 0.5) / n_ang
            W = np.column_stack([np.cos(phi), np.sin(phi)])
            wa = np.full(n_ang, 2.0 * np.pi / n_ang)
        else:
            n_th = int(np.sqrt(n_ang))
            th = np.pi * (np.arange(n_th) + 0.5) / n_th
            ph = 2.0 * np.pi * (np.arange(2 * n_th) + 0.5) / (2 * n_th)
            T, P = np.meshgrid(th, ph, indexing="ij")
            W = np.column_stack([(np.sin(T) * np.cos(P)).ravel(),
                                 (np.sin(T) * np.sin(P)).ravel(),
                                 np.cos(T).ravel()])
            wa = (np.sin(T).ravel()) * (np.pi / n_th) * (np.pi / n_th)
        tw = np.asarray(spec.theta(W), dtype=float) * wa
        r = np.geomspace(rlo, r_hi, n_rad)
        lw = np.empty(n_rad)
        lw[1:-1] = 0.5 * (r[2:] - r[:-2])
        lw[0] = 0.5 * (r[1] - r[0])
        lw[-1] = 0.5 * (r[-1] - r[-2])
        kern = lw * r ** (-1.0 - alpha)
        total = 0.0
        chunk = max(1, int(4e6) // n_rad)
        for j0 in range(0, W.shape[0], chunk):
            Wc = W[j0:j0 + chunk]
            Y = x[None, None, :] + r[None, :, None] * Wc[:, None, :]
            fy = np.asarray(f(Y.reshape(-1, d)), dtype=float).reshape(Wc.shape[0], n_rad)
            integ = fy - fx
            if alpha > 1.0:
                integ = integ - r[None, :] * (Wc @ grad)[:, None]
            elif alpha == 1.0:
                integ = integ - np.where(r[None, :] < trunc_radius, 1.0, 0.0) \
                    * r[None, :] * (Wc @ grad)[:, None]
            total += float(tw[j0:j0 + chunk] @ (integ @ kern))
        if alpha > 1.0:
            # compensation tail beyond the radial cutoff, exact in closed form
            total -= float(tw @ (W @ grad)) * r_hi ** (1.0 - alpha) / (alpha - 1.0)
        if alpha == 1.0:
            total += float(spec.drift() @ grad)
        return total

    v1 = run(n_angular, n_radial, r_lo)
    v0 = run(n_angular // 2, n_radial // 2, r_lo * 4.0)
    bound = f.bound()
    from scipy.special import gamma as _g
    area = 2.0 * np.pi ** (spec.dim / 2.0) / _g(spec.dim / 2.0)
    probe = np.asarray(spec.theta(np.eye(spec.dim))).max()
    tail = 0.0 if bound is None else \
        2.0 * bound * r_hi ** (-spec.alpha) / spec.alpha * area * probe
    # 1.5 safety on the Richardson step: the convergence order mixes the
    # angular and radial resolutions, so the raw difference can run tight
    err = 1.5 * abs(v1 - v0) + tail
    return v1, err


# ---------------------------------------------------------------------------
# scans


def halfspace_harmonicity_scan(spec: StableSpec, u, points,
                               quad: GeneratorQuad = DEFAULT_GENQUAD,
                               exponent: Optional[float] = None,
                               quad_beta: QuadConfig = None):
    """Generator values of the half-space power along ``points``.

    With the default exponent (the decay exponent of direction u) every
    value should vanish up to quadrature error; feeding a wrong exponent
    turns this into the negative control.
    """
    u = check_unit(u)
    if exponent is None:
        exponent = decay_exponent(spec, u, quad_beta or QuadConfig())
    h = HalfspacePower(np.zeros(spec.dim), u, exponent)
    vals, errs = [], []
    for p in np.atleast_2d(np.asarray(points, dtype=float)):
        v, e = apply_generator(spec, h, p, quad)
        vals.append(v)
        errs.append(e)
    vals, errs = np.asarray(vals), np.asarray(errs)
    return {"exponent": float(exponent), "values": vals, "err_estimates": errs,
            "max_abs": float(np.abs(vals).max()),
            "pass_threshold": 10.0 * float(errs.sum())}


def g_boundedness_scan(spec: StableSpec, dom: DomainGeometry, z, deltas,
                       quad: Optional[GeneratorQuad] = None,
                       exponent_override: Optional[float] = None,
                       quad_beta: QuadConfig = None):
    """|A g| along the inward normal ray at the boundary point z.

    Works in the normalized frame at z (domain mapped so z -> 0 and the
    ball radii become 2); ``deltas`` are normalized distances in (0, 1/2].
    ``exponent_override`` replaces the directional exponent field by a
    constant (the negative control: a constant that is wrong at z
    reintroduces the singular term and |A g| blows up like a power).
    """
    if quad is None:
        # A g is O(1); an absolute 1e-7 would over-refine for nothing
        quad = GeneratorQuad(tol=1e-3, max_refine=1)
    frame = boundary_frame(dom, z)
    dom_n = frame.transform_domain(dom)
    spec_n = frame.transform_spec(spec)
    if exponent_override is None:
        field = BetaField(spec_n, quad_beta or QuadConfig(), decay=True)
    else:
        field = ConstantField(exponent_override)
    g = BoundaryPower(dom_n, field, cut=1.0)
    deltas = np.asarray(deltas, dtype=float)
    if np.any((deltas <= 0) | (deltas > 0.5)):
        raise ValueError("deltas must lie in (0, 1/2] (normalized units)")
    e_d = np.zeros(spec.dim)
    e_d[-1] = 1.0
    vals, errs = [], []
    for dlt in deltas:
        v, e = apply_generator(spec_n, g, dlt * e_d, quad)
        vals.append(v)
        errs.append(e)
    vals, errs = np.asarray(vals), np.asarray(errs)
    mask = np.abs(vals) > 0
    slope = float(np.polyfit(np.log(deltas[mask]), np.log(np.abs(vals[mask])), 1)[0]) \
        if mask.sum() >= 2 else 0.0
    return {"deltas": deltas, "values": vals, "err_estimates": errs,
            "slope": slope}
