"""Process class: spherical jump densities and stable process specs.

A strictly alpha-stable process here is determined by the stability index
``alpha``, a strictly positive spherical density ``theta`` on the unit
sphere (the jump kernel is ``|x|^(-d-alpha) * theta(x/|x|)``), and, for
``alpha = 1`` only, a drift vector ``gamma``.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ._sphere import check_unit, direction_grid

KINDS = ("constant", "cosine-tilt", "bump-plus-floor", "tabulated")

#: symmetry tolerance for the alpha=1 check, per density family
SYM_TOL_CLOSED_FORM = 1e-10
SYM_TOL_TABULATED = 1e-6

#: size of the quasi-uniform grid used by validate_spec
VALIDATION_GRID_SIZE = 10_000


@dataclass(frozen=True)
class SphericalDensity:
    """Strictly positive density on S^(dim-1).

    Use the factory classmethods; the constructor is not meant to be
    called with raw fields.  Evaluation through ``__call__`` assumes unit
    input (internal quadrature path); :func:`evaluate_theta` is the
    checked entry point.
    """

    dim: int
    kind: str
    c0: float = 1.0
    c1: float = 0.0
    amp: float = 0.0
    conc: float = 1.0
    axis: Optional[np.ndarray] = None
    table_angles: Optional[np.ndarray] = None
    table_dirs: Optional[np.ndarray] = None
    table_values: Optional[np.ndarray] = None
    _tri: object = field(default=None, repr=False, compare=False)

    # -- constructors -------------------------------------------------

    @classmethod
    def constant(cls, dim: int, c0: float = 1.0) -> "SphericalDensity":
        _check_dim(dim)
        if c0 <= 0:
            raise ValueError("constant density needs c0 > 0")
        return cls(dim=dim, kind="constant", c0=float(c0))

    @classmethod
    def cosine_tilt(cls, dim: int, c0: float, c1: float, axis) -> "SphericalDensity":
        """theta(w) = c0 + c1 <w, axis>, with c0 > |c1| >= 0."""
        _check_dim(dim)
        if not (c0 > abs(c1) >= 0):
            raise ValueError("cosine-tilt needs c0 > |c1| >= 0")
        axis = check_unit(np.asarray(axis, dtype=float))
        if axis.shape != (dim,):
            raise ValueError("tilt axis dimension mismatch")
        return cls(dim=dim, kind="cosine-tilt", c0=float(c0), c1=float(c1), axis=axis)

    @classmethod
    def bump_plus_floor(cls, dim: int, c0: float, amp: float, conc: float, axis) -> "SphericalDensity":
        """theta(w) = c0 + amp * exp(conc * (<w, axis> - 1)); smooth bump at axis."""
        _check_dim(dim)
        if c0 <= 0 or amp < 0 or conc <= 0:
            raise ValueError("bump-plus-floor needs c0 > 0, amp >= 0, conc > 0")
        axis = check_unit(np.asarray(axis, dtype=float))
        if axis.shape != (dim,):
            raise ValueError("bump axis dimension mismatch")
        return cls(dim=dim, kind="bump-plus-floor", c0=float(c0), amp=float(amp),
                   conc=float(conc), axis=axis)

    @classmethod
    def tabulated(cls, dim: int, values, angles=None, directions=None) -> "SphericalDensity":
        """Tabulated density: linear in angle for d=2, barycentric on a
        geodesic triangulation for d=3.  Interpolated values are clamped
        below at the tabulated minimum, which preserves positivity."""
        _check_dim(dim)
        values = np.asarray(values, dtype=float)
        if values.size == 0:
            raise ValueError("tabulated density needs a non-empty table")
        if np.any(values <= 0) or not np.all(np.isfinite(values)):
            raise ValueError("tabulated values must be finite and > 0")
        if dim == 2:
            if angles is None:
                raise ValueError("d=2 tabulated density needs angles")
            angles = np.mod(np.asarray(angles, dtype=float), 2 * np.pi)
            order = np.argsort(angles)
            return cls(dim=2, kind="tabulated",
                       table_angles=angles[order], table_values=values[order])
        if dim == 3:
            if directions is None:
                raise ValueError("d=3 tabulated density needs directions")
            dirs = np.asarray(directions, dtype=float)
            dirs = dirs / np.linalg.norm(dirs, axis=1, keepdims=True)
            tri = _SphereTriangulation(dirs)
            return cls(dim=3, kind="tabulated", table_dirs=dirs, table_values=values,
                       _tri=tri)
        raise ValueError("tabulated densities are supported for d in {2, 3}")

    # -- evaluation ---------------------------------------------------

    def __call__(self, w) -> np.ndarray:
        """Evaluate at unit directions, shape (..., dim) or (dim,)."""
        w = np.asarray(w, dtype=float)
        if self.kind == "constant":
            return np.broadcast_to(np.float64(self.c0), w.shape[:-1]).copy() \
                if w.ndim > 1 else np.float64(self.c0)
        if self.kind == "cosine-tilt":
            return self.c0 + self.c1 * (w @ self.axis)
        if self.kind == "bump-plus-floor":
            return self.c0 + self.amp * np.exp(self.conc * ((w @ self.axis) - 1.0))
        if self.kind == "tabulated":
            if self.table_values is None or self.table_values.size == 0:
                raise RuntimeError("tabulated density has an empty table")
            if self.dim == 2:
                return self._interp_circle(w)
            return self._interp_sphere(w)
        raise ValueError(f"unknown density kind {self.kind!r}")

    def _interp_circle(self, w):
        phi = np.mod(np.arctan2(w[..., 1], w[..., 0]), 2 * np.pi)
        ang = self.table_angles
        val = self.table_values
        # periodic linear interpolation
        ang_ext = np.concatenate([ang, [ang[0] + 2 * np.pi]])
        val_ext = np.concatenate([val, [val[0]]])
        out = np.interp(phi, ang_ext, val_ext, period=2 * np.pi)
        return np.maximum(out, val.min())

    def _interp_sphere(self, w):
        out = self._tri.interpolate(np.atleast_2d(w), self.table_values)
        out = np.maximum(out, self.table_values.min())
        return out.reshape(np.shape(w)[:-1]) if np.ndim(w) > 1 else out[0]

    # -- transforms ---------------------------------------------------

    def rotate(self, Q: np.ndarray) -> "SphericalDensity":
        """Density of the rotated process: theta'(w) = theta(Q^T w)."""
        Q = np.asarray(Q, dtype=float)
        if self.kind == "constant":
            return self
        if self.kind in ("cosine-tilt", "bump-plus-floor"):
            return _replace_axis(self, Q @ self.axis)
        if self.dim == 2:
            dirs = np.column_stack([np.cos(self.table_angles), np.sin(self.table_angles)])
            new_dirs = dirs @ Q.T
            new_angles = np.mod(np.arctan2(new_dirs[:, 1], new_dirs[:, 0]), 2 * np.pi)
            return SphericalDensity.tabulated(2, self.table_values, angles=new_angles)
        return SphericalDensity.tabulated(3, self.table_values,
                                          directions=self.table_dirs @ Q.T)

    def scaled(self, factor: float) -> "SphericalDensity":
        """Pointwise multiply by factor > 0 (a time change of the process)."""
        if factor <= 0:
            raise ValueError("scale factor must be > 0")
        if self.kind == "constant":
            return SphericalDensity.constant(self.dim, self.c0 * factor)
        if self.kind == "cosine-tilt":
            return SphericalDensity.cosine_tilt(self.dim, self.c0 * factor,
                                                self.c1 * factor, self.axis)
        if self.kind == "bump-plus-floor":
            return SphericalDensity.bump_plus_floor(self.dim, self.c0 * factor,
                                                    self.amp * factor, self.conc, self.axis)
        if self.dim == 2:
            return SphericalDensity.tabulated(2, self.table_values * factor,
                                              angles=self.table_angles)
        return SphericalDensity.tabulated(3, self.table_values * factor,
                                          directions=self.table_dirs)

    # -- serialization ------------------------------------------------

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == "constant":
            d["c0"] = self.c0
        elif self.kind == "cosine-tilt":
            d.update(c0=self.c0, c1=self.c1, axis=self.axis.tolist())
        elif self.kind == "bump-plus-floor":
            d.update(c0=self.c0, amp=self.amp, conc=self.conc, axis=self.axis.tolist())
        elif self.dim == 2:
            d.update(angles=self.table_angles.tolist(), values=self.table_values.tolist())
        else:
            d.update(directions=self.table_dirs.tolist(), values=self.table_values.tolist())
        return d

    @classmethod
    def from_dict(cls, dim: int, d: dict) -> "SphericalDensity":
        kind = d["kind"]
        if kind == "constant":
            return cls.constant(dim, d["c0"])
        if kind == "cosine-tilt":
            return cls.cosine_tilt(dim, d["c0"], d["c1"], d["axis"])
        if kind == "bump-plus-floor":
            return cls.bump_plus_floor(dim, d["c0"], d["amp"], d["conc"], d["axis"])
        if kind == "tabulated":
            return cls.tabulated(dim, d["values"], angles=d.get("angles"),
                                 directions=d.get("directions"))
        raise ValueError(f"unknown density kind {kind!r}")


def _replace_axis(theta, new_axis):
    new_axis = np.asarray(new_axis, dtype=float)
    new_axis = new_axis / np.linalg.norm(new_axis)
    if theta.kind == "cosine-tilt":
        return SphericalDensity.cosine_tilt(theta.dim, theta.c0, theta.c1, new_axis)
    return SphericalDensity.bump_plus_floor(theta.dim, theta.c0, theta.amp,
                                            theta.conc, new_axis)


def _check_dim(dim):
    if dim < 2:
        raise ValueError("ambient dimension must be >= 2 (1D appears only as a projection)")


class _SphereTriangulation:
    """Geodesic (convex-hull) triangulation of points on S^2 with
    barycentric interpolation."""

    def __init__(self, dirs: np.ndarray):
        from scipy.spatial import ConvexHull

        if dirs.shape[0] < 4:
            raise ValueError("d=3 tabulated density needs at least 4 directions")
        hull = ConvexHull(dirs)
        self.dirs = dirs
        self.simplices = hull.simplices
        # per-simplex inverse of the vertex matrix, for barycentric solves
        mats = dirs[self.simplices]            # (m, 3, 3) rows are vertices
        self.inv = np.linalg.inv(np.transpose(mats, (0, 2, 1)))
        # vertex -> incident simplices
        self.incident = [[] for _ in range(dirs.shape[0])]
        for si, simplex in enumerate(self.simplices):
            for v in simplex:
                self.incident[v].append(si)

    def interpolate(self, w: np.ndarray, values: np.ndarray) -> np.ndarray:
        out = np.empty(w.shape[0])
        nearest = np.argmax(w @ self.dirs.T, axis=1)
        for i in range(w.shape[0]):
            cand = self.incident[nearest[i]]
            best_b, best_s, best_min = None, None, -np.inf
            for si in cand:
                b = self.inv[si] @ w[i]
                m = b.min()
                if m > best_min:
                    best_min, best_b, best_s = m, b, si
            # gnomonic barycentric weights; clip tiny negatives at edges
            b = np.maximum(best_b, 0.0)
            s = b.sum()
            if s <= 0:
                out[i] = values[nearest[i]]
                continue
            out[i] = (b / s) @ values[self.simplices[best_s]]
        return out


@dataclass(frozen=True)
class StableSpec:
    """Full description of a strictly alpha-stable process.

    ``gamma`` (a drift vector) is admitted only for alpha = 1; for
    alpha != 1 strict stability forces it to 0.  Construction performs
    only cheap checks; :func:`validate_spec` runs the full grid
    validation and reports failures instead of raising.
    """

    alpha: float
    theta: SphericalDensity
    gamma: Optional[np.ndarray] = None

    def __post_init__(self):
        if not (0.0 < self.alpha < 2.0):
            raise ValueError("alpha must lie in (0, 2)")
        if self.gamma is not None:
            g = np.asarray(self.gamma, dtype=float)
            if g.shape != (self.theta.dim,):
                raise ValueError("gamma dimension mismatch")
            object.__setattr__(self, "gamma", g)

    @property
    def dim(self) -> int:
        return self.theta.dim

    def drift(self) -> np.ndarray:
        return np.zeros(self.dim) if self.gamma is None else self.gamma

    def rotate(self, Q: np.ndarray) -> "StableSpec":
        g = None if self.gamma is None else np.asarray(Q, dtype=float) @ self.gamma
        return StableSpec(self.alpha, self.theta.rotate(Q), g)

    def to_dict(self) -> dict:
        d = {"alpha": self.alpha, "dim": self.dim, "theta": self.theta.to_dict()}
        if self.gamma is not None:
            d["gamma"] = self.gamma.tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "StableSpec":
        theta = SphericalDensity.from_dict(int(d["dim"]), d["theta"])
        return cls(alpha=float(d["alpha"]), theta=theta, gamma=d.get("gamma"))


def evaluate_theta(theta: SphericalDensity, w) -> float:
    """Checked single-direction evaluation of the spherical density."""
    w = check_unit(w)
    if w.shape != (theta.dim,):
        raise ValueError("direction dimension mismatch")
    val = float(theta(w))
    if not val > 0.0:
        raise RuntimeError(f"density evaluated non-positive ({val}) at {w}")
    return val


def levy_density(spec: StableSpec, x) -> np.ndarray:
    """Jump kernel |x|^(-d-alpha) * theta(x/|x|); x must be nonzero."""
    x = np.asarray(x, dtype=float)
    r = np.linalg.norm(x, axis=-1)
    if np.any(r == 0.0):
        raise ValueError("the Levy density is singular at 0")
    w = x / r[..., None] if x.ndim > 1 else x / r
    return r ** (-spec.dim - spec.alpha) * spec.theta(w)


@dataclass(frozen=True)
class ValidationCheck:
    name: str
    passed: bool
    detail: str = ""
    witness: Optional[tuple] = None

    def to_dict(self):
        d = {"name": self.name, "passed": self.passed, "detail": self.detail}
        if self.witness is not None:
            d["witness"] = list(self.witness)
        return d


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self):
        return [c for c in self.checks if not c.passed]

    def to_dict(self):
        return {"ok": self.ok, "checks": [c.to_dict() for c in self.checks]}


def validate_spec(spec: StableSpec, n_grid: int = VALIDATION_GRID_SIZE) -> ValidationReport:
    """Check the standing assumptions on a quasi-uniform direction grid.

    Never raises; every invariant is reported with pass/fail and, on
    failure, a witnessing direction.
    """
    n_grid = max(int(n_grid), VALIDATION_GRID_SIZE)
    checks = []
    checks.append(ValidationCheck(
        "alpha-range", 0.0 < spec.alpha < 2.0, f"alpha = {spec.alpha}"))

    grid = direction_grid(spec.dim, n_grid)
    vals = np.asarray(spec.theta(grid), dtype=float)
    imin, imax = int(np.argmin(vals)), int(np.argmax(vals))
    checks.append(ValidationCheck(
        "positivity", bool(vals[imin] > 0.0),
        f"min theta = {vals[imin]:.6g} on a {n_grid}-direction grid",
        witness=None if vals[imin] > 0.0 else tuple(grid[imin])))
    checks.append(ValidationCheck(
        "finiteness", bool(np.isfinite(vals[imax])),
        f"max theta = {vals[imax]:.6g}",
        witness=None if np.isfinite(vals[imax]) else tuple(grid[imax])))

    if spec.alpha == 1.0:
        tol = SYM_TOL_TABULATED if spec.theta.kind == "tabulated" else SYM_TOL_CLOSED_FORM
        asym = np.abs(vals - np.asarray(spec.theta(-grid), dtype=float))
        iworst = int(np.argmax(asym))
        ok = bool(asym[iworst] <= tol)
        checks.append(ValidationCheck(
            "alpha1-symmetry", ok,
            f"max |theta(w) - theta(-w)| = {asym[iworst]:.3g} (tol {tol:g})",
            witness=None if ok else tuple(grid[iworst])))
    else:
        ok = spec.gamma is None
        checks.append(ValidationCheck(
            "no-drift", ok,
            "drift vector is forbidden for alpha != 1" if not ok else "gamma absent"))

    return ValidationReport(checks=tuple(checks))
