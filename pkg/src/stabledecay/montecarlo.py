"""Stable increments, path skeletons, and first-exit sampling.

Two samplers live here:

* :func:`sample_stable_1d` draws the projected one-dimensional law
  exactly (Chambers-Mallows-Stuck), parameterized directly by the
  one-sided Levy coefficients (C+, C-).
* :class:`SpectralSampler` simulates the d-dimensional process by a
  compound-Poisson skeleton: the spherical density is discretized into
  antipodally paired rays, jumps larger than ``eps_jump`` are sampled
  individually (and checked individually for domain exits), and the
  small-jump remainder is either dropped (documented bias, fine for
  alpha < 1) or replaced by a Brownian term matching its covariance.

Everything takes an explicit rng; ensembles split into chunks with
distinct stream ids, so results are reproducible and independent of any
threading of the chunks.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import gamma as _gamma
from scipy.special import roots_legendre

from ._sphere import circle_grid, fibonacci_hemisphere
from .errors import BudgetExceeded
from .geometry import DomainGeometry
from .rng import RngSpec, as_generator
from .spectral import StableSpec

EXIT_JUMP = 1
EXIT_SKELETON = 0


@dataclass(frozen=True)
class PathConfig:
    """Skeleton discretization.

    ``eps_jump = None`` picks dt^(1/alpha), the spatial scale of one
    time step; ``compensation = None`` picks "gaussian" for alpha >= 1
    and "none" below.
    """

    n_rays: int = 256
    dt: float = 1e-3
    eps_jump: Optional[float] = None
    compensation: Optional[str] = None
    step_budget: int = 10_000_000

    def __post_init__(self):
        if self.n_rays < 64:
            raise ValueError("n_rays must be at least 64")
        if self.n_rays % 2:
            raise ValueError("n_rays must be even (antipodal pairing)")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.eps_jump is not None and not (0.0 < self.eps_jump < 1.0):
            raise ValueError("eps_jump must lie in (0, 1)")
        if self.compensation not in (None, "none", "gaussian"):
            raise ValueError("compensation must be 'none' or 'gaussian'")

    def resolved_eps(self, alpha: float) -> float:
        if self.eps_jump is not None:
            return self.eps_jump
        return float(np.clip(self.dt ** (1.0 / alpha), 1e-4, 0.5))

    def resolved_compensation(self, alpha: float) -> str:
        if self.compensation is not None:
            return self.compensation
        return "gaussian" if alpha >= 1.0 else "none"


@dataclass(frozen=True)
class ExitSample:
    exit_time: float
    exit_point: np.ndarray
    exited_by: str              # "jump" or "skeleton-step"
    path_steps: int


def cms_parameters(alpha: float, c_plus: float, c_minus: float):
    """(scale sigma, skewness) of the strictly stable law with Levy density
    c_plus z^(-1-alpha) on z > 0 and c_minus |z|^(-1-alpha) on z < 0.

    sigma^alpha = (c_plus + c_minus) Gamma(2-alpha) cos(pi alpha/2)
                  / (alpha (1-alpha)),
    skew = (c_plus - c_minus) / (c_plus + c_minus).

    Plugging skew back into the arctan formula reproduces the positivity
    exponent beta, which is the round-trip consistency the tests pin.
    For alpha = 1 the law is Cauchy with scale pi * c_plus (c_plus must
    equal c_minus) and the skew is 0.
    """
    if c_plus < 0 or c_minus < 0 or c_plus + c_minus <= 0:
        raise ValueError("need c_plus, c_minus >= 0 with a positive sum")
    if alpha == 1.0:
        if not np.isclose(c_plus, c_minus, rtol=1e-9, atol=0):
            raise ValueError("alpha = 1 requires c_plus == c_minus")
        return np.pi * c_plus, 0.0
    total = c_plus + c_minus
    sig_a = total * _gamma(2.0 - alpha) * np.cos(np.pi * alpha / 2.0) \
        / (alpha * (1.0 - alpha))
    return float(sig_a ** (1.0 / alpha)), float((c_plus - c_minus) / total)


def _cms_standard(alpha: float, skew: float, rng, size: int) -> np.ndarray:
    """S_alpha(1, skew, 0) draws (S parameterization; strictly stable)."""
    V = (rng.random(size) - 0.5) * np.pi
    W = rng.standard_exponential(size)
    if alpha == 1.0:
        if skew != 0.0:
            raise ValueError("alpha = 1 sampling is implemented for skew 0")
        return np.tan(V)
    if skew == 0.0:
        return (np.sin(alpha * V) / np.cos(V) ** (1.0 / alpha)
                * (np.cos((1.0 - alpha) * V) / W) ** ((1.0 - alpha) / alpha))
    zeta = skew * np.tan(np.pi * alpha / 2.0)
    B = np.arctan(zeta) / alpha
    S = (1.0 + zeta * zeta) ** (1.0 / (2.0 * alpha))
    return (S * np.sin(alpha * (V + B)) / np.cos(V) ** (1.0 / alpha)
            * (np.cos(V - alpha * (V + B)) / W) ** ((1.0 - alpha) / alpha))


def sample_stable_1d(alpha: float, c_plus: float, c_minus: float,
                     drift_b: float = 0.0, t: float = 1.0, rng=0,
                     size: int = 1) -> np.ndarray:
    """Exact draws of Y_t for the 1D strictly stable law with one-sided
    coefficients (c_plus, c_minus) and, for alpha = 1, drift b."""
    if t <= 0:
        raise ValueError("t must be positive")
    if alpha != 1.0 and drift_b != 0.0:
        raise ValueError("a drift is admitted only for alpha = 1")
    gen = as_generator(rng)
    sigma, skew = cms_parameters(alpha, c_plus, c_minus)
    if alpha == 1.0:
        return drift_b * t + sigma * t * _cms_standard(1.0, 0.0, gen, size)
    return t ** (1.0 / alpha) * sigma * _cms_standard(alpha, skew, gen, size)


def _ray_grid(spec: StableSpec, n_rays: int):
    """Antipodally paired directions and cell-integrated weights."""
    d = spec.dim
    if d == 2:
        W = circle_grid(n_rays)
        h = 2.0 * np.pi / n_rays
        xg, wg = roots_legendre(8)
        phi = 2.0 * np.pi * np.arange(n_rays) / n_rays
        nodes = phi[:, None] + 0.5 * h * xg[None, :]
        dirs = np.stack([np.cos(nodes), np.sin(nodes)], axis=-1)
        tv = np.asarray(spec.theta(dirs), dtype=float)
        weights = (tv @ wg) * (0.5 * h)
        return W, weights
    if d == 3:
        m = n_rays // 2
        H = fibonacci_hemisphere(m)
        W = np.concatenate([H, -H], axis=0)
        cell = 4.0 * np.pi / n_rays
        weights = np.asarray(spec.theta(W), dtype=float) * cell
        return W, weights
    raise NotImplementedError("path sampling supports d in {2, 3}")


class SpectralSampler:
    """Compound-Poisson + small-jump-Gaussian stepper for one spec/config.

    ``ray_rotation`` rotates the direction grid (frame-covariant runs:
    rotating the grid together with the density reproduces rotated paths
    draw for draw)."""

    def __init__(self, spec: StableSpec, cfg: PathConfig, ray_rotation=None):
        self.spec = spec
        self.cfg = cfg
        self.alpha = spec.alpha
        self.dim = spec.dim
        W0, weights = _ray_grid(spec, cfg.n_rays)
        R = None
        if ray_rotation is not None:
            # rotate the grid with the frame: cell weights integrate theta
            # over the rotated cells, and every draw maps through R so a
            # frame-matched run reproduces rotated paths draw for draw
            R = np.asarray(ray_rotation, dtype=float)
            rspec = StableSpec(spec.alpha, spec.theta.rotate(R.T),
                               None if spec.gamma is None else R.T @ spec.gamma)
            _, weights = _ray_grid(rspec, cfg.n_rays)
        self.rays = W0 if R is None else W0 @ R.T
        self.weights = weights
        eps = cfg.resolved_eps(self.alpha)
        self.eps = eps
        self.comp_mode = cfg.resolved_compensation(self.alpha)
        if self.alpha == 1.0 and spec.gamma is not None:
            self.drift = spec.drift()
        else:
            self.drift = np.zeros(self.dim)

        lam = weights * eps ** (-self.alpha) / self.alpha
        self.rate_total = float(lam.sum())
        self.ray_cdf = np.cumsum(lam) / lam.sum()

        if self.comp_mode == "gaussian":
            cov0 = (W0.T * weights) @ W0 * eps ** (2.0 - self.alpha) / (2.0 - self.alpha)
            chol0 = np.linalg.cholesky(cov0)
            # rotate the factor, not the covariance: R chol0 is a valid
            # square root of the rotated covariance and keeps the Gaussian
            # draws frame-covariant path by path
            self.chol = chol0 if R is None else R @ chol0
        else:
            self.chol = None
        mean = np.zeros(self.dim)
        if self.alpha > 1.0:
            # zero-mean process: compensate the mean of the retained jumps
            mean = mean - (self.rays.T @ weights) * eps ** (1.0 - self.alpha) / (self.alpha - 1.0)
        elif self.alpha < 1.0:
            # the dropped small jumps have a finite mean; restore it in both
            # modes (dropping it too would bias non-symmetric laws at first
            # order, far beyond the shape error of the truncation)
            mean = mean + (self.rays.T @ weights) * eps ** (1.0 - self.alpha) / (1.0 - self.alpha)
        self.step_mean = mean + self.drift

    def sample_increments(self, dt: float, rng, size: int) -> np.ndarray:
        """Approximate increments of X over dt, shape (size, dim)."""
        gen = as_generator(rng)
        out = np.tile(self.step_mean * dt, (size, 1))
        if self.chol is not None:
            out += np.sqrt(dt) * gen.standard_normal((size, self.dim)) @ self.chol.T
        K = gen.poisson(self.rate_total * dt, size)
        kmax = int(K.max()) if size else 0
        for j in range(kmax):
            sel = np.nonzero(K > j)[0]
            idx = np.searchsorted(self.ray_cdf, gen.random(sel.size))
            sizes = self.eps * (1.0 - gen.random(sel.size)) ** (-1.0 / self.alpha)
            out[sel] += sizes[:, None] * self.rays[idx]
        return out


def sample_increment_d(spec: StableSpec, cfg: PathConfig, dt: float, rng,
                       size: int = 1) -> np.ndarray:
    """One-call wrapper around SpectralSampler.sample_increments."""
    return SpectralSampler(spec, cfg).sample_increments(dt, rng, size)


@dataclass
class ExitEnsemble:
    """Exit data for n replicates started from n_off offset points."""

    points: np.ndarray          # (n, n_off, d)
    times: np.ndarray           # (n, n_off)
    by_jump: np.ndarray         # (n, n_off) bool
    steps: np.ndarray           # (n, n_off) int
    completed: np.ndarray       # (n, n_off) bool; False: budget ran out

    @property
    def jump_exit_fraction(self):
        done = self.completed
        return float(self.by_jump[done].mean()) if done.any() else float("nan")


def _walk_chunk(sampler: SpectralSampler, dom: DomainGeometry,
                starts: np.ndarray, n_rep: int, rng, max_steps: int):
    """Walk n_rep replicates from every offset in ``starts`` (n_off, d),
    sharing each replicate's increments across offsets (common random
    numbers).  Active replicates draw in index order, so the outcome is a
    pure function of the stream."""
    gen = as_generator(rng)
    n_off, d = starts.shape
    dt = sampler.cfg.dt
    pos = np.broadcast_to(starts[None, :, :], (n_rep, n_off, d)).copy()
    alive = np.ones((n_rep, n_off), dtype=bool)
    out_pts = np.zeros((n_rep, n_off, d))
    out_t = np.zeros((n_rep, n_off))
    out_jump = np.zeros((n_rep, n_off), dtype=bool)
    out_steps = np.zeros((n_rep, n_off), dtype=np.int64)
    completed = np.zeros((n_rep, n_off), dtype=bool)

    mean_dt = sampler.step_mean * dt
    sqdt = np.sqrt(dt)
    step = 0
    while True:
        act = np.nonzero(alive.any(axis=1))[0]
        if act.size == 0:
            break
        if step >= max_steps:
            break
        step += 1
        # continuous part: drift/compensation plus the small-jump Gaussian
        move = np.tile(mean_dt, (act.size, 1))
        if sampler.chol is not None:
            move += sqdt * gen.standard_normal((act.size, d)) @ sampler.chol.T
        pos[act] += move[:, None, :]

        def record_exits(by_jump):
            sub_alive = alive[act]
            if not sub_alive.any():
                return
            pts = pos[act]
            inside = np.asarray(dom.contains(pts.reshape(-1, d))).reshape(act.size, n_off)
            exited = sub_alive & ~inside
            if exited.any():
                rows, cols = np.nonzero(exited)
                gr = act[rows]
                out_pts[gr, cols] = pts[rows, cols]
                out_t[gr, cols] = step * dt
                out_jump[gr, cols] = by_jump
                out_steps[gr, cols] = step
                completed[gr, cols] = True
                alive[gr, cols] = False

        record_exits(False)
        # individually applied large jumps, each checked for a crossing
        K = gen.poisson(sampler.rate_total * dt, act.size)
        kmax = int(K.max()) if act.size else 0
        for j in range(kmax):
            har = K > j
            sel = act[har]
            idx = np.searchsorted(sampler.ray_cdf, gen.random(sel.size))
            sizes = sampler.eps * (1.0 - gen.random(sel.size)) ** (-1.0 / sampler.alpha)
            pos[sel] += (sizes[:, None] * sampler.rays[idx])[:, None, :]
            sub = np.zeros(act.size, dtype=bool)
            sub[har] = True
            act_j = act[sub]
            if act_j.size:
                pts = pos[act_j]
                sub_alive = alive[act_j]
                inside = np.asarray(dom.contains(pts.reshape(-1, d))).reshape(act_j.size, n_off)
                exited = sub_alive & ~inside
                if exited.any():
                    rows, cols = np.nonzero(exited)
                    gr = act_j[rows]
                    out_pts[gr, cols] = pts[rows, cols]
                    out_t[gr, cols] = step * dt
                    out_jump[gr, cols] = True
                    out_steps[gr, cols] = step
                    completed[gr, cols] = True
                    alive[gr, cols] = False

    out_steps[alive] = step
    return ExitEnsemble(points=out_pts, times=out_t, by_jump=out_jump,
                        steps=out_steps, completed=completed)


def sample_exits(spec: StableSpec, cfg: PathConfig, dom: DomainGeometry,
                 starts, n: int, rng: RngSpec, chunk_size: int = 4096,
                 ray_rotation=None) -> ExitEnsemble:
    """n replicate exits from each start point (CRN across start points).

    ``rng`` must be an RngSpec: chunk c draws from stream
    ``rng.stream + c``, which makes the ensemble reproducible and
    mergeable in a fixed order regardless of how chunks are scheduled.
    """
    if not isinstance(rng, RngSpec):
        raise TypeError("sample_exits needs an RngSpec (stream-addressed draws)")
    starts = np.atleast_2d(np.asarray(starts, dtype=float))
    if not np.all(dom.contains(starts)):
        raise ValueError("all start points must lie inside the domain")
    sampler = SpectralSampler(spec, cfg, ray_rotation=ray_rotation)
    max_steps = int(cfg.step_budget)
    parts = []
    done = 0
    c = 0
    while done < n:
        m = min(chunk_size, n - done)
        parts.append(_walk_chunk(sampler, dom, starts, m,
                                 rng.with_stream(rng.stream + c), max_steps))
        done += m
        c += 1
    return ExitEnsemble(
        points=np.concatenate([p.points for p in parts]),
        times=np.concatenate([p.times for p in parts]),
        by_jump=np.concatenate([p.by_jump for p in parts]),
        steps=np.concatenate([p.steps for p in parts]),
        completed=np.concatenate([p.completed for p in parts]),
    )


def sample_exit(spec: StableSpec, cfg: PathConfig, dom: DomainGeometry,
                x0, rng) -> ExitSample:
    """First exit of a single path from x0; raises BudgetExceeded (carrying
    the partial ensemble) if the step budget runs out."""
    if not isinstance(rng, RngSpec):
        rng = RngSpec(seed=int(rng))
    ens = sample_exits(spec, cfg, dom, np.atleast_2d(x0), 1, rng)
    if not ens.completed[0, 0]:
        raise BudgetExceeded("path did not exit within the step budget",
                             partial=ens)
    return ExitSample(exit_time=float(ens.times[0, 0]),
                      exit_point=ens.points[0, 0],
                      exited_by="jump" if ens.by_jump[0, 0] else "skeleton-step",
                      path_steps=int(ens.steps[0, 0]))


@dataclass(frozen=True)
class HarmonicEstimate:
    mean: float
    std_error: float
    n_effective: int
    skeleton_exit_fraction: float


def harmonic_estimate(spec: StableSpec, cfg: PathConfig, dom_cap: DomainGeometry,
                      x0, payoff, n_samples: int, rng: RngSpec) -> HarmonicEstimate:
    """Monte Carlo E^x0[payoff(X_tau)] for the capped domain.

    The estimate is regular harmonic in the capped domain; with a payoff
    vanishing near the studied boundary piece it is exactly the function
    whose boundary decay the experiments fit."""
    ens = sample_exits(spec, cfg, dom_cap, np.atleast_2d(x0), n_samples, rng)
    ok = ens.completed[:, 0]
    pts = ens.points[ok, 0]
    vals = np.asarray(payoff(pts), dtype=float)
    n_eff = int(ok.sum())
    if n_eff == 0:
        raise BudgetExceeded("no path exited within the step budget", partial=ens)
    mean = float(vals.mean())
    se = float(vals.std(ddof=1) / np.sqrt(n_eff)) if n_eff > 1 else float("inf")
    skel = float(1.0 - ens.by_jump[ok, 0].mean())
    return HarmonicEstimate(mean=mean, std_error=se, n_effective=n_eff,
                            skeleton_exit_fraction=skel)
