"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run with ``pytest -s tests/test_acceptance.py`` to see the lines as they
complete.  Every tolerance is pinned here; the heavy Monte Carlo criteria
use the stated sample sizes and stay within their stated runtimes on a
commodity core.
"""

import json
import os

import numpy as np
import pytest
from scipy import stats

from stabledecay import (Ball, GaussianBump, GaussianMix, GeneratorQuad,
                         HalfSpace, PathConfig, RngSpec, SphericalDensity,
                         SpectralSampler, StableSpec, apply_generator,
                         apply_generator_bruteforce, beta_from_constants,
                         decay_exponent, directional_law, exact_halfspace_decay,
                         g_boundedness_scan, halfspace_harmonicity_scan,
                         run_decay_experiment, run_reduction_check,
                         reduction_tightening, sample_stable_1d, sample_exits,
                         wallis)
from stabledecay.projection import c_plus_batch
from stabledecay.cli import dispatch

E1 = np.array([1.0, 0.0])
E2 = np.array([0.0, 1.0])


def _report(num, ok, text):
    print(f"{'PASS' if ok else 'FAIL'} criterion {num:2d}: {text}")
    assert ok, f"criterion {num}: {text}"


def _six_specs():
    """alpha in {0.6, 1, 1.5} x {isotropic, directionally biased}.  At
    alpha = 1 strict stability forces a symmetric density, so the biased
    member uses the drift vector instead of a tilt."""
    tilt = lambda a: StableSpec(a, SphericalDensity.cosine_tilt(2, 1.0, 0.5, [1.0, 0.0]))
    return [
        ("iso-0.6", StableSpec(0.6, SphericalDensity.constant(2))),
        ("tilt-0.6", tilt(0.6)),
        ("iso-1.0", StableSpec(1.0, SphericalDensity.constant(2))),
        ("drift-1.0", StableSpec(1.0, SphericalDensity.constant(2),
                                 gamma=np.array([0.5, 0.0]))),
        ("iso-1.5", StableSpec(1.5, SphericalDensity.constant(2))),
        ("tilt-1.5", tilt(1.5)),
    ]


def _beta_grid(spec, n):
    U = np.column_stack([np.cos(2 * np.pi * np.arange(n) / n),
                         np.sin(2 * np.pi * np.arange(n) / n)])
    cp, _ = c_plus_batch(spec, U)
    cm, _ = c_plus_batch(spec, -U)
    if spec.alpha == 1.0:
        betas = 0.5 + np.arctan((U @ spec.drift()) / (np.pi * cp)) / np.pi
    else:
        q = (cp - cm) / (cp + cm)
        betas = spec.alpha / 2 + np.arctan(q * np.tan(np.pi * spec.alpha / 2)) / np.pi
    return U, betas


def test_criterion_01_positivity_exponent_oracle():
    """alpha * P(Y_1 > 0) from 1e6 exact stable draws matches the
    quadrature exponent within 4 standard errors on every spec/direction."""
    n = 1_000_000
    worst = 0.0
    k = 0
    for name, spec in _six_specs():
        for j in range(8):
            phi = 0.3 + np.pi * j / 8.0
            u = np.array([np.cos(phi), np.sin(phi)])
            law = directional_law(spec, u)
            y = sample_stable_1d(spec.alpha, law.c_plus, law.c_minus,
                                 drift_b=law.drift_b or 0.0, t=1.0,
                                 rng=RngSpec(1000 + 13 * k), size=n)
            p = float(np.mean(y > 0.0))
            se = spec.alpha * np.sqrt(p * (1 - p) / n)
            dev = abs(spec.alpha * p - law.beta) / se
            worst = max(worst, dev)
            k += 1
    _report(1, worst <= 4.0,
            f"48 spec/direction cells, worst |alpha p_hat - beta| = {worst:.2f} se (<= 4)")


def test_criterion_02_antipodal_identity():
    worst = 0.0
    for name, spec in _six_specs():
        U, betas = _beta_grid(spec, 256)
        flipped = np.roll(betas, 128)
        worst = max(worst, float(np.max(np.abs(betas + flipped - spec.alpha))))
    _report(2, worst <= 1e-8,
            f"max |beta(u) + beta(-u) - alpha| = {worst:.2e} over 256 dirs x 6 specs (<= 1e-8)")


def test_criterion_03_bounds_strict():
    ok = True
    margin = np.inf
    for name, spec in _six_specs():
        _, betas = _beta_grid(spec, 256)
        lo, hi = max(0.0, spec.alpha - 1.0), min(spec.alpha, 1.0)
        ok &= bool(np.all(betas > lo) and np.all(betas < hi))
        margin = min(margin, float(np.min(betas - lo)), float(np.min(hi - betas)))
    _report(3, ok, f"max(0, a-1) < beta < min(a, 1) strictly; min margin {margin:.3g}")


def test_criterion_04_wallis_closed_form():
    from scipy.special import gamma

    worst = 0.0
    for alpha in (0.5, 1.0, 1.5):
        spec = StableSpec(alpha, SphericalDensity.constant(2))
        cp, _ = c_plus_batch(spec, E1[None, :])
        exact = np.sqrt(np.pi) * gamma((alpha + 1) / 2) / gamma(alpha / 2 + 1)
        worst = max(worst, abs(cp[0] - exact))
    _report(4, worst <= 1e-8,
            f"isotropic C+ vs sqrt(pi) G((a+1)/2)/G(a/2+1): max |diff| = {worst:.2e} (<= 1e-8)")


def test_criterion_05_halfspace_harmonicity():
    specs = [StableSpec(0.6, SphericalDensity.constant(2)),
             StableSpec(0.6, SphericalDensity.cosine_tilt(2, 1.0, 0.5, [0.0, 1.0])),
             StableSpec(1.5, SphericalDensity.cosine_tilt(2, 1.0, 0.5, [0.0, 1.0])),
             StableSpec(1.0, SphericalDensity.constant(2), gamma=np.array([0.3, 0.2]))]
    xds = 0.25 * 2.0 ** (np.arange(8) / 2.0)
    pts = np.column_stack([np.full(8, 0.3), xds])
    worst_ratio = 0.0
    for spec in specs:
        e = decay_exponent(spec, E2)
        scan = halfspace_harmonicity_scan(spec, E2, pts, GeneratorQuad(tol=1e-7))
        thr = 1e-5 * (1.0 + xds ** (e - spec.alpha))
        worst_ratio = max(worst_ratio, float(np.max(np.abs(scan["values"]) / thr)))
    # negative control: wrong exponent blows past the threshold
    spec = specs[2]
    e = decay_exponent(spec, E2)
    good = halfspace_harmonicity_scan(spec, E2, pts[:2], GeneratorQuad(tol=1e-7))
    bad = halfspace_harmonicity_scan(spec, E2, pts[:2], GeneratorQuad(tol=1e-7),
                                     exponent=e + 0.1)
    thr2 = 1e-5 * (1.0 + xds[:2] ** (e - spec.alpha))
    control = float(np.min(np.abs(bad["values"]) / thr2))
    ok = worst_ratio <= 1.0 and control >= 100.0
    _report(5, ok, f"|A h| <= 1e-5 (1+x^(b-a)) at 8 pts x 4 specs "
                   f"(worst ratio {worst_ratio:.1e}); control {control:.0f}x over (>= 100x)")


def test_criterion_06_generator_boundedness():
    dom = Ball([0.0, 0.0], 2.0)
    tilt = StableSpec(1.5, SphericalDensity.cosine_tilt(2, 1.0, 0.5, [0.0, 1.0]))
    z = np.array([0.0, -2.0])
    deltas = [1e-1, 3e-2, 1e-2, 3e-3, 1e-3]
    scan = g_boundedness_scan(tilt, dom, z, deltas)
    e_bad = decay_exponent(tilt, np.array([0.0, -1.0]))   # wrong at z
    control = g_boundedness_scan(tilt, dom, z, deltas, exponent_override=e_bad)
    ok = scan["slope"] >= -0.1 and control["slope"] <= -0.3
    _report(6, ok, f"|A g| log-log slope {scan['slope']:+.3f} (>= -0.1); "
                   f"constant-exponent control {control['slope']:+.3f} (<= -0.3)")


def test_criterion_07_bruteforce_generator_oracle():
    specs = [StableSpec(0.6, SphericalDensity.constant(2)),
             StableSpec(1.5, SphericalDensity.cosine_tilt(2, 1.0, 0.5, [0.0, 1.0])),
             StableSpec(1.0, SphericalDensity.constant(2), gamma=np.array([0.3, 0.0]))]
    funcs = [GaussianBump([0.0, 0.0], 1.0, 1.0),
             GaussianBump([0.5, 0.3], 0.7, 2.0),
             GaussianBump([0.0, 1.0], 2.0, 1.0),
             GaussianBump([-0.6, 0.1], 1.4, 0.5),
             GaussianBump([0.2, -0.5], 0.5, 1.0),
             GaussianBump([0.0, 0.0], 3.0, -1.0),
             GaussianMix([GaussianBump([0.5, 0.3], 0.7, 2.0),
                          GaussianBump([-0.4, 0.8], 1.3, -0.7)]),
             GaussianMix([GaussianBump([0.0, 0.0], 1.0, 1.0),
                          GaussianBump([1.0, 0.0], 1.0, 1.0)]),
             GaussianMix([GaussianBump([0.3, 0.0], 0.8, 1.0),
                          GaussianBump([0.0, 0.3], 0.8, -1.0)]),
             GaussianBump([1.2, 1.2], 1.1, 1.5)]
    x = np.array([0.2, 0.4])
    n_pass = 0
    worst = 0.0
    for spec in specs:
        for f in funcs:
            va, ea = apply_generator(spec, f, x)
            vb, eb = apply_generator_bruteforce(spec, f, x)
            ratio = abs(va - vb) / (ea + eb)
            worst = max(worst, ratio)
            n_pass += ratio <= 1.0
    _report(7, n_pass == 30,
            f"adaptive vs dense-grid oracle: {n_pass}/30 within combined error "
            f"bounds (worst ratio {worst:.2f})")


def test_criterion_08_sampler_consistency():
    specs = [("tilt-1.5", StableSpec(1.5, SphericalDensity.cosine_tilt(2, 1.0, 0.5, E1))),
             ("tilt-0.6", StableSpec(0.6, SphericalDensity.cosine_tilt(2, 1.0, 0.5, E1))),
             ("drift-1.0", StableSpec(1.0, SphericalDensity.constant(2),
                                      gamma=np.array([0.5, 0.0])))]
    dirs = [E1, E2, np.array([1.0, 1.0]) / np.sqrt(2), np.array([-0.6, 0.8])]
    cfg = PathConfig(n_rays=256, dt=1e-3)
    n = 100_000
    p_min = 1.0
    for k, (name, spec) in enumerate(specs):
        inc = SpectralSampler(spec, cfg).sample_increments(0.01, RngSpec(60 + k), n)
        for j, u in enumerate(dirs):
            law = directional_law(spec, u)
            ref = sample_stable_1d(spec.alpha, law.c_plus, law.c_minus,
                                   drift_b=law.drift_b or 0.0, t=0.01,
                                   rng=RngSpec(70 + 10 * k + j), size=n)
            p_min = min(p_min, stats.ks_2samp(inc @ u, ref).pvalue)
    # strict stability scaling: increments over lam^a dt ~ lam * increments over dt
    sam = SpectralSampler(specs[0][1], cfg)
    lam = 2.0
    a_s = sam.sample_increments(0.01 * lam**1.5, RngSpec(90), n)
    b_s = lam * sam.sample_increments(0.01, RngSpec(91), n)
    p_scale = stats.ks_2samp(a_s @ E1, b_s @ E1).pvalue
    ok = p_min > 0.01 and p_scale > 0.01
    _report(8, ok, f"projection KS min p = {p_min:.3f} over 12 spec/direction "
                   f"cells; scaling KS p = {p_scale:.3f} (both > 0.01)")


def test_criterion_09_halfspace_decay_exact():
    errs = []
    for spec in (StableSpec(1.5, SphericalDensity.constant(2)),
                 StableSpec(1.5, SphericalDensity.cosine_tilt(2, 1.0, 0.5, [0.0, 1.0]))):
        e = decay_exponent(spec, E2)
        fit = exact_halfspace_decay(e, 0.3 * np.sqrt(0.5) ** np.arange(6))
        errs.append(abs(fit.slope - e))
    worst = max(errs)
    _report(9, worst <= 1e-10,
            f"regression on exact half-space values: max |slope - exponent| = {worst:.1e} (<= 1e-10)")


@pytest.mark.slow
def test_criterion_10_halfspace_decay_montecarlo():
    spec = StableSpec(1.5, SphericalDensity.constant(2))
    hs = HalfSpace([0.0, 0.0], [0.0, 1.0])
    e = decay_exponent(spec, E2)
    payoff = lambda y: np.where(y[..., 1] > 0, np.maximum(y[..., 1], 0.0) ** e, 0.0)
    cfg = PathConfig(n_rays=256, dt=1e-4)
    rep = run_decay_experiment(spec, hs, [0.0, 0.0], cfg, n_samples=100_000,
                               rng=RngSpec(7), payoff=payoff)
    diff = abs(rep.beta_fitted - e)
    covered = rep.ci[0] <= e <= rep.ci[1]
    _report(10, diff <= 0.02 and covered,
            f"half-space MC decay: fitted {rep.beta_fitted:.4f} vs {e:.4f} "
            f"(|diff| {diff:.4f} <= 0.02), ci covers: {covered}")


@pytest.mark.slow
def test_criterion_11_ball_decay_two_normals():
    tilt = StableSpec(1.5, SphericalDensity.cosine_tilt(2, 1.0, 0.5, [0.0, 1.0]))
    ball = Ball([0.0, 0.0], 2.0)
    cfg = PathConfig(n_rays=256, dt=2e-4)
    ts = 0.3 * np.sqrt(0.5) ** np.arange(6)
    reports = {}
    for z, label in ([[0.0, 2.0], "top"], [[2.0, 0.0], "side"]):
        reports[label] = run_decay_experiment(tilt, ball, z, cfg,
                                              n_samples=100_000,
                                              rng=RngSpec(11), ray_points=ts)
    a, b = reports["top"], reports["side"]
    da = abs(a.beta_fitted - a.beta_predicted)
    db = abs(b.beta_fitted - b.beta_predicted)
    ordered = (a.beta_fitted < b.beta_fitted) == (a.beta_predicted < b.beta_predicted)
    ok = da <= 0.05 and db <= 0.05 and ordered
    _report(11, ok, f"ball decay: top {a.beta_fitted:.4f}/{a.beta_predicted:.4f} "
                    f"side {b.beta_fitted:.4f}/{b.beta_predicted:.4f} "
                    f"(diffs {da:.3f}, {db:.3f} <= 0.05), ordering ok: {ordered}")


@pytest.mark.slow
def test_criterion_12_harmonic_reduction():
    iso = StableSpec(1.5, SphericalDensity.constant(2))
    ball = Ball([0.0, 0.0], 2.0)
    cfg = PathConfig(n_rays=256, dt=2e-4)
    reps = run_reduction_check(iso, ball, [0.0, 2.0], cfg,
                               [0.25, 0.125, 0.0625], n_samples=100_000,
                               rng=RngSpec(21))
    summary = reduction_tightening(reps)
    factors_ok = all(f <= 0.8 for f in summary["factors"])
    gaps = [a - b for a, b in zip(summary["max_abs_dev"][:-1],
                                  summary["max_abs_dev"][1:])]
    noise_ok = all(se < gap for se, gap in zip(summary["max_se"][1:], gaps))
    _report(12, factors_ok and noise_ok,
            f"harmonic reduction: max|ratio-1| = "
            f"{[round(d, 4) for d in summary['max_abs_dev']]}, factors "
            f"{[round(f, 2) for f in summary['factors']]} (<= 0.8), "
            f"MC error below gaps: {noise_ok}")


def test_criterion_13_reproducibility(tmp_path):
    spec = {"alpha": 1.5, "dim": 2,
            "theta": {"kind": "cosine-tilt", "c0": 1.0, "c1": 0.5,
                      "axis": [0.0, 1.0]}}
    ball = {"kind": "ball", "center": [0.0, 0.0], "radius": 2.0}
    sp = tmp_path / "spec.json"
    sp.write_text(json.dumps(spec))
    dm = tmp_path / "ball.json"
    dm.write_text(json.dumps(ball))
    blobs = []
    for tag in ("r1", "r2"):
        out = tmp_path / tag
        code = dispatch(["decay-experiment", "--spec", str(sp), "--domain",
                         str(dm), "--z", "0,2", "--n", "2000", "--dt", "1e-3",
                         "--seed", "7", "--csv", "--out", str(out), "--quiet"])
        assert code == 0
        blobs.append((open(out / "result.json", "rb").read(),
                      open(out / "rays.csv", "rb").read(),
                      json.load(open(out / "manifest.json"))))
    same_files = blobs[0][0] == blobs[1][0] and blobs[0][1] == blobs[1][1]
    m1, m2 = blobs[0][2], blobs[1][2]
    for m in (m1, m2):
        m.pop("started_at")
        m.pop("finished_at")
    _report(13, same_files and m1 == m2,
            "manifest-driven re-run is byte-identical (modulo timestamps)")
