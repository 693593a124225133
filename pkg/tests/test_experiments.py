import numpy as np
import pytest

from stabledecay import (Ball, ExperimentInconclusive, HalfSpace, PathConfig,
                         RngSpec, decay_exponent, exact_halfspace_decay,
                         fit_power_law, geometric_ray_points,
                         reduction_tightening, relative_oscillation,
                         run_decay_experiment, run_reduction_check)

CFG = PathConfig(n_rays=256, dt=1e-3)


def test_relative_oscillation():
    assert relative_oscillation([2.0, 2.0, 2.0]) == 1.0
    assert relative_oscillation([1.0, 4.0]) == 4.0
    with pytest.raises(ValueError):
        relative_oscillation([1.0, -2.0])
    with pytest.raises(ValueError):
        relative_oscillation([])


def test_fit_power_law_exact():
    fit = fit_power_law([(t, t**0.75, 0.0) for t in (0.1, 0.2, 0.4, 0.8)])
    assert abs(fit.slope - 0.75) < 1e-12


def test_fit_power_law_scaling_invariance():
    fit = fit_power_law([(t, 3.0 * t**0.75, 0.0) for t in (0.1, 0.2, 0.4, 0.8)])
    assert abs(fit.slope - 0.75) < 1e-12
    assert abs(fit.intercept - np.log(3.0)) < 1e-12


def test_fit_power_law_guards():
    with pytest.raises(ValueError):
        fit_power_law([(0.1, 1.0, 0.0)] * 4)                 # degenerate design
    with pytest.raises(ValueError):
        fit_power_law([(0.1, 1.0, 0.0), (0.2, 1.2, 0.0), (0.4, 1.4, 0.0)])
    with pytest.raises(ValueError):
        fit_power_law([(t, 0.01, 0.02) for t in (0.1, 0.2, 0.4, 0.8)])


def test_fit_power_law_ci_calibration():
    """Synthetic power with 1% relative noise: the reported 95% interval
    covers the truth in at least 93 of 100 seeded replications."""
    ts = np.array([0.1, 0.141, 0.2, 0.283, 0.4, 0.566, 0.8])
    hits = 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        vals = ts**0.6 * (1.0 + 0.01 * rng.standard_normal(ts.size))
        ses = 0.01 * vals
        fit = fit_power_law(list(zip(ts, vals, ses)))
        hits += fit.ci[0] <= 0.6 <= fit.ci[1]
    assert hits >= 93


def test_exact_halfspace_regression():
    fit = exact_halfspace_decay(0.75, [0.3, 0.212, 0.15, 0.106, 0.075, 0.053])
    assert abs(fit.slope - 0.75) < 1e-10


def test_geometric_ray_points():
    ts = geometric_ray_points(PathConfig(dt=1e-3), 1.5)
    assert ts[0] == pytest.approx(0.3)
    assert np.all(np.diff(ts) < 0)
    assert ts[-1] >= 0.05 * np.sqrt(0.5)
    with pytest.raises(ExperimentInconclusive):
        geometric_ray_points(PathConfig(dt=0.05), 1.5)   # window collapses


def test_decay_halfspace_smoke(iso15):
    hs = HalfSpace([0.0, 0.0], [0.0, 1.0])
    e = decay_exponent(iso15, np.array([0.0, 1.0]))
    payoff = lambda y: np.where(y[..., 1] > 0,
                                np.maximum(y[..., 1], 0.0) ** e, 0.0)
    rep = run_decay_experiment(iso15, hs, [0.0, 0.0], CFG, n_samples=5000,
                               rng=RngSpec(100), payoff=payoff)
    assert rep.beta_predicted == pytest.approx(0.75)
    assert abs(rep.beta_fitted - 0.75) < 0.1
    assert rep.ci[0] < rep.beta_fitted < rep.ci[1]
    ts = [t for t, _, _ in rep.rays]
    assert all(a > b for a, b in zip(ts, ts[1:]))
    assert "jump_exit_fraction" in rep.diagnostics


def test_decay_predicted_matches_projection(tilt15):
    ball = Ball([0.0, 0.0], 2.0)
    ts = 0.3 * np.sqrt(0.5) ** np.arange(4)
    rep = run_decay_experiment(tilt15, ball, [0.0, 2.0], CFG, n_samples=2000,
                               rng=RngSpec(1), ray_points=ts)
    assert rep.beta_predicted == pytest.approx(
        decay_exponent(tilt15, np.array([0.0, -1.0])), abs=1e-12)


def test_decay_inconclusive(tilt15):
    """A payoff that almost never pays makes the estimates drown in noise."""
    ball = Ball([0.0, 0.0], 2.0)
    ts = 0.3 * np.sqrt(0.5) ** np.arange(4)
    payoff = lambda y: (np.linalg.norm(y, axis=-1) > 60.0).astype(float)
    with pytest.raises(ExperimentInconclusive) as info:
        run_decay_experiment(tilt15, ball, [0.0, 2.0], CFG, n_samples=300,
                             rng=RngSpec(2), ray_points=ts, payoff=payoff)
    assert info.value.report is not None
    assert np.isnan(info.value.report.beta_fitted)


def test_decay_frame_invariance(tilt15):
    """Normalized and ambient frames agree path for path with matched
    seeds (grid, Gaussian factor and jump thresholds all rotate/scale)."""
    ball = Ball([0.0, 0.0], 2.0)
    ts = 0.3 * np.sqrt(0.5) ** np.arange(4)
    a = run_decay_experiment(tilt15, ball, [2.0, 0.0], CFG, n_samples=2000,
                             rng=RngSpec(3), ray_points=ts, frame_mode="normalized")
    b = run_decay_experiment(tilt15, ball, [2.0, 0.0], CFG, n_samples=2000,
                             rng=RngSpec(3), ray_points=ts, frame_mode="original")
    assert a.beta_fitted == pytest.approx(b.beta_fitted, abs=1e-9)
    # with dilation too
    small = Ball([0.0, 0.0], 1.0)
    ts2 = 0.1 * np.sqrt(0.5) ** np.arange(4)
    c = run_decay_experiment(tilt15, small, [1.0, 0.0], CFG, n_samples=1000,
                             rng=RngSpec(5), ray_points=ts2, frame_mode="normalized")
    d = run_decay_experiment(tilt15, small, [1.0, 0.0], CFG, n_samples=1000,
                             rng=RngSpec(5), ray_points=ts2, frame_mode="original")
    assert c.beta_fitted == pytest.approx(d.beta_fitted, abs=1e-9)


def test_reduction_halfspace_uncut(iso15):
    """With the collar cut removed g equals the exact harmonic profile,
    so the reduction ratio is 1 up to Monte Carlo noise."""
    hs = HalfSpace([0.0, 0.0], [0.0, 1.0])
    reps = run_reduction_check(iso15, hs, [0.0, 0.0], PathConfig(dt=2e-4),
                               [0.25], n_samples=20_000, rng=RngSpec(22),
                               cut=np.inf)
    r = reps[0]
    assert r.ratio_min > 1.0 - 4 * r.max_se - 0.01
    assert r.ratio_max < 1.0 + 4 * r.max_se + 0.01


def test_reduction_radius_guard(iso15):
    ball = Ball([0.0, 0.0], 2.0)
    with pytest.raises(ValueError):
        run_reduction_check(iso15, ball, [0.0, 2.0], CFG, [0.5],
                            n_samples=100, rng=RngSpec(1))


def test_reduction_inconclusive_near_boundary(iso15):
    ball = Ball([0.0, 0.0], 2.0)
    coarse = PathConfig(dt=5e-3)   # one-step scale ~ 0.03
    with pytest.raises(ExperimentInconclusive):
        run_reduction_check(iso15, ball, [0.0, 2.0], coarse, [0.05],
                            n_samples=100, rng=RngSpec(1),
                            eval_depths=(0.15,), scale_dt=False)


def test_reduction_tightening_summary(iso15):
    ball = Ball([0.0, 0.0], 2.0)
    reps = run_reduction_check(iso15, ball, [0.0, 2.0], PathConfig(dt=5e-4),
                               [0.25, 0.125], n_samples=20_000, rng=RngSpec(21))
    summary = reduction_tightening(reps)
    assert summary["radii"] == [0.25, 0.125]
    assert len(summary["factors"]) == 1
    assert summary["max_abs_dev"][1] < summary["max_abs_dev"][0]
