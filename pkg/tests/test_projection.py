import numpy as np
import pytest
from scipy.special import gamma

from stabledecay import (BetaField, QuadConfig, SphericalDensity, StableSpec,
                         beta, beta_bounds, beta_from_constants, c_minus,
                         c_plus, decay_exponent, directional_law,
                         projected_density, wallis)

E1 = np.array([1.0, 0.0])
E2 = np.array([0.0, 1.0])


def wallis_closed(alpha):
    return np.sqrt(np.pi) * gamma((alpha + 1) / 2) / gamma(alpha / 2 + 1)


@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
def test_cplus_isotropic_matches_wallis(alpha):
    spec = StableSpec(alpha, SphericalDensity.constant(2))
    np.testing.assert_allclose(c_plus(spec, E1), wallis_closed(alpha), rtol=1e-12)


def test_cplus_dense_trapezoid_oracle(tilt15_e1):
    """Brute-force trapezoid with 1e6 nodes pins the tilted hemisphere
    integral; the production quadrature must agree to 1e-8."""
    theta = np.linspace(-np.pi / 2, np.pi / 2, 1_000_001)
    integrand = (1.0 + 0.5 * np.cos(theta)) * np.cos(theta) ** 1.5
    oracle = np.trapezoid(integrand, theta)
    np.testing.assert_allclose(c_plus(tilt15_e1, E1), oracle, atol=1e-8)


def test_cplus_closed_form_tilt(tilt15_e1):
    closed = wallis(2, 1.5) + 0.5 * wallis(2, 2.5)
    np.testing.assert_allclose(c_plus(tilt15_e1, E1), closed, rtol=1e-12)


def test_cminus_is_antipodal_cplus(tilt15_e1):
    u = np.array([0.6, 0.8])
    assert c_minus(tilt15_e1, u) == c_plus(tilt15_e1, -u)


def test_cminus_smaller_on_tilt_axis(tilt15_e1):
    assert c_minus(tilt15_e1, E1) < c_plus(tilt15_e1, E1)


@pytest.mark.parametrize("alpha,expect", [(1.5, 0.75), (0.8, 0.4)])
def test_beta_isotropic(alpha, expect):
    spec = StableSpec(alpha, SphericalDensity.constant(2))
    np.testing.assert_allclose(beta(spec, E1), expect, atol=1e-12)


def test_beta_alpha1_no_drift():
    spec = StableSpec(1.0, SphericalDensity.constant(2))
    assert beta(spec, E2) == pytest.approx(0.5, abs=1e-14)


def test_beta_near_one_guard():
    with pytest.raises(ValueError):
        beta_from_constants(1.0 + 1e-9, 1.0, 1.0)


def test_directional_law_consistency(tilt15_e1):
    law = directional_law(tilt15_e1, E1)
    assert law.c_plus > 0 and law.c_minus > 0
    recomputed = beta_from_constants(1.5, law.c_plus, law.c_minus)
    assert abs(recomputed - law.beta) < 1e-14
    assert law.drift_b is None
    lo, hi = max(0.0, 1.5 - 1.0), min(1.5, 1.0)
    assert lo < law.beta < hi


def test_decay_exponent_antipodal(tilt15_e1):
    u = np.array([0.28, -0.96])
    np.testing.assert_allclose(decay_exponent(tilt15_e1, u) + beta(tilt15_e1, u),
                               1.5, atol=1e-12)


def test_antipodal_identity_grid(tilt15_e1, drift1):
    for spec in (tilt15_e1, drift1):
        phis = np.linspace(0, np.pi, 32, endpoint=False)
        for phi in phis:
            u = np.array([np.cos(phi), np.sin(phi)])
            assert abs(beta(spec, u) + beta(spec, -u) - spec.alpha) < 1e-10


def test_beta_bounds_isotropic():
    spec = StableSpec(0.8, SphericalDensity.constant(2))
    bb = beta_bounds(spec, n_dirs=128)
    np.testing.assert_allclose([bb.beta_min, bb.beta_max], [0.4, 0.4], atol=1e-9)


def test_beta_bounds_sum_and_window(tilt15_e1):
    bb = beta_bounds(tilt15_e1, n_dirs=256)
    assert abs(bb.beta_min + bb.beta_max - 1.5) < 1e-9
    assert max(0.0, 0.5) < bb.beta_min <= bb.beta_max < 1.0
    # extremes sit on the tilt axis
    np.testing.assert_allclose(np.abs(bb.argmax_u @ E1), 1.0, atol=1e-2)


def test_projected_density_homogeneity(tilt15_e1):
    u = np.array([0.0, 1.0])
    v1 = projected_density(tilt15_e1, u, 1.3)
    v2 = projected_density(tilt15_e1, u, 2.6)
    np.testing.assert_allclose(v2 / v1, 2.0 ** (-2.5), rtol=1e-12)
    with pytest.raises(ValueError):
        projected_density(tilt15_e1, u, 0.0)


def test_projected_density_symmetric():
    spec = StableSpec(1.2, SphericalDensity.constant(2))
    u = np.array([0.6, -0.8])
    assert projected_density(spec, u, 1.0) == pytest.approx(
        projected_density(spec, u, -1.0))


def test_projected_density_oracle(tilt06):
    theta = np.linspace(-np.pi / 2, np.pi / 2, 400_001)
    integrand = (1.0 + 0.5 * np.cos(theta)) * np.cos(theta) ** 0.6
    cp = np.trapezoid(integrand, theta)
    np.testing.assert_allclose(projected_density(tilt06, E1, 2.0),
                               cp * 2.0 ** (-1.6), atol=1e-8)


def test_grid_refinement_convergence(tilt15_e1):
    """Doubling the nodes moves beta by less than 10x the reported error."""
    from stabledecay.errors import NumericFailure
    from stabledecay.projection import c_plus_batch

    coarse = QuadConfig(n_nodes=64, max_refine=1, tol=1e-16)
    u = np.array([0.38, np.sqrt(1.0 - 0.38**2)])
    with pytest.raises(NumericFailure) as info:
        c_plus_batch(tilt15_e1, u[None, :], coarse)
    val = float(info.value.value[0])
    err_reported = info.value.err_estimate
    fine = c_plus(tilt15_e1, u, QuadConfig(n_nodes=256))
    assert abs(val - fine) <= 10 * max(err_reported * abs(fine), 1e-15)


def test_beta_lipschitz_on_grid(tilt15_e1):
    """Continuity probe: finite-difference Lipschitz bound on a grid
    refinement for the smooth built-in kinds."""
    phis = np.linspace(0, 2 * np.pi, 257)
    betas = np.array([beta(tilt15_e1, np.array([np.cos(p), np.sin(p)]))
                      for p in phis])
    du = 2 * np.sin((phis[1] - phis[0]) / 2)
    K = np.max(np.abs(np.diff(betas))) / du
    assert K < 1.0
    # refined grid obeys the same constant with slack
    phis2 = np.linspace(0, 2 * np.pi, 513)
    betas2 = np.array([beta(tilt15_e1, np.array([np.cos(p), np.sin(p)]))
                       for p in phis2])
    du2 = 2 * np.sin((phis2[1] - phis2[0]) / 2)
    assert np.max(np.abs(np.diff(betas2))) / du2 <= K * 1.1 + 1e-9


def test_beta_field_matches_direct(tilt15, drift1):
    for spec in (tilt15, drift1):
        field = BetaField(spec)
        for phi in (0.1, 1.3, 2.9, 4.0, 5.5):
            u = np.array([np.cos(phi), np.sin(phi)])
            assert abs(field.value(u) - beta(spec, u)) < 1e-10


def test_beta_field_spline_kind():
    bump = StableSpec(1.5, SphericalDensity.bump_plus_floor(2, 1.0, 2.0, 5.0, [0.0, 1.0]))
    field = BetaField(bump)
    u = np.array([0.3, np.sqrt(1 - 0.09)])
    assert abs(field.value(u) - beta(bump, u)) < 1e-9


def test_beta_field_gradient_fd(tilt15):
    field = BetaField(tilt15, decay=True)
    u = np.array([0.3, np.sqrt(1 - 0.09)])
    t = np.array([-u[1], u[0]])
    h = 1e-6
    up = (u + h * t) / np.linalg.norm(u + h * t)
    um = (u - h * t) / np.linalg.norm(u - h * t)
    fd = (field.value(up) - field.value(um)) / (2 * h)
    np.testing.assert_allclose(field.gradient(u) @ t, fd, atol=1e-8)


def test_d3_closed_form_and_quadrature():
    spec = StableSpec(1.2, SphericalDensity.cosine_tilt(3, 1.0, 0.4, [0.0, 0.0, 1.0]))
    u = np.array([0.0, 0.0, 1.0])
    closed = wallis(3, 1.2) + 0.4 * wallis(3, 2.2)
    np.testing.assert_allclose(c_plus(spec, u), closed, rtol=1e-9)
    # hemisphere moment in closed form: 2 pi / (a + 1)
    np.testing.assert_allclose(wallis(3, 1.2), 2 * np.pi / 2.2, rtol=1e-12)


def test_d3_isotropic_beta():
    spec = StableSpec(0.9, SphericalDensity.constant(3))
    u = np.array([0.0, 0.6, 0.8])
    np.testing.assert_allclose(beta(spec, u), 0.45, atol=1e-9)


def test_d4_qmc_isotropic():
    spec = StableSpec(1.3, SphericalDensity.constant(4))
    u = np.array([0.5, 0.5, 0.5, 0.5])
    assert abs(beta(spec, u) - 0.65) < 2e-3
