"""Boundary decay of harmonic functions for non-symmetric strictly
alpha-stable processes: directional positivity exponents, the pointwise
nonlocal generator, stable-path exit Monte Carlo, and the end-to-end
decay experiments."""

__version__ = "0.1.0"

from .errors import BudgetExceeded, ExperimentInconclusive, NumericFailure
from .rng import RngSpec
from .spectral import (SphericalDensity, StableSpec, ValidationReport,
                       evaluate_theta, levy_density, validate_spec)
from .projection import (BetaBounds, BetaField, DirectionalLaw, QuadConfig,
                         beta, beta_bounds, beta_from_constants, c_minus,
                         c_plus, decay_exponent, directional_law,
                         projected_density, wallis)
from .geometry import (Ball, BallIntersection, BoundaryFrame, DomainGeometry,
                       Ellipsoid, HalfSpace, PerturbedBall, TransformedDomain,
                       boundary_frame, check_odl2, certify_ball_conditions)
from .generator import (BoundaryPower, ConstantField, CustomFunction,
                        GaussianBump, GaussianMix, GeneratorQuad,
                        HalfspacePower, TestFunction, apply_generator,
                        apply_generator_bruteforce, g_boundedness_scan,
                        halfspace_harmonicity_scan)
from .montecarlo import (ExitEnsemble, ExitSample, HarmonicEstimate,
                         PathConfig, SpectralSampler, cms_parameters,
                         harmonic_estimate, sample_exit, sample_exits,
                         sample_increment_d, sample_stable_1d)
from .experiments import (DecayReport, PowerLawFit, ReductionReport,
                          exact_halfspace_decay, far_indicator_payoff,
                          fit_power_law, geometric_ray_points,
                          reduction_tightening, relative_oscillation,
                          run_decay_experiment, run_reduction_check)
