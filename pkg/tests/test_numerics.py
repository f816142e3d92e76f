import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import integrate, stats

from harmonic_predictive.errors import NumericalFailure, ProblemSpecError, QuadratureError
from harmonic_predictive.marginal import Marginal
from harmonic_predictive.numerics import (
    Estimate,
    RadialProfile,
    adaptive_quad,
    gauss_radial_expectation,
    log_lambda_moment,
    mc_mean,
    mc_moments,
    noncentral_chi2_logpdf,
    radial_expectation,
    radial_laplacian,
    reg_lower_inc_gamma,
)


# ============================================================================
# Special functions
# ============================================================================

def test_reg_lower_inc_gamma_values():
    assert_allclose(reg_lower_inc_gamma(1.0, 1.0), 1.0 - math.exp(-1.0), rtol=1e-14)
    assert reg_lower_inc_gamma(2.5, 0.0) == 0.0


def test_reg_lower_inc_gamma_matches_quadrature():
    oracle = integrate.quad(lambda t: t**-0.5 * math.exp(-t), 0.0, 0.5, epsabs=1e-15, epsrel=1e-14)[0]
    assert_allclose(reg_lower_inc_gamma(0.5, 0.5), oracle / math.gamma(0.5), rtol=1e-12)


def test_reg_lower_inc_gamma_domain():
    with pytest.raises(ProblemSpecError):
        reg_lower_inc_gamma(0.0, 1.0)
    with pytest.raises(ProblemSpecError):
        reg_lower_inc_gamma(1.0, -1.0)


@pytest.mark.parametrize("s", [0.5, 1.0, 1.5, 3.0])
def test_log_lambda_moment_branches_agree_at_the_switch(s):
    c = np.array([5e-9, 2e-8])
    series = log_lambda_moment(s, c, small=1.0)
    direct = log_lambda_moment(s, c, small=0.0)
    assert_allclose(np.exp(series), np.exp(direct), rtol=1e-10)


def test_log_lambda_moment_at_zero():
    assert_allclose(log_lambda_moment(2.0, 0.0), math.log(0.5))


@pytest.mark.parametrize(
    "df, nc, s",
    [
        (3, 0.0, [0.5, 3.0, 10.0, 40.0]),
        (3, 4.0, [0.5, 3.0, 10.0, 40.0]),
        (5, 25.0, [5.0, 20.0, 30.0, 60.0]),
        (4, 400.0, [330.0, 404.0, 480.0]),
    ],
)
def test_noncentral_chi2_logpdf_matches_scipy(df, nc, s):
    s = np.asarray(s)
    expected = stats.ncx2.logpdf(s, df, nc) if nc > 0 else stats.chi2.logpdf(s, df)
    assert_allclose(noncentral_chi2_logpdf(s, df, nc), expected, rtol=1e-9)


# ============================================================================
# Quadrature
# ============================================================================

def test_adaptive_quad_simple_integrals():
    assert_allclose(adaptive_quad(lambda x: 1.0, 0.0, 1.0).value, 1.0)
    est = adaptive_quad(lambda x: x**-0.5, 0.0, 1.0, singular_exponent=-0.5)
    assert_allclose(est.value, 2.0, rtol=1e-12)


def test_adaptive_quad_incomplete_gamma_identity():
    # d = 4, c = 1: the lambda-integral of the hypercube integrands
    est = adaptive_quad(lambda lam: lam**0.0 * math.exp(-lam), 0.0, 1.0, tol=1e-12)
    assert_allclose(est.value, 1.0 - math.exp(-1.0), rtol=1e-12)


def test_adaptive_quad_raises_on_divergence():
    with pytest.raises(QuadratureError):
        adaptive_quad(lambda x: 1.0 / x, 0.0, 1.0, limit=20)


def test_adaptive_quad_raises_when_subdivisions_run_out():
    with pytest.raises(QuadratureError) as info:
        adaptive_quad(lambda x: math.sin(1.0 / x), 1e-3, 1.0, limit=3, layer="oscillating")
    assert info.value.layer == "oscillating"
    assert info.value.estimate is not None


KNOWN_INTEGRALS = [
    *[(lambda x, k=k: x**k, 0.0, 1.0, 1.0 / (k + 1)) for k in range(8)],
    (lambda x: math.exp(-x), 0.0, math.inf, 1.0),
    (lambda x: math.exp(-x * x), 0.0, math.inf, 0.5 * math.sqrt(math.pi)),
    (lambda x: 1.0 / (1.0 + x * x), 0.0, math.inf, 0.5 * math.pi),
    (lambda x: 1.0 / (4.0 + x * x), -math.inf, math.inf, 0.5 * math.pi),
    (lambda x: x * math.exp(-x), 0.0, math.inf, 1.0),
    (lambda x: x * x * math.exp(-x), 0.0, math.inf, 2.0),
    (math.sin, 0.0, math.pi, 2.0),
    (math.cos, 0.0, 0.5 * math.pi, 1.0),
    (math.log, 0.0, 1.0, -1.0),
    (math.sqrt, 0.0, 1.0, 2.0 / 3.0),
    (lambda x: 1.0 / (1.0 + x), 0.0, 1.0, math.log(2.0)),
    (math.exp, 0.0, 1.0, math.e - 1.0),
]


@pytest.mark.parametrize("f, a, b, exact", KNOWN_INTEGRALS)
def test_adaptive_quad_error_bound_covers_the_true_error(f, a, b, exact):
    est = adaptive_quad(f, a, b)
    assert abs(est.value - exact) <= est.error + 1e-14 * max(1.0, abs(exact))


def test_adaptive_quad_rejects_nonintegrable_singularity():
    with pytest.raises(ProblemSpecError):
        adaptive_quad(lambda x: 1.0 / x, 0.0, 1.0, singular_exponent=-1.0)


@pytest.mark.parametrize("r", [0.3, 1.0, 2.5])
def test_radial_laplacian_of_squared_norm(r):
    assert_allclose(radial_laplacian(lambda x: x * x, r, 3), 6.0, atol=1e-6)


def test_radial_laplacian_of_fundamental_solution():
    assert_allclose(radial_laplacian(lambda x: x**-2.0, 1.0, 4), 0.0, atol=1e-4)


def test_radial_laplacian_at_origin_uses_even_extension():
    assert_allclose(radial_laplacian(lambda x: x * x, 0.0, 5), 10.0, atol=1e-6)


def _stencil_laplacian(func, point, h=1e-3):
    point = np.asarray(point, dtype=float)
    total = 0.0
    for i in range(point.size):
        e = np.zeros_like(point)
        e[i] = h
        total += (func(point + e) - 2.0 * func(point) + func(point - e)) / h**2
    return total


def test_radial_laplacian_matches_full_stencil():
    m = Marginal.harmonic(4)
    profile = m.profile(1.0, power=0.5)
    radial = radial_laplacian(profile, 1.0, 4)
    stencil = _stencil_laplacian(lambda w: float(m.at(w, 1.0)) ** 0.5, [1.0, 0.0, 0.0, 0.0])
    assert radial < 0
    assert_allclose(radial, stencil, rtol=1e-4)


def test_radial_expectation_of_constant_is_one():
    est = radial_expectation(lambda r: np.ones_like(r), 1.3, 0.7, 4)
    assert_allclose(est.value, 1.0, rtol=1e-10)


@pytest.mark.parametrize("d", [3, 4, 6])
def test_radial_expectation_second_moment(d):
    est = radial_expectation(lambda r: r * r, 0.0, 1.0, d)
    assert_allclose(est.value, d, rtol=1e-10)


def test_radial_expectation_at_zero_scale_is_exact():
    est = radial_expectation(lambda r: r**3, 2.0, 0.0, 3)
    assert est.value == 8.0 and est.error == 0.0


def test_radial_expectation_small_scale_converges_to_centre():
    g = lambda r: np.exp(-np.asarray(r) ** 2)  # noqa: E731
    target = math.exp(-1.0)
    errors = [abs(radial_expectation(g, 1.0, t, 3).value - target) for t in (1e-2, 1e-3)]
    assert errors[1] < errors[0]


@pytest.mark.parametrize("d", [3, 5])
def test_gauss_rule_agrees_with_adaptive_expectation(d):
    g = lambda r: np.exp(-0.5 * np.asarray(r) ** 2 / 3.0)  # noqa: E731
    for c in (0.0, 1.0, 4.0):
        fixed = gauss_radial_expectation(g, c, 1.2, d)[0]
        adaptive = radial_expectation(g, c, 1.2, d, tol=1e-11).value
        assert_allclose(fixed, adaptive, rtol=1e-9)


# ============================================================================
# Profiles
# ============================================================================

def test_constant_profile():
    p = RadialProfile.constant_profile(2.0)
    assert_allclose(p([0.0, 3.0]), [2.0, 2.0])
    assert p.constant == 2.0
    assert p.tabulate(10.0) is p


def test_tabulated_profile_tracks_exact_and_falls_back_beyond_range():
    exact = RadialProfile.from_log(lambda r: -0.5 * np.asarray(r) ** 2 / (1.0 + np.asarray(r)))
    table = exact.tabulate(8.0, n=512)
    r = np.linspace(0.0, 8.0, 97)
    assert_allclose(table.log(r), exact.log(r), atol=1e-6)
    assert_allclose(table.log(12.0), exact.log(12.0), rtol=1e-15)


def test_from_table_rejects_radii_outside_the_grid():
    p = RadialProfile.from_table([0.0, 1.0, 2.0], [1.0, 0.5, 0.2])
    assert_allclose(p(1.0), 0.5)
    with pytest.raises(ProblemSpecError):
        p(3.0)


# ============================================================================
# Monte Carlo
# ============================================================================

def test_constant_stream_has_zero_stderr():
    est = mc_mean(lambda rng, size: np.full(size, 2.5), 200_000, seed=3)
    assert est.value == 2.5
    assert est.error == 0.0


def test_normal_stream_mean_is_within_clt_bound():
    est = mc_mean(lambda rng, size: rng.standard_normal(size), 1_000_000, seed=42)
    assert abs(est.value) < 4.0 / math.sqrt(1_000_000)
    assert_allclose(est.error, 1e-3, rtol=0.01)


def test_results_do_not_depend_on_worker_count():
    sampler = lambda rng, size: rng.standard_normal((size, 2)) ** 2  # noqa: E731
    one = mc_moments(sampler, 300_000, seed=9, workers=1)
    eight = mc_moments(sampler, 300_000, seed=9, workers=8)
    assert np.array_equal(one[0], eight[0])
    assert np.array_equal(one[1], eight[1])


def test_different_seeds_give_different_streams():
    a = mc_mean(lambda rng, size: rng.standard_normal(size), 1000, seed=1)
    b = mc_mean(lambda rng, size: rng.standard_normal(size), 1000, seed=2)
    assert a.value != b.value


def test_non_finite_samples_raise():
    with pytest.raises(NumericalFailure) as info:
        mc_mean(lambda rng, size: np.full(size, np.inf), 100, seed=0)
    assert info.value.count == 100


@pytest.mark.parametrize("n, seed", [(1, 0), (10, -1), (10, 2**64)])
def test_invalid_monte_carlo_arguments(n, seed):
    with pytest.raises(ProblemSpecError):
        mc_mean(lambda rng, size: np.zeros(size), n, seed=seed)


def test_estimate_helpers():
    a = Estimate(1.0, 0.3, 100)
    b = Estimate(0.5, 0.4, 100)
    diff = a.minus(b)
    assert_allclose(diff.value, 0.5)
    assert_allclose(diff.error, 0.5)
    assert a.within(1.8, k=3)
    assert not a.within(2.0, k=3)
    assert_allclose(a.z_score(0.4), 2.0)
    with pytest.raises(ProblemSpecError):
        Estimate(1.0, -1.0, 10)
