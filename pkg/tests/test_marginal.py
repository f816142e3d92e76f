import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import special

from harmonic_predictive.errors import ProblemSpecError
from harmonic_predictive.marginal import (
    Marginal,
    gaussian_prior_marginal,
    harmonic_marginal,
    harmonic_marginal_by_quadrature,
    harmonic_marginal_dz,
    laplacian_m,
    laplacian_m_power,
)
from harmonic_predictive.numerics import radial_expectation


def _stencil(func, point, h):
    point = np.asarray(point, dtype=float)
    total = 0.0
    for i in range(point.size):
        e = np.zeros_like(point)
        e[i] = h
        total += (func(point + e) - 2.0 * func(point) + func(point - e)) / h**2
    return total


# ============================================================================
# Harmonic marginal values
# ============================================================================

def test_harmonic_marginal_at_origin():
    assert_allclose(harmonic_marginal(0.0, 1.0, 4), 0.5, rtol=1e-15)


def test_harmonic_marginal_exponential_case():
    assert_allclose(harmonic_marginal(2.0, 1.0, 4), 0.5 * (1.0 - math.exp(-1.0)), rtol=1e-14)


@pytest.mark.parametrize("z, v, d", [(5.0, 2.0, 3), (0.3, 1.0, 3), (7.0, 0.5, 5), (1e-3, 1.0, 6)])
def test_harmonic_marginal_matches_quadrature(z, v, d):
    oracle = harmonic_marginal_by_quadrature(z, v, d)
    assert_allclose(harmonic_marginal(z, v, d), oracle.value, rtol=1e-10)


def test_harmonic_marginal_closed_form():
    # m_H(w, v) = ||w||^-(d-2) P(d/2 - 1, ||w||^2 / (2v))
    d, v, r = 5, 1.5, 2.0
    expected = r ** -(d - 2) * special.gammainc(d / 2 - 1, r * r / (2 * v))
    assert_allclose(harmonic_marginal(r * r, v, d), expected, rtol=1e-13)


@pytest.mark.parametrize("d", [3, 4, 5, 8])
@pytest.mark.parametrize("lam", [0.1, 0.7, 3.0])
def test_harmonic_marginal_scaling(d, lam):
    z = np.array([0.0, 0.2, 1.0, 6.0, 40.0])
    v = 1.3
    scaled = harmonic_marginal(lam * lam * z, lam * lam * v, d)
    assert_allclose(scaled, lam ** -(d - 2) * harmonic_marginal(z, v, d), rtol=1e-12)


def test_harmonic_marginal_is_decreasing_in_z():
    z = np.linspace(0.0, 50.0, 201)
    values = harmonic_marginal(z, 1.0, 3)
    assert np.all(np.diff(values) < 0)


@pytest.mark.parametrize("d", [3, 4, 7])
def test_harmonic_marginal_tail(d):
    v = 1.3
    z = 1e4 * v
    a = d / 2 - 1
    b = 1.0 / (special.gamma(a) * (2 * v) ** a)
    tail = b * special.gamma(a) * (2 * v / z) ** a
    assert_allclose(harmonic_marginal(z, v, d), tail, rtol=1e-3)


def test_harmonic_marginal_rejects_bad_arguments():
    with pytest.raises(ProblemSpecError):
        harmonic_marginal(-1.0, 1.0, 3)
    with pytest.raises(ProblemSpecError):
        harmonic_marginal(1.0, 0.0, 3)
    with pytest.raises(ProblemSpecError):
        harmonic_marginal(1.0, 1.0, 2)


# ============================================================================
# Derivatives and Laplacians
# ============================================================================

def test_first_derivative_at_origin():
    assert_allclose(harmonic_marginal_dz(0.0, 1.0, 4, 1), -0.125, rtol=1e-14)


def test_derivative_order_must_be_one_or_two():
    with pytest.raises(ProblemSpecError):
        harmonic_marginal_dz(1.0, 1.0, 4, 3)


def test_derivatives_match_finite_differences(rng):
    for _ in range(50):
        d = int(rng.integers(3, 8))
        z = float(rng.uniform(0.5, 10.0))
        v = float(rng.uniform(0.5, 3.0))
        h = 1e-4 * (1.0 + z)
        fd1 = (harmonic_marginal(z + h, v, d) - harmonic_marginal(z - h, v, d)) / (2 * h)
        assert_allclose(harmonic_marginal_dz(z, v, d, 1), fd1, rtol=1e-6)
        h2 = 1e-3 * (1.0 + z)
        fd2 = (
            harmonic_marginal(z + h2, v, d) - 2 * harmonic_marginal(z, v, d) + harmonic_marginal(z - h2, v, d)
        ) / h2**2
        assert_allclose(harmonic_marginal_dz(z, v, d, 2), fd2, rtol=1e-4)


def test_uniform_marginal_is_flat():
    m = Marginal.uniform(4)
    assert laplacian_m(m, 3.0, 1.0, 4) == 0.0
    assert m.plugin_mean_factor(3.0, 1.0) == 1.0


def test_harmonic_marginal_is_superharmonic(rng):
    for _ in range(50):
        d = int(rng.integers(3, 9))
        m = Marginal.harmonic(d)
        z, v = float(rng.uniform(0.0, 5.0)), float(rng.uniform(0.5, 5.0))
        assert laplacian_m(m, z, v, d) <= 0.0
        assert laplacian_m_power(m, z, v, d, 0.5) <= 0.0


def test_laplacian_matches_axis_stencil():
    m = Marginal.harmonic(4)
    stencil = _stencil(lambda w: float(m.at(w, 1.0)), [1.0, 0.0, 0.0, 0.0], 1e-3)
    assert_allclose(laplacian_m(m, 1.0, 1.0, 4), stencil, rtol=1e-5)


def test_power_rule_reduces_to_plain_laplacian_at_one():
    m = Marginal.harmonic(5)
    assert_allclose(laplacian_m_power(m, 2.0, 1.5, 5, 1.0), laplacian_m(m, 2.0, 1.5, 5), rtol=1e-13)


def test_power_ratio_at_one_is_the_laplacian_ratio():
    m = Marginal.harmonic(5)
    z = np.array([0.0, 0.5, 4.0, 100.0])
    assert_allclose(m.laplacian_power_ratio(z, 1.5, 1.0), m.laplacian_ratio(z, 1.5), rtol=1e-13)


def test_power_laplacian_matches_stencil_of_square():
    m = Marginal.harmonic(4)
    stencil = _stencil(lambda w: float(m.at(w, 1.0)) ** 2, [1.0, 0.0, 0.0, 0.0], 1e-3)
    assert_allclose(laplacian_m_power(m, 1.0, 1.0, 4, 2.0), stencil, rtol=1e-5)


def test_laplacian_requires_matching_dimension():
    with pytest.raises(ProblemSpecError):
        laplacian_m(Marginal.harmonic(4), 1.0, 1.0, 5)


def test_laplacian_power_rejects_zero_exponent():
    with pytest.raises(ProblemSpecError):
        laplacian_m_power(Marginal.harmonic(4), 1.0, 1.0, 4, 0.0)


def test_posterior_mean_factor_shrinks():
    m = Marginal.harmonic(4)
    factor = m.plugin_mean_factor(np.array([0.5, 4.0, 100.0]), 1.0)
    assert np.all(factor < 1.0) and np.all(factor > 0.0)
    # James-Stein-like limit 1 - (d - 2) v / ||x||^2 far from the origin
    assert_allclose(m.plugin_mean_factor(1e4, 1.0), 1.0 - 2.0 / 1e4, rtol=1e-8)


# ============================================================================
# Gaussian prior marginal and smoothing
# ============================================================================

def test_gaussian_prior_marginal_at_origin():
    assert_allclose(gaussian_prior_marginal(0.0, 1.0, 3, 2.0, 1.5), (2 * math.pi * 4.0) ** -1.5, rtol=1e-14)


def test_gaussian_prior_marginal_small_scale_limit():
    z, v, d = 2.0, 1.0, 3
    phi = (2 * math.pi * v) ** (-d / 2) * math.exp(-z / (2 * v))
    assert_allclose(gaussian_prior_marginal(z, v, d, 1e-12, 1.0), phi, rtol=1e-10)


def test_gaussian_marginal_family_matches_function():
    m = Marginal.gaussian(3, 0.7, 2.0)
    assert_allclose(m.value(1.2, 0.9), gaussian_prior_marginal(1.2, 0.9, 3, 0.7, 2.0), rtol=1e-14)


@pytest.mark.parametrize("kind", ["harmonic", "gaussian"])
def test_heat_semigroup(kind, rng):
    for _ in range(4):
        d = int(rng.integers(3, 6))
        m = Marginal.harmonic(d) if kind == "harmonic" else Marginal.gaussian(d, 1.0, 1.0)
        u, v, t = float(rng.uniform(0.0, 3.0)), float(rng.uniform(0.5, 2.0)), 0.5
        smoothed = radial_expectation(lambda r: m.value(np.asarray(r) ** 2, v), u, t, d, tol=1e-12)
        assert_allclose(smoothed.value, m.value(u * u, v + t * t), rtol=1e-10)
