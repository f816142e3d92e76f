import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import integrate

from harmonic_predictive.appendix_lab import (
    HypercubeIntegralSpec,
    HypercubeLab,
    appendix_sweep,
    eta_int,
    mtp2_check,
    mtp2_sweep,
    psi_s_bound,
    rho_int,
    verify_identities,
    verify_inequalities,
    verify_psi_condition,
    zeta,
)
from harmonic_predictive.errors import ProblemSpecError


# ============================================================================
# Integrand and integrals
# ============================================================================

def test_zeta_value():
    assert_allclose(zeta([1.0, 1.0], s=1.0, z=0.0, d=4), 1.0 / 9.0, rtol=1e-15)


def test_zeta_is_batched_and_singular_on_the_boundary_for_d3():
    values = zeta(np.array([[0.5, 0.5], [1.0, 0.2]]), s=2.0, z=1.0, d=5)
    assert values.shape == (2,)
    assert math.isinf(float(zeta([0.0, 0.5], s=1.0, z=0.0, d=3)))


def test_zeta_rejects_points_outside_the_cube():
    with pytest.raises(ProblemSpecError):
        zeta([1.5, 0.5], s=1.0, z=0.0, d=4)


def test_rho_closed_form():
    spec = HypercubeIntegralSpec(nu=2, d=4, s=1.0, z=0.0)
    assert_allclose(rho_int(spec), 2.0 * math.log(2.0) - math.log(3.0), rtol=1e-12)


@pytest.mark.parametrize("nu", [2, 3])
def test_tensor_weights_integrate_the_unit_cube(nu):
    # at d=4, z=0 the integrand is total**-2, so l=2 leaves the cube volume
    lab = HypercubeLab(nu, 4, 0.5, 0.0)
    assert_allclose(lab.rho(0, 0, 2).value, 1.0, rtol=1e-13)
    assert_allclose(lab.eta(0, 2).value, 1.0, rtol=1e-13)


@pytest.mark.parametrize("d", [3, 4, 5])
def test_rho_is_symmetric_in_its_coordinates(d):
    lab = HypercubeLab(2, d, 1.3, 0.7)
    assert_allclose(lab.rho(1, 0, -1).value, lab.rho(0, 1, -1).value, rtol=1e-11)


@pytest.mark.parametrize("d, j2, l", [(4, 0, 0), (5, 1, -1), (6, 2, 1)])
def test_eta_matches_adaptive_quadrature(d, j2, l):
    s, z = 2.0, 1.5
    spec = HypercubeIntegralSpec(nu=2, d=d, s=s, z=z)

    def integrand(lam2):
        total = 1.0 + lam2 + s
        return lam2**j2 * total**l * float(zeta([1.0, lam2], s, z, d))

    oracle = integrate.quad(integrand, 0.0, 1.0, epsabs=1e-15, epsrel=1e-13)[0]
    assert_allclose(eta_int(j2, l, spec), oracle, rtol=1e-10)


def test_rho_for_three_coordinates_matches_nested_quadrature():
    s, z, d = 1.0, 0.5, 4
    spec = HypercubeIntegralSpec(nu=3, d=d, s=s, z=z)
    oracle = integrate.tplquad(
        lambda a, b, c: float(zeta([a, b, c], s, z, d)),
        0.0, 1.0, 0.0, 1.0, 0.0, 1.0,
        epsabs=1e-13, epsrel=1e-11,
    )[0]
    assert_allclose(rho_int(spec), oracle, rtol=1e-9)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(nu=4, d=4, s=1.0, z=0.0),
        dict(nu=2, d=2, s=1.0, z=0.0),
        dict(nu=2, d=4, s=0.0, z=0.0),
        dict(nu=2, d=4, s=1.0, z=-1.0),
        dict(nu=2, d=4, s=1.0, z=0.0, j1=-1),
    ],
)
def test_invalid_integral_specs(kwargs):
    with pytest.raises(ProblemSpecError):
        HypercubeIntegralSpec(**kwargs)


# ============================================================================
# Identities, inequalities, psi condition
# ============================================================================

@pytest.mark.parametrize(
    "s, z, d, nu", [(1.0, 1.0, 4, 2), (10.0, 0.1, 5, 2), (0.5, 3.0, 3, 3), (2.0, 7.0, 4, 3)]
)
def test_identities_hold(s, z, d, nu):
    checks = verify_identities(s, z, d, nu)
    assert len(checks) == 10
    for check in checks:
        assert check.passed, check.as_dict()
        assert check.margin <= 1e-8


@pytest.mark.parametrize("s, z, d, nu", [(1.0, 1.0, 4, 2), (0.2, 8.0, 3, 2), (5.0, 0.5, 5, 3)])
def test_inequalities_hold(s, z, d, nu):
    checks = verify_inequalities(s, z, d, nu)
    assert [c.name for c in checks] == ["fkg", "ratio_lower", "moment_200", "moment_110"]
    for check in checks:
        assert check.passed, check.as_dict()


def test_psi_bound_value():
    assert_allclose(psi_s_bound(4, 2, 0.5), 8.0 / 3.0, rtol=1e-15)


@pytest.mark.parametrize("factor", [1.0, 100.0])
@pytest.mark.parametrize("z", [0.1, 1.0, 10.0])
def test_psi_condition_holds_above_its_bound(factor, z):
    s = factor * psi_s_bound(4, 2, 0.5)
    check = verify_psi_condition(s, z, 4, 2, 0.5)
    assert check.required
    assert check.passed, check.as_dict()


def test_psi_condition_below_its_bound_is_informational():
    check = verify_psi_condition(0.5, 1.0, 4, 2, 0.5)
    assert not check.required


def test_psi_condition_rejects_bad_c():
    with pytest.raises(ProblemSpecError):
        verify_psi_condition(1.0, 1.0, 4, 2, 1.0)


# ============================================================================
# MTP2
# ============================================================================

def test_mtp2_single_pair():
    assert mtp2_check([0.2, 0.9], [0.7, 0.1], s=1.0, z=2.0, d=4)


def test_mtp2_rejects_boundary_points():
    with pytest.raises(ProblemSpecError):
        mtp2_check([0.0, 0.5], [0.5, 0.5], s=1.0, z=0.0, d=4)


@pytest.mark.parametrize("d, nu", [(3, 2), (4, 3), (5, 2)])
def test_mtp2_random_pairs(d, nu):
    checked, failed = mtp2_sweep(20_000, s=0.7, z=4.0, d=d, nu=nu, seed=5)
    assert checked == 20_000
    assert failed == 0


# ============================================================================
# Sweep
# ============================================================================

def test_small_sweep_passes():
    report = appendix_sweep(dims=(4,), nus=(2,), n_points=2, seed=1, n_pairs=1_000)
    assert report.passed
    assert report.mtp2_failures == 0
    summary = report.as_dict()
    assert summary["n_failed"] == 0
    assert summary["n_checks"] == 2 * (10 + 4 + 1)
    assert summary["mtp2"][0]["checked"] == 1_000
