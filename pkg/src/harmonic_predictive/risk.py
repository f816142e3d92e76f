"""
Alpha-divergence risks and risk differences.

Risk differences are always "invariant minus candidate", so a positive
value means the candidate improves on the best invariant density. Estimators:

- crn_mc: one Monte Carlo loop over paired (X, Y) with common random numbers;
- w_representation: the same expectation after the change of variables
  w = gamma x + (1 - gamma) y, z proportional to y - x;
- jensen_bound: a lower bound replacing the 1/beta power by kappa;
- rho_oracle: the t-integral of -Delta rho / rho^(2/beta - 1), by quadrature;
- alpha1_formula / kl_integral: the analytic forms at alpha = 1 and alpha = -1.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import ProblemSpecError, QuadratureError
from .marginal import Marginal, PriorKind, neg_sqrt_laplacian_ratio
from .numerics import (
    Estimate,
    RadialProfile,
    adaptive_quad,
    gauss_legendre_unit,
    gauss_radial_expectation,
    gauss_radial_log_expectation,
    mc_moments,
    radial_expectation,
    radial_laplacian_ratio,
)
from .predictive import InducedDensityFamily, gaussian_prior_bayes, posterior_mean
from .problem import ProblemSpec, alpha_div_gaussians, gaussian_logpdf

logger = logging.getLogger(__name__)

LOG_CLAMP = 700.0
MIN_REPORTED_N = 1000
TABLE_THRESHOLD = 10_000


class Method:
    CRN_MC = "crn_mc"
    RHO_ORACLE = "rho_oracle"
    ALPHA1_FORMULA = "alpha1_formula"
    KL_INTEGRAL = "kl_integral"
    W_REPRESENTATION = "w_representation"
    JENSEN_BOUND = "jensen_bound"


DENSITY_KINDS = ("uniform", "harmonic", "constant", "gaussian")


@dataclass(frozen=True, eq=False)
class RiskQuery:
    """One risk evaluation: problem, true mean, candidate density, MC size and seed."""

    spec: ProblemSpec
    mu: np.ndarray
    density: str = "uniform"
    n: int = 100_000
    seed: int = 0
    c: Optional[float] = None
    workers: int = 1

    def __post_init__(self):
        mu = mu_vector(self.mu, self.spec.d)
        object.__setattr__(self, "mu", mu)
        if self.density not in DENSITY_KINDS:
            raise ProblemSpecError(f"unknown density kind {self.density!r}")
        if self.density == "gaussian" and not (self.c is not None and self.c > 0):
            raise ProblemSpecError("gaussian density needs a positive prior scale c")
        if self.n < MIN_REPORTED_N:
            raise ProblemSpecError(f"risk queries need n >= {MIN_REPORTED_N}, got {self.n}")


@dataclass(frozen=True)
class RiskDifferenceResult:
    diff: Estimate
    method: str
    mu_norm: float
    components: Dict[str, Estimate] = field(default_factory=dict)
    n_clamped: int = 0

    def as_dict(self) -> dict:
        out = {
            "method": self.method,
            "mu_norm": self.mu_norm,
            "diff": self.diff.value,
            "stderr": self.diff.error,
            "n": self.diff.n,
            "n_clamped": self.n_clamped,
        }
        for name, est in self.components.items():
            out[name] = est.value
            out[f"{name}_stderr"] = est.error
        return out


def mu_vector(mu, d: int) -> np.ndarray:
    """A scalar is read as ||mu|| along the first axis."""
    mu = np.asarray(mu, dtype=float)
    if mu.ndim == 0:
        vec = np.zeros(d)
        vec[0] = float(mu)
        mu = vec
    if mu.shape != (d,):
        raise ProblemSpecError(f"mu must be a {d}-vector or a norm")
    if not np.all(np.isfinite(mu)):
        raise ProblemSpecError("mu must be finite")
    return mu


def normalizer_radius(spec: ProblemSpec, mu_norm: float) -> float:
    """Table range for the normalizer over ||x||, fixed before sampling."""
    return 1.2 * (mu_norm + math.sqrt(spec.v_x) * (math.sqrt(spec.d) + 10.0))


def _maybe_tabulate(family: InducedDensityFamily, spec: ProblemSpec, mu_norm: float, n: int):
    if n > TABLE_THRESHOLD and not family.is_constant:
        return family.with_table(normalizer_radius(spec, mu_norm))
    return family


def _clamp(log_values: np.ndarray):
    over = log_values > LOG_CLAMP
    return np.minimum(log_values, LOG_CLAMP), over


def _warn_clamped(count: int, where: str) -> None:
    if count:
        logger.warning(f"[RISK] {where}: clamped {count} log ratios at {LOG_CLAMP}")


# ============================================================================
# Closed forms
# ============================================================================

def invariant_risk_closed_form(spec: ProblemSpec, q_variance: float) -> float:
    """
    Constant risk of the invariant density N(x, q_variance I):

        (1 - g) / (beta (1 - beta)) + g D_alpha{phi(., v_y/gamma) || phi(., q_variance)},

    with g = gamma^((1 - beta) d / 2).
    """
    spec.require_interior("invariant_risk_closed_form")
    if not q_variance > 0:
        raise ProblemSpecError(f"q_variance must be positive, got {q_variance}")
    k = spec.constants
    g = k.gamma ** ((1.0 - k.beta) * spec.d / 2.0)
    base = (1.0 - g) * k.risk_prefactor
    target = k.invariant_variance(spec)
    if q_variance == target:
        return base
    zero = np.zeros(spec.d)
    return base + g * float(alpha_div_gaussians(zero, target, zero, q_variance, spec.alpha))


def extended_bayes_risk(spec: ProblemSpec, c: float) -> float:
    """Bayes risk of the Bayes density under the prior N(0, c v_x gamma I)."""
    spec.require_interior("extended_bayes_risk")
    if not c > 0:
        raise ProblemSpecError(f"prior scale c must be positive, got {c}")
    k = spec.constants
    ratio = (1.0 + c * k.gamma) / (1.0 + c)
    return -math.expm1(spec.d * (1.0 - k.beta) / 2.0 * math.log(ratio)) * k.risk_prefactor


# ============================================================================
# Monte Carlo risks
# ============================================================================

def risk_mc(query: RiskQuery) -> Estimate:
    """
    Monte Carlo alpha-risk of one candidate at one mu.

    Gaussian candidates integrate Y out exactly through alpha_div_gaussians;
    induced candidates draw one Y per X. At alpha = 1 the loss of the
    plug-in density is ||mu_hat - mu||^2 / (2 v_y).
    """
    spec, mu = query.spec, query.mu
    d = spec.d
    if spec.alpha == -1.0:
        raise ProblemSpecError("risk_mc covers alpha in (-1, 1]; use kl_risk_difference_integral at -1")
    sx = math.sqrt(spec.v_x)

    if spec.alpha == 1.0:
        marginal = _plugin_marginal(query)

        def sampler(rng, size):
            x = mu + sx * rng.standard_normal((size, d))
            err = posterior_mean(spec, x, marginal) - mu
            return np.einsum("ij,ij->i", err, err) / (2.0 * spec.v_y)

        est = _mean(sampler, query)
        logger.info(f"[RISK] alpha=1 plug-in ({marginal.label}) risk {est.value:.6g} +- {est.error:.2g}")
        return est

    k = spec.constants
    if query.density in ("uniform", "constant", "gaussian"):
        if query.density == "gaussian":
            c = query.c

            def candidate(x):
                p = gaussian_prior_bayes(spec, np.zeros(d), c)
                return c * k.gamma * x / (1.0 + c * k.gamma), p.variance

        else:

            def candidate(x):
                return x, k.invariant_variance(spec)

        def sampler(rng, size):
            x = mu + sx * rng.standard_normal((size, d))
            mean, var = candidate(x)
            return alpha_div_gaussians(mu, spec.v_y, mean, var, spec.alpha)

        return _mean(sampler, query)

    family = _maybe_tabulate(InducedDensityFamily.harmonic(spec), spec, float(np.linalg.norm(mu)), query.n)
    one_minus = 1.0 - k.beta
    sy = math.sqrt(spec.v_y)
    v_inv = k.invariant_variance(spec)

    def sampler(rng, size):
        x = mu + sx * rng.standard_normal((size, d))
        y = mu + sy * rng.standard_normal((size, d))
        log_r = gaussian_logpdf(y - x, v_inv) - gaussian_logpdf(y - mu, spec.v_y) + family.log_ratio(x, y)
        expo, over = _clamp(one_minus * log_r)
        return np.column_stack((-np.expm1(expo) * k.risk_prefactor, over))

    mean, stderr = mc_moments(sampler, query.n, query.seed, workers=query.workers)
    _warn_clamped(int(round(mean[1] * query.n)), "risk_mc")
    return Estimate(float(mean[0]), float(stderr[0]), query.n, query.seed)


def _plugin_marginal(query: RiskQuery) -> Marginal:
    d = query.spec.d
    if query.density == "harmonic":
        return Marginal.harmonic(d)
    if query.density == "gaussian":
        return Marginal.gaussian(d, query.c, query.spec.v_x)
    return Marginal.uniform(d)


def _mean(sampler, query: RiskQuery) -> Estimate:
    mean, stderr = mc_moments(sampler, query.n, query.seed, workers=query.workers)
    return Estimate(float(mean[0]), float(stderr[0]), query.n, query.seed)


def extended_bayes_risk_mc(spec: ProblemSpec, c: float, n: int, seed: int, workers: int = 1) -> Estimate:
    """MC Bayes risk of gaussian_prior_bayes with mu drawn from N(0, c v_x gamma I)."""
    spec.require_interior("extended_bayes_risk_mc")
    if not c > 0:
        raise ProblemSpecError(f"prior scale c must be positive, got {c}")
    k = spec.constants
    d = spec.d
    prior_sd = math.sqrt(c * spec.v_x * k.gamma)
    sx = math.sqrt(spec.v_x)
    var = gaussian_prior_bayes(spec, np.zeros(d), c).variance
    shrink = c * k.gamma / (1.0 + c * k.gamma)

    def sampler(rng, size):
        mu = prior_sd * rng.standard_normal((size, d))
        x = mu + sx * rng.standard_normal((size, d))
        return alpha_div_gaussians(mu, spec.v_y, shrink * x, var, spec.alpha)

    mean, stderr = mc_moments(sampler, n, seed, workers=workers)
    return Estimate(float(mean[0]), float(stderr[0]), n, seed)


# ============================================================================
# Risk differences
# ============================================================================

def risk_difference_crn(
    spec: ProblemSpec,
    mu,
    n: int,
    seed: int,
    family: Optional[InducedDensityFamily] = None,
    workers: int = 1,
) -> RiskDifferenceResult:
    """
    R(p_U) - R(p_f) by paired Monte Carlo over (X, Y).

    Each draw contributes (p_U/phi)^(1-beta) * expm1((1-beta) log(p_f/p_U))
    / (beta (1 - beta)), which is exactly zero when f is constant. The
    candidate defaults to the harmonic Bayes density.
    """
    spec.require_interior("risk_difference_crn")
    mu = mu_vector(mu, spec.d)
    mu_norm = float(np.linalg.norm(mu))
    if family is None:
        family = InducedDensityFamily.harmonic(spec)
    family = _maybe_tabulate(family, spec, mu_norm, n)
    k = spec.constants
    d = spec.d
    one_minus = 1.0 - k.beta
    sx, sy = math.sqrt(spec.v_x), math.sqrt(spec.v_y)
    v_inv = k.invariant_variance(spec)

    def sampler(rng, size):
        x = mu + sx * rng.standard_normal((size, d))
        y = mu + sy * rng.standard_normal((size, d))
        log_ru = gaussian_logpdf(y - x, v_inv) - gaussian_logpdf(y - mu, spec.v_y)
        log_ratio = family.log_ratio(x, y)
        a, over_a = _clamp(one_minus * log_ru)
        b, over_b = _clamp(one_minus * log_ratio)
        ab, over_ab = _clamp(a + b)
        base = np.exp(a)
        diff = base * np.expm1(b) * k.risk_prefactor
        loss_u = -np.expm1(a) * k.risk_prefactor
        loss_f = -np.expm1(ab) * k.risk_prefactor
        return np.column_stack((diff, loss_u, loss_f, over_a | over_b | over_ab))

    mean, stderr = mc_moments(sampler, n, seed, workers=workers)
    n_clamped = int(round(mean[3] * n))
    _warn_clamped(n_clamped, "risk_difference_crn")
    result = RiskDifferenceResult(
        diff=Estimate(float(mean[0]), float(stderr[0]), n, seed),
        method=Method.CRN_MC,
        mu_norm=mu_norm,
        components={
            "risk_invariant": Estimate(float(mean[1]), float(stderr[1]), n, seed),
            "risk_candidate": Estimate(float(mean[2]), float(stderr[2]), n, seed),
        },
        n_clamped=n_clamped,
    )
    logger.info(
        f"[RISK] crn diff at |mu|={mu_norm:g}: {result.diff.value:.6g} +- {result.diff.error:.2g}"
    )
    return result


def risk_difference_w_representation(
    spec: ProblemSpec,
    mu,
    n: int,
    seed: int,
    family: Optional[InducedDensityFamily] = None,
    workers: int = 1,
) -> RiskDifferenceResult:
    """
    gamma^((1-beta)d/2) / (beta (1-beta)) E[(N(||W + xi Z||) / f(W))^(beta-1) - 1]

    with W ~ N(mu, v_x gamma I), Z ~ N(0, I) and N the normalizer of f.
    """
    spec.require_interior("risk_difference_w_representation")
    mu = mu_vector(mu, spec.d)
    mu_norm = float(np.linalg.norm(mu))
    if family is None:
        family = InducedDensityFamily.harmonic(spec)
    family = _maybe_tabulate(family, spec, mu_norm, n)
    k = spec.constants
    d = spec.d
    scale = k.gamma ** ((1.0 - k.beta) * d / 2.0) * k.risk_prefactor
    sw = math.sqrt(spec.v_x * k.gamma)

    def sampler(rng, size):
        w = mu + sw * rng.standard_normal((size, d))
        x = w + k.xi * rng.standard_normal((size, d))
        log_ratio = family.log_ratio_from_w(np.linalg.norm(w, axis=1), np.linalg.norm(x, axis=1))
        expo, over = _clamp((1.0 - k.beta) * log_ratio)
        return np.column_stack((scale * np.expm1(expo), over))

    mean, stderr = mc_moments(sampler, n, seed, workers=workers)
    n_clamped = int(round(mean[1] * n))
    _warn_clamped(n_clamped, "risk_difference_w_representation")
    return RiskDifferenceResult(
        diff=Estimate(float(mean[0]), float(stderr[0]), n, seed),
        method=Method.W_REPRESENTATION,
        mu_norm=mu_norm,
        n_clamped=n_clamped,
    )


def risk_difference_jensen_bound(
    spec: ProblemSpec, mu, n: int, seed: int, workers: int = 1
) -> RiskDifferenceResult:
    """
    Lower bound on the harmonic risk difference for non-integer 1/beta:

        gamma^((1-beta)d/2) / (beta (1-beta))
            E[(E_{Z1}[m^kappa(W + xi (Z1 + Z))] / m^kappa(W))^((beta-1)/(beta kappa)) - 1],

    with m = m_H(., v_x gamma).
    """
    spec.require_interior("risk_difference_jensen_bound")
    k = spec.constants
    if k.kappa is None:
        raise ProblemSpecError("the kappa bound needs a non-integer 1/beta")
    mu = mu_vector(mu, spec.d)
    mu_norm = float(np.linalg.norm(mu))
    d = spec.d
    power_family = InducedDensityFamily(
        spec=spec, f=Marginal.harmonic(d).profile(spec.v_x * k.gamma, power=float(k.kappa))
    )
    power_family = _maybe_tabulate(power_family, spec, mu_norm, n)
    scale = k.gamma ** ((1.0 - k.beta) * d / 2.0) * k.risk_prefactor
    exponent = (k.beta - 1.0) / (k.beta * k.kappa)
    sw = math.sqrt(spec.v_x * k.gamma)

    def sampler(rng, size):
        w = mu + sw * rng.standard_normal((size, d))
        x = w + k.xi * rng.standard_normal((size, d))
        # log_ratio_from_w gives log m^kappa(W) - log E m^kappa
        log_ratio = power_family.log_ratio_from_w(np.linalg.norm(w, axis=1), np.linalg.norm(x, axis=1))
        expo, over = _clamp(-exponent * log_ratio)
        return np.column_stack((scale * np.expm1(expo), over))

    mean, stderr = mc_moments(sampler, n, seed, workers=workers)
    n_clamped = int(round(mean[1] * n))
    _warn_clamped(n_clamped, "risk_difference_jensen_bound")
    return RiskDifferenceResult(
        diff=Estimate(float(mean[0]), float(stderr[0]), n, seed),
        method=Method.JENSEN_BOUND,
        mu_norm=mu_norm,
        n_clamped=n_clamped,
    )


# ============================================================================
# rho-representation oracle
# ============================================================================

@dataclass(frozen=True)
class RhoOracleSettings:
    """Grid and rule sizes for the rho oracle, tightened inner to outer."""

    t_order: int = 24
    inner_order: int = 48
    outer_order: int = 64
    n_radii: int = 160
    quad_tol: float = 1e-7


def _rho_h_profile(f: RadialProfile, t: float, beta: float, d: int, radii: np.ndarray, order: int):
    """
    H_t(r) = -Delta rho_t / rho_t^(2/beta - 1) on `radii`, where
    rho_t(u) = E[f(u + t Z1)]^(beta/2).
    """

    def log_rho(r):
        return 0.5 * beta * gauss_radial_log_expectation(f.log, r, t, d, order=order)

    ratio = radial_laplacian_ratio(log_rho, radii, d)
    return -ratio * np.exp((2.0 - 2.0 / beta) * log_rho(radii))


def risk_difference_rho_oracle(
    spec: ProblemSpec,
    mu,
    f: Optional[RadialProfile] = None,
    quad_tol: float = 1e-7,
    settings: Optional[RhoOracleSettings] = None,
) -> RiskDifferenceResult:
    """
    Risk difference E[rho(W, Z)] by deterministic quadrature.

    For every Gauss-Legendre node t in (0, xi): rho_t is evaluated on a
    radial grid with the fixed tensor rule, its Laplacian by central
    differences, and H_t = -Delta rho_t / rho_t^(2/beta - 1) is splined.
    Then E_Z[H_t(w + t Z)] and the outer W-expectation are tensor-rule
    expectations. The error is the gap to the half-order t rule plus the
    relative floor `quad_tol`.
    """
    spec.require_interior("risk_difference_rho_oracle")
    settings = settings or RhoOracleSettings(quad_tol=quad_tol)
    mu = mu_vector(mu, spec.d)
    mu_norm = float(np.linalg.norm(mu))
    k = spec.constants
    d = spec.d
    if f is None:
        f = Marginal.harmonic(d).profile(spec.v_x * k.gamma, power=1.0 / k.beta)
    if f.constant is not None:
        return RiskDifferenceResult(Estimate(0.0, 0.0, 1), Method.RHO_ORACLE, mu_norm)

    sw = math.sqrt(spec.v_x * k.gamma)
    reach = math.sqrt(d) + 8.0
    w_max = mu_norm + sw * reach
    h_max = w_max + k.xi * reach
    w_grid = np.linspace(0.0, w_max, settings.n_radii)
    h_grid = np.linspace(0.0, h_max, settings.n_radii)

    def inner(nodes_t):
        values = []
        for t in nodes_t:
            h_vals = _rho_h_profile(f, t, k.beta, d, h_grid, settings.inner_order)
            if not np.all(np.isfinite(h_vals)):
                raise QuadratureError(f"non-finite Laplacian ratio at t={t:g}", layer="rho_laplacian")
            spline = CubicSpline(h_grid, h_vals, bc_type=((1, 0.0), "not-a-knot"))
            g = gauss_radial_expectation(
                lambda r: spline(np.minimum(r, h_max)), w_grid, t, d, order=settings.inner_order
            )
            values.append(t * g)
        return np.array(values)

    def t_integral(order):
        u, wts = gauss_legendre_unit(order)
        nodes = k.xi * u
        return k.xi * np.tensordot(wts, inner(nodes), axes=1)

    fine = t_integral(settings.t_order)
    coarse = t_integral(max(settings.t_order // 2, 2))
    log_f_w = f.log(w_grid)
    scale = 4.0 * k.gamma ** ((1.0 - k.beta) * d / 2.0) / k.beta**2

    def outer(profile_vals):
        spline = CubicSpline(w_grid, profile_vals, bc_type=((1, 0.0), "not-a-knot"))
        return float(
            gauss_radial_expectation(
                lambda r: spline(np.minimum(r, w_max)), mu_norm, sw, d, order=settings.outer_order
            )[0]
        )

    weight = np.exp((1.0 - k.beta) * log_f_w)
    value = scale * outer(weight * fine)
    coarse_value = scale * outer(weight * coarse)
    error = abs(value - coarse_value) + settings.quad_tol * abs(value)
    logger.info(f"[RISK] rho oracle at |mu|={mu_norm:g}: {value:.6g} (+- {error:.2g})")
    n_evals = settings.t_order * settings.n_radii * settings.inner_order**2
    return RiskDifferenceResult(
        diff=Estimate(value, error, n_evals), method=Method.RHO_ORACLE, mu_norm=mu_norm
    )


# ============================================================================
# Endpoint formulas
# ============================================================================

def alpha1_risk_difference(
    spec: ProblemSpec, mu, marginal: Marginal, quad_tol: float = 1e-9
) -> RiskDifferenceResult:
    """(2 v_x^2 / v_y) E_X[-Delta m^(1/2) / m^(1/2)] with X ~ N(mu, v_x I), m = m(., v_x)."""
    mu = mu_vector(mu, spec.d)
    mu_norm = float(np.linalg.norm(mu))
    if marginal.kind is PriorKind.UNIFORM:
        return RiskDifferenceResult(Estimate(0.0, 0.0, 1), Method.ALPHA1_FORMULA, mu_norm)
    v = spec.v_x

    def g(r):
        r = np.asarray(r, dtype=float)
        return neg_sqrt_laplacian_ratio(marginal, r * r, v)

    est = radial_expectation(g, mu_norm, math.sqrt(v), spec.d, tol=quad_tol)
    diff = est.scaled(2.0 * v * v / spec.v_y)
    logger.info(f"[RISK] alpha=1 formula at |mu|={mu_norm:g}: {diff.value:.6g}")
    return RiskDifferenceResult(diff, Method.ALPHA1_FORMULA, mu_norm)


def kl_risk_difference_integral(
    spec: ProblemSpec, mu, marginal: Marginal, quad_tol: float = 1e-8
) -> RiskDifferenceResult:
    """2 int_{v_*}^{v_x} E_{Z ~ N(mu, v I)}[-Delta m^(1/2) / m^(1/2)(Z, v)] dv at alpha = -1."""
    if spec.alpha != -1.0:
        raise ProblemSpecError(f"kl_risk_difference_integral needs alpha = -1, got {spec.alpha}")
    mu = mu_vector(mu, spec.d)
    mu_norm = float(np.linalg.norm(mu))
    if marginal.kind is PriorKind.UNIFORM:
        return RiskDifferenceResult(Estimate(0.0, 0.0, 1), Method.KL_INTEGRAL, mu_norm)
    v_star = spec.constants.v_star
    inner_tol = quad_tol * 1e-2

    def integrand(v):
        est = radial_expectation(
            lambda r: neg_sqrt_laplacian_ratio(marginal, np.asarray(r) ** 2, v),
            mu_norm,
            math.sqrt(v),
            spec.d,
            tol=inner_tol,
        )
        return est.value

    outer = adaptive_quad(integrand, v_star, spec.v_x, tol=quad_tol, layer="kl_v_integral")
    diff = outer.scaled(2.0)
    logger.info(f"[RISK] KL integral at |mu|={mu_norm:g}: {diff.value:.6g}")
    return RiskDifferenceResult(diff, Method.KL_INTEGRAL, mu_norm)
