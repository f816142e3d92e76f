"""
Predictive densities p(y | x) for the isotropic normal model.

Every density exposes a vectorised log-evaluator. The f-induced kinds
(including the harmonic Bayes density) are written relative to the best
invariant density p_U:

    p_f(y | x) = f(gamma x + (1 - gamma) y) / E[f(x + xi Z)] * p_U(y | x),

so the batched log-ratio log p_f - log p_U is the quantity the risk
estimators consume. Normalizers depend on x only through ||x||.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from .errors import ProblemSpecError, QuadratureError
from .marginal import Marginal
from .numerics import (
    GAUSS_ORDER,
    Estimate,
    RadialProfile,
    gauss_radial_log_expectation,
    mc_moments,
    radial_expectation,
)
from .problem import ProblemSpec, gaussian_logpdf

logger = logging.getLogger(__name__)

WEIGHT_CLIP = 1e6
NORMALIZER_TOL = 1e-9
TABLE_SIZE = 512


class DensityKind(str, Enum):
    BEST_INVARIANT = "best_invariant"
    F_INDUCED = "f_induced"
    HARMONIC_BAYES = "harmonic_bayes"
    PLUGIN_ALPHA1 = "plugin_alpha1"
    GAUSSIAN_BAYES = "gaussian_bayes"


GAUSSIAN_KINDS = (DensityKind.BEST_INVARIANT, DensityKind.PLUGIN_ALPHA1, DensityKind.GAUSSIAN_BAYES)


def _norms(u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    return np.sqrt(np.einsum("...i,...i->...", u, u))


# ============================================================================
# Induced density family
# ============================================================================

@dataclass(frozen=True, eq=False)
class InducedDensityFamily:
    """
    The family x -> p_f(. | x) for one radial weight function f.

    `normalizer_table`, when present, is a frozen PCHIP table of the log
    normalizer over ||x|| used by batched evaluation.
    """

    spec: ProblemSpec
    f: RadialProfile
    kind: DensityKind = DensityKind.F_INDUCED
    normalizer_table: Optional[RadialProfile] = None
    order: int = GAUSS_ORDER

    def __post_init__(self):
        self.spec.require_interior(self.kind.value)

    @classmethod
    def harmonic(cls, spec: ProblemSpec) -> "InducedDensityFamily":
        """f = m_H^(1/beta)(., v_x gamma)."""
        spec.require_interior("harmonic_bayes")
        k = spec.constants
        f = Marginal.harmonic(spec.d).profile(spec.v_x * k.gamma, power=1.0 / k.beta)
        return cls(spec=spec, f=f, kind=DensityKind.HARMONIC_BAYES)

    @property
    def is_constant(self) -> bool:
        return self.f.constant is not None

    def log_normalizer(self, x_norm) -> np.ndarray:
        """log E[f(x + xi Z)] as a function of ||x|| (fixed tensor rule or table)."""
        x_norm = np.atleast_1d(np.asarray(x_norm, dtype=float))
        if self.is_constant:
            return np.full(x_norm.shape, math.log(self.f.constant))
        if self.normalizer_table is not None:
            return self.normalizer_table.log(x_norm)
        return self._direct_log_normalizer(x_norm)

    def _direct_log_normalizer(self, x_norm) -> np.ndarray:
        k = self.spec.constants
        return gauss_radial_log_expectation(self.f.log, x_norm, k.xi, self.spec.d, order=self.order)

    def log_normalizer_estimate(self, x_norm: float, tol: float = NORMALIZER_TOL) -> Estimate:
        """log normalizer by adaptive radial quadrature, with its propagated error."""
        if self.is_constant:
            return Estimate(math.log(self.f.constant), 0.0, 1)
        k = self.spec.constants
        shift = float(self.f.log(np.asarray(x_norm)))
        est = radial_expectation(
            lambda r: np.exp(self.f.log(r) - shift), x_norm, k.xi, self.spec.d, tol=tol
        )
        if not est.value > 0:
            raise QuadratureError(
                "normalizer is not positive", layer="normalizer", estimate=est.value, error=est.error
            )
        return Estimate(shift + math.log(est.value), est.error / est.value, est.n)

    def with_table(self, r_max: float, n: int = TABLE_SIZE) -> "InducedDensityFamily":
        """Copy with the log normalizer tabulated on [0, r_max]; exact beyond r_max."""
        if self.is_constant:
            return self
        exact = RadialProfile.from_log(self._direct_log_normalizer, label="normalizer")
        table = exact.tabulate(r_max, n=n)
        logger.debug(f"[PREDICTIVE] normalizer table: {n} radii up to {r_max:.4g}")
        return InducedDensityFamily(
            spec=self.spec, f=self.f, kind=self.kind, normalizer_table=table, order=self.order
        )

    def log_ratio(self, x, y) -> np.ndarray:
        """log p_f(y | x) - log p_U(y | x), batched over leading axes."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        shape = np.broadcast_shapes(x.shape, y.shape)[:-1]
        if self.is_constant:
            return np.zeros(shape)
        g = self.spec.constants.gamma
        w_norm = _norms(g * x + (1.0 - g) * y)
        x_norm = np.broadcast_to(_norms(x), shape)
        log_n = self.log_normalizer(x_norm.ravel()).reshape(shape)
        return self.f.log(w_norm) - log_n

    def log_ratio_from_w(self, w_norm, x_norm) -> np.ndarray:
        """Same ratio given ||w|| and ||x|| directly."""
        w_norm = np.asarray(w_norm, dtype=float)
        if self.is_constant:
            return np.zeros(w_norm.shape)
        x_norm = np.asarray(x_norm, dtype=float)
        return self.f.log(w_norm) - self.log_normalizer(x_norm.ravel()).reshape(x_norm.shape)

    def density(self, x, tol: float = NORMALIZER_TOL) -> "PredictiveDensity":
        x = np.asarray(x, dtype=float)
        if x.shape != (self.spec.d,):
            raise ProblemSpecError(f"x must be a {self.spec.d}-vector")
        log_norm = self.log_normalizer_estimate(float(_norms(x)), tol=tol)
        return PredictiveDensity(
            kind=self.kind,
            spec=self.spec,
            x=x,
            mean=x,
            variance=self.spec.constants.invariant_variance(self.spec),
            log_normalizer=log_norm,
            family=self,
        )


# ============================================================================
# Predictive density
# ============================================================================

@dataclass(frozen=True, eq=False)
class PredictiveDensity:
    """
    An evaluable predictive density at one conditioning point x.

    Gaussian kinds are N(mean, variance I). Induced kinds carry the family
    and the log normalizer estimate at ||x||.
    """

    kind: DensityKind
    spec: ProblemSpec
    x: np.ndarray = field(repr=False)
    mean: np.ndarray = field(repr=False)
    variance: float
    log_normalizer: Optional[Estimate] = None
    family: Optional[InducedDensityFamily] = field(default=None, repr=False)

    @property
    def is_gaussian(self) -> bool:
        return self.kind in GAUSSIAN_KINDS

    def log_pdf(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if self.is_gaussian:
            return gaussian_logpdf(y - self.mean, self.variance)
        return self.log_ratio_to_invariant(y) + gaussian_logpdf(y - self.x, self.variance)

    def log_ratio_to_invariant(self, y) -> np.ndarray:
        """log p(y | x) - log p_U(y | x) for induced kinds."""
        if self.family is None:
            raise ProblemSpecError(f"{self.kind.value} density is not induced from p_U")
        y = np.asarray(y, dtype=float)
        if self.family.is_constant:
            return np.zeros(y.shape[:-1])
        g = self.spec.constants.gamma
        w_norm = _norms(g * self.x + (1.0 - g) * y)
        return self.family.f.log(w_norm) - self.log_normalizer.value

    def pdf(self, y) -> np.ndarray:
        return np.exp(self.log_pdf(y))


def best_invariant(spec: ProblemSpec, x) -> PredictiveDensity:
    """p_U(y | x) = phi(y - x, v_y + beta v_x)."""
    x = np.asarray(x, dtype=float)
    k = spec.constants
    return PredictiveDensity(
        kind=DensityKind.BEST_INVARIANT,
        spec=spec,
        x=x,
        mean=x,
        variance=spec.v_y + k.beta * spec.v_x,
    )


def f_induced(spec: ProblemSpec, x, f: RadialProfile, tol: float = NORMALIZER_TOL) -> PredictiveDensity:
    return InducedDensityFamily(spec=spec, f=f).density(x, tol=tol)


def harmonic_bayes(spec: ProblemSpec, x, tol: float = NORMALIZER_TOL) -> PredictiveDensity:
    """Bayes predictive density under the harmonic prior."""
    return InducedDensityFamily.harmonic(spec).density(x, tol=tol)


def plugin_alpha1(spec: ProblemSpec, x, marginal: Marginal) -> PredictiveDensity:
    """phi(y - mu_hat(x), v_y) with the posterior mean mu_hat = x + v_x grad log m(x, v_x)."""
    x = np.asarray(x, dtype=float)
    factor = float(marginal.plugin_mean_factor(float(x @ x), spec.v_x))
    return PredictiveDensity(
        kind=DensityKind.PLUGIN_ALPHA1,
        spec=spec,
        x=x,
        mean=factor * x,
        variance=spec.v_y,
    )


def posterior_mean(spec: ProblemSpec, x, marginal: Marginal) -> np.ndarray:
    """Batched posterior mean x (1 + 2 v_x dlogM/dz)."""
    x = np.asarray(x, dtype=float)
    z = np.einsum("...i,...i->...", x, x)
    return x * np.asarray(marginal.plugin_mean_factor(z, spec.v_x))[..., None]


def gaussian_prior_bayes(spec: ProblemSpec, x, c: float) -> PredictiveDensity:
    """Bayes density under the proper prior N(0, c v_x gamma I)."""
    spec.require_interior("gaussian_prior_bayes")
    if not c > 0:
        raise ProblemSpecError(f"prior scale c must be positive, got {c}")
    x = np.asarray(x, dtype=float)
    g = spec.constants.gamma
    return PredictiveDensity(
        kind=DensityKind.GAUSSIAN_BAYES,
        spec=spec,
        x=x,
        mean=c * g * x / (1.0 + c * g),
        variance=spec.v_y * (1.0 + c) / (1.0 + c * g),
    )


# ============================================================================
# Normalization check
# ============================================================================

def normalization_check(p: PredictiveDensity, n: int, seed: int, workers: int = 1) -> Estimate:
    """
    Importance-sampling estimate of the integral of p over y with p_U as the
    proposal. Gaussian kinds and constant f short-circuit to exactly 1.
    Weights above 1e6 are clipped and counted.
    """
    if p.is_gaussian or (p.family is not None and p.family.is_constant):
        return Estimate(1.0, 0.0, n, seed)
    scale = math.sqrt(p.variance)
    d = p.spec.d

    def sampler(rng, size):
        y = p.x + scale * rng.standard_normal((size, d))
        w = np.exp(p.log_ratio_to_invariant(y))
        clipped = w > WEIGHT_CLIP
        return np.column_stack((np.minimum(w, WEIGHT_CLIP), clipped))

    mean, stderr = mc_moments(sampler, n, seed, workers=workers)
    n_clipped = int(round(mean[1] * n))
    if n_clipped:
        logger.warning(f"[PREDICTIVE] normalization check clipped {n_clipped} importance weights")
    return Estimate(float(mean[0]), float(stderr[0]), n, seed)
