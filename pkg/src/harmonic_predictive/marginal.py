"""
Marginal densities m(w, v) of X ~ N_d(mu, v I) mixed over a prior on mu.

Three priors are supported, all rotationally symmetric so the marginal is a
function M(z, v) of z = ||w||^2:

- uniform: the flat prior, m = 1;
- harmonic: the prior ||mu||^-(d-2), whose marginal is the lambda-integral
  b * int_0^1 lambda^(d/2-2) exp(-lambda z / (2v)) dlambda with
  b = 1 / (Gamma(d/2-1) 2^(d/2-1) v^(d/2-1)), i.e. z^-(d-2)/2 P(d/2-1, z/(2v));
- gaussian(c): the proper prior N(0, c * base * I), whose marginal is the
  normal density with variance v + c * base.

The harmonic prior itself diverges at the origin and is never evaluated.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np
from scipy import special

from .errors import ProblemSpecError
from .numerics import Estimate, RadialProfile, adaptive_quad, log_lambda_moment
from .problem import LOG_2PI

logger = logging.getLogger(__name__)


class PriorKind(str, Enum):
    UNIFORM = "uniform"
    HARMONIC = "harmonic"
    GAUSSIAN = "gaussian"


@dataclass(frozen=True)
class HarmonicMarginalParams:
    """Dimension-dependent constants of m_H at one variance v."""

    d: int
    v: float

    def __post_init__(self):
        _check_dv(self.d, self.v)

    @property
    def a(self) -> float:
        return self.d / 2.0 - 1.0

    @property
    def log_b(self) -> float:
        a = self.a
        return -(special.gammaln(a) + a * math.log(2.0) + a * math.log(self.v))

    @property
    def b(self) -> float:
        return math.exp(self.log_b)


def _check_dv(d: int, v) -> None:
    if int(d) != d or d < 3:
        raise ProblemSpecError(f"dimension d must be an integer >= 3, got {d}")
    if np.any(np.asarray(v) <= 0):
        raise ProblemSpecError("variance v must be positive")


def _check_z(z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if np.any(z < 0):
        raise ProblemSpecError("squared radius z must be nonnegative")
    return z


def _scalar(out):
    out = np.asarray(out)
    return out[()] if out.ndim == 0 else out


# ============================================================================
# Harmonic marginal
# ============================================================================

def harmonic_log_marginal(z, v, d: int):
    """log m_H(z, v), evaluated without forming the incomplete gamma ratio."""
    _check_dv(d, v)
    z = _check_z(z)
    v = np.asarray(v, dtype=float)
    a = d / 2.0 - 1.0
    log_b = -(special.gammaln(a) + a * math.log(2.0) + a * np.log(v))
    return _scalar(log_b + log_lambda_moment(a, z / (2.0 * v)))


def harmonic_marginal(z, v, d: int):
    """m_H(z, v) for squared radius z >= 0; vectorised over z and v."""
    return _scalar(np.exp(harmonic_log_marginal(z, v, d)))


def harmonic_dz_ratio(z, v, d: int, order: int):
    """(d/dz)^order M / M for the harmonic marginal."""
    if order not in (1, 2):
        raise ProblemSpecError(f"derivative order must be 1 or 2, got {order}")
    _check_dv(d, v)
    z = _check_z(z)
    v = np.asarray(v, dtype=float)
    a = d / 2.0 - 1.0
    c = z / (2.0 * v)
    log_ratio = log_lambda_moment(a + order, c) - log_lambda_moment(a, c) - order * np.log(2.0 * v)
    sign = -1.0 if order == 1 else 1.0
    return _scalar(sign * np.exp(log_ratio))


def harmonic_marginal_dz(z, v, d: int, order: int):
    """
    Radial derivative of m_H with respect to z = ||w||^2.

    Differentiating under the integral sign gives
    dM/dz = -(b/(2v)) int lambda^a e^(-lambda c) and
    d2M/dz2 = (b/(2v)^2) int lambda^(a+1) e^(-lambda c).
    """
    if order not in (1, 2):
        raise ProblemSpecError(f"derivative order must be 1 or 2, got {order}")
    _check_dv(d, v)
    z = _check_z(z)
    v = np.asarray(v, dtype=float)
    a = d / 2.0 - 1.0
    log_b = -(special.gammaln(a) + a * math.log(2.0) + a * np.log(v))
    log_mag = log_b - order * np.log(2.0 * v) + log_lambda_moment(a + order, z / (2.0 * v))
    sign = -1.0 if order == 1 else 1.0
    return _scalar(sign * np.exp(log_mag))


def harmonic_marginal_by_quadrature(z: float, v: float, d: int, tol: float = 1e-12) -> Estimate:
    """m_H(z, v) by adaptive quadrature of the lambda-integral. Test oracle."""
    params = HarmonicMarginalParams(d=d, v=v)
    a = params.a
    c = z / (2.0 * v)
    exponent = a - 1.0
    est = adaptive_quad(
        lambda lam: lam**exponent * math.exp(-lam * c),
        0.0,
        1.0,
        tol=tol,
        singular_exponent=exponent if exponent < 0 else None,
        layer="marginal",
    )
    return est.scaled(params.b)


# ============================================================================
# Gaussian prior marginal
# ============================================================================

def gaussian_prior_marginal(z, v, d: int, c: float, base: float):
    """Marginal of X under the prior N(0, c * base * I): phi at variance v + c * base."""
    if not c > 0:
        raise ProblemSpecError(f"prior scale c must be positive, got {c}")
    if not base > 0:
        raise ProblemSpecError("prior base variance must be positive")
    z = _check_z(z)
    total = np.asarray(v, dtype=float) + c * base
    return _scalar(np.exp(-0.5 * d * (LOG_2PI + np.log(total)) - z / (2.0 * total)))


# ============================================================================
# Marginal family
# ============================================================================

@dataclass(frozen=True)
class Marginal:
    """A radial marginal family (w, v) -> M(||w||^2, v) with analytic z-derivatives."""

    kind: PriorKind
    d: int
    c: Optional[float] = None
    base: float = 1.0
    radial: bool = True

    def __post_init__(self):
        _check_dv(self.d, 1.0)
        if self.kind is PriorKind.GAUSSIAN:
            if self.c is None or not self.c > 0:
                raise ProblemSpecError("gaussian prior needs a positive scale c")
            if not self.base > 0:
                raise ProblemSpecError("gaussian prior needs a positive base variance")

    @classmethod
    def uniform(cls, d: int) -> "Marginal":
        return cls(PriorKind.UNIFORM, d)

    @classmethod
    def harmonic(cls, d: int) -> "Marginal":
        return cls(PriorKind.HARMONIC, d)

    @classmethod
    def gaussian(cls, d: int, c: float, base: float) -> "Marginal":
        return cls(PriorKind.GAUSSIAN, d, c=c, base=base)

    @property
    def label(self) -> str:
        if self.kind is PriorKind.GAUSSIAN:
            return f"gaussian({self.c:g})"
        return self.kind.value

    def _total_variance(self, v):
        return np.asarray(v, dtype=float) + self.c * self.base

    def log_value(self, z, v):
        z = _check_z(z)
        if self.kind is PriorKind.UNIFORM:
            return _scalar(np.zeros(np.broadcast_shapes(z.shape, np.shape(v))))
        if self.kind is PriorKind.HARMONIC:
            return harmonic_log_marginal(z, v, self.d)
        total = self._total_variance(v)
        return _scalar(-0.5 * self.d * (LOG_2PI + np.log(total)) - z / (2.0 * total))

    def value(self, z, v):
        return _scalar(np.exp(self.log_value(z, v)))

    def at(self, w, v):
        """m(w, v) for d-vectors w (trailing axis)."""
        w = np.asarray(w, dtype=float)
        return self.value(np.einsum("...i,...i->...", w, w), v)

    def dz_ratio(self, z, v, order: int):
        """(d/dz)^order M / M."""
        if order not in (1, 2):
            raise ProblemSpecError(f"derivative order must be 1 or 2, got {order}")
        z = _check_z(z)
        if self.kind is PriorKind.UNIFORM:
            return _scalar(np.zeros(np.broadcast_shapes(z.shape, np.shape(v))))
        if self.kind is PriorKind.HARMONIC:
            return harmonic_dz_ratio(z, v, self.d, order)
        total = self._total_variance(v) + 0.0 * z
        return _scalar((-1.0 / (2.0 * total)) ** order)

    def dz(self, z, v, order: int):
        return _scalar(self.dz_ratio(z, v, order) * self.value(z, v))

    def grad_log_sq(self, z, v):
        """||grad_w log m||^2 = 4 z (M'/M)^2."""
        z = _check_z(z)
        return _scalar(4.0 * z * self.dz_ratio(z, v, 1) ** 2)

    def laplacian_ratio(self, z, v):
        """Delta_w m / m = 2 d M'/M + 4 z M''/M."""
        z = _check_z(z)
        return _scalar(2.0 * self.d * self.dz_ratio(z, v, 1) + 4.0 * z * self.dz_ratio(z, v, 2))

    def laplacian_power_ratio(self, z, v, a: float):
        """Delta_w m^a / m^a = a {Delta m / m + (a - 1) ||grad log m||^2}."""
        if a == 0:
            raise ProblemSpecError("exponent a must be nonzero")
        return _scalar(a * (self.laplacian_ratio(z, v) + (a - 1.0) * self.grad_log_sq(z, v)))

    def profile(self, v: float, power: float = 1.0) -> RadialProfile:
        """r -> m(r^2, v)^power as a log-domain radial profile."""
        if self.kind is PriorKind.UNIFORM:
            return RadialProfile.constant_profile(1.0, label="uniform")

        def log_func(r, _v=v, _p=power):
            r = np.asarray(r, dtype=float)
            return _p * self.log_value(r * r, _v)

        return RadialProfile(
            func=lambda r: np.exp(log_func(r)),
            log_func=log_func,
            label=f"{self.label}^{power:g}",
        )

    def plugin_mean_factor(self, z, v):
        """Shrinkage factor 1 + 2 v M'/M of the posterior mean x + v grad log m."""
        return _scalar(1.0 + 2.0 * np.asarray(v, dtype=float) * self.dz_ratio(z, v, 1))


def _require(marginal: Marginal, d: int) -> None:
    if not marginal.radial:
        raise ProblemSpecError("Laplacian formulas need a radial marginal")
    if marginal.d != d:
        raise ProblemSpecError(f"marginal is {marginal.d}-dimensional, asked for d={d}")


def laplacian_m(marginal: Marginal, z, v, d: int):
    """Delta_w m = 2 d dM/dz + 4 z d2M/dz2 at ||w||^2 = z."""
    _require(marginal, d)
    return _scalar(marginal.laplacian_ratio(z, v) * marginal.value(z, v))


def laplacian_m_power(marginal: Marginal, z, v, d: int, a: float):
    """Delta_w m^a = a m^a {Delta m / m + (a - 1) ||grad log m||^2}."""
    _require(marginal, d)
    if a == 0:
        raise ProblemSpecError("exponent a must be nonzero")
    ratio = marginal.laplacian_power_ratio(z, v, a)
    return _scalar(ratio * np.exp(a * np.asarray(marginal.log_value(z, v))))


def neg_sqrt_laplacian_ratio(marginal: Marginal, z, v):
    """-Delta m^(1/2) / m^(1/2), the integrand of the alpha = +-1 risk formulas."""
    return _scalar(-marginal.laplacian_power_ratio(z, v, 0.5))
