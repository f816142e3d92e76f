"""
Problem specification for prediction in the isotropic normal model.

X ~ N_d(mu, v_x I) is observed, Y ~ N_d(mu, v_y I) is to be predicted and
predictive densities are judged by alpha-divergence from the true density
of Y. This module holds the problem tuple, the constants derived from it,
the divergence generator f_alpha and the Gaussian primitives every other
module builds on. Everything here is pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.special import xlogy

from .errors import ProblemSpecError

LOG_2PI = math.log(2.0 * math.pi)

# relative tolerance used to decide whether 1/beta is an integer
INTEGER_RTOL = 1e-9


@dataclass(frozen=True)
class ProblemSpec:
    """The tuple (d, v_x, v_y, alpha); mu is passed to risk operations."""

    d: int
    v_x: float
    v_y: float
    alpha: float

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 3:
            raise ProblemSpecError(f"dimension d must be an integer >= 3, got {self.d}")
        if not (self.v_x > 0 and self.v_y > 0):
            raise ProblemSpecError(
                f"variances must be positive, got v_x={self.v_x}, v_y={self.v_y}"
            )
        if not (-1.0 <= self.alpha <= 1.0):
            raise ProblemSpecError(f"alpha must lie in [-1, 1], got {self.alpha}")
        object.__setattr__(self, "d", int(self.d))

    @property
    def interior(self) -> bool:
        return -1.0 < self.alpha < 1.0

    def require_interior(self, operation: str) -> None:
        if not self.interior:
            raise ProblemSpecError(
                f"{operation} requires alpha in (-1, 1); alpha={self.alpha} is served "
                "by the dedicated endpoint operations"
            )

    @property
    def constants(self) -> "DerivedConstants":
        return derive_constants(self)

    def with_alpha(self, alpha: float) -> "ProblemSpec":
        return ProblemSpec(d=self.d, v_x=self.v_x, v_y=self.v_y, alpha=alpha)

    def as_dict(self) -> dict:
        return {"d": self.d, "v_x": self.v_x, "v_y": self.v_y, "alpha": self.alpha}


@dataclass(frozen=True)
class DerivedConstants:
    beta: float
    gamma: float
    xi: float
    v_star: float
    kappa: Optional[int] = None
    c_beta: Optional[float] = None

    @property
    def xi_sq(self) -> float:
        return self.xi * self.xi

    @property
    def inv_beta(self) -> float:
        return math.inf if self.beta == 0.0 else 1.0 / self.beta

    def invariant_variance(self, spec: ProblemSpec) -> float:
        """Variance v_y / gamma = v_y + beta v_x of the best invariant density."""
        return spec.v_y + self.beta * spec.v_x

    @property
    def risk_prefactor(self) -> float:
        """1 / (beta (1 - beta)), finite for interior alpha."""
        return 1.0 / (self.beta * (1.0 - self.beta))


def integer_value(x: float, rtol: float = INTEGER_RTOL) -> Optional[int]:
    """Return round(x) when x is an integer up to a relative tolerance, else None."""
    if not math.isfinite(x):
        return None
    k = round(x)
    if abs(x - k) < rtol * abs(x):
        return int(k)
    return None


def derive_constants(spec: ProblemSpec) -> DerivedConstants:
    beta = (1.0 - spec.alpha) / 2.0
    gamma = 1.0 / (1.0 + beta * spec.v_x / spec.v_y)
    xi = (1.0 - gamma) * math.sqrt(spec.v_y / gamma)
    v_star = spec.v_x * spec.v_y / (spec.v_x + spec.v_y)

    kappa = None
    c_beta = None
    if spec.interior:
        inv_beta = 1.0 / beta
        if integer_value(inv_beta) is None:
            kappa = math.floor(inv_beta) + 1
            c_beta = (kappa - inv_beta + 1.0) / 2.0
    return DerivedConstants(
        beta=beta, gamma=gamma, xi=xi, v_star=v_star, kappa=kappa, c_beta=c_beta
    )


def f_alpha(z, alpha: float):
    """Generator of the alpha-divergence, vectorised over z > 0."""
    z = np.asarray(z, dtype=float)
    if np.any(z <= 0) or np.any(np.isnan(z)):
        raise ProblemSpecError("f_alpha requires z > 0")
    if not (-1.0 <= alpha <= 1.0):
        raise ProblemSpecError(f"alpha must lie in [-1, 1], got {alpha}")
    if alpha == 1.0:
        out = xlogy(z, z)
    elif alpha == -1.0:
        out = -np.log(z)
    else:
        out = 4.0 / (1.0 - alpha * alpha) * -np.expm1((1.0 + alpha) / 2.0 * np.log(z))
    return out[()] if out.ndim == 0 else out


def gaussian_logpdf(u, v: float):
    """log phi(u, v) for N_d(0, v I); d is the trailing axis of u."""
    if not v > 0:
        raise ProblemSpecError(f"variance must be positive, got {v}")
    u = np.asarray(u, dtype=float)
    if u.ndim == 0:
        u = u.reshape(1)
    d = u.shape[-1]
    sq = np.einsum("...i,...i->...", u, u)
    return gaussian_logpdf_sq(sq, v, d)


def gaussian_logpdf_sq(sq_norm, v, d: int):
    """log phi evaluated from the squared norm ||u||^2."""
    v = np.asarray(v, dtype=float)
    if np.any(v <= 0):
        raise ProblemSpecError("variance must be positive")
    out = -0.5 * d * (LOG_2PI + np.log(v)) - np.asarray(sq_norm, dtype=float) / (2.0 * v)
    return out[()] if np.ndim(out) == 0 else out


def log_affinity_gaussians(mu1, v1: float, mu2, v2: float, beta: float):
    """log of the integral of p^beta q^(1-beta) for p = N(mu1, v1 I), q = N(mu2, v2 I)."""
    mu1 = np.asarray(mu1, dtype=float)
    mu2 = np.asarray(mu2, dtype=float)
    d = np.broadcast_shapes(mu1.shape, mu2.shape)[-1]
    diff = mu1 - mu2
    sq = np.einsum("...i,...i->...", diff, diff)
    precision = beta / v1 + (1.0 - beta) / v2
    log_det_part = -0.5 * d * (beta * math.log(v1) + (1.0 - beta) * math.log(v2) + math.log(precision))
    mix = beta * v2 + (1.0 - beta) * v1
    return log_det_part - beta * (1.0 - beta) * sq / (2.0 * mix)


def alpha_div_gaussians(mu1, v1: float, mu2, v2: float, alpha: float):
    """
    D_alpha{N(mu1, v1 I) || N(mu2, v2 I)} in closed form.

    The first argument plays the role of the true density. The value is
    (1 - A) / (beta (1 - beta)) with A the Gaussian affinity of order beta.
    Vectorised over leading axes of the mean arrays.
    """
    if not (v1 > 0 and v2 > 0):
        raise ProblemSpecError("variances must be positive")
    if not (-1.0 < alpha < 1.0):
        raise ProblemSpecError("alpha_div_gaussians requires alpha in (-1, 1)")
    beta = (1.0 - alpha) / 2.0
    log_a = log_affinity_gaussians(mu1, v1, mu2, v2, beta)
    out = -np.expm1(log_a) / (beta * (1.0 - beta))
    # affinity <= 1; clip rounding below zero
    out = np.maximum(out, 0.0)
    return out[()] if np.ndim(out) == 0 else out


def completing_squares_sides(x, y, mu, spec: ProblemSpec) -> Tuple[np.ndarray, np.ndarray]:
    """
    Both log-sides of

        phi(x-mu, v_x) phi^beta(y-mu, v_y)
          = gamma^{(1-beta)d/2} phi(gamma x + (1-gamma) y - mu, v_x gamma) phi^beta(y-x, v_y/gamma).
    """
    spec.require_interior("completing_squares_sides")
    k = spec.constants
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    mu = np.asarray(mu, dtype=float)
    lhs = gaussian_logpdf(x - mu, spec.v_x) + k.beta * gaussian_logpdf(y - mu, spec.v_y)
    w = k.gamma * x + (1.0 - k.gamma) * y
    rhs = (
        (1.0 - k.beta) * spec.d / 2.0 * math.log(k.gamma)
        + gaussian_logpdf(w - mu, spec.v_x * k.gamma)
        + k.beta * gaussian_logpdf(y - x, spec.v_y / k.gamma)
    )
    return lhs, rhs
