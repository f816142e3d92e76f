"""
Domination thresholds, the threshold curve over alpha, the t-bound for
superharmonicity of smoothed harmonic marginals, direct superharmonicity
checks and Monte Carlo domination experiments.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence

import numpy as np

from .errors import ProblemSpecError
from .marginal import Marginal, PriorKind
from .numerics import GAUSS_ORDER, RadialProfile, gauss_radial_log_expectation, radial_laplacian_ratio
from .predictive import InducedDensityFamily
from .problem import ProblemSpec, integer_value
from .risk import RiskDifferenceResult, mu_vector, risk_difference_crn

logger = logging.getLogger(__name__)

INTEGER_CASE = "integer_case"
NONINTEGER_CASE = "noninteger_case"

DEFAULT_MU_NORMS = (0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0)
SUPERHARMONIC_RTOL = 1e-8
SIGNIFICANCE = 3.0


class Verdict(str, Enum):
    PASS = "PASS"
    NEUTRAL = "NEUTRAL"
    INCONCLUSIVE = "INCONCLUSIVE"
    FAIL = "FAIL"


# ============================================================================
# Thresholds
# ============================================================================

@dataclass(frozen=True)
class ThresholdResult:
    """Upper bound on v_x / v_y under which the harmonic Bayes density dominates."""

    alpha: float
    d: int
    branch: str
    bound: float
    kappa: Optional[int] = None
    c_beta: Optional[float] = None

    def as_row(self) -> dict:
        return {
            "alpha": self.alpha,
            "bound": self.bound,
            "branch": self.branch,
            "kappa": self.kappa,
            "c_beta": self.c_beta,
        }


def integer_case_bound(d: int, alpha: float) -> float:
    return (d + 2.0) / (d * (1.0 + alpha))


def threshold(d: int, alpha: float) -> ThresholdResult:
    """
    Integer 2/(1-alpha): (d+2) / (d (1+alpha)).
    Otherwise, with q = 2/(1-alpha) and kappa the smallest integer above q:
    q^2 ((d+2)/d) (1 - (kappa - q)) / (2 kappa (kappa - 1)).
    """
    if int(d) != d or d < 3:
        raise ProblemSpecError(f"dimension d must be an integer >= 3, got {d}")
    if not (-1.0 < alpha < 1.0):
        raise ProblemSpecError(f"threshold needs alpha in (-1, 1), got {alpha}")
    q = 2.0 / (1.0 - alpha)
    if integer_value(q) is not None:
        return ThresholdResult(alpha=alpha, d=int(d), branch=INTEGER_CASE, bound=integer_case_bound(d, alpha))
    kappa = math.floor(q) + 1
    frac = kappa - q
    bound = q * q * ((d + 2.0) / d) * (1.0 - frac) / (2.0 * kappa * (kappa - 1))
    return ThresholdResult(
        alpha=alpha,
        d=int(d),
        branch=NONINTEGER_CASE,
        bound=bound,
        kappa=kappa,
        c_beta=(kappa - q + 1.0) / 2.0,
    )


def integer_case_alphas(upper: float = 0.99) -> List[float]:
    """alpha = 1 - 2/n for n = 2, 3, ... while alpha < upper."""
    out = []
    n = 2
    while 1.0 - 2.0 / n < upper:
        out.append(1.0 - 2.0 / n)
        n += 1
    return out


def default_alpha_grid(n_points: int = 400, limit: float = 0.99) -> np.ndarray:
    interior = np.linspace(-limit, limit, n_points + 2)[1:-1]
    return np.unique(np.concatenate((interior, integer_case_alphas(limit))))


def figure1_curve(d: int, alpha_grid: Optional[Sequence[float]] = None) -> List[ThresholdResult]:
    """Threshold rows over an alpha grid, sorted by alpha."""
    grid = default_alpha_grid() if alpha_grid is None else np.sort(np.asarray(alpha_grid, dtype=float))
    if np.any(grid <= -1.0) or np.any(grid >= 1.0):
        raise ProblemSpecError("alpha grid must lie inside (-1, 1)")
    return [threshold(d, float(a)) for a in grid]


def sample_size_condition(n_obs: int, m_future: int, d: int, alpha: float) -> dict:
    """
    Read the threshold for X, Y averages of n past and m future observations
    with a common variance, so that v_x / v_y = m / n.
    """
    if n_obs < 1 or m_future < 1:
        raise ProblemSpecError("sample sizes must be positive")
    ratio = m_future / n_obs
    result = threshold(d, alpha)
    return {
        "ratio": ratio,
        "bound": result.bound,
        "branch": result.branch,
        "satisfied": ratio <= result.bound,
    }


def t_max(nu: int, c: float, v: float, d: int) -> float:
    """sqrt((d+2)(1-c) v / (d nu (nu-1)))."""
    if int(nu) != nu or nu < 2:
        raise ProblemSpecError(f"nu must be an integer >= 2, got {nu}")
    if not (0.0 < c < 1.0):
        raise ProblemSpecError(f"c must lie in (0, 1), got {c}")
    if not v > 0:
        raise ProblemSpecError("variance v must be positive")
    return math.sqrt((d + 2.0) * (1.0 - c) * v / (d * nu * (nu - 1.0)))


# ============================================================================
# Superharmonicity checks
# ============================================================================

@dataclass(frozen=True, eq=False)
class SuperharmonicReport:
    """Laplacian of u -> E[m^p(t Z + u, v)]^q on a radial grid."""

    d: int
    v: float
    t: float
    p: float
    q: float
    radii: np.ndarray = field(repr=False)
    laplacian: np.ndarray = field(repr=False)
    profile: np.ndarray = field(repr=False)
    tolerance: np.ndarray = field(repr=False)
    informational: bool = False
    prior: str = "harmonic"

    @property
    def passed_mask(self) -> np.ndarray:
        return self.laplacian <= self.tolerance

    @property
    def passed(self) -> bool:
        return bool(np.all(self.passed_mask))

    @property
    def max_scaled(self) -> float:
        """max over the grid of Delta P / P, in units of 1/v."""
        return float(np.max(self.laplacian / self.profile) * self.v)

    def rows(self) -> List[dict]:
        return [
            {"r": float(r), "laplacian": float(lap), "pass": bool(ok)}
            for r, lap, ok in zip(self.radii, self.laplacian, self.passed_mask)
        ]


def default_r_grid(v: float, n: int = 40) -> np.ndarray:
    return np.concatenate(([0.0], np.geomspace(1e-3, 30.0, n) * math.sqrt(v)))


def superharmonic_profile_check(
    p: float,
    q: float,
    v: float,
    d: int,
    t: float,
    r_grid: Optional[Sequence[float]] = None,
    fd_step: Optional[float] = None,
    marginal: Optional[Marginal] = None,
    order: int = GAUSS_ORDER,
    informational: bool = False,
) -> SuperharmonicReport:
    """
    Laplacian of P(u) = E[m^p(t Z1 + u, v)]^q at each grid radius.

    P is built in the log domain with the fixed tensor rule, so it is smooth
    in r and central differences are meaningful. A radius passes when
    Delta P <= 1e-8 P / v.
    """
    if t < 0:
        raise ProblemSpecError("scale t must be nonnegative")
    marginal = marginal or Marginal.harmonic(d)
    radii = default_r_grid(v) if r_grid is None else np.asarray(r_grid, dtype=float)
    if np.any(radii < 0):
        raise ProblemSpecError("radii must be nonnegative")

    if marginal.kind is PriorKind.UNIFORM:
        zeros = np.zeros(radii.shape)
        ones = np.ones(radii.shape)
        return SuperharmonicReport(
            d, v, t, p, q, radii, zeros, ones, SUPERHARMONIC_RTOL * ones / v, informational, marginal.label
        )

    log_m = marginal.profile(v, power=p).log

    def log_profile(r):
        return q * gauss_radial_log_expectation(log_m, r, t, d, order=order)

    log_p = log_profile(radii)
    ratio = radial_laplacian_ratio(log_profile, radii, d, h=fd_step)
    profile = np.exp(log_p)
    laplacian = ratio * profile
    tolerance = SUPERHARMONIC_RTOL * profile / v
    report = SuperharmonicReport(
        d, v, t, p, q, radii, laplacian, profile, tolerance, informational, marginal.label
    )
    logger.debug(
        f"[DOMINATION] superharmonic check t={t:.4g} p={p:g} q={q:g}: "
        f"max v*DeltaP/P={report.max_scaled:.3e} passed={report.passed}"
    )
    return report


def check_superharmonic_condition(
    spec: ProblemSpec,
    t: float,
    exponent_mode: str = "integer",
    r_grid: Optional[Sequence[float]] = None,
    fd_step: Optional[float] = None,
    marginal: Optional[Marginal] = None,
) -> SuperharmonicReport:
    """
    Check Delta_u E[m_H^p(t Z1 + u, v_x gamma)]^q <= 0 with
    (p, q) = (1/beta, beta/2) in "integer" mode or (kappa, c(beta)/kappa)
    in "kappa" mode. Values of t above xi are informational.
    """
    spec.require_interior("check_superharmonic_condition")
    k = spec.constants
    if exponent_mode == "integer":
        p, q = 1.0 / k.beta, k.beta / 2.0
    elif exponent_mode == "kappa":
        if k.kappa is None:
            raise ProblemSpecError("kappa mode needs a non-integer 1/beta")
        p, q = float(k.kappa), k.c_beta / k.kappa
    else:
        raise ProblemSpecError(f"unknown exponent mode {exponent_mode!r}")
    return superharmonic_profile_check(
        p,
        q,
        spec.v_x * k.gamma,
        spec.d,
        t,
        r_grid=r_grid,
        fd_step=fd_step,
        marginal=marginal,
        informational=t > k.xi,
    )


def theorem31_grid(
    nu: int, c: float, v: float, d: int, n_t: int = 10, r_grid: Optional[Sequence[float]] = None
) -> List[SuperharmonicReport]:
    """Reports for E[m_H^nu]^(c/nu) at n_t values of t spread over [0, t_max]."""
    top = t_max(nu, c, v, d)
    return [
        superharmonic_profile_check(float(nu), c / nu, v, d, float(t), r_grid=r_grid)
        for t in np.linspace(0.0, top, n_t)
    ]


# ============================================================================
# Domination experiments
# ============================================================================

@dataclass(frozen=True, eq=False)
class DominationReport:
    spec: ProblemSpec
    candidate: str
    rows: List[RiskDifferenceResult]
    verdict: Verdict
    regime: str
    threshold: ThresholdResult

    def as_rows(self) -> List[dict]:
        return [dict(row.as_dict(), candidate=self.candidate) for row in self.rows]


def domination_regime(spec: ProblemSpec) -> tuple:
    """("theorem" | "conjecture_probe" | "beyond_threshold", ThresholdResult)."""
    result = threshold(spec.d, spec.alpha)
    ratio = spec.v_x / spec.v_y
    if ratio <= result.bound * (1.0 + 1e-12):
        return "theorem", result
    if result.branch == NONINTEGER_CASE and ratio <= integer_case_bound(spec.d, spec.alpha):
        return "conjecture_probe", result
    return "beyond_threshold", result


def domination_verdict(rows: Sequence[RiskDifferenceResult], k: float = SIGNIFICANCE) -> Verdict:
    """
    NEUTRAL when every difference is exactly zero; FAIL when any lies below
    -k stderr; PASS when all are above -k stderr and the one at mu = 0 is
    above +k stderr; INCONCLUSIVE otherwise.
    """
    if all(r.diff.value == 0.0 and r.diff.error == 0.0 for r in rows):
        return Verdict.NEUTRAL
    if any(r.diff.value < -k * r.diff.error for r in rows):
        return Verdict.FAIL
    at_origin = [r for r in rows if r.mu_norm == 0.0]
    if at_origin and all(r.diff.value >= k * r.diff.error and r.diff.value > 0 for r in at_origin):
        return Verdict.PASS
    return Verdict.INCONCLUSIVE


def grid_seed(seed: int, index: int) -> int:
    """Independent 64-bit seed for one grid point."""
    return int(np.random.SeedSequence([seed, index]).generate_state(1, np.uint64)[0])


def domination_experiment(
    spec: ProblemSpec,
    mu_grid: Optional[Sequence] = None,
    n: int = 1_000_000,
    seed: int = 0,
    candidate: str = "harmonic",
    workers: int = 1,
) -> DominationReport:
    """
    Paired Monte Carlo risk differences of the candidate against the best
    invariant density along a grid of mu, with the desk-scale verdict.
    """
    spec.require_interior("domination_experiment")
    if candidate == "harmonic":
        family = InducedDensityFamily.harmonic(spec)
    elif candidate == "constant":
        family = InducedDensityFamily(spec=spec, f=RadialProfile.constant_profile())
    else:
        raise ProblemSpecError(f"unknown candidate {candidate!r}")
    norms = DEFAULT_MU_NORMS if mu_grid is None else mu_grid
    regime, bound = domination_regime(spec)
    logger.info(
        f"[DOMINATION] d={spec.d} alpha={spec.alpha:g} v_x/v_y={spec.v_x / spec.v_y:g} "
        f"bound={bound.bound:.6g} regime={regime}"
    )
    rows = [
        risk_difference_crn(
            spec, mu_vector(mu, spec.d), n, grid_seed(seed, i), family=family, workers=workers
        )
        for i, mu in enumerate(norms)
    ]
    verdict = domination_verdict(rows)
    logger.info(f"[DOMINATION] verdict {verdict.value}")
    return DominationReport(spec, candidate, rows, verdict, regime, bound)
