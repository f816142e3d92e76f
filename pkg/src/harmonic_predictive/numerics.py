"""
Numerical building blocks: estimates, radial profiles, the regularized
incomplete gamma function, adaptive quadrature, radial Laplacians, radial
Gaussian expectations and a seeded, chunked Monte Carlo engine.

All functions are pure given their arguments (and seed). The Monte Carlo
engine derives an independent Philox substream per fixed-size chunk from
(seed, chunk index) and reduces chunk statistics in chunk order, so results
do not depend on how many worker threads ran the chunks.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate, special, stats
from scipy.interpolate import PchipInterpolator

from .errors import NumericalFailure, ProblemSpecError, QuadratureError

logger = logging.getLogger(__name__)

DEFAULT_CHUNK_SIZE = 1 << 16
# Poisson-mixture evaluation is used up to this noncentrality
MAX_NONCENTRALITY = 1e4
POISSON_TAIL = 1e-15
GAUSS_ORDER = 64


# ============================================================================
# Result containers
# ============================================================================

@dataclass(frozen=True)
class Estimate:
    """A Monte Carlo or quadrature estimate with its error and sample size."""

    value: float
    error: float
    n: int
    seed: Optional[int] = None

    def __post_init__(self):
        if not self.error >= 0:
            raise ProblemSpecError(f"estimate error must be >= 0, got {self.error}")
        if self.n < 1:
            raise ProblemSpecError(f"estimate sample size must be >= 1, got {self.n}")

    def z_score(self, target: float = 0.0) -> float:
        if self.error == 0.0:
            if self.value == target:
                return 0.0
            return math.copysign(math.inf, self.value - target)
        return (self.value - target) / self.error

    def within(self, target: float, k: float = 3.0, slack: float = 0.0) -> bool:
        return abs(self.value - target) <= k * self.error + slack

    def minus(self, other: "Estimate") -> "Estimate":
        """Difference of two independent estimates."""
        return Estimate(
            value=self.value - other.value,
            error=math.hypot(self.error, other.error),
            n=min(self.n, other.n),
            seed=self.seed,
        )

    def scaled(self, factor: float) -> "Estimate":
        return Estimate(self.value * factor, self.error * abs(factor), self.n, self.seed)

    def as_dict(self) -> dict:
        return {"value": self.value, "error": self.error, "n": self.n, "seed": self.seed}


@dataclass(frozen=True)
class RadialProfile:
    """
    A map r -> value for r >= 0 describing a radial function on R^d.

    `func` is vectorised over r. Positive profiles may carry `log_func`,
    which callers use to stay in the log domain. Analytic radial derivatives
    are optional. `constant` marks an exactly constant profile.
    """

    func: Callable[[np.ndarray], np.ndarray]
    log_func: Optional[Callable[[np.ndarray], np.ndarray]] = None
    d1: Optional[Callable[[np.ndarray], np.ndarray]] = None
    d2: Optional[Callable[[np.ndarray], np.ndarray]] = None
    r_max: float = math.inf
    constant: Optional[float] = None
    label: str = "profile"

    def __call__(self, r):
        return self.func(np.asarray(r, dtype=float))

    def log(self, r):
        r = np.asarray(r, dtype=float)
        if self.log_func is not None:
            return self.log_func(r)
        return np.log(self.func(r))

    @classmethod
    def constant_profile(cls, value: float = 1.0, label: str = "constant") -> "RadialProfile":
        if not value > 0:
            raise ProblemSpecError("constant profile must be positive")
        log_value = math.log(value)
        return cls(
            func=lambda r: np.full(np.shape(r), value, dtype=float),
            log_func=lambda r: np.full(np.shape(r), log_value, dtype=float),
            d1=lambda r: np.zeros(np.shape(r)),
            d2=lambda r: np.zeros(np.shape(r)),
            constant=value,
            label=label,
        )

    @classmethod
    def from_log(cls, log_func: Callable, label: str = "profile") -> "RadialProfile":
        return cls(func=lambda r: np.exp(log_func(r)), log_func=log_func, label=label)

    @classmethod
    def from_table(cls, r, values, label: str = "table", log_values: bool = False) -> "RadialProfile":
        """Monotone cubic (PCHIP) interpolant through a strictly increasing grid."""
        r = np.asarray(r, dtype=float)
        values = np.asarray(values, dtype=float)
        if r.ndim != 1 or r.size < 2 or np.any(np.diff(r) <= 0):
            raise ProblemSpecError("table radii must be a strictly increasing 1-D grid")
        interp = PchipInterpolator(r, values, extrapolate=False)
        r_hi = float(r[-1])

        def _eval(x):
            x = np.asarray(x, dtype=float)
            if np.any(x > r_hi) or np.any(x < r[0]):
                raise ProblemSpecError(f"radius outside tabulated range [{r[0]}, {r_hi}]")
            return interp(x)

        if log_values:
            return cls(func=lambda x: np.exp(_eval(x)), log_func=_eval, r_max=r_hi, label=label)
        return cls(func=_eval, r_max=r_hi, label=label)

    def tabulate(self, r_max: float, n: int = 512, rel_min: float = 1e-4) -> "RadialProfile":
        """
        Freeze the profile into a log-spaced PCHIP table on [0, r_max].

        Values are interpolated in the log domain when the profile carries a
        log function. Radii beyond r_max fall back to the exact profile.
        """
        if self.constant is not None:
            return self
        grid = np.concatenate(([0.0], np.geomspace(r_max * rel_min, r_max, n - 1)))
        use_log = self.log_func is not None
        values = self.log(grid) if use_log else self(grid)
        interp = PchipInterpolator(grid, values, extrapolate=False)
        exact_log = self.log
        exact = self.func

        def _log_eval(x):
            x = np.asarray(x, dtype=float)
            out = interp(np.minimum(x, r_max))
            outside = x > r_max
            if np.any(outside):
                out = np.where(outside, exact_log(np.where(outside, x, 0.0)), out)
            return out

        def _eval(x):
            x = np.asarray(x, dtype=float)
            out = interp(np.minimum(x, r_max))
            outside = x > r_max
            if np.any(outside):
                out = np.where(outside, exact(np.where(outside, x, 0.0)), out)
            return out

        if use_log:
            return RadialProfile(
                func=lambda x: np.exp(_log_eval(x)),
                log_func=_log_eval,
                r_max=math.inf,
                label=f"{self.label}[table]",
            )
        return RadialProfile(func=_eval, r_max=math.inf, label=f"{self.label}[table]")


# ============================================================================
# Special functions
# ============================================================================

def reg_lower_inc_gamma(a, x):
    """
    Regularized lower incomplete gamma P(a, x).

    Evaluated by scipy.special.gammainc (power series for small x, Legendre
    continued fraction otherwise).
    """
    a = np.asarray(a, dtype=float)
    x = np.asarray(x, dtype=float)
    if np.any(a <= 0):
        raise ProblemSpecError("shape a must be positive")
    if np.any(x < 0):
        raise ProblemSpecError("argument x must be nonnegative")
    out = special.gammainc(a, x)
    return out[()] if np.ndim(out) == 0 else out


def log_lambda_moment(s, c, small: float = 1e-8):
    """
    log of the integral over [0, 1] of lambda^(s-1) exp(-lambda c).

    Uses Gamma(s) P(s, c) / c^s for c above `small` and the Taylor series
    1/s - c/(s+1) + c^2/(2(s+2)) - c^3/(6(s+3)) below it.
    """
    s = np.asarray(s, dtype=float)
    c = np.asarray(c, dtype=float)
    s, c = np.broadcast_arrays(s, c)
    out = np.empty(s.shape, dtype=float)
    tiny = c <= small
    if np.any(tiny):
        st, ct = s[tiny], c[tiny]
        series = 1.0 / st - ct / (st + 1.0) + ct**2 / (2.0 * (st + 2.0)) - ct**3 / (6.0 * (st + 3.0))
        out[tiny] = np.log(series)
    big = ~tiny
    if np.any(big):
        sb, cb = s[big], c[big]
        with np.errstate(divide="ignore"):
            out[big] = special.gammaln(sb) + np.log(special.gammainc(sb, cb)) - sb * np.log(cb)
    return out[()] if out.ndim == 0 else out


def noncentral_chi2_logpdf(s, df: float, nc: float):
    """
    Log density of the noncentral chi-square as a Poisson mixture of central
    chi-squares, truncated where the Poisson tail mass drops below 1e-15.
    """
    s = np.atleast_1d(np.asarray(s, dtype=float))
    if nc < 0 or df <= 0:
        raise ProblemSpecError("need df > 0 and nc >= 0")
    half = nc / 2.0
    if half == 0.0:
        ks = np.zeros(1)
        log_w = np.zeros(1)
    else:
        k_lo = int(stats.poisson.ppf(POISSON_TAIL, half))
        k_hi = int(stats.poisson.isf(POISSON_TAIL, half)) + 1
        ks = np.arange(max(k_lo, 0), k_hi + 1, dtype=float)
        log_w = ks * math.log(half) - half - special.gammaln(ks + 1.0)
    shapes = (df + 2.0 * ks)[:, None] / 2.0
    log_chi = (
        special.xlogy(shapes - 1.0, s[None, :])
        - s[None, :] / 2.0
        - shapes * math.log(2.0)
        - special.gammaln(shapes)
    )
    return special.logsumexp(log_w[:, None] + log_chi, axis=0)


# ============================================================================
# Quadrature
# ============================================================================

def adaptive_quad(
    f: Callable[[float], float],
    a: float,
    b: float,
    tol: float = 1e-10,
    singular_exponent: Optional[float] = None,
    limit: int = 200,
    points: Optional[Sequence[float]] = None,
    abs_floor: float = 1e-300,
    layer: str = "quad",
) -> Estimate:
    """
    Adaptive Gauss-Kronrod quadrature (QUADPACK via scipy.integrate.quad).

    `singular_exponent` declares an integrable power-law singularity
    (lambda - a)^e at the lower endpoint, e > -1; it is removed exactly by
    lambda = a + (b - a) u^(1/(1+e)). Failure to converge raises
    QuadratureError instead of returning a silent estimate.
    """
    target, lo, hi = f, a, b
    if singular_exponent is not None:
        e = float(singular_exponent)
        if e <= -1.0:
            raise ProblemSpecError(f"singular exponent must exceed -1, got {e}")
        if not (math.isfinite(a) and math.isfinite(b)):
            raise ProblemSpecError("endpoint substitution needs a finite interval")
        p = 1.0 / (1.0 + e)
        width = b - a

        def target(u, _f=f):
            return _f(a + width * u**p) * width * p * u ** (p - 1.0)

        lo, hi = 0.0, 1.0
        points = None

    out = integrate.quad(
        target, lo, hi, epsabs=abs_floor, epsrel=tol, limit=limit, points=points, full_output=1
    )
    value, err, info = out[:3]
    neval = int(info.get("neval", 1))
    # full_output appends a message only when QUADPACK reports ier != 0
    if len(out) > 3:
        exhausted = int(info.get("last", 0)) >= limit
        acceptable = not exhausted and err <= max(1e3 * tol * abs(value), abs_floor)
        if not acceptable:
            logger.error(f"[QUAD] {layer}: no convergence on [{a}, {b}] ({out[3]})")
            raise QuadratureError(
                f"{layer}: quadrature failed on [{a}, {b}]: {out[3]}",
                layer=layer,
                estimate=value,
                error=err,
            )
        logger.debug(f"[QUAD] {layer}: accepted with warning, err={err:.3e}")
    if not math.isfinite(value):
        raise QuadratureError(f"{layer}: non-finite integral", layer=layer, estimate=value, error=err)
    return Estimate(value=float(value), error=float(err), n=max(neval, 1))


@lru_cache(maxsize=64)
def gauss_legendre_unit(order: int) -> Tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [0, 1]."""
    x, w = special.roots_legendre(order)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=64)
def _radial_nodes(d: int, order: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    z, wz = special.roots_hermitenorm(order)
    wz = wz / math.sqrt(2.0 * math.pi)
    shape = (d - 1) / 2.0
    q, wq = special.roots_genlaguerre(order, shape - 1.0)
    wq = wq / math.gamma(shape)
    log_w = np.log(wz)[:, None] + np.log(wq)[None, :]
    return z, 2.0 * q, log_w


def gauss_radial_log_expectation(log_g: Callable, center_norms, t: float, d: int, order: int = GAUSS_ORDER):
    """
    log E[exp(log_g(||u + t Z||))] for Z ~ N_d(0, I) and ||u|| = center_norms.

    Fixed tensor rule: Gauss-Hermite on the component of Z along u times
    generalized Gauss-Laguerre on the chi-square(d - 1) orthogonal part. The
    node set does not depend on the centre, so the output is a smooth
    function of the centre norm. Vectorised over `center_norms`.
    """
    c = np.atleast_1d(np.asarray(center_norms, dtype=float))
    if t == 0.0:
        return log_g(c)
    z, q, log_w = _radial_nodes(d, order)
    radius = np.sqrt((c[:, None, None] + t * z[None, :, None]) ** 2 + t * t * q[None, None, :])
    vals = log_g(radius) + log_w[None, :, :]
    return special.logsumexp(vals.reshape(c.size, -1), axis=1)


def gauss_radial_expectation(g: Callable, center_norms, t: float, d: int, order: int = GAUSS_ORDER):
    """E[g(||u + t Z||)] with the fixed tensor rule; g may change sign."""
    c = np.atleast_1d(np.asarray(center_norms, dtype=float))
    if t == 0.0:
        return np.asarray(g(c), dtype=float)
    z, q, log_w = _radial_nodes(d, order)
    radius = np.sqrt((c[:, None, None] + t * z[None, :, None]) ** 2 + t * t * q[None, None, :])
    vals = g(radius) * np.exp(log_w)[None, :, :]
    return vals.reshape(c.size, -1).sum(axis=1)


def radial_expectation(
    g: Callable,
    center_norm: float,
    t: float,
    d: int,
    tol: float = 1e-10,
) -> Estimate:
    """
    E[g(||u + t Z_1||)] for Z_1 ~ N_d(0, I), ||u|| = center_norm.

    ||u + t Z_1||^2 / t^2 is noncentral chi-square with d degrees of freedom
    and noncentrality ||u||^2 / t^2, so the expectation is one integral of
    g(t sqrt(s)) against that density. Beyond the Poisson-mixture range the
    fixed tensor rule is used with an order-doubling error estimate.
    """
    if t < 0:
        raise ProblemSpecError("scale t must be nonnegative")
    if t == 0.0:
        return Estimate(float(np.asarray(g(np.asarray(center_norm, dtype=float)))), 0.0, 1)
    nc = (center_norm / t) ** 2
    if nc > MAX_NONCENTRALITY:
        coarse = gauss_radial_expectation(g, center_norm, t, d, order=48)[0]
        fine = gauss_radial_expectation(g, center_norm, t, d, order=96)[0]
        if not math.isfinite(fine):
            raise QuadratureError("radial expectation diverged", layer="radial", estimate=fine)
        return Estimate(float(fine), float(abs(fine - coarse)), 96 * 96)

    mean = d + nc
    sd = math.sqrt(2.0 * (d + 2.0 * nc))
    lo = max(0.0, mean - 12.0 * sd)
    hi = mean + 14.0 * sd

    def integrand(s):
        return float(g(np.asarray(t * math.sqrt(s)))) * math.exp(noncentral_chi2_logpdf(s, d, nc)[0])

    pieces = []
    if lo > 0.0:
        pieces.append(adaptive_quad(integrand, 0.0, lo, tol=tol, layer="radial"))
    breaks = [max(lo, mean - 2 * sd), mean, mean + 2 * sd]
    pieces.append(adaptive_quad(integrand, lo, hi, tol=tol, points=breaks, layer="radial"))
    pieces.append(adaptive_quad(integrand, hi, math.inf, tol=tol, layer="radial"))
    value = sum(p.value for p in pieces)
    error = sum(p.error for p in pieces)
    return Estimate(value=value, error=error, n=sum(p.n for p in pieces))


def radial_laplacian(f: Callable, r, d: int, h=None):
    """
    Laplacian of a radial function by central differences.

    f''(r) + (d - 1) f'(r) / r, and d f''(0) at the origin. Radii closer to
    the origin than the step use the even extension f(-r) = f(r).
    """
    r = np.asarray(r, dtype=float)
    if h is None:
        step = np.maximum(1e-4, 1e-3 * (1.0 + r))
    else:
        if np.any(np.asarray(h) <= 0):
            raise ProblemSpecError("finite-difference step must be positive")
        step = np.broadcast_to(np.asarray(h, dtype=float), r.shape)
    f0 = np.asarray(f(r), dtype=float)
    fp = np.asarray(f(r + step), dtype=float)
    fm = np.asarray(f(np.abs(r - step)), dtype=float)
    second = (fp - 2.0 * f0 + fm) / step**2
    first = (fp - fm) / (2.0 * step)
    safe_r = np.where(r > 0, r, 1.0)
    out = np.where(r > 0, second + (d - 1) * first / safe_r, d * second)
    return out[()] if out.ndim == 0 else out


def radial_laplacian_ratio(log_f: Callable, r, d: int, h=None):
    """
    Delta f / f for a positive radial function given through log f.

    Same stencil as radial_laplacian, with the neighbours taken relative to
    f(r) so profiles spanning many orders of magnitude stay in range.
    """
    r = np.asarray(r, dtype=float)
    if h is None:
        step = np.maximum(1e-4, 1e-3 * (1.0 + r))
    else:
        if np.any(np.asarray(h) <= 0):
            raise ProblemSpecError("finite-difference step must be positive")
        step = np.broadcast_to(np.asarray(h, dtype=float), r.shape)
    l0 = np.asarray(log_f(r), dtype=float)
    ep = np.exp(np.asarray(log_f(r + step), dtype=float) - l0)
    em = np.exp(np.asarray(log_f(np.abs(r - step)), dtype=float) - l0)
    second = (ep - 2.0 + em) / step**2
    first = (ep - em) / (2.0 * step)
    safe_r = np.where(r > 0, r, 1.0)
    out = np.where(r > 0, second + (d - 1) * first / safe_r, d * second)
    return out[()] if out.ndim == 0 else out


# ============================================================================
# Monte Carlo
# ============================================================================

Sampler = Callable[[np.random.Generator, int], np.ndarray]


@dataclass
class _ChunkStats:
    count: int
    mean: np.ndarray
    m2: np.ndarray
    bad: int = 0


def chunk_generator(seed: int, chunk_index: int) -> np.random.Generator:
    """Counter-based Philox stream for one chunk, keyed by (seed, chunk index)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(chunk_index,))))


def _run_chunk(sampler: Sampler, seed: int, index: int, size: int) -> _ChunkStats:
    values = np.asarray(sampler(chunk_generator(seed, index), size), dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    bad = int(np.count_nonzero(~np.isfinite(values)))
    mean = values.mean(axis=0)
    m2 = ((values - mean) ** 2).sum(axis=0)
    return _ChunkStats(count=size, mean=mean, m2=m2, bad=bad)


def mc_moments(
    sampler: Sampler,
    n: int,
    seed: int,
    workers: int = 1,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Means and standard errors of a (possibly vector-valued) sampler.

    The sampler receives a Generator and a size and returns an array of
    shape (size,) or (size, k). Chunk statistics are merged in chunk order
    with the pairwise update, which makes the result independent of
    `workers`.
    """
    if n < 2:
        raise ProblemSpecError("Monte Carlo needs n >= 2")
    if not (0 <= seed < 2**64):
        raise ProblemSpecError("seed must be a 64-bit unsigned integer")
    sizes = [min(chunk_size, n - start) for start in range(0, n, chunk_size)]
    jobs = list(enumerate(sizes))
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(lambda job: _run_chunk(sampler, seed, job[0], job[1]), jobs))
    else:
        chunks = [_run_chunk(sampler, seed, i, size) for i, size in jobs]

    bad = sum(c.bad for c in chunks)
    if bad:
        raise NumericalFailure(f"{bad} non-finite Monte Carlo values", count=bad)

    total = chunks[0]
    count, mean, m2 = total.count, total.mean.copy(), total.m2.copy()
    for chunk in chunks[1:]:
        merged = count + chunk.count
        delta = chunk.mean - mean
        mean = mean + delta * (chunk.count / merged)
        m2 = m2 + chunk.m2 + delta**2 * (count * chunk.count / merged)
        count = merged
    stderr = np.sqrt(m2 / (count - 1) / count)
    return mean, stderr


def mc_mean(
    sampler: Sampler,
    n: int,
    seed: int,
    workers: int = 1,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
) -> Estimate:
    """Sample mean and standard error s / sqrt(n) of a scalar sampler."""
    mean, stderr = mc_moments(sampler, n, seed, workers=workers, chunk_size=chunk_size)
    logger.debug(f"[MC] n={n} seed={seed} mean={mean[0]:.6g} se={stderr[0]:.3g}")
    return Estimate(value=float(mean[0]), error=float(stderr[0]), n=n, seed=seed)
