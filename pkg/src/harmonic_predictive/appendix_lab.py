"""
Hypercube integrals behind the superharmonicity of smoothed powers of the
harmonic marginal, and numerical checks of their identities, inequalities,
the psi condition and the MTP2 lattice property of the integrand

    zeta(lambda) = prod lambda_i^(d/2-2) / (sum lambda_i + s)^(d/2)
                   * exp(-z sum lambda_i / (sum lambda_i + s)).

rho(j1, j2, l) integrates lambda_1^j1 lambda_2^j2 (sum lambda + s)^l zeta over
[0, 1]^nu; eta(j2, l) is the face integral with lambda_1 = 1. Both use a
tensor Gauss-Legendre rule; for odd d every coordinate is substituted as
lambda = u^2 so the half-integer powers become polynomial.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache, reduce
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import xlogy

from .errors import ProblemSpecError, QuadratureError
from .numerics import Estimate, chunk_generator, gauss_legendre_unit

logger = logging.getLogger(__name__)

BASE_ORDER = 64
AGREEMENT = 1e-11
IDENTITY_RTOL = 1e-8
INEQUALITY_SLACK = 1e-10
MTP2_SLACK = 1e-12
MAX_NU = 3


@dataclass(frozen=True)
class HypercubeIntegralSpec:
    nu: int
    d: int
    s: float
    z: float
    j1: int = 0
    j2: int = 0
    l: int = 0

    def __post_init__(self):
        _validate(self.nu, self.d, self.s, self.z)
        if self.j1 < 0 or self.j2 < 0 or int(self.j1) != self.j1 or int(self.j2) != self.j2:
            raise ProblemSpecError("j1 and j2 must be nonnegative integers")
        if int(self.l) != self.l:
            raise ProblemSpecError("l must be an integer")


def _validate(nu: int, d: int, s: float, z: float) -> None:
    if int(nu) != nu or not (2 <= nu <= MAX_NU):
        raise ProblemSpecError(f"nu must be 2 or 3, got {nu}")
    if int(d) != d or d < 3:
        raise ProblemSpecError(f"dimension d must be an integer >= 3, got {d}")
    if not s > 0:
        raise ProblemSpecError(f"s must be positive, got {s}")
    if not z >= 0:
        raise ProblemSpecError(f"z must be nonnegative, got {z}")


def zeta(lambda_vec, s: float, z: float, d: int):
    """
    zeta at one or more points (trailing axis = nu), in the log domain.
    A zero coordinate with d = 3 gives +inf.
    """
    lam = np.asarray(lambda_vec, dtype=float)
    if np.any(lam < 0) or np.any(lam > 1):
        raise ProblemSpecError("lambda components must lie in [0, 1]")
    if not s > 0:
        raise ProblemSpecError("s must be positive")
    with np.errstate(divide="ignore", over="ignore"):
        return np.exp(log_zeta(lam, s, z, d))


def log_zeta(lam: np.ndarray, s: float, z: float, d: int) -> np.ndarray:
    total = lam.sum(axis=-1)
    denom = total + s
    with np.errstate(divide="ignore"):
        return (
            xlogy(d / 2.0 - 2.0, lam).sum(axis=-1)
            - (d / 2.0) * np.log(denom)
            - z * total / denom
        )


@lru_cache(maxsize=16)
def _coordinate_rule(order: int, odd: bool) -> Tuple[np.ndarray, np.ndarray]:
    u, w = gauss_legendre_unit(order)
    if odd:
        return u * u, 2.0 * u * w
    return u, w


def _axis(values: np.ndarray, axis: int, ndim: int) -> np.ndarray:
    shape = [1] * ndim
    shape[axis] = values.size
    return values.reshape(shape)


class HypercubeLab:
    """
    rho and eta for one (nu, d, s, z), with zeta cached on each tensor grid.

    Results are refined from order 64 by doubling until two successive
    orders agree to 1e-11 relative.
    """

    def __init__(self, nu: int, d: int, s: float, z: float):
        _validate(nu, d, s, z)
        self.nu, self.d, self.s, self.z = int(nu), int(d), float(s), float(z)
        self._grids: Dict[int, dict] = {}
        if nu == 2:
            self._orders = (BASE_ORDER, 2 * BASE_ORDER, 4 * BASE_ORDER)
        else:
            self._orders = (BASE_ORDER, 2 * BASE_ORDER)

    def _grid(self, order: int) -> dict:
        if order in self._grids:
            return self._grids[order]
        lam, w = _coordinate_rule(order, self.d % 2 == 1)
        nu, d, s, z = self.nu, self.d, self.s, self.z
        power = d / 2.0 - 2.0

        lams = [_axis(lam, i, nu) for i in range(nu)]
        total = sum(lams) + s
        log_z = sum(power * np.log(x) for x in lams) - (d / 2.0) * np.log(total) - z * (total - s) / total
        weight = reduce(np.multiply, (_axis(w, i, nu) for i in range(nu)))
        full = weight * np.exp(log_z)

        face_dim = nu - 1
        face = [_axis(lam, i, face_dim) for i in range(face_dim)]
        face_total = 1.0 + sum(face) + s
        log_face = (
            sum(power * np.log(x) for x in face)
            - (d / 2.0) * np.log(face_total)
            - z * (face_total - s) / face_total
        )
        face_weight = reduce(np.multiply, (_axis(w, i, face_dim) for i in range(face_dim)))
        grid = {
            "lam1": lams[0],
            "lam2": lams[1],
            "total": total,
            "weighted": full,
            "face_lam2": face[0],
            "face_total": face_total,
            "face_weighted": face_weight * np.exp(log_face),
        }
        self._grids[order] = grid
        return grid

    def _refine(self, evaluate, label: str) -> Estimate:
        previous = evaluate(self._grid(self._orders[0]))
        for order in self._orders[1:]:
            current = evaluate(self._grid(order))
            gap = abs(current - previous)
            if gap <= AGREEMENT * abs(current):
                return Estimate(current, gap, order**self.nu)
            previous = current
        if gap <= 1e3 * AGREEMENT * abs(current):
            logger.debug(f"[APPENDIX] {label}: refinement gap {gap:.2e} at order {order}")
            return Estimate(current, gap, order**self.nu)
        raise QuadratureError(
            f"{label} did not converge (gap {gap:.3e})", layer="hypercube", estimate=current, error=gap
        )

    def rho(self, j1: int, j2: int, l: int) -> Estimate:
        if j1 < 0 or j2 < 0:
            raise ProblemSpecError("j1 and j2 must be nonnegative")

        def evaluate(g):
            term = g["weighted"] * g["lam1"] ** j1 * g["lam2"] ** j2 * g["total"] ** float(l)
            return float(term.sum())

        return self._refine(evaluate, f"rho({j1},{j2},{l})")

    def eta(self, j2: int, l: int) -> Estimate:
        if j2 < 0:
            raise ProblemSpecError("j2 must be nonnegative")

        def evaluate(g):
            term = g["face_weighted"] * g["face_lam2"] ** j2 * g["face_total"] ** float(l)
            return float(term.sum())

        return self._refine(evaluate, f"eta({j2},{l})")


@lru_cache(maxsize=32)
def lab_for(nu: int, d: int, s: float, z: float) -> HypercubeLab:
    return HypercubeLab(nu, d, s, z)


def rho_int(spec: HypercubeIntegralSpec) -> float:
    return lab_for(spec.nu, spec.d, spec.s, spec.z).rho(spec.j1, spec.j2, spec.l).value


def eta_int(j2: int, l: int, spec: HypercubeIntegralSpec) -> float:
    return lab_for(spec.nu, spec.d, spec.s, spec.z).eta(j2, l).value


# ============================================================================
# Checks
# ============================================================================

@dataclass(frozen=True)
class CheckResult:
    """One identity or inequality instance with both sides and its margin."""

    name: str
    params: Dict[str, float]
    lhs: float
    rhs: float
    margin: float
    passed: bool
    required: bool = True

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "params": dict(self.params),
            "lhs": self.lhs,
            "rhs": self.rhs,
            "margin": self.margin,
            "pass": self.passed,
            "required": self.required,
        }


def _identity(name: str, params: dict, lhs: float, terms: Sequence[float]) -> CheckResult:
    rhs = float(sum(terms))
    scale = abs(lhs) + sum(abs(t) for t in terms)
    rel = abs(lhs - rhs) / scale if scale > 0 else 0.0
    return CheckResult(name, params, lhs, rhs, rel, rel <= IDENTITY_RTOL)


def _inequality(name: str, params: dict, lhs: float, rhs: float, required: bool = True) -> CheckResult:
    """Checks lhs >= rhs; margin = lhs - rhs."""
    margin = lhs - rhs
    slack = INEQUALITY_SLACK * max(abs(lhs), abs(rhs))
    return CheckResult(name, params, lhs, rhs, margin, margin >= -slack, required)


def verify_identities(s: float, z: float, d: int, nu: int) -> List[CheckResult]:
    """The integration-by-parts identity and the three symmetry identities."""
    lab = lab_for(nu, d, s, z)
    params = {"s": s, "z": z, "d": d, "nu": nu}
    rho = lambda j1, j2, l: lab.rho(j1, j2, l).value
    eta = lambda j2, l: lab.eta(j2, l).value
    out = []
    for j1, j2, l in ((1, 0, -1), (2, 0, -2), (1, 1, -2)):
        out.append(
            _identity(
                f"by_parts[{j1},{j2},{l}]",
                params,
                s * z * rho(j1, j2, l),
                (
                    -eta(j2, l + 2),
                    (j1 + d / 2.0 - 2.0) * rho(j1 - 1, j2, l + 2),
                    (l - d / 2.0 + 2.0) * rho(j1, j2, l + 1),
                ),
            )
        )
    for l in (-1, 0, 1):
        out.append(
            _identity(
                f"symmetry_rho00[{l}]", params, rho(0, 0, l), (nu * rho(1, 0, l - 1), s * rho(0, 0, l - 1))
            )
        )
        out.append(
            _identity(
                f"symmetry_rho10[{l}]",
                params,
                rho(1, 0, l),
                (rho(2, 0, l - 1), (nu - 1) * rho(1, 1, l - 1), s * rho(1, 0, l - 1)),
            )
        )
    out.append(
        _identity("symmetry_eta", params, eta(0, 1), (eta(0, 0), (nu - 1) * eta(1, 0), s * eta(0, 0)))
    )
    return out


def verify_inequalities(s: float, z: float, d: int, nu: int) -> List[CheckResult]:
    """FKG-type product inequality, the rho(1,0,.) ratio bound and two moment-ratio bounds."""
    lab = lab_for(nu, d, s, z)
    params = {"s": s, "z": z, "d": d, "nu": nu}
    rho = lambda j1, j2, l: lab.rho(j1, j2, l).value
    eta = lambda j2, l: lab.eta(j2, l).value
    r100 = rho(1, 0, 0)
    return [
        _inequality("fkg", params, eta(0, 1) * rho(0, 0, -1), eta(0, 0) * rho(0, 0, 0)),
        _inequality("ratio_lower", params, rho(1, 0, -1) / r100, 1.0 / (nu * d / (d + 2.0) + s)),
        _inequality("moment_200", params, d / (d + 2.0), rho(2, 0, 0) / r100),
        _inequality("moment_110", params, (d - 2.0) / d, rho(1, 1, 0) / r100),
    ]


def psi_s_bound(d: int, nu: int, c: float) -> float:
    """Smallest s for which the psi condition is guaranteed: nu d (nu-1) / ((1-c)(d+2))."""
    return nu * d * (nu - 1.0) / ((1.0 - c) * (d + 2.0))


def psi_terms(s: float, z: float, d: int, nu: int) -> Dict[str, float]:
    """psi, ||grad psi||^2 and Delta psi from the rho integrals."""
    lab = lab_for(nu, d, s, z)
    r10m1 = lab.rho(1, 0, -1).value
    return {
        "psi": lab.rho(0, 0, 0).value,
        "grad_sq": 2.0 * nu * nu * z * r10m1**2,
        "laplacian": -d * nu * r10m1
        + 2.0 * nu * z * lab.rho(2, 0, -2).value
        + 2.0 * nu * (nu - 1.0) * z * lab.rho(1, 1, -2).value,
    }


def verify_psi_condition(s: float, z: float, d: int, nu: int, c: float) -> CheckResult:
    """
    (c/nu - 1) ||grad psi||^2 + psi Delta psi <= 0. Required only for
    s >= nu d (nu-1) / ((1-c)(d+2)); below that the result is informational.
    """
    if not (0.0 < c < 1.0):
        raise ProblemSpecError(f"c must lie in (0, 1), got {c}")
    terms = psi_terms(s, z, d, nu)
    form = (c / nu - 1.0) * terms["grad_sq"] + terms["psi"] * terms["laplacian"]
    scale = abs(terms["psi"] * terms["laplacian"]) + abs((c / nu - 1.0) * terms["grad_sq"])
    params = {"s": s, "z": z, "d": d, "nu": nu, "c": c}
    required = s >= psi_s_bound(d, nu, c)
    return CheckResult(
        "psi_condition", params, form, 0.0, -form, form <= INEQUALITY_SLACK * scale, required
    )


def mtp2_check(lambda_a, lambda_b, s: float, z: float, d: int) -> bool:
    """zeta(a) zeta(b) <= zeta(a v b) zeta(a ^ b), in the log domain with 1e-12 slack."""
    a = np.asarray(lambda_a, dtype=float)
    b = np.asarray(lambda_b, dtype=float)
    if np.any(a <= 0) or np.any(b <= 0) or np.any(a > 1) or np.any(b > 1):
        raise ProblemSpecError("lambda components must lie in (0, 1]")
    return bool(np.all(_mtp2_margin(a, b, s, z, d) >= 0))


def _mtp2_margin(a: np.ndarray, b: np.ndarray, s: float, z: float, d: int) -> np.ndarray:
    lhs = log_zeta(a, s, z, d) + log_zeta(b, s, z, d)
    rhs = log_zeta(np.maximum(a, b), s, z, d) + log_zeta(np.minimum(a, b), s, z, d)
    return rhs - lhs + MTP2_SLACK * (1.0 + np.abs(lhs))


def mtp2_sweep(n_pairs: int, s: float, z: float, d: int, nu: int, seed: int) -> Tuple[int, int]:
    """Randomized lattice-inequality check on n_pairs pairs; returns (checked, failed)."""
    _validate(nu, d, s, z)
    rng = chunk_generator(seed, 0)
    a = 1.0 - rng.random((n_pairs, nu))
    b = 1.0 - rng.random((n_pairs, nu))
    failed = int(np.count_nonzero(_mtp2_margin(a, b, s, z, d) < 0))
    return n_pairs, failed


# ============================================================================
# Sweep
# ============================================================================

@dataclass
class AppendixReport:
    checks: List[CheckResult] = field(default_factory=list)
    mtp2: List[dict] = field(default_factory=list)

    @property
    def failed(self) -> List[CheckResult]:
        return [c for c in self.checks if c.required and not c.passed]

    @property
    def mtp2_failures(self) -> int:
        return sum(entry["failed"] for entry in self.mtp2)

    @property
    def passed(self) -> bool:
        return not self.failed and self.mtp2_failures == 0

    def as_dict(self) -> dict:
        return {
            "passed": self.passed,
            "n_checks": len(self.checks),
            "n_failed": len(self.failed),
            "mtp2_failures": self.mtp2_failures,
            "checks": [c.as_dict() for c in self.checks],
            "mtp2": list(self.mtp2),
        }


def appendix_sweep(
    dims: Sequence[int] = (3, 4, 5),
    nus: Sequence[int] = (2, 3),
    n_points: int = 20,
    seed: int = 0,
    c: float = 0.5,
    n_pairs: int = 100_000,
    s_range: Tuple[float, float] = (0.1, 10.0),
    z_range: Tuple[float, float] = (0.1, 10.0),
) -> AppendixReport:
    """
    All identities, inequalities and psi conditions at n_points random
    (s, z) per (d, nu), plus n_pairs random MTP2 pairs per (d, nu).
    """
    report = AppendixReport()
    for block, (d, nu) in enumerate((d, nu) for d in dims for nu in nus):
        rng = chunk_generator(seed, block)
        points = np.column_stack(
            (rng.uniform(*s_range, size=n_points), rng.uniform(*z_range, size=n_points))
        )
        for s, z in points:
            s, z = float(s), float(z)
            report.checks.extend(verify_identities(s, z, d, nu))
            report.checks.extend(verify_inequalities(s, z, d, nu))
            report.checks.append(verify_psi_condition(s, z, d, nu, c))
            lab_for.cache_clear()
        s0, z0 = (float(v) for v in points[0])
        checked, failed = mtp2_sweep(n_pairs, s0, z0, d, nu, seed=int(rng.integers(2**63)))
        report.mtp2.append({"d": d, "nu": nu, "s": s0, "z": z0, "checked": checked, "failed": failed})
        logger.info(
            f"[APPENDIX] d={d} nu={nu}: {n_points} points, "
            f"{sum(1 for c_ in report.checks if c_.required and not c_.passed)} failures so far"
        )
    return report
