"""
verify subcommand: aggregated structural, semigroup, appendix, superharmonicity
and method-agreement checks.

Each group yields rows (group, name, value, target, tolerance, pass,
required). Any failing required row turns the run into a verification
failure with the failed names listed.
"""

import logging
from typing import Any, Callable, Dict, List

import numpy as np

from ..appendix_lab import appendix_sweep
from ..config import VERIFY_GROUPS, RunConfig, get_execution_config
from ..domination import grid_seed, theorem31_grid
from ..errors import VerificationFailure
from ..marginal import Marginal
from ..numerics import chunk_generator, radial_expectation
from ..problem import ProblemSpec, completing_squares_sides
from ..risk import (
    RiskQuery,
    invariant_risk_closed_form,
    risk_difference_crn,
    risk_difference_rho_oracle,
    risk_mc,
)
from . import error_status, success
from .appendix_commands import MTP2_PAIRS

logger = logging.getLogger(__name__)

IDENTITY_POINTS = 100
IDENTITY_RTOL = 1e-12
HEAT_POINTS = 20
HEAT_RTOL = 1e-8
SIGNIFICANCE = 3.0


def _row(
    group: str, name: str, value: float, target: float, tolerance: float, passed: bool, required: bool = True
):
    return {
        "group": group,
        "name": name,
        "value": float(value),
        "target": float(target),
        "tolerance": float(tolerance),
        "pass": bool(passed),
        "required": required,
    }


def check_identity(config: RunConfig, seed: int) -> List[Dict[str, Any]]:
    """Completing-squares identity at random (x, y, mu, v_x, v_y, alpha)."""
    rng = chunk_generator(seed, 0)
    sign = -1.0 if config.inject_fault else 1.0
    worst, worst_i = 0.0, 0
    for i in range(IDENTITY_POINTS):
        d = int(rng.integers(3, 9))
        spec = ProblemSpec(
            d=d,
            v_x=float(rng.uniform(0.1, 10.0)),
            v_y=float(rng.uniform(0.1, 10.0)),
            alpha=float(rng.uniform(-0.99, 0.99)),
        )
        x, y, mu = (rng.normal(0.0, 3.0, d) for _ in range(3))
        lhs, rhs = completing_squares_sides(x, y, mu, spec)
        rel = abs(float(lhs) - sign * float(rhs)) / max(abs(float(lhs)), abs(float(rhs)), 1.0)
        if rel > worst:
            worst, worst_i = rel, i
    logger.info(f"[VERIFY] completing squares: worst relative gap {worst:.2e} (point {worst_i})")
    return [_row("identity", "completing_squares", worst, 0.0, IDENTITY_RTOL, worst <= IDENTITY_RTOL)]


def check_heat(config: RunConfig, seed: int) -> List[Dict[str, Any]]:
    """E[m(u + t Z, v)] = m(u, v + t^2) for harmonic and Gaussian-prior marginals."""
    rng = chunk_generator(seed, 0)
    rows = []
    for label in ("harmonic", "gaussian"):
        worst = 0.0
        for _ in range(HEAT_POINTS):
            d = int(rng.integers(3, 6))
            u, t, v = float(rng.uniform(0.0, 5.0)), float(rng.uniform(0.1, 2.0)), float(rng.uniform(0.5, 2.0))
            marginal = Marginal.harmonic(d) if label == "harmonic" else Marginal.gaussian(d, 1.0, 1.0)
            smoothed = radial_expectation(
                lambda r, _m=marginal, _v=v: _m.value(np.asarray(r) ** 2, _v), u, t, d, tol=1e-11
            )
            exact = float(marginal.value(u * u, v + t * t))
            worst = max(worst, abs(smoothed.value - exact) / abs(exact))
        logger.info(f"[VERIFY] heat semigroup ({label}): worst relative gap {worst:.2e}")
        rows.append(_row("heat", f"heat_semigroup_{label}", worst, 0.0, HEAT_RTOL, worst <= HEAT_RTOL))
    return rows


def check_appendix(config: RunConfig, seed: int) -> List[Dict[str, Any]]:
    report = appendix_sweep(n_points=config.points, seed=seed, c=config.c, n_pairs=MTP2_PAIRS)
    rows = []
    for check in report.checks:
        if not check.required:
            continue
        tag = f"{check.name}@d={check.params['d']},nu={check.params['nu']}"
        rows.append(_row("appendix", tag, check.margin, 0.0, 0.0, check.passed))
    rows.append(_row("appendix", "mtp2", report.mtp2_failures, 0, 0, report.mtp2_failures == 0))
    logger.info(f"[VERIFY] appendix sweep: {len(report.failed)} failed of {len(report.checks)}")
    return rows


def check_superharmonic(config: RunConfig, seed: int) -> List[Dict[str, Any]]:
    """E[m_H^2(tZ + u, 1)]^(1/4) in d = 4 over its whole admissible t range."""
    rows = []
    for report in theorem31_grid(2, 0.5, 1.0, 4):
        rows.append(
            _row("superharmonic", f"power_mean_t={report.t:.6g}", report.max_scaled, 0.0, 1e-8, report.passed)
        )
    return rows


def check_oracle(config: RunConfig, seed: int) -> List[Dict[str, Any]]:
    """Paired Monte Carlo against the deterministic rho representation at d = 3, alpha = 0."""
    spec = ProblemSpec(d=3, v_x=1.0, v_y=1.0, alpha=0.0)
    workers = get_execution_config(config).threads
    rows = []
    for i, mu_norm in enumerate((0.0, 2.0)):
        crn = risk_difference_crn(spec, mu_norm, config.n, grid_seed(seed, i), workers=workers)
        oracle = risk_difference_rho_oracle(spec, mu_norm)
        gap = crn.diff.minus(oracle.diff)
        tolerance = SIGNIFICANCE * gap.error
        rows.append(
            _row(
                "oracle",
                f"rho_vs_crn@mu={mu_norm:g}",
                crn.diff.value,
                oracle.diff.value,
                tolerance,
                abs(gap.value) <= tolerance,
            )
        )
    return rows


def check_invariant(config: RunConfig, seed: int) -> List[Dict[str, Any]]:
    """Constant risk of the best invariant density at d = 3, alpha = 0."""
    spec = ProblemSpec(d=3, v_x=1.0, v_y=1.0, alpha=0.0)
    target = invariant_risk_closed_form(spec, spec.constants.invariant_variance(spec))
    workers = get_execution_config(config).threads
    rows = []
    for i, mu_norm in enumerate((0.0, 1.0, 10.0)):
        est = risk_mc(RiskQuery(spec=spec, mu=mu_norm, n=config.n, seed=grid_seed(seed, i), workers=workers))
        rows.append(
            _row(
                "invariant",
                f"constant_risk@mu={mu_norm:g}",
                est.value,
                target,
                SIGNIFICANCE * est.error,
                est.within(target, k=SIGNIFICANCE),
            )
        )
    return rows


CHECKS: Dict[str, Callable[[RunConfig, int], List[Dict[str, Any]]]] = {
    "identity": check_identity,
    "heat": check_heat,
    "appendix": check_appendix,
    "superharmonic": check_superharmonic,
    "oracle": check_oracle,
    "invariant": check_invariant,
}


def run_verify(config: RunConfig) -> Dict[str, Any]:
    """
    Run the selected check groups (all by default, or those given by --only).

    Args:
        config: Validated run configuration

    Returns:
        Success status with all rows, or a verification error status that
        still carries the rows and lists the failed checks
    """
    groups = config.only or list(VERIFY_GROUPS)
    logger.info(f"[VERIFY] groups: {', '.join(groups)}")
    rows: List[Dict[str, Any]] = []
    try:
        for index, group in enumerate(VERIFY_GROUPS):
            if group in groups:
                rows.extend(CHECKS[group](config, grid_seed(config.seed, index)))
        failed = [f"{r['group']}:{r['name']}" for r in rows if r["required"] and not r["pass"]]
        meta = {"passed": not failed, "groups": ",".join(groups)}
        if failed:
            status = error_status("verify", VerificationFailure(failed))
            status.update(table="verify", rows=rows, meta=dict(meta, failed=len(failed)))
            return status
        return success("verify", rows, meta)
    except Exception as e:
        return error_status("verify", e)
