"""
risk subcommand: Monte Carlo risk of one predictive density along a grid of ||mu||.
"""

import logging
from typing import Any, Dict

from ..config import RunConfig, get_execution_config
from ..domination import grid_seed
from ..risk import RiskQuery, invariant_risk_closed_form, risk_mc
from . import error_status, success

logger = logging.getLogger(__name__)


def run_risk(config: RunConfig) -> Dict[str, Any]:
    """
    Risk of the chosen density at each norm of the mu grid.

    Args:
        config: Validated run configuration (d, alpha, vx, vy, density, mu_grid, n, seed)

    Returns:
        Status dictionary with rows (mu_norm, density_kind, risk, stderr, n)
        and, for the invariant density, its closed-form risk
    """
    logger.info(
        f"[CLI] risk: d={config.d} alpha={config.alpha} vx={config.vx} vy={config.vy} "
        f"density={config.density} n={config.n}"
    )
    try:
        spec = config.problem_spec()
        execution = get_execution_config(config)
        closed_form = None
        if spec.interior and config.density in ("uniform", "constant"):
            closed_form = invariant_risk_closed_form(spec, spec.constants.invariant_variance(spec))

        rows = []
        for i, mu_norm in enumerate(config.mu_grid):
            query = RiskQuery(
                spec=spec,
                mu=mu_norm,
                density=config.density,
                n=config.n,
                seed=grid_seed(config.seed, i),
                workers=execution.threads,
            )
            est = risk_mc(query)
            row = {
                "mu_norm": mu_norm,
                "density_kind": config.density,
                "risk": est.value,
                "stderr": est.error,
                "n": est.n,
            }
            if closed_form is not None:
                row["closed_form"] = closed_form
            rows.append(row)
            logger.info(f"[RISK] |mu|={mu_norm:g}: {est.value:.6g} +- {est.error:.2g}")
        return success("risk", rows)
    except Exception as e:
        return error_status("risk", e)
