"""
Command-line front end.

Routes each subcommand to its command function, writes the returned rows
as CSV or JSON with a metadata header and maps the returned status onto
the exit code:

    0 success, 2 configuration error, 3 numerical failure, 4 verification failure
"""

import argparse
import logging
import sys
from typing import Any, Callable, Dict, List, Optional

from . import __version__
from .commands.appendix_commands import run_appendix
from .commands.domination_commands import run_dominate, run_figure1, run_superharmonic
from .commands.risk_commands import run_risk
from .commands.verify_commands import run_verify
from .config import LOG_LEVELS, VERIFY_GROUPS, RunConfig, build_run_config
from .errors import ConfigError
from .output import schema_name, write_table

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_VERIFICATION = 4

EXIT_CODES = {"config": EXIT_CONFIG, "numerical": EXIT_NUMERICAL, "verification": EXIT_VERIFICATION}

COMMANDS: Dict[str, Callable[[RunConfig], Dict[str, Any]]] = {
    "risk": run_risk,
    "dominate": run_dominate,
    "figure1": run_figure1,
    "superharmonic": run_superharmonic,
    "appendix": run_appendix,
    "verify": run_verify,
}

HELP = {
    "risk": "Monte Carlo risk of one predictive density along a grid of ||mu||",
    "dominate": "paired risk differences against the best invariant density, with a verdict",
    "figure1": "upper bound of v_x/v_y over alpha",
    "superharmonic": "superharmonicity of smoothed marginal powers on a radial grid",
    "appendix": "hypercube-integral identities, inequalities and MTP2 sweep",
    "verify": "aggregated checks; nonzero exit iff a required check fails",
}


def _common_flags() -> argparse.ArgumentParser:
    # SUPPRESS keeps flags that were not given out of the namespace, so
    # config-file values are only overridden by explicit flags
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--d", type=int, help="dimension (>= 3)")
    common.add_argument("--alpha", type=float, help="alpha-divergence index in [-1, 1]")
    common.add_argument("--vx", type=float, help="variance of the observation X")
    common.add_argument("--vy", type=float, help="variance of the target Y")
    common.add_argument("--mu-grid", dest="mu_grid", help="comma-separated norms of mu")
    common.add_argument("--n", help="Monte Carlo sample size (1e6 notation accepted)")
    common.add_argument("--seed", type=int, help="64-bit root seed")
    common.add_argument("--tol", type=float, help="quadrature tolerance")
    common.add_argument("--threads", type=int, help="worker threads (results do not depend on it)")
    common.add_argument("--out", help="output file (stdout when omitted)")
    common.add_argument("--format", choices=("csv", "json"), help="output format")
    common.add_argument("--only", help=f"comma-separated check groups: {','.join(VERIFY_GROUPS)}")
    common.add_argument(
        "--density", choices=("uniform", "harmonic", "constant"), help="risk: density to evaluate"
    )
    common.add_argument("--candidate", choices=("harmonic", "constant"), help="dominate: candidate density")
    common.add_argument("--t", type=float, help="superharmonic: single smoothing scale")
    common.add_argument("--nu", type=int, help="power of the marginal (superharmonic, appendix)")
    common.add_argument("--c", type=float, help="exponent fraction in (0, 1)")
    common.add_argument("--mode", choices=("integer", "kappa"), help="superharmonic: exponent pair")
    common.add_argument("--points", type=int, help="appendix/verify: random (s, z) points per block")
    common.add_argument("--inject-fault", dest="inject_fault", action="store_true", help=argparse.SUPPRESS)
    common.add_argument("--config", dest="config_path", help="YAML or JSON job file")
    common.add_argument(
        "--log-level",
        dest="log_level",
        choices=LOG_LEVELS,
        help="logging level (default INFO)",
    )
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="harmonic-predictive",
        description="Risk experiments for harmonic-prior predictive densities under alpha-divergence.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    common = _common_flags()
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=HELP[name], description=HELP[name])
    return parser


def _emit(config: RunConfig, status: Dict[str, Any]) -> None:
    meta = {
        "schema": schema_name(status["table"]),
        "version": __version__,
        "seed": config.seed,
        "config": config.header_config(),
    }
    meta.update(status.get("meta", {}))
    text = write_table(status["rows"], meta, config.out, config.output_format)
    if config.out:
        logger.info(f"[CLI] wrote {len(status['rows'])} rows to {config.out}")
    else:
        sys.stdout.write(text)


def main(argv: Optional[List[str]] = None) -> int:
    """Parse arguments, run one subcommand and return its exit code."""
    args = vars(build_parser().parse_args(argv))
    subcommand = args.pop("subcommand")
    config_path = args.pop("config_path", None)
    log_level = args.pop("log_level", "INFO")

    logging.basicConfig(
        level=getattr(logging, log_level),
        format="[%(asctime)s] %(levelname)s - %(name)s - %(message)s",
        handlers=[logging.StreamHandler(sys.stderr)],
        force=True,
    )

    try:
        config = build_run_config(subcommand, args, config_path)
    except ConfigError as e:
        logger.error(f"[CLI] configuration error: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    logger.info(f"[CLI] {subcommand} (seed {config.seed}, {config.threads} threads)")
    status = COMMANDS[subcommand](config)

    if "rows" in status:
        try:
            _emit(config, status)
        except OSError as e:
            logger.error(f"[CLI] cannot write output: {e}")
            print(f"error: {e}", file=sys.stderr)
            return EXIT_CONFIG

    if status["status"] == "success":
        if "verdict" in status.get("meta", {}):
            logger.info(f"[CLI] verdict: {status['meta']['verdict']}")
        return EXIT_OK
    print(f"error: {status['error']}", file=sys.stderr)
    return EXIT_CODES.get(status["error_type"], EXIT_NUMERICAL)


if __name__ == "__main__":
    sys.exit(main())
