"""
Subcommand implementations.

Each command takes a validated RunConfig and returns a status dictionary:

    {"status": "success", "table": str, "rows": [...], "meta": {...}}
    {"status": "error", "error_type": "config" | "numerical" | "verification", "error": str, ...}

The CLI front end turns these into output files and exit codes.
"""

import logging
from typing import Any, Dict, List, Optional

from ..errors import ConfigError, ProblemSpecError, VerificationFailure

logger = logging.getLogger(__name__)


def success(table: str, rows: List[Dict[str, Any]], meta: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    return {"status": "success", "table": table, "rows": rows, "meta": dict(meta or {})}


def error_status(command: str, exc: Exception) -> Dict[str, Any]:
    """Map an exception from the library onto an error status."""
    if isinstance(exc, VerificationFailure):
        error_type = "verification"
    elif isinstance(exc, (ConfigError, ProblemSpecError)):
        error_type = "config"
    else:
        # QuadratureError, NumericalFailure and anything unexpected
        error_type = "numerical"
    logger.error(f"[CLI] {command} failed ({error_type}): {exc}", exc_info=error_type == "numerical")
    status = {"status": "error", "error_type": error_type, "error": str(exc)}
    if isinstance(exc, VerificationFailure):
        status["failed"] = list(exc.failed)
    return status
