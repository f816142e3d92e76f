"""
Run configuration for the command-line front end.

Values come from three layers: model defaults, an optional YAML/JSON job
file, and explicit command-line flags (highest precedence).
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, ValidationError, field_validator, model_validator

from .domination import DEFAULT_MU_NORMS
from .errors import ConfigError
from .problem import ProblemSpec

logger = logging.getLogger(__name__)

SUBCOMMANDS = ("risk", "dominate", "figure1", "superharmonic", "appendix", "verify")
VERIFY_GROUPS = ("identity", "heat", "appendix", "superharmonic", "oracle", "invariant")

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")

_NEEDS_D = {"risk", "dominate", "figure1", "superharmonic"}
_NEEDS_ALPHA = {"risk", "dominate"}


def _as_count(value: Any) -> Any:
    """Accept 1e6-style counts from flags and job files."""
    if isinstance(value, str):
        value = float(value)
    if isinstance(value, float):
        if not value.is_integer():
            raise ValueError(f"expected an integer count, got {value}")
        return int(value)
    return value


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    subcommand: Literal["risk", "dominate", "figure1", "superharmonic", "appendix", "verify"]
    d: Optional[int] = None
    alpha: Optional[float] = None
    vx: float = 1.0
    vy: float = 1.0
    mu_grid: List[float] = list(DEFAULT_MU_NORMS)
    n: int = 100_000
    seed: int = 0
    tol: float = 1e-8
    threads: int = max(1, os.cpu_count() or 1)
    out: Optional[str] = None
    format: Optional[Literal["csv", "json"]] = None
    only: Optional[List[str]] = None
    density: Literal["uniform", "harmonic", "constant"] = "uniform"
    candidate: Literal["harmonic", "constant"] = "harmonic"
    t: Optional[float] = None
    nu: int = 2
    c: float = 0.5
    mode: Literal["integer", "kappa"] = "integer"
    points: int = 20
    inject_fault: bool = False

    @field_validator("n", "seed", "threads", "points", mode="before")
    @classmethod
    def _counts(cls, value):
        return _as_count(value)

    @field_validator("alpha")
    @classmethod
    def _alpha_range(cls, value):
        if value is not None and not (-1.0 <= value <= 1.0):
            raise ValueError(f"alpha must lie in [-1, 1], got {value}")
        return value

    @field_validator("vx", "vy", "tol")
    @classmethod
    def _positive(cls, value):
        if not value > 0:
            raise ValueError(f"must be positive, got {value}")
        return value

    @field_validator("d")
    @classmethod
    def _dimension(cls, value):
        if value is not None and value < 3:
            raise ValueError(f"dimension must be >= 3, got {value}")
        return value

    @field_validator("n")
    @classmethod
    def _sample_size(cls, value):
        if value < 2:
            raise ValueError(f"n must be >= 2, got {value}")
        return value

    @field_validator("seed")
    @classmethod
    def _seed_range(cls, value):
        if not (0 <= value < 2**64):
            raise ValueError("seed must be a 64-bit unsigned integer")
        return value

    @field_validator("threads", "points", "nu")
    @classmethod
    def _at_least_one(cls, value):
        if value < 1:
            raise ValueError(f"must be >= 1, got {value}")
        return value

    @field_validator("c")
    @classmethod
    def _unit_interval(cls, value):
        if not (0.0 < value < 1.0):
            raise ValueError(f"c must lie in (0, 1), got {value}")
        return value

    @field_validator("mu_grid", mode="before")
    @classmethod
    def _parse_mu_grid(cls, value):
        if isinstance(value, str):
            value = [item for item in value.replace(";", ",").split(",") if item.strip()]
        if isinstance(value, (int, float)):
            value = [value]
        grid = [float(item) for item in value]
        if not grid:
            raise ValueError("mu grid is empty")
        if any(mu < 0 for mu in grid):
            raise ValueError("mu grid holds norms and must be nonnegative")
        return grid

    @field_validator("only", mode="before")
    @classmethod
    def _parse_only(cls, value):
        if isinstance(value, str):
            value = [item.strip() for item in value.split(",") if item.strip()]
        if value is not None:
            unknown = sorted(set(value) - set(VERIFY_GROUPS))
            if unknown:
                raise ValueError(f"unknown check groups {unknown}; choose from {list(VERIFY_GROUPS)}")
        return value

    @model_validator(mode="after")
    def _required_for_subcommand(self):
        if self.subcommand in _NEEDS_D and self.d is None:
            raise ValueError(f"{self.subcommand} needs --d")
        if self.subcommand in _NEEDS_ALPHA and self.alpha is None:
            raise ValueError(f"{self.subcommand} needs --alpha")
        return self

    def problem_spec(self) -> ProblemSpec:
        if self.d is None or self.alpha is None:
            raise ConfigError("a problem needs both d and alpha")
        return ProblemSpec(d=self.d, v_x=self.vx, v_y=self.vy, alpha=self.alpha)

    @property
    def output_format(self) -> str:
        """csv by default; the checking subcommands default to json."""
        if self.format is not None:
            return self.format
        return "json" if self.subcommand in ("appendix", "verify") else "csv"

    def header_config(self) -> Dict[str, Any]:
        """Config as recorded in output headers (output location excluded)."""
        return self.model_dump(exclude={"out", "threads"})


@dataclass
class ExecutionConfig:
    threads: int = 1


def get_execution_config(run_config: RunConfig) -> ExecutionConfig:
    return ExecutionConfig(threads=run_config.threads)


def load_config_file(path: str) -> Dict[str, Any]:
    """Read a YAML or JSON job file into a flat mapping."""
    file = Path(path)
    if not file.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = yaml.safe_load(file.read_text(encoding="utf-8")) or {}
    except yaml.YAMLError as e:
        raise ConfigError(f"cannot parse config file {path}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must hold a mapping")
    return {str(key).replace("-", "_"): value for key, value in data.items()}


def build_run_config(
    subcommand: str,
    flags: Dict[str, Any],
    config_path: Optional[str] = None,
) -> RunConfig:
    """
    Merge defaults, the job file and flags into a validated RunConfig.

    Args:
        subcommand: One of SUBCOMMANDS
        flags: Flags given explicitly on the command line
        config_path: Optional YAML/JSON job file

    Returns:
        The validated configuration

    Raises:
        ConfigError: on unknown keys or invalid values
    """
    merged: Dict[str, Any] = {}
    if config_path:
        merged.update(load_config_file(config_path))
        file_subcommand = merged.pop("subcommand", subcommand)
        if file_subcommand != subcommand:
            logger.info(f"[CLI] config file names subcommand {file_subcommand!r}; running {subcommand!r}")
    merged.update({key: value for key, value in flags.items() if value is not None})
    merged["subcommand"] = subcommand
    try:
        return RunConfig(**merged)
    except ValidationError as e:
        problems = "; ".join(
            f"{'.'.join(str(p) for p in err['loc']) or 'config'}: {err['msg']}" for err in e.errors()
        )
        raise ConfigError(problems) from e
