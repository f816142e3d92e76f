import json
from pathlib import Path

import numpy as np
import pytest

from harmonic_predictive.config import (
    RunConfig,
    build_run_config,
    get_execution_config,
    load_config_file,
)
from harmonic_predictive.errors import ConfigError
from harmonic_predictive.output import parse_table, plain, read_table, render_table, schema_name, write_table

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


# ============================================================================
# Run configuration
# ============================================================================

def test_defaults():
    config = build_run_config("figure1", {"d": 5})
    assert config.vx == 1.0 and config.vy == 1.0
    assert config.mu_grid == [0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0]
    assert config.output_format == "csv"
    assert build_run_config("verify", {}).output_format == "json"
    assert build_run_config("verify", {"format": "csv"}).output_format == "csv"


def test_flags_override_file_values(tmp_path):
    job = tmp_path / "job.yml"
    job.write_text("d: 5\nalpha: 0.0\nn: 1e4\nseed: 3\nmu-grid: '0,2'\n", encoding="utf-8")
    config = build_run_config("risk", {"seed": 9}, str(job))
    assert config.d == 5
    assert config.n == 10_000
    assert config.seed == 9
    assert config.mu_grid == [0.0, 2.0]


def test_json_job_files_are_accepted(tmp_path):
    job = tmp_path / "job.json"
    job.write_text(json.dumps({"d": 4, "alpha": 0.5, "n": 5000}), encoding="utf-8")
    config = build_run_config("dominate", {}, str(job))
    assert config.problem_spec().alpha == 0.5


def test_scientific_notation_counts():
    assert build_run_config("risk", {"d": 3, "alpha": 0.0, "n": "1e6"}).n == 1_000_000
    with pytest.raises(ConfigError):
        build_run_config("risk", {"d": 3, "alpha": 0.0, "n": "1.5"})


@pytest.mark.parametrize(
    "subcommand, flags",
    [
        ("risk", {"d": 3}),
        ("dominate", {"alpha": 0.0}),
        ("risk", {"d": 2, "alpha": 0.0}),
        ("risk", {"d": 3, "alpha": 1.5}),
        ("risk", {"d": 3, "alpha": 0.0, "vx": -1.0}),
        ("risk", {"d": 3, "alpha": 0.0, "mu_grid": "1,-2"}),
        ("verify", {"only": "identity,bogus"}),
        ("superharmonic", {"d": 4, "c": 1.0}),
        ("risk", {"d": 3, "alpha": 0.0, "unknown": 1}),
    ],
)
def test_invalid_configs_raise_config_error(subcommand, flags):
    with pytest.raises(ConfigError):
        build_run_config(subcommand, flags)


def test_missing_config_file():
    with pytest.raises(ConfigError):
        build_run_config("figure1", {"d": 5}, "/nonexistent/job.yml")


def test_problem_spec_needs_alpha():
    config = build_run_config("figure1", {"d": 5})
    with pytest.raises(ConfigError):
        config.problem_spec()


def test_problem_spec_validates_values():
    config = build_run_config("risk", {"d": 3, "alpha": 0.0, "vx": 2.0})
    spec = config.problem_spec()
    assert (spec.d, spec.v_x, spec.v_y, spec.alpha) == (3, 2.0, 1.0, 0.0)


def test_header_config_excludes_execution_settings():
    config = build_run_config("risk", {"d": 3, "alpha": 0.0, "threads": 3, "out": "x.csv"})
    header = config.header_config()
    assert "threads" not in header and "out" not in header
    assert header["d"] == 3
    assert get_execution_config(config).threads == 3


def test_chunk_size_is_not_a_run_setting():
    # Monte Carlo substreams are keyed by a fixed chunk size; it is not configurable
    with pytest.raises(ConfigError):
        build_run_config("risk", {"d": 3, "alpha": 0.0, "chunk_size": 10})
    assert "chunk_size" not in RunConfig.model_fields


@pytest.mark.parametrize("name", sorted(p.name for p in CONFIG_DIR.glob("*.yml")))
def test_shipped_job_files_validate(name):
    data = load_config_file(str(CONFIG_DIR / name))
    config = build_run_config(data["subcommand"], {}, str(CONFIG_DIR / name))
    assert isinstance(config, RunConfig)


# ============================================================================
# Output tables
# ============================================================================

META = {"schema": schema_name("risk"), "version": "1.0.0", "seed": 7, "config": {"d": 3, "alpha": None}}
ROWS = [
    {"mu_norm": 0.0, "risk": 1.0 / 3.0, "pass": True, "kappa": None, "branch": "integer_case", "n": 1000},
    {"mu_norm": 0.5, "risk": 0.1 + 0.2, "pass": False, "kappa": 3, "branch": "noninteger_case", "n": 1000},
]


def test_schema_name():
    assert schema_name("figure1") == "harmonic-predictive/figure1/v1"


def test_csv_header_lines():
    text = render_table(ROWS, META, "csv")
    lines = text.splitlines()
    assert lines[0] == "# schema: harmonic-predictive/risk/v1"
    assert lines[2] == "# seed: 7"
    assert lines[4] == "mu_norm,risk,pass,kappa,branch,n"
    assert "0.33333333333333331" in text


@pytest.mark.parametrize("fmt", ["csv", "json"])
def test_tables_read_back_exactly(fmt):
    meta, rows = parse_table(render_table(ROWS, META, fmt))
    assert rows == ROWS
    assert meta == META


def test_write_and_read_file(tmp_path):
    path = tmp_path / "out.csv"
    text = write_table(ROWS, META, str(path))
    assert path.read_text(encoding="utf-8") == text
    assert read_table(str(path))[1] == ROWS


def test_numpy_values_are_written_as_plain_numbers():
    rows = [{"value": np.float64(0.25), "count": np.int64(4), "flag": np.bool_(True)}]
    assert plain(rows) == [{"value": 0.25, "count": 4, "flag": True}]
    _, back = parse_table(render_table(rows, META, "csv"))
    assert back == [{"value": 0.25, "count": 4, "flag": True}]


def test_unknown_format_rejected():
    with pytest.raises(ConfigError):
        render_table(ROWS, META, "xml")
