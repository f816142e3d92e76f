"""
Table writers and readers for CSV and JSON results.

CSV files open with '#'-prefixed metadata lines (schema, version, seed,
config and any extra keys), then a header row. Floats are written with 17
significant digits so a written table reads back to the same values.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigError

SCHEMA_PREFIX = "harmonic-predictive"


def schema_name(table: str) -> str:
    return f"{SCHEMA_PREFIX}/{table}/v1"


def plain(value: Any) -> Any:
    """numpy scalars to Python scalars, recursively through dicts and lists."""
    if isinstance(value, dict):
        return {str(k): plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [plain(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    return value


def _format_cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return format(value, ".17g")
    return str(value)


def _parse_cell(text: str) -> Any:
    if text == "":
        return None
    if text in ("true", "false"):
        return text == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def _columns(rows: Sequence[Dict[str, Any]]) -> List[str]:
    columns: List[str] = []
    for row in rows:
        for key in row:
            if key not in columns:
                columns.append(key)
    return columns


def render_table(rows: Sequence[Dict[str, Any]], meta: Dict[str, Any], fmt: str = "csv") -> str:
    """Serialise rows plus metadata; meta must hold 'schema', 'version', 'seed' and 'config'."""
    rows = [plain(row) for row in rows]
    meta = plain(meta)
    if fmt == "json":
        return json.dumps({"meta": meta, "rows": list(rows)}, indent=2, sort_keys=False) + "\n"
    if fmt != "csv":
        raise ConfigError(f"unknown output format {fmt!r}")

    buffer = io.StringIO()
    for key, value in meta.items():
        text = json.dumps(value, sort_keys=True) if key == "config" else _format_cell(value)
        buffer.write(f"# {key}: {text}\n")
    columns = _columns(rows)
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_format_cell(row.get(col)) for col in columns])
    return buffer.getvalue()


def write_table(
    rows: Sequence[Dict[str, Any]],
    meta: Dict[str, Any],
    path: Optional[str],
    fmt: str = "csv",
) -> str:
    """Write to path (or return the text only when path is None)."""
    text = render_table(rows, meta, fmt)
    if path:
        Path(path).write_text(text, encoding="utf-8")
    return text


def parse_table(text: str) -> Tuple[Dict[str, Any], List[Dict[str, Any]]]:
    """Inverse of render_table for either format."""
    stripped = text.lstrip()
    if stripped.startswith("{"):
        data = json.loads(stripped)
        return data["meta"], data["rows"]

    meta: Dict[str, Any] = {}
    body: List[str] = []
    for line in text.splitlines():
        if line.startswith("# ") and not body:
            key, _, value = line[2:].partition(": ")
            meta[key] = json.loads(value) if key == "config" else _parse_cell(value)
        else:
            body.append(line)
    reader = csv.reader(body)
    try:
        header = next(reader)
    except StopIteration:
        return meta, []
    rows = [dict(zip(header, (_parse_cell(cell) for cell in record))) for record in reader if record]
    return meta, rows


def read_table(path: str) -> Tuple[Dict[str, Any], List[Dict[str, Any]]]:
    return parse_table(Path(path).read_text(encoding="utf-8"))
