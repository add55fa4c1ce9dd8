"""CSV and JSON emission of run records.

Floats go out at 17 significant digits in CSV and as shortest round-trip
reprs in JSON, so both parse back to the same doubles.
"""

import csv
import io
import json
import math
import os
import sys
import tempfile
from collections.abc import Iterable, Mapping
from enum import Enum
from pathlib import Path
from typing import Any

from frozendict import frozendict
from toolz import unique


class OutputFormat(Enum):
    CSV = "csv"
    JSON = "json"


type Row = Mapping[str, Any]


def _plain(value: Any) -> Any:
    match value:
        case Enum():
            return value.value

        case frozendict() | dict():
            return {key: _plain(item) for key, item in value.items()}

        case tuple() | list():
            return [_plain(item) for item in value]

        case float() if not math.isfinite(value):
            return None

        case _ if hasattr(value, "item"):
            # numpy scalars
            return value.item()

        case _:
            return value


def format_cell(value: Any) -> str:
    match _plain(value):
        case None:
            return ""

        case bool() as flag:
            return "true" if flag else "false"

        case float() as number:
            return format(number, ".17g")

        case list() as items:
            return ";".join(format_cell(item) for item in items)

        case other:
            return str(other)


def render_json(config: Row, rows: Iterable[Row]) -> str:
    return json.dumps(
        {"config": _plain(config), "results": [_plain(row) for row in rows]},
        indent=2,
        allow_nan=False,
    )


def render_csv(config: Row, rows: Iterable[Row]) -> str:
    rows = list(rows)
    config_columns = [f"config.{key}" for key in config]
    columns = config_columns + list(unique(key for row in rows for key in row))

    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)

    config_cells = [format_cell(value) for value in config.values()]
    for row in rows:
        writer.writerow(config_cells + [format_cell(row.get(key)) for key in columns[len(config_cells):]])

    return buffer.getvalue()


def render(config: Row, rows: Iterable[Row], output_format: OutputFormat) -> str:
    match output_format:
        case OutputFormat.JSON:
            return render_json(config, rows)

        case OutputFormat.CSV:
            return render_csv(config, rows)


def write_atomic(path: Path | None, text: str) -> None:
    """Write the whole text or nothing: temp file in the target dir, then rename."""
    if path is None:
        sys.stdout.write(text)
        return

    path.parent.mkdir(parents=True, exist_ok=True)

    with tempfile.NamedTemporaryFile(
        "w", dir=path.parent, prefix=f".{path.name}.", delete=False, encoding="utf-8", newline=""
    ) as handle:
        handle.write(text)

    os.replace(handle.name, path)
