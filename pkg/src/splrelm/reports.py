"""Run reports: append-safe line-delimited JSON records for tooling plus
aligned text tables for eyeballs. Every record embeds the full run
configuration so a report line alone reproduces its run.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np


def _jsonable(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def append_record(path, record: dict) -> None:
    """Append one record as a single JSON line (creates the file if needed)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    line = json.dumps(_jsonable(record), sort_keys=True)
    with open(path, "a", encoding="utf-8") as f:
        f.write(line + "\n")


def read_records(path) -> list[dict]:
    """Read every record from a line-delimited report file."""
    records = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records


def format_table(headers: list[str], rows: list[list]) -> str:
    """Align columns: text left, numbers right, floats to 4 significant
    places unless they are integral."""
    def render(cell):
        if isinstance(cell, bool):
            return str(cell)
        if isinstance(cell, float):
            return f"{cell:.4g}" if cell != int(cell) else f"{int(cell)}"
        return str(cell)

    grid = [[render(c) for c in row] for row in rows]
    widths = [max(len(h), *(len(row[i]) for row in grid)) if grid else len(h)
              for i, h in enumerate(headers)]
    numeric = [all(isinstance(row[i], (int, float)) and
                   not isinstance(row[i], bool) for row in rows) if rows
               else False for i in range(len(headers))]

    def fmt_row(cells, force_left=False):
        parts = []
        for i, cell in enumerate(cells):
            if numeric[i] and not force_left:
                parts.append(cell.rjust(widths[i]))
            else:
                parts.append(cell.ljust(widths[i]))
        return "  ".join(parts).rstrip()

    lines = [fmt_row(headers, force_left=True),
             "  ".join("-" * w for w in widths)]
    lines.extend(fmt_row(row) for row in grid)
    return "\n".join(lines)
