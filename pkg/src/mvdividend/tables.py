"""Plain result tables with CSV and JSON writers.

CSV output is gnuplot friendly: ``#``-prefixed metadata lines, one header row,
comma-separated values. Floats are written with 10 significant digits.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Any

SIG_DIGITS = 10


def format_value(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if v is None:
        return ""
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return f"{v:.{SIG_DIGITS}g}"
    if hasattr(v, "value"):  # enums
        return str(v.value)
    return str(v)


def _json_value(v: Any) -> Any:
    if isinstance(v, float):
        if not math.isfinite(v):
            return None
        return float(f"{v:.{SIG_DIGITS}g}")
    if isinstance(v, dict):
        return {k: _json_value(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_json_value(x) for x in v]
    if hasattr(v, "value"):
        return v.value
    return v


@dataclass
class Table:
    """Named columns, ordered rows and free-form metadata."""

    columns: list[str]
    rows: list[list[Any]] = field(default_factory=list)
    meta: dict[str, Any] = field(default_factory=dict)

    def append(self, row) -> None:
        if isinstance(row, dict):
            row = [row.get(c) for c in self.columns]
        if len(row) != len(self.columns):
            raise ValueError(f"row has {len(row)} values, table has {len(self.columns)} columns")
        self.rows.append(list(row))

    def column(self, name: str) -> list[Any]:
        i = self.columns.index(name)
        return [r[i] for r in self.rows]

    def records(self) -> list[dict[str, Any]]:
        return [dict(zip(self.columns, r)) for r in self.rows]

    def __len__(self) -> int:
        return len(self.rows)

    def to_csv(self, timestamp: bool = True) -> str:
        buf = io.StringIO()
        if timestamp:
            buf.write(f"# generated: {datetime.now(timezone.utc).isoformat(timespec='seconds')}\n")
        for k, v in self.meta.items():
            if isinstance(v, dict):
                v = " ".join(f"{kk}={format_value(vv)}" for kk, vv in v.items())
            buf.write(f"# {k}: {format_value(v)}\n")
        buf.write(",".join(self.columns) + "\n")
        for r in self.rows:
            buf.write(",".join(format_value(v) for v in r) + "\n")
        return buf.getvalue()

    def to_json(self, timestamp: bool = False) -> str:
        out: dict[str, Any] = {"meta": _json_value(self.meta)}
        if timestamp:
            out["generated"] = datetime.now(timezone.utc).isoformat(timespec="seconds")
        out["columns"] = list(self.columns)
        out["rows"] = [_json_value(r) for r in self.rows]
        return json.dumps(out, indent=2) + "\n"

    def dump(self, fmt: str = "csv", timestamp: bool = True) -> str:
        if fmt == "csv":
            return self.to_csv(timestamp=timestamp)
        if fmt == "json":
            return self.to_json(timestamp=False)
        raise ValueError(f"unknown format {fmt!r}")
