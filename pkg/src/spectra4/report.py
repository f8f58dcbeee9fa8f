"""Byte-stable CSV and JSON report emission."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Any

__all__ = ["Report", "format_value", "to_csv", "to_json"]


@dataclass
class Report:
    command: str
    columns: list[str]
    rows: list[dict[str, Any]] = field(default_factory=list)
    errors: list[str] = field(default_factory=list)
    summary: dict[str, Any] = field(default_factory=dict)
    config: dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return not self.errors and bool(self.summary.get("passed", True))


def format_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return f"{v:.16e}"
    return str(v)


def _jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None if math.isnan(v) else ("inf" if v > 0 else "-inf")
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


def to_csv(report: Report) -> str:
    buf = io.StringIO()
    buf.write(f"# spectra4 {report.command}\n")
    buf.write("# config: " + json.dumps(_jsonable(report.config), sort_keys=True, separators=(",", ":")) + "\n")
    for e in report.errors:
        buf.write(f"# error: {e}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(report.columns)
    for row in report.rows:
        w.writerow([format_value(row.get(c)) for c in report.columns])
    return buf.getvalue()


def to_json(report: Report) -> str:
    doc = {
        "command": report.command,
        "config": report.config,
        "rows": [{c: row.get(c) for c in report.columns} for row in report.rows],
        "errors": report.errors,
        "summary": report.summary,
    }
    return json.dumps(_jsonable(doc), sort_keys=True, indent=2) + "\n"
