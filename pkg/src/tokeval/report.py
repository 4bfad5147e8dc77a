"""Report files: every report is written as ``<prefix>.tsv`` and ``<prefix>.json``.

TSV reports start with ``# config.<key>\\t<value>`` comment lines echoing the
resolved run configuration, followed by a header row and data rows.
"""
from __future__ import annotations

import json
import math
import os
import sys
from typing import Any, Mapping, Sequence


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return repr(value)
    if isinstance(value, (list, tuple)):
        return ",".join(_cell(v) for v in value)
    return str(value).replace("\t", " ").replace("\n", " ")


def _jsonable(value: Any) -> Any:
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, Mapping):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if hasattr(value, "item"):  # numpy scalars
        return _jsonable(value.item())
    return value


def format_tsv(config: Mapping[str, Any], rows: Sequence[Mapping[str, Any]],
               columns: Sequence[str] | None = None) -> str:
    lines = [f"# config.{k}\t{_cell(v)}" for k, v in config.items()]
    if columns is None:
        columns = list(rows[0]) if rows else []
    lines.append("\t".join(columns))
    for row in rows:
        lines.append("\t".join(_cell(row.get(c)) for c in columns))
    return "\n".join(lines) + "\n"


def format_json(config: Mapping[str, Any], results: Any) -> str:
    doc = {"config": _jsonable(dict(config)), "results": _jsonable(results)}
    return json.dumps(doc, indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def kv_rows(results: Mapping[str, Any]) -> list[dict]:
    return [{"key": k, "value": v} for k, v in results.items()]


def report_prefix(path: str) -> str:
    root, ext = os.path.splitext(path)
    return root if ext in (".tsv", ".json") else path


def write_report(path: str | None, config: Mapping[str, Any], results: Any,
                 rows: Sequence[Mapping[str, Any]] | None = None,
                 columns: Sequence[str] | None = None) -> None:
    """Write the TSV and JSON forms; with ``path=None`` print the TSV to stdout.

    ``rows`` defaults to one ``key/value`` row per entry of a flat ``results``.
    """
    if rows is None:
        rows = kv_rows(results)
        columns = ["key", "value"]
    tsv = format_tsv(config, rows, columns)
    if path is None:
        sys.stdout.write(tsv)
        return
    prefix = report_prefix(path)
    with open(prefix + ".tsv", "w", encoding="utf-8", newline="") as fh:
        fh.write(tsv)
    with open(prefix + ".json", "w", encoding="utf-8", newline="") as fh:
        fh.write(format_json(config, results))
