"""Flat CSV files with exact float round-trips.

Floats are written with ``repr`` (shortest string that parses back to the
same double), so identical rows always give identical bytes.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import fields, is_dataclass
from typing import Any, Iterable


def format_value(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return repr(v)
    if hasattr(v, "item"):  # numpy scalar
        return format_value(v.item())
    return str(v)


def parse_value(text: str, kind: type) -> Any:
    if kind is float:
        return math.nan if text in ("", "nan") else float(text)
    if kind is int:
        return int(text)
    if kind is bool:
        return text == "true"
    return text


def to_text(header: list[str], rows: Iterable) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        if is_dataclass(r):
            vals = [getattr(r, h) for h in header]
        elif isinstance(r, dict):
            vals = [r[h] for h in header]
        else:
            vals = list(r)
        w.writerow([format_value(v) for v in vals])
    return buf.getvalue()


def write_rows(path, header: list[str], rows: Iterable, empty_if_none: bool = False) -> int:
    """Write rows; returns the number of data rows.

    With ``empty_if_none`` a table without rows becomes a zero-byte file.
    """
    rows = list(rows)
    text = "" if (empty_if_none and not rows) else to_text(header, rows)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return len(rows)


def read_rows(path, types: dict[str, type] | None = None) -> list[dict]:
    with open(path, encoding="utf-8", newline="") as fh:
        text = fh.read()
    if not text:
        return []
    reader = csv.DictReader(io.StringIO(text))
    types = types or {}
    return [{k: parse_value(v, types.get(k, str)) for k, v in row.items()} for row in reader]


def read_dataclass(path, cls) -> list:
    types = {f.name: _resolve(f.type) for f in fields(cls)}
    return [cls(**r) for r in read_rows(path, types)]


def _resolve(t) -> type:
    name = t if isinstance(t, str) else getattr(t, "__name__", str(t))
    for kind in (bool, int, float):
        if name.startswith(kind.__name__):
            return kind
    return str
