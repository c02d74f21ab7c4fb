"""JSON/CSV serialization shared by the checkers and the command line."""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from typing import Callable, Iterable, Sequence

from .funcmodel import format_real

THREADS_ENV = "GAUGECALC_THREADS"


def json_safe(obj):
    """Recursively convert to plain JSON: rationals to ``"p/q"``, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [json_safe(v) for v in obj]
    if isinstance(obj, Fraction):
        return format_real(obj)
    if isinstance(obj, bool) or obj is None or isinstance(obj, (int, str)):
        return obj
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else repr(obj)
    if hasattr(obj, "to_json"):
        return json_safe(obj.to_json())
    try:
        return float(obj)
    except (TypeError, ValueError):
        return str(obj)


def dumps(obj) -> str:
    """Deterministic JSON text (sorted keys, no NaN literals)."""
    return json.dumps(json_safe(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def rows_to_csv(rows: Sequence[dict], columns: Sequence[str] | None = None) -> str:
    """CSV text with '.' decimals (``repr`` floats) and rationals as ``"p/q"``."""
    if columns is None:
        columns = list(rows[0]) if rows else []
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(row.get(c)) for c in columns])
    return buf.getvalue()


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, Fraction):
        return str(format_real(value))
    if isinstance(value, float):
        return repr(value)
    return str(value)


def worker_count() -> int:
    """Parallelism cap from ``GAUGECALC_THREADS`` (default 1)."""
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def ordered_map(fn: Callable, items: Iterable) -> list:
    """``[fn(x) for x in items]``, spread over ``worker_count()`` threads, order kept."""
    items = list(items)
    workers = min(worker_count(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
