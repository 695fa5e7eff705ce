"""Deterministic result serialization.

Three formats, all stable byte-for-byte across runs with equal inputs:
CSV with '.' decimal separator and 17 significant digits (enough to
round-trip a double exactly), JSON with sorted keys and a trailing
newline, and a plain matrix interchange format (a dimension header
line, then one row of values per line) for offline inspection of
assembled operators.
"""

from __future__ import annotations

import json
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError


def format_value(x) -> str:
    """One CSV cell: floats at 17 significant digits, ints bare, text raw."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "%.17g" % float(x)
    if isinstance(x, str):
        if "," in x or "\n" in x or '"' in x:
            raise ConfigError(f"CSV cell needs quoting, which is not supported: {x!r}")
        return x
    raise ConfigError(f"cannot format {type(x).__name__} into CSV")


def write_csv(path: str, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    """Write rows under a header with '\\n' line endings, atomically-ish.

    Rows are materialized and checked for width before anything is
    written, so a failure cannot leave a half-file behind.
    """
    lines = [",".join(header)]
    width = len(header)
    for row in rows:
        cells = [format_value(x) for x in row]
        if len(cells) != width:
            raise ConfigError(
                f"CSV row width {len(cells)} does not match header width {width}"
            )
        lines.append(",".join(cells))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    return obj


def write_json(path: str, obj) -> None:
    """Sorted-keys, indented JSON with a trailing newline."""
    text = json.dumps(_jsonable(obj), indent=2, sort_keys=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text + "\n")


def read_json(path: str):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def write_matrix(path: str, mat: np.ndarray) -> None:
    """Dimension header ("rows cols") then row-major values, one row per line."""
    arr = np.asarray(mat, dtype=float)
    if arr.ndim != 2:
        raise ConfigError(f"matrix export needs a 2d array, got ndim={arr.ndim}")
    lines = ["%d %d" % arr.shape]
    for row in arr:
        lines.append(" ".join("%.17g" % v for v in row))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_matrix(path: str) -> np.ndarray:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ConfigError(f"bad matrix header in {path}")
        rows, cols = int(header[0]), int(header[1])
        out = np.loadtxt(fh, dtype=float, ndmin=2)
    if out.shape != (rows, cols):
        raise ConfigError(
            f"matrix body {out.shape} does not match header ({rows}, {cols})"
        )
    return out

