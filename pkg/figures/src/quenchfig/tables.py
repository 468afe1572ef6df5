"""Readers for the delimited artifacts the simulation CLI writes.

The files are UTF-8 CSV with LF line endings and ``# key: value`` comment
headers; values round-trip through repr formatting.  This module parses
that layout and classifies each table by its exact column list, so a
renderer can be handed a mixed bag of paths and sort out what is what.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

__all__ = ["SchemaError", "read_table", "classify", "floats", "SCHEMAS"]


class SchemaError(Exception):
    """Input does not match any renderable table layout."""


# exact column lists, keyed by the table kind a renderer dispatches on
SCHEMAS = {
    "trajectory": ("t", "n0", "n1"),
    "gaussian-trajectory": ("t", "n0", "n1", "c00", "c01", "c11"),
    "contour": ("flow", "t", "mean0", "mean1", "cov00", "cov01", "cov11",
                "major", "minor", "angle"),
    "scan": ("tau_q", "xi_hat", "n_domains", "runs", "w_rms",
             "w_rms_stderr", "pipeline"),
    "fit": ("x", "y", "n_points", "exponent", "exponent_stderr",
            "amplitude", "r_squared"),
    "occupancy": ("t", "nbar", "nbar_eq", "mode_k"),
    "snapshot": ("n0", "n1", "p"),
}
_BY_COLUMNS = {cols: kind for kind, cols in SCHEMAS.items()}


def read_table(path) -> tuple[dict, list[str], list[list[str]]]:
    """Parse one artifact into (metadata, header, rows).

    Metadata holds the ``# key: value`` comments as strings.  A file with
    no non-comment lines returns an empty header and no rows.
    """
    meta: dict[str, str] = {}
    plain: list[str] = []
    with open(path, newline="", encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#"):
                key, sep, val = line[1:].strip().partition(":")
                if sep:
                    meta[key.strip()] = val.strip()
                continue
            plain.append(line)
    table = [row for row in csv.reader(plain) if row]
    if not table:
        return meta, [], []
    return meta, table[0], table[1:]


def classify(path, header) -> str:
    """Name the table layout, or raise with the offending column list."""
    if not header:
        return "empty"
    kind = _BY_COLUMNS.get(tuple(header))
    if kind is None:
        known = ", ".join(sorted(SCHEMAS))
        raise SchemaError(
            f"{Path(path).name}: columns {list(header)!r} match no known "
            f"table layout (expected one of: {known})"
        )
    return kind


def floats(rows, header, column) -> list[float]:
    """One column as floats; blank cells map to nan."""
    i = header.index(column)
    out = []
    for row in rows:
        cell = row[i]
        out.append(float(cell) if cell != "" else math.nan)
    return out
