"""Delimited output with embedded provenance.

Every artifact carries `#`-prefixed header comments (config hash, master
seed, schema name) before the column row, UTF-8 with \\n line endings.
Floats are written with repr() so values round-trip bit-exactly; this
keeps repeated runs byte-comparable and spares downstream consumers any
precision guessing.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .errors import ConfigError

__all__ = ["format_cell", "write_csv", "read_csv", "write_json", "read_json"]


def format_cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if v is None:
        return ""
    s = str(v)
    if "," in s or "\n" in s or "#" in s:
        raise ConfigError(f"cell value {s!r} would corrupt the table")
    return s


def write_csv(path, header, rows, meta=None) -> None:
    """Write rows (sequences) under a header, prefixed by '# key: value' lines."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = []
    for k, v in (meta or {}).items():
        lines.append(f"# {k}: {v}")
    lines.append(",".join(header))
    n_cols = len(header)
    for row in rows:
        cells = [format_cell(v) for v in row]
        if len(cells) != n_cols:
            raise ConfigError(
                f"row has {len(cells)} cells, header has {n_cols}: {row!r}"
            )
        lines.append(",".join(cells))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def read_csv(path):
    """Inverse of write_csv: returns (meta dict, header list, rows as string lists)."""
    text = Path(path).read_text(encoding="utf-8")
    meta, header, rows = {}, None, []
    for line in text.splitlines():
        if not line.strip():
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if ":" in body:
                k, v = body.split(":", 1)
                meta[k.strip()] = v.strip()
            continue
        cells = line.split(",")
        if header is None:
            header = cells
        else:
            rows.append(cells)
    if header is None:
        raise ConfigError(f"{path}: no header row found")
    return meta, header, rows


def floats(rows, header, column):
    """Pull one column as a float array-like list; '' becomes nan."""
    try:
        i = header.index(column)
    except ValueError:
        raise ConfigError(f"missing column {column!r}; have {header}") from None
    return [float(r[i]) if r[i] != "" else math.nan for r in rows]


def write_json(path, obj: dict, meta=None) -> None:
    """JSON companion artifact; meta merges into the object (JSON has no comments)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = dict(meta or {})
    payload.update(obj)
    path.write_text(
        json.dumps(payload, indent=2, sort_keys=True, allow_nan=True) + "\n",
        encoding="utf-8",
    )


def read_json(path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))
