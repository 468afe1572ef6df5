"""Figure builders over the simulation CLI's CSV artifacts.

Three kinds:

- phase-plane: deterministic-flow trajectories over the (n0, n1) plane,
  QKT solid and TDGL dotted, with the n0 = n1 diagonal, the heavy-dashed
  metastability threshold n0 + n1 = threshold, and 68% probability
  ellipses rebuilt from (mean, cov) contour rows.
- scaling: log-log winding scan with a fitted power law and its slope
  annotated on the axes (and echoed by the CLI).
- occupancy: occupation versus time against the instantaneous
  equilibrium curve, one pair of lines per input file.

Rendering is read-only and the output dimensions are fixed per kind, not
data dependent.  Every figure is written as both raster and vector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from matplotlib.patches import Ellipse

from .tables import SchemaError, classify, floats, read_table

__all__ = [
    "FigureSpec",
    "render_phase_plane",
    "render_scaling",
    "render_occupancy",
    "save_figure",
    "KINDS",
]

KINDS = ("phase-plane", "scaling", "occupancy")

# chi-squared quantile (2 dof) enclosing 68% of a bivariate normal
_CHI2_68 = -2.0 * math.log(1.0 - 0.68)

_FLOW_STYLE = {
    "qkt": dict(color="C0", linestyle="-", linewidth=1.0, alpha=0.85),
    "tdgl": dict(color="C3", linestyle=":", linewidth=1.3, alpha=0.85),
}

_RASTER = {".png", ".jpg", ".jpeg"}
_VECTOR = {".svg", ".pdf"}


@dataclass(frozen=True)
class FigureSpec:
    """One rendering request: what to read, what to draw, where to put it."""

    kind: str
    inputs: tuple[Path, ...]
    output: Path
    xlabel: str | None = None
    ylabel: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(
                f"unknown figure kind {self.kind!r} (choose from {', '.join(KINDS)})"
            )
        if not self.inputs:
            raise SchemaError("no input files given")
        missing = [str(p) for p in self.inputs if not Path(p).is_file()]
        if missing:
            raise SchemaError(f"input files not found: {', '.join(missing)}")


def _ellipse_patch(mean0, mean1, c00, c01, c11):
    cov = np.array([[c00, c01], [c01, c11]], dtype=float)
    vals, vecs = np.linalg.eigh(cov)
    major = math.sqrt(_CHI2_68 * max(float(vals[1]), 0.0))
    minor = math.sqrt(_CHI2_68 * max(float(vals[0]), 0.0))
    angle = math.degrees(math.atan2(float(vecs[1, 1]), float(vecs[0, 1])))
    return Ellipse((mean0, mean1), width=2.0 * major, height=2.0 * minor,
                   angle=angle, facecolor="none", edgecolor="k",
                   linewidth=0.8)


def render_phase_plane(spec: FigureSpec):
    """Trajectories, probability ellipses, diagonal, and threshold line."""
    fig, ax = plt.subplots(figsize=(5.0, 5.0))
    threshold = None
    flows_drawn = set()
    for path in spec.inputs:
        meta, header, rows = read_table(path)
        kind = classify(path, header)
        if "threshold" in meta:
            threshold = float(meta["threshold"])
        if kind == "empty" or not rows:
            continue
        if kind in ("trajectory", "gaussian-trajectory"):
            flow = meta.get("flow", "qkt")
            style = _FLOW_STYLE.get(flow, _FLOW_STYLE["qkt"])
            label = flow.upper() if flow not in flows_drawn else None
            ax.plot(floats(rows, header, "n0"), floats(rows, header, "n1"),
                    label=label, **style)
            flows_drawn.add(flow)
        elif kind == "contour":
            for row in rows:
                cell = dict(zip(header, row))
                ax.add_patch(_ellipse_patch(
                    float(cell["mean0"]), float(cell["mean1"]),
                    float(cell["cov00"]), float(cell["cov01"]),
                    float(cell["cov11"]),
                ))
        else:
            raise SchemaError(
                f"{Path(path).name}: columns {list(header)!r} do not belong "
                "on the phase plane (want trajectory or contour tables)"
            )
    ax.axline((0.0, 0.0), slope=1.0, color="0.65", linewidth=0.8)
    if threshold is not None:
        ax.axline((threshold, 0.0), (0.0, threshold), color="k",
                  linewidth=1.8, dashes=(6, 2), label="threshold")
    ax.set_xlabel(spec.xlabel or "n0")
    ax.set_ylabel(spec.ylabel or "n1")
    if flows_drawn or threshold is not None:
        ax.legend(loc="best", frameon=False)
    return fig


def _positive(path, header, rows, column):
    vals = floats(rows, header, column)
    bad = [v for v in vals if not (math.isfinite(v) and v > 0.0)]
    if bad:
        raise SchemaError(
            f"{Path(path).name}: column {column!r} has non-positive or "
            f"non-finite values {bad[:4]!r}; log axes need positive data"
        )
    return vals


def render_scaling(spec: FigureSpec):
    """Log-log scan scatter plus power-law line; returns (figure, note).

    The note is the slope annotation text (None when no fit is drawn):
    taken verbatim from a fit table when one is supplied, otherwise a
    least-squares log-log fit of the plotted points when there are at
    least two.
    """
    scans, fit_row = [], None
    for path in spec.inputs:
        meta, header, rows = read_table(path)
        kind = classify(path, header)
        if kind == "empty" or not rows:
            continue
        if kind == "scan":
            scans.append((path, header, rows))
        elif kind == "fit":
            if fit_row is None:
                fit_row = dict(zip(header, rows[0]))
        else:
            raise SchemaError(
                f"{Path(path).name}: columns {list(header)!r} do not belong "
                "on a scaling plot (want scan or fit tables)"
            )

    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    if fit_row is not None:
        x_name = fit_row["x"]
    else:
        # n_domains sweeps leave tau_q blank
        x_name = "tau_q"
        if any(math.isnan(v) for _, h, r in scans for v in floats(r, h, "tau_q")):
            x_name = "n_domains"

    all_x, all_y = [], []
    for path, header, rows in scans:
        xs = _positive(path, header, rows, x_name)
        ys = _positive(path, header, rows, "w_rms")
        err = floats(rows, header, "w_rms_stderr")
        ax.errorbar(xs, ys, yerr=err, fmt="o", markersize=5, capsize=3,
                    label=rows[0][header.index("pipeline")])
        all_x.extend(xs)
        all_y.extend(ys)

    note = None
    if all_x:
        if fit_row is not None:
            exponent = float(fit_row["exponent"])
            amplitude = float(fit_row["amplitude"])
        elif len(all_x) >= 2:
            slope, intercept = np.polyfit(np.log(all_x), np.log(all_y), 1)
            exponent, amplitude = float(slope), math.exp(float(intercept))
        else:
            exponent = None
        if exponent is not None:
            grid = np.geomspace(min(all_x), max(all_x), 64)
            ax.plot(grid, amplitude * grid ** exponent, "k-",
                    linewidth=0.9, label="_fit")
            note = f"slope = {exponent:.3f}"
            ax.text(0.04, 0.06, note, transform=ax.transAxes)

    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel(spec.xlabel or x_name)
    ax.set_ylabel(spec.ylabel or "w_rms")
    if scans:
        ax.legend(loc="best", frameon=False)
    return fig, note


def render_occupancy(spec: FigureSpec):
    """Occupation against its instantaneous equilibrium, one pair per file."""
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    for i, path in enumerate(spec.inputs):
        meta, header, rows = read_table(path)
        kind = classify(path, header)
        if kind == "empty" or not rows:
            continue
        if kind != "occupancy":
            raise SchemaError(
                f"{Path(path).name}: columns {list(header)!r} do not belong "
                "on an occupancy plot (want occupancy tables)"
            )
        ts = floats(rows, header, "t")
        color = f"C{i % 10}"
        label = f"tau_q = {meta['tau_q']}" if "tau_q" in meta else Path(path).stem
        ax.plot(ts, floats(rows, header, "nbar"), color=color,
                linewidth=1.2, label=label)
        ax.plot(ts, floats(rows, header, "nbar_eq"), color=color,
                linewidth=0.9, linestyle="--", alpha=0.7)
    ax.set_xlabel(spec.xlabel or "t")
    ax.set_ylabel(spec.ylabel or "occupation (solid; equilibrium dashed)")
    if ax.lines:
        ax.legend(loc="best", frameon=False)
    return fig


def save_figure(fig, output) -> list[Path]:
    """Write the raster and vector twins of one figure; returns both paths."""
    out = Path(output)
    suffix = out.suffix.lower()
    if suffix in _RASTER:
        twin = out.with_suffix(".svg")
    elif suffix in _VECTOR:
        twin = out.with_suffix(".png")
    else:
        known = ", ".join(sorted(_RASTER | _VECTOR))
        raise SchemaError(f"unsupported image suffix {out.suffix!r} (use {known})")
    if out.parent != Path(""):
        out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, dpi=150)
    fig.savefig(twin, dpi=150)
    return [out, twin]
