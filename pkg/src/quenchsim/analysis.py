"""Power-law fitting and ensemble statistics shared by the experiment pipelines."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

__all__ = ["PowerLawFit", "fit_power_law", "departure_time", "ensemble_rms"]


@dataclass(frozen=True)
class PowerLawFit:
    """Least-squares fit of y = amplitude * x**exponent on log-log axes."""

    exponent: float
    amplitude: float
    exponent_stderr: float
    r_squared: float
    n_points: int


def fit_power_law(xs, ys, weights=None) -> PowerLawFit:
    """Fit a power law by (optionally weighted) least squares in log-log space.

    ``weights`` multiply the squared log-residuals; the default is
    unweighted, which is appropriate when all points carry comparable
    relative errors.
    """
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.size < 3:
        raise ConfigError(f"need at least 3 points to fit, got {x.size}")
    if x.size != y.size:
        raise ConfigError(f"length mismatch: {x.size} xs vs {y.size} ys")
    if np.any(x <= 0) or np.any(y <= 0):
        raise ConfigError("power-law fit requires strictly positive data")

    lx, ly = np.log(x), np.log(y)
    w = np.ones_like(lx) if weights is None else np.asarray(weights, dtype=float)
    if np.any(w <= 0):
        raise ConfigError("weights must be positive")

    wsum = w.sum()
    mx = (w * lx).sum() / wsum
    my = (w * ly).sum() / wsum
    sxx = (w * (lx - mx) ** 2).sum()
    sxy = (w * (lx - mx) * (ly - my)).sum()
    if sxx == 0:
        raise ConfigError("all x values identical: exponent undefined")
    slope = sxy / sxx
    intercept = my - slope * mx

    resid = ly - (intercept + slope * lx)
    ssr = (w * resid**2).sum()
    syy = (w * (ly - my) ** 2).sum()
    r2 = 1.0 if syy == 0 else max(0.0, 1.0 - ssr / syy)
    dof = x.size - 2
    stderr = math.sqrt(max(ssr, 0.0) / dof / sxx) if dof > 0 else float("nan")
    return PowerLawFit(
        exponent=float(slope),
        amplitude=float(math.exp(intercept)),
        exponent_stderr=float(stderr),
        r_squared=float(min(r2, 1.0)),
        n_points=int(x.size),
    )


def departure_time(series, factor: float):
    """First time the equilibrium-to-actual ratio reaches ``factor``.

    Scans the subcritical part of the series (where the equilibrium
    occupation exists) and linearly interpolates the crossing between
    grid points.  Returns None when the criterion is never met.
    """
    if factor < 1.0:
        raise ConfigError(f"factor must be >= 1, got {factor}")
    valid = np.isfinite(series.nbar_eq) & (series.nbar > 0)
    t = series.times[valid]
    ratio = series.nbar_eq[valid] / series.nbar[valid]
    if t.size == 0:
        return None
    if ratio[0] >= factor:
        return float(t[0])
    above = np.nonzero(ratio >= factor)[0]
    if above.size == 0:
        return None
    i = above[0]
    r0, r1 = ratio[i - 1], ratio[i]
    frac = (factor - r0) / (r1 - r0)
    return float(t[i - 1] + frac * (t[i] - t[i - 1]))


def ensemble_rms(samples) -> tuple[float, float]:
    """Root-mean-square of samples with a jackknife standard error."""
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise ConfigError("ensemble_rms needs at least one sample")
    n = x.size
    sq = x**2
    total = sq.sum()
    rms = math.sqrt(total / n)
    if n == 1:
        return rms, 0.0
    loo = np.sqrt((total - sq) / (n - 1))  # leave-one-out rms values
    var = (n - 1) / n * ((loo - loo.mean()) ** 2).sum()
    return rms, math.sqrt(max(var, 0.0))
