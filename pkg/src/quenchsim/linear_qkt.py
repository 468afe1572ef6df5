"""Linear-regime growth kinetics of independent modes.

Each mode k with energy E_k exchanges particles with a thermalized
reservoir at rate Gamma0; its mean occupation obeys

    d(nbar)/dt = Gamma0 * e^{beta mu} * [1 + (1 - e^{beta(E_k - mu)}) nbar]

whose stationary value below the crossing is the Bose-Einstein
occupation 1/(e^{beta(E_k - mu)} - 1).  Driving beta*mu through zero at
rate 1/tau_q produces the freeze-out phenomenology: occupations lag
their instantaneous equilibrium, stop adjusting a time ~ t_hat before
the crossing, and grow explosively a time ~ t_hat after it, where
t_hat = sqrt(tau_q / Gamma0).  The frozen correlation length
(Gamma0 tau_q)^{1/4} (in thermal de Broglie lengths) follows from the
width of the band of modes still competitive at freeze-out.

This linear theory is only valid while occupations are far from the
interacting saturation scale; integration halts at a configurable cap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .errors import ConfigError, NumericsError
from .schedules import QuenchSchedule

__all__ = [
    "ModeSpec",
    "OccupancySeries",
    "occupancy_rhs",
    "integrate_occupancy",
    "equilibrium_occupancy",
    "freeze_out_time",
    "frozen_correlation_length",
    "competitive_modes",
    "validate_lag_solution",
    "departure_time_scaling",
]


@dataclass(frozen=True)
class ModeSpec:
    """A single reservoir-coupled mode: energy, scattering rate, integer label."""

    e_k: float = 0.0
    gamma0: float = 1.0
    k: int = 0

    def __post_init__(self):
        if self.gamma0 <= 0:
            raise ConfigError(f"gamma0 must be positive, got {self.gamma0}")
        if self.e_k < 0:
            raise ConfigError(f"e_k must be non-negative, got {self.e_k}")


@dataclass
class OccupancySeries:
    """Sampled nbar(t) trajectory with its instantaneous equilibrium curve.

    nbar_eq is NaN at and past the crossing, where no equilibrium
    occupation exists.  capped_at is the halt time if the explosive-growth
    cap fired, else None.
    """

    times: np.ndarray
    nbar: np.ndarray
    schedule: QuenchSchedule
    mode: ModeSpec
    nbar_eq: np.ndarray = field(default=None)
    capped_at: float | None = None

    def __post_init__(self):
        if self.nbar_eq is None:
            self.nbar_eq = _equilibrium_curve(self.schedule, self.mode, self.times)


def _exponent_arg(s: QuenchSchedule, m: ModeSpec, t: float) -> float:
    """x = beta(t) * (E_k - mu(t)); positive below the mode's crossing."""
    return s.beta(t) * m.e_k - s.beta_mu(t)


def occupancy_rhs(n: float, t: float, s: QuenchSchedule, m: ModeSpec) -> float:
    """Growth rate of nbar at occupation n and time t."""
    bmu = s.beta_mu(t)
    x = s.beta(t) * m.e_k - bmu
    return m.gamma0 * math.exp(bmu) * (1.0 + (1.0 - math.exp(x)) * n)


def equilibrium_occupancy(s: QuenchSchedule, m: ModeSpec, t: float) -> float:
    """Instantaneous Bose-Einstein occupation 1/(e^x - 1), x = beta(E_k - mu)."""
    x = _exponent_arg(s, m, t)
    if x <= 0:
        raise ConfigError(
            f"equilibrium occupation undefined at t={t}: beta(E_k - mu) = {x} <= 0"
        )
    return 1.0 / math.expm1(x)


def _equilibrium_curve(s, m, times):
    out = np.full(len(times), np.nan)
    for i, t in enumerate(times):
        x = _exponent_arg(s, m, t)
        if x > 0:
            out[i] = 1.0 / math.expm1(x)
    return out


def integrate_occupancy(
    s: QuenchSchedule,
    m: ModeSpec,
    t_i: float,
    t_f: float,
    n_i: float | None = None,
    rtol: float = 1e-9,
    atol: float = 1e-12,
    cap: float = 1e6,
    n_points: int = 2001,
) -> OccupancySeries:
    """Integrate the occupation equation from t_i to t_f.

    n_i = None seeds from the instantaneous equilibrium at t_i (which
    must be subcritical for the mode).  Integration halts early when
    nbar exceeds ``cap``: past that point the linear theory has handed
    off to interacting dynamics and its numbers are meaningless.
    """
    if t_i >= t_f:
        raise ConfigError(f"need t_i < t_f, got {t_i} >= {t_f}")
    if n_i is None:
        n_i = equilibrium_occupancy(s, m, t_i)
    if n_i < 0:
        raise ConfigError(f"initial occupation must be non-negative, got {n_i}")

    def rhs(t, y):
        return [occupancy_rhs(y[0], t, s, m)]

    def hit_cap(t, y):
        return y[0] - cap

    hit_cap.terminal = True
    hit_cap.direction = 1.0

    sol = solve_ivp(
        rhs, (t_i, t_f), [n_i], method="LSODA", rtol=rtol, atol=atol,
        dense_output=True, events=hit_cap,
    )
    if not sol.success:
        raise NumericsError(f"occupancy integration failed at t={sol.t[-1]}: {sol.message}")

    capped_at = None
    t_last = t_f
    if sol.t_events[0].size:
        capped_at = float(sol.t_events[0][0])
        t_last = capped_at
    times = np.linspace(t_i, t_last, n_points)
    nbar = sol.sol(times)[0]

    neg_tol = max(100.0 * atol, 1e-10)
    if nbar.min() < -neg_tol:
        raise NumericsError(
            f"occupation went negative ({nbar.min():.3e}) at "
            f"t={times[int(nbar.argmin())]}: tolerances too loose"
        )
    np.clip(nbar, 0.0, None, out=nbar)

    return OccupancySeries(times=times, nbar=nbar, schedule=s, mode=m,
                           capped_at=capped_at)


def freeze_out_time(tau_q: float, gamma0: float) -> float:
    """t_hat = sqrt(tau_q / gamma0), the half-width of the frozen interval."""
    if tau_q <= 0 or gamma0 <= 0:
        raise ConfigError(f"tau_q and gamma0 must be positive, got {tau_q}, {gamma0}")
    return math.sqrt(tau_q / gamma0)


def frozen_correlation_length(tau_q: float, gamma0: float) -> float:
    """(gamma0 * tau_q)^{1/4}: the frozen correlation length over lambda_Tc."""
    if tau_q <= 0 or gamma0 <= 0:
        raise ConfigError(f"tau_q and gamma0 must be positive, got {tau_q}, {gamma0}")
    return (gamma0 * tau_q) ** 0.25


def competitive_modes(
    spectrum: list[ModeSpec], beta: float, tau_q: float, gamma0: float
) -> list[int]:
    """Labels of modes still competitive at freeze-out: beta*E_k < (gamma0 tau_q)^{-1/2}."""
    threshold = 1.0 / math.sqrt(gamma0 * tau_q)
    return [m.k for m in spectrum if beta * m.e_k < threshold]


def validate_lag_solution(
    s: QuenchSchedule,
    m: ModeSpec,
    window: tuple[float, float] | None = None,
    rtol: float = 1e-10,
    n_points: int = 801,
) -> float:
    """Max relative deviation between the full and linearized growth equations.

    The linearized variant replaces the enhancement coefficient
    (1 - e^{beta(E_k - mu)}) by its near-crossing expansion
    (t - theta)/tau_q, which is the approximation behind the closed-form
    lag solution.  Both equations start from the same (full) equilibrium
    value at the window start.  Default window: theta - 3 t_hat to
    theta + t_hat.  The deviation is symmetric: |lin - full| over the
    pointwise larger of the two, since each is an approximation of the
    other.
    """
    if s.kind != "linear-bias":
        raise ConfigError("lag validation requires a linear-bias schedule")
    that = freeze_out_time(s.tau_q, m.gamma0)
    if window is None:
        window = (s.theta - 3.0 * that, s.theta + that)
    t0, t1 = window

    n0 = equilibrium_occupancy(s, m, t0)

    def rhs_full(t, y):
        return [occupancy_rhs(y[0], t, s, m)]

    def rhs_lin(t, y):
        bmu = s.beta_mu(t)
        return [m.gamma0 * math.exp(bmu) * (1.0 + (t - s.theta) / s.tau_q * y[0])]

    times = np.linspace(t0, t1, n_points)
    kw = dict(method="LSODA", rtol=rtol, atol=1e-13, t_eval=times)
    full = solve_ivp(rhs_full, (t0, t1), [n0], **kw)
    lin = solve_ivp(rhs_lin, (t0, t1), [n0], **kw)
    if not (full.success and lin.success):
        raise NumericsError("lag-validation integration failed")
    return float(np.max(np.abs(lin.y[0] - full.y[0]) / np.maximum(lin.y[0], full.y[0])))


def departure_time_scaling(
    tau_qs: list[float],
    gamma0: float = 1.0,
    factor: float = 2.0,
    start_beta_mu: float = -5.0,
) -> tuple[np.ndarray, np.ndarray]:
    """|t_dep| for each tau_q under the standard linear-bias protocol.

    Returns (tau_q array, |departure time| array); used by the scaling
    tests and the CLI sweep. Departure is measured from theta = 0.
    """
    from .analysis import departure_time  # local import to avoid a cycle
    from .schedules import make_linear_bias

    taus, tdeps = [], []
    for tq in tau_qs:
        s = make_linear_bias(tq, theta_k=0.0)
        m = ModeSpec(e_k=0.0, gamma0=gamma0)
        t_i = start_beta_mu * tq  # beta*mu_eff = start_beta_mu there
        series = integrate_occupancy(s, m, t_i, -1e-4 * tq)
        td = departure_time(series, factor)
        if td is None:
            raise NumericsError(f"departure criterion never met for tau_q={tq}")
        taus.append(tq)
        tdeps.append(abs(td))
    return np.asarray(taus), np.asarray(tdeps)
