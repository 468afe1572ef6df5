"""Two-mode condensation model: exact diagonal master equation on a grid.

The model keeps two condensate-band modes (0: ground, 1: costs energy E
per particle) exchanging particles with a thermal reservoir, with the
self-interaction energy

    H(n0, n1) = E * [n1 + (n0^2 + n1^2 + 4 n0 n1) / (2 N_c)].

The Bose-enhanced cross repulsion (the factor 4) makes the all-in-mode-1
state a local energy minimum once n0 + n1 > N_c + 1: a metastable
current-carrying state.

The probability distribution p(n0, n1) evolves under three bond fluxes:

    R: reservoir exchange with mode 0      (n0 <-> n0 + 1)
    S: reservoir exchange with mode 1      (n1 <-> n1 + 1)
    T: reservoir-mediated transfer         ((n0, n1) <-> (n0+1, n1-1))

each written as a detailed-balance bracket.  The exact stationary state
is a Gibbs form with the chemical potential shifted by E/(2 N_c), a
half-step correction without which no product form satisfies all three
brackets at once.

Truncation is zero-flux (reflecting): fluxes across the grid edge are
dropped, so the total probability is conserved exactly and any leakage
shows up as mass piling into the monitored boundary band rather than as
a normalization drift.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .errors import ConfigError, NumericsError
from .schedules import QuenchSchedule

__all__ = [
    "ToyParams",
    "ProbabilityGrid",
    "MasterTrajectory",
    "toy_energy",
    "master_rhs",
    "stationary_distribution",
    "evolve_master",
    "marginal_moments",
]


@dataclass(frozen=True)
class ToyParams:
    """Two-mode model parameters.

    gamma_tilde is the transfer-scattering rate; None selects the
    thermal-bath estimate beta(t) * e * gamma, updated along the
    schedule.
    """

    e: float = 1.0
    n_c: float = 10.0
    gamma: float = 1.0
    gamma_tilde: float | None = None

    def __post_init__(self):
        if self.n_c <= 0:
            raise ConfigError(f"n_c must be positive, got {self.n_c}")
        if self.gamma < 0:
            # zero is allowed: exchange-only evolution isolates the T flux
            raise ConfigError(f"gamma must be >= 0, got {self.gamma}")
        if self.gamma_tilde is not None and self.gamma_tilde < 0:
            raise ConfigError(f"gamma_tilde must be >= 0, got {self.gamma_tilde}")

    def gamma_tilde_at(self, beta: float) -> float:
        if self.gamma_tilde is not None:
            return self.gamma_tilde
        return beta * self.e * self.gamma


@dataclass
class ProbabilityGrid:
    """p(n0, n1) on {0..n_max}^2 at time t."""

    n_max: int
    p: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float)
        if self.p.shape != (self.n_max + 1, self.n_max + 1):
            raise ConfigError(
                f"grid shape {self.p.shape} does not match n_max={self.n_max}"
            )

    def total(self) -> float:
        return float(self.p.sum())

    def boundary_mass(self) -> float:
        """Mass in the anti-diagonal band n0 + n1 >= n_max - 2."""
        n0 = np.arange(self.n_max + 1)[:, None]
        n1 = np.arange(self.n_max + 1)[None, :]
        return float(self.p[n0 + n1 >= self.n_max - 2].sum())


def toy_energy(n0, n1, params: ToyParams):
    """Interaction energy H(n0, n1); accepts scalars or arrays."""
    quad = (n0 * n0 + n1 * n1 + 4.0 * n0 * n1) / (2.0 * params.n_c)
    return params.e * (n1 + quad)


def _bond_fluxes(p, beta, mu, params):
    """R, S, T flux arrays with zero-flux truncation.

    R[a, b] is the net probability flux (a, b) -> (a+1, b) divided by
    Gamma; S the same for mode 1; T[a, b] the transfer flux
    (a-1, b) -> (a, b-1) divided by Gamma_tilde.  Edge bonds that would
    leave the grid are zeroed.
    """
    n = p.shape[0] - 1
    c = beta * params.e / params.n_c
    ebm = math.exp(beta * mu)
    n0 = np.arange(n + 1, dtype=float)[:, None]
    n1 = np.arange(n + 1, dtype=float)[None, :]

    p_up0 = np.zeros_like(p)
    p_up0[:-1, :] = p[1:, :]
    p_up1 = np.zeros_like(p)
    p_up1[:, :-1] = p[:, 1:]

    r = (n0 + 1.0) * (ebm * p - np.exp(c * (n0 + 2.0 * n1)) * p_up0)
    r[n, :] = 0.0
    s = (n1 + 1.0) * (ebm * p - np.exp(c * (params.n_c + 2.0 * n0 + n1)) * p_up1)
    s[:, n] = 0.0

    # T[a, b]: bond between states (a-1, b) and (a, b-1); rows a=0 and
    # columns b=0 have no such bond (the n0*n1 prefactor also vanishes).
    phi = 0.5 * c * (params.n_c + n0 - n1)
    damp = np.exp(-np.abs(phi))
    p_dn0 = np.zeros_like(p)
    p_dn0[1:, :] = p[:-1, :]
    p_dn1 = np.zeros_like(p)
    p_dn1[:, 1:] = p[:, :-1]
    t_flux = n0 * n1 * damp * (np.exp(phi) * p_dn0 - np.exp(-phi) * p_dn1)
    return r, s, t_flux


def master_rhs(grid: ProbabilityGrid, beta: float, mu: float, params: ToyParams) -> np.ndarray:
    """dp/dt for every grid entry under the R/S/T bond fluxes."""
    return _master_rhs_array(grid.p, beta, mu, params)


def _master_rhs_array(p, beta, mu, params):
    gamma = params.gamma
    gamma_t = params.gamma_tilde_at(beta)
    r, s, t_flux = _bond_fluxes(p, beta, mu, params)

    r_dn = np.zeros_like(r)
    r_dn[1:, :] = r[:-1, :]
    s_dn = np.zeros_like(s)
    s_dn[:, 1:] = s[:, :-1]
    t_up0 = np.zeros_like(t_flux)
    t_up0[:-1, :] = t_flux[1:, :]
    t_up1 = np.zeros_like(t_flux)
    t_up1[:, :-1] = t_flux[:, 1:]

    return -gamma * (r - r_dn + s - s_dn) - gamma_t * (t_up0 - t_up1)


def stationary_distribution(beta: float, mu: float, params: ToyParams, n_max: int) -> ProbabilityGrid:
    """Exact stationary state: shifted-Gibbs weights normalized on the grid.

    log p*(n0, n1) = beta*(mu + E/(2 N_c))*(n0 + n1) - beta*H(n0, n1) + const.
    Every R, S, T bracket vanishes identically on this distribution.
    """
    n0 = np.arange(n_max + 1, dtype=float)[:, None]
    n1 = np.arange(n_max + 1, dtype=float)[None, :]
    logits = beta * (mu + params.e / (2.0 * params.n_c)) * (n0 + n1) - beta * toy_energy(
        n0, n1, params
    )
    logits -= logits.max()
    w = np.exp(logits)
    z = w.sum()
    if not np.isfinite(z) or z <= 0:
        raise NumericsError(f"stationary weights not normalizable (sum {z})")
    return ProbabilityGrid(n_max=n_max, p=w / z)


@dataclass
class MasterTrajectory:
    """Snapshots of a master-equation evolution plus conservation diagnostics."""

    times: np.ndarray
    grids: list
    sum_drift: np.ndarray       # |sum(p) - 1| at each snapshot
    boundary_mass: np.ndarray   # band mass at each snapshot

    @property
    def final(self) -> ProbabilityGrid:
        return self.grids[-1]


def evolve_master(
    grid: ProbabilityGrid,
    s: QuenchSchedule,
    params: ToyParams,
    t_f: float,
    output_times=None,
    rtol: float = 1e-8,
    atol: float = 1e-14,
    boundary_threshold: float = 1e-6,
    method: str = "RK45",
) -> MasterTrajectory:
    """Integrate the master equation from grid.t to t_f.

    Aborts when the boundary band accumulates more than
    ``boundary_threshold`` mass (the truncation is no longer
    trustworthy) or when any probability goes below -1e-12.
    """
    t0 = grid.t
    if t_f <= t0:
        raise ConfigError(f"t_f={t_f} must exceed start time {t0}")
    if output_times is None:
        output_times = np.linspace(t0, t_f, 9)
    output_times = np.asarray(output_times, dtype=float)
    if output_times[0] > t0:
        output_times = np.concatenate([[t0], output_times])

    n_max = grid.n_max
    shape = grid.p.shape

    def rhs(t, y):
        beta, mu, _ = _schedule_triple(s, t)
        return _master_rhs_array(y.reshape(shape), beta, mu, params).ravel()

    sol = solve_ivp(
        rhs, (t0, t_f), grid.p.ravel(), method=method, rtol=rtol, atol=atol,
        t_eval=output_times, dense_output=False,
    )
    if not sol.success:
        raise NumericsError(f"master-equation integration failed: {sol.message}")

    grids, drifts, bmasses = [], [], []
    for i, t in enumerate(sol.t):
        p = sol.y[:, i].reshape(shape)
        if p.min() < -1e-12:
            raise NumericsError(
                f"probability went negative ({p.min():.3e}) at t={t}"
            )
        p = np.clip(p, 0.0, None)
        g = ProbabilityGrid(n_max=n_max, p=p, t=float(t))
        bm = g.boundary_mass()
        if bm > boundary_threshold:
            raise NumericsError(
                f"boundary mass {bm:.3e} breached threshold "
                f"{boundary_threshold:.1e} at t={t}"
            )
        grids.append(g)
        drifts.append(abs(g.total() - 1.0))
        bmasses.append(bm)

    return MasterTrajectory(
        times=np.asarray(sol.t),
        grids=grids,
        sum_drift=np.asarray(drifts),
        boundary_mass=np.asarray(bmasses),
    )


def _schedule_triple(s: QuenchSchedule, t: float):
    beta = s.beta(t)
    bmu = s.beta_mu(t)
    return beta, bmu / beta, bmu


def marginal_moments(grid: ProbabilityGrid):
    """Exact mean vector and covariance matrix of (n0, n1) under the grid."""
    p = grid.p
    z = p.sum()
    if z <= 0:
        raise ConfigError("cannot take moments of an all-zero grid")
    n = np.arange(grid.n_max + 1, dtype=float)
    m0 = (p.sum(axis=1) * n).sum() / z
    m1 = (p.sum(axis=0) * n).sum() / z
    d0 = n[:, None] - m0
    d1 = n[None, :] - m1
    c00 = (p * d0 * d0).sum() / z
    c11 = (p * d1 * d1).sum() / z
    c01 = (p * d0 * d1).sum() / z
    return np.array([m0, m1]), np.array([[c00, c01], [c01, c11]])
