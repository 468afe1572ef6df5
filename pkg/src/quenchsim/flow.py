"""Deterministic drift flows of the two-mode model and their Gaussian closure.

The first Kramers-Moyal moment of the two-mode master equation gives
deterministic trajectories

    dn0/dt = Gamma n0 [e^{beta mu} - e^{(betaE/N_c)(n0 + 2 n1)}] + X
    dn1/dt = Gamma n1 [e^{beta mu} - e^{(betaE/N_c)(N_c + n1 + 2 n0)}] - X

where the exchange term

    X = 2 Gamma_t n0 n1 e^{-|phi|} sinh(phi),
    phi = (betaE / 2 N_c)(N_c + n0 - n1)

conserves n0 + n1 while relaxing the interaction energy.  Deleting X
recovers a gradient (dissipative Ginzburg-Landau) flow in the mode
occupations; the full flow differs from it precisely by the exchange
channel, which is what lets the slow-quench dynamics drain a
current-carrying mode that the gradient flow would keep.

Both axes are exactly invariant (an empty mode stays empty under the
deterministic part), and the drift agrees with the exact first jump
moment of the master equation up to O(1/n) terms; ``drift_oracle_check``
measures that gap.

The Gaussian (moment-closure) evolution propagates a mean and covariance
with the drift Jacobian and the second jump moment, giving the 68%
probability ellipses used to judge when diffusion is a small correction.
During a saddle crossing the single-Gaussian covariance can transiently
blow up (the true distribution is splitting in two); downstream
consumers should evaluate ellipse sizes at matched protocol times.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .errors import ConfigError, NumericsError
from .schedules import QuenchSchedule
from .toy_model import ToyParams

__all__ = [
    "FlowState",
    "GaussianState",
    "EnsembleOutcome",
    "CHI2_68",
    "qkt_drift",
    "tdgl_drift",
    "drift_oracle_check",
    "diffusion_matrix",
    "evolve_gaussian",
    "integrate_flow",
    "seed_ensemble",
    "classify_outcome",
    "metastable_probability",
]

# chi-squared quantile (2 dof) enclosing 68% of a bivariate normal
CHI2_68 = 2.279


@dataclass
class FlowState:
    """A point (n0, n1) of the continuous occupation plane at time t."""

    n0: float
    n1: float
    t: float = 0.0

    def __post_init__(self):
        if self.n0 < 0 or self.n1 < 0:
            raise ConfigError(f"occupations must be >= 0, got ({self.n0}, {self.n1})")


@dataclass
class GaussianState:
    """Mean and covariance of the closed-moment distribution at time t."""

    mean: np.ndarray
    cov: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float)
        self.cov = np.asarray(self.cov, dtype=float)
        if self.mean.shape != (2,) or self.cov.shape != (2, 2):
            raise ConfigError("GaussianState needs a 2-vector mean and 2x2 cov")
        self.cov = 0.5 * (self.cov + self.cov.T)
        ev = np.linalg.eigvalsh(self.cov)
        tol = 1e-12 * max(1.0, float(np.trace(self.cov)))
        if ev[0] < -tol:
            raise ConfigError(f"covariance not positive semidefinite (eig {ev[0]:.3e})")
        if ev[0] < 0:
            # clip roundoff-level negatives to zero
            vals, vecs = np.linalg.eigh(self.cov)
            self.cov = (vecs * np.clip(vals, 0.0, None)) @ vecs.T

    def ellipse(self, chi2: float = CHI2_68):
        """(semi-major, semi-minor, angle of major axis) of the chi2 contour."""
        vals, vecs = np.linalg.eigh(self.cov)
        major = math.sqrt(chi2 * max(vals[1], 0.0))
        minor = math.sqrt(chi2 * max(vals[0], 0.0))
        angle = math.atan2(vecs[1, 1], vecs[0, 1])
        return major, minor, angle


def _exchange(n0, n1, beta, params: ToyParams):
    c = beta * params.e / params.n_c
    phi = 0.5 * c * (params.n_c + n0 - n1)
    gamma_t = params.gamma_tilde_at(beta)
    return 2.0 * gamma_t * n0 * n1 * math.exp(-abs(phi)) * math.sinh(phi)


def _drift(n0, n1, beta, mu, params: ToyParams, exchange: bool):
    n0 = max(n0, 0.0)
    n1 = max(n1, 0.0)
    c = beta * params.e / params.n_c
    ebm = math.exp(beta * mu)
    d0 = params.gamma * n0 * (ebm - math.exp(c * (n0 + 2.0 * n1)))
    d1 = params.gamma * n1 * (ebm - math.exp(c * (params.n_c + n1 + 2.0 * n0)))
    if exchange:
        x = _exchange(n0, n1, beta, params)
        d0 += x
        d1 -= x
    return d0, d1


def qkt_drift(state: FlowState, beta: float, mu: float, params: ToyParams):
    """Full first-moment drift, exchange channel included."""
    return _drift(state.n0, state.n1, beta, mu, params, exchange=True)


def tdgl_drift(state: FlowState, beta: float, mu: float, params: ToyParams):
    """Gradient-flow drift: the exchange (number-conserving) channel deleted."""
    return _drift(state.n0, state.n1, beta, mu, params, exchange=False)


def _jump_rates(n0, n1, beta, mu, params: ToyParams):
    """The six elementary jump rates of the master equation at integer (n0, n1)."""
    g = params.gamma
    gt = params.gamma_tilde_at(beta)
    c = beta * params.e / params.n_c
    ebm = math.exp(beta * mu)
    w0p = g * (n0 + 1.0) * ebm
    w0m = g * n0 * math.exp(c * (n0 - 1.0 + 2.0 * n1))
    w1p = g * (n1 + 1.0) * ebm
    w1m = g * n1 * math.exp(c * (params.n_c + 2.0 * n0 + n1 - 1.0))
    phi_p = 0.5 * c * (params.n_c + n0 + 1.0 - n1)
    phi_m = 0.5 * c * (params.n_c + n0 - n1 - 1.0)
    wt10 = gt * (n0 + 1.0) * n1 * math.exp(phi_p - abs(phi_p))
    wt01 = gt * n0 * (n1 + 1.0) * math.exp(-phi_m - abs(phi_m))
    return w0p, w0m, w1p, w1m, wt10, wt01


def drift_oracle_check(state: FlowState, beta: float, mu: float, params: ToyParams) -> float:
    """Relative deviation of the drift from the exact first jump moment.

    The moment is assembled from the integer-state jump rates; the
    deviation is the O(1/n) content dropped by the continuum expansion,
    so it shrinks as min(n0, n1) grows.  Requires n0, n1 >= 100.
    """
    n0 = round(state.n0)
    n1 = round(state.n1)
    if min(n0, n1) < 100:
        raise ConfigError(f"oracle check needs n0, n1 >= 100, got ({n0}, {n1})")
    w0p, w0m, w1p, w1m, wt10, wt01 = _jump_rates(n0, n1, beta, mu, params)
    m0 = w0p - w0m + wt10 - wt01
    m1 = w1p - w1m - wt10 + wt01
    d0, d1 = _drift(float(n0), float(n1), beta, mu, params, exchange=True)
    num = math.hypot(d0 - m0, d1 - m1)
    den = math.hypot(m0, m1)
    if den == 0:
        return 0.0 if num == 0 else float("inf")
    return num / den


def diffusion_matrix(state: FlowState, beta: float, mu: float, params: ToyParams) -> np.ndarray:
    """Second jump moment D = (1/2) sum over jumps of (jump)(jump)^T rate."""
    w0p, w0m, w1p, w1m, wt10, wt01 = _jump_rates(state.n0, state.n1, beta, mu, params)
    wt = wt10 + wt01
    return 0.5 * np.array([
        [w0p + w0m + wt, -wt],
        [-wt, w1p + w1m + wt],
    ])


def evolve_gaussian(
    g: GaussianState,
    s: QuenchSchedule,
    params: ToyParams,
    t_f: float,
    output_times=None,
    rtol: float = 1e-8,
    atol: float = 1e-8,
) -> list[GaussianState]:
    """Propagate mean and covariance under drift plus diffusion.

    Mean follows the full drift; covariance follows
    dC/dt = J C + C J^T + 2 D with J the drift Jacobian by central
    finite differences (step max(1, 1e-4 n)).  Returns GaussianStates at
    the requested output times (default: 101 evenly spaced).
    """
    t0 = g.t
    if t_f <= t0:
        raise ConfigError(f"t_f={t_f} must exceed start time {t0}")
    if output_times is None:
        output_times = np.linspace(t0, t_f, 101)
    output_times = np.asarray(output_times, dtype=float)

    def rhs(t, y):
        beta = s.beta(t)
        bmu = s.beta_mu(t)
        mu = bmu / beta
        m0, m1, c00, c01, c11 = y
        d = _drift(m0, m1, beta, mu, params, exchange=True)
        h0 = max(1.0, 1e-4 * abs(m0))
        h1 = max(1.0, 1e-4 * abs(m1))
        d0p = _drift(m0 + h0, m1, beta, mu, params, True)
        d0m = _drift(m0 - h0, m1, beta, mu, params, True)
        d1p = _drift(m0, m1 + h1, beta, mu, params, True)
        d1m = _drift(m0, m1 - h1, beta, mu, params, True)
        j00 = (d0p[0] - d0m[0]) / (2 * h0)
        j10 = (d0p[1] - d0m[1]) / (2 * h0)
        j01 = (d1p[0] - d1m[0]) / (2 * h1)
        j11 = (d1p[1] - d1m[1]) / (2 * h1)
        dm = diffusion_matrix(FlowState(max(m0, 0.0), max(m1, 0.0)), beta, mu, params)
        dc00 = 2.0 * (j00 * c00 + j01 * c01) + 2.0 * dm[0, 0]
        dc01 = j00 * c01 + j01 * c11 + j10 * c00 + j11 * c01 + 2.0 * dm[0, 1]
        dc11 = 2.0 * (j10 * c01 + j11 * c11) + 2.0 * dm[1, 1]
        return [d[0], d[1], dc00, dc01, dc11]

    y0 = [g.mean[0], g.mean[1], g.cov[0, 0], g.cov[0, 1], g.cov[1, 1]]
    sol = solve_ivp(rhs, (t0, t_f), y0, method="LSODA", rtol=rtol, atol=atol,
                    t_eval=output_times)
    if not sol.success:
        raise NumericsError(f"gaussian closure integration failed: {sol.message}")

    out = []
    for i, t in enumerate(sol.t):
        m0, m1, c00, c01, c11 = sol.y[:, i]
        cov = np.array([[c00, c01], [c01, c11]])
        ev = np.linalg.eigvalsh(cov)
        tol = 1e-9 * max(1.0, float(np.trace(cov)))
        if ev[0] < -tol:
            raise NumericsError(
                f"covariance lost positive semidefiniteness at t={t} (eig {ev[0]:.3e})"
            )
        out.append(GaussianState(mean=[m0, m1], cov=cov, t=float(t)))
    return out


def seed_ensemble(
    nbars,
    count: int,
    rng_seed=None,
    mode: str = "stochastic",
    line_const: float | None = None,
    t_s: float = 0.0,
) -> list[FlowState]:
    """Draw initial flow states.

    stochastic mode: occupations sampled exponentially with the given
    per-mode means (the squared modulus of a complex Gaussian
    amplitude).  line mode: ``count`` evenly spaced points on the
    segment n0 + n1 = line_const, endpoints inclusive.
    """
    if count < 1:
        raise ConfigError(f"count must be >= 1, got {count}")
    if mode == "line":
        if line_const is None or line_const <= 0:
            raise ConfigError("line mode needs a positive line_const")
        if count == 1:
            n0s = np.array([0.5 * line_const])
        else:
            n0s = np.linspace(0.0, line_const, count)
        return [FlowState(float(a), float(line_const - a), t=t_s) for a in n0s]
    if mode != "stochastic":
        raise ConfigError(f"unknown seeding mode {mode!r}")

    nb = np.asarray(nbars, dtype=float)
    if nb.shape != (2,):
        raise ConfigError("stochastic seeding needs a pair of mode means")
    if np.any(nb < 0):
        raise ConfigError("mode means must be >= 0")
    if np.all(nb == 0):
        warnings.warn("all-zero mode means: every seed is the absorbing origin")
    rng = np.random.default_rng(rng_seed)
    draws = rng.exponential(scale=1.0, size=(count, 2)) * nb
    return [FlowState(float(a), float(b), t=t_s) for a, b in draws]


def integrate_flow(
    state: FlowState,
    flow: str,
    s: QuenchSchedule,
    params: ToyParams,
    t_end: float,
    t_eval=None,
    rtol: float = 1e-9,
    atol: float = 1e-11,
):
    """Integrate one seed under the chosen drift; returns (times, n0(t), n1(t))."""
    exchange = _flow_flag(flow)

    def rhs(t, y):
        beta = s.beta(t)
        bmu = s.beta_mu(t)
        return _drift(y[0], y[1], beta, bmu / beta, params, exchange)

    sol = solve_ivp(rhs, (state.t, t_end), [state.n0, state.n1], method="LSODA",
                    rtol=rtol, atol=atol, t_eval=t_eval, dense_output=False)
    if not sol.success:
        raise NumericsError(f"drift integration failed: {sol.message}")
    return sol.t, np.clip(sol.y[0], 0.0, None), np.clip(sol.y[1], 0.0, None)


def _flow_flag(flow: str) -> bool:
    if flow == "qkt":
        return True
    if flow == "tdgl":
        return False
    raise ConfigError(f"unknown flow kind {flow!r} (want 'qkt' or 'tdgl')")


def classify_outcome(
    traj,
    params: ToyParams,
    s: QuenchSchedule | None = None,
    flow: str = "qkt",
    smallness: float = 1e-3,
) -> str:
    """Label the end state: 'ground', 'metastable-vortex', or 'undecided'.

    The state must be past the metastability threshold (n0 + n1 > N_c + 1)
    and, when a schedule is supplied, quasi-static:
    |dn/dt| * tau_q / (n + 1) < smallness for both modes.
    """
    final = traj[-1] if isinstance(traj, (list, tuple)) else traj
    n0, n1, t = final.n0, final.n1, final.t
    if n0 + n1 <= params.n_c + 1.0:
        return "undecided"
    if s is not None and s.kind != "constant":
        beta = s.beta(t)
        mu = s.beta_mu(t) / beta
        d0, d1 = _drift(n0, n1, beta, mu, params, _flow_flag(flow))
        scale = s.tau_q
        if (abs(d0) * scale / (n0 + 1.0) >= smallness
                or abs(d1) * scale / (n1 + 1.0) >= smallness):
            return "undecided"
    if n1 > n0:
        return "metastable-vortex"
    if n0 > n1:
        return "ground"
    return "undecided"


@dataclass
class EnsembleOutcome:
    """Metastable fraction of an integrated seed ensemble."""

    fraction: float
    stderr: float
    n_metastable: int
    n_ground: int
    n_undecided: int
    outcomes: list
    finals: np.ndarray

    @property
    def n_total(self) -> int:
        return self.n_metastable + self.n_ground + self.n_undecided


def metastable_probability(
    seeds,
    flow: str,
    s: QuenchSchedule,
    params: ToyParams,
    t_end: float | None = None,
    rtol: float = 1e-9,
    atol: float = 1e-11,
) -> EnsembleOutcome:
    """Integrate every seed under the chosen drift and tally outcomes.

    t_end defaults to 5 tau_q past the crossing, by which point the
    saturating schedules are quasi-static.
    """
    if not seeds:
        raise ConfigError("seed list is empty")
    if t_end is None:
        if s.kind == "constant":
            raise ConfigError("constant schedule needs an explicit t_end")
        t_end = s.theta + 5.0 * s.tau_q

    outcomes = []
    finals = np.empty((len(seeds), 2))
    for i, seed in enumerate(seeds):
        t, y0, y1 = integrate_flow(seed, flow, s, params, t_end, rtol=rtol, atol=atol)
        final = FlowState(float(y0[-1]), float(y1[-1]), t=float(t[-1]))
        outcomes.append(classify_outcome(final, params, s=s, flow=flow))
        finals[i] = final.n0, final.n1

    n_meta = outcomes.count("metastable-vortex")
    n_ground = outcomes.count("ground")
    n_und = outcomes.count("undecided")
    n = len(outcomes)
    frac = n_meta / n
    stderr = math.sqrt(frac * (1.0 - frac) / n)
    return EnsembleOutcome(
        fraction=frac, stderr=stderr, n_metastable=n_meta, n_ground=n_ground,
        n_undecided=n_und, outcomes=outcomes, finals=finals,
    )
