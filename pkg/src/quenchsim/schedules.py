"""Quench schedules: prescribed time profiles of beta(t) and mu(t).

All times are measured in units of the inverse reference scattering rate
1/Gamma0, energies in units where the caller's reference beta_c * E is
dimensionless.  A schedule is an immutable value object; evaluation
returns the consistent triple (beta, mu, beta*mu).

Three kinds are provided:

``constant``
    beta and mu fixed; used for fixed-point and relaxation tests.

``linear-bias``
    beta*mu_eff(t) = (t - theta) / tau_q at constant beta.  The mode
    bias time theta absorbs the mode energy offset, so the same form
    serves every mode of a spectrum.  Valid only near the crossing;
    the validity window is an explicit field.

``tanh``
    beta*mu(t) = tanh(t / tau_q), saturating at +-1.  beta is either
    held at beta_c (constant-beta variant) or swept as
    beta_c * exp(tanh(t / tau_q)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ConfigError

_INF = float("inf")


@dataclass(frozen=True)
class QuenchSchedule:
    """Immutable (beta(t), mu(t)) profile with an explicit validity window."""

    kind: str
    tau_q: float = 0.0
    theta: float = 0.0
    beta_ref: float = 1.0
    mu_ref: float = 0.0          # constant kind only
    constant_beta: bool = True   # tanh kind: hold beta at beta_ref?
    t_min: float = -_INF
    t_max: float = _INF

    def beta(self, t: float) -> float:
        if self.kind == "tanh" and not self.constant_beta:
            return self.beta_ref * math.exp(math.tanh(t / self.tau_q))
        return self.beta_ref

    def beta_mu(self, t: float) -> float:
        """beta(t)*mu(t) without the window check; hot path for ODE right-hand sides."""
        if self.kind == "constant":
            return self.beta_ref * self.mu_ref
        if self.kind == "linear-bias":
            return (t - self.theta) / self.tau_q
        return math.tanh(t / self.tau_q)


def make_constant(beta: float = 1.0, mu: float = 0.0) -> QuenchSchedule:
    if beta <= 0:
        raise ConfigError(f"beta must be positive, got {beta}")
    return QuenchSchedule(kind="constant", beta_ref=beta, mu_ref=mu)


def make_linear_bias(
    tau_q: float,
    theta_k: float = 0.0,
    beta_ref: float = 1.0,
    t_min: float = -_INF,
    t_max: float = _INF,
) -> QuenchSchedule:
    """Linear bias sweep beta*mu_eff = (t - theta_k)/tau_q at constant beta.

    The window (t_min, t_max) should be set by the caller to the region
    where the linearization is trusted; the default is unbounded.
    """
    if tau_q <= 0:
        raise ConfigError(f"tau_q must be positive, got {tau_q}")
    if beta_ref <= 0:
        raise ConfigError(f"beta_ref must be positive, got {beta_ref}")
    return QuenchSchedule(
        kind="linear-bias", tau_q=tau_q, theta=theta_k, beta_ref=beta_ref,
        t_min=t_min, t_max=t_max,
    )


def make_tanh(tau_q: float, beta_c: float = 1.0, constant_beta: bool = True) -> QuenchSchedule:
    """Saturating sweep beta*mu = tanh(t/tau_q).

    With ``constant_beta`` the temperature is pinned (beta = beta_c);
    otherwise beta = beta_c * exp(tanh(t/tau_q)), so the bath cools by a
    factor e across the quench.
    """
    if tau_q <= 0:
        raise ConfigError(f"tau_q must be positive, got {tau_q}")
    if beta_c <= 0:
        raise ConfigError(f"beta_c must be positive, got {beta_c}")
    return QuenchSchedule(
        kind="tanh", tau_q=tau_q, beta_ref=beta_c, constant_beta=constant_beta,
    )


def eval_schedule(s: QuenchSchedule, t: float) -> tuple[float, float, float]:
    """Evaluate (beta, mu, beta*mu) at time t.

    Raises ConfigError outside the validity window: the linear-bias form
    is a near-crossing approximation and must not be silently
    extrapolated.
    """
    if not (s.t_min <= t <= s.t_max):
        raise ConfigError(
            f"t={t} outside schedule validity window [{s.t_min}, {s.t_max}]"
        )
    beta = s.beta(t)
    bmu = s.beta_mu(t)
    return beta, bmu / beta, bmu
