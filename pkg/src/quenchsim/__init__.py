"""Quench dynamics toolkit: kinetic onset of condensation, two-mode
competition, and winding statistics on a ring.

Layers, bottom up:

- schedules: time-dependent drives beta(t), mu(t) shared by every model.
- linear_qkt: single-mode occupancy kinetics, freeze-out scales.
- toy_model: exact two-mode number-state master equation.
- flow: mean-field drifts (with and without exchange), Gaussian closure,
  basin classification.
- ring: dissipative order-parameter field on a torus, winding counts,
  KZ scans.
- analysis: power-law fits and ensemble statistics.
- cli: batch runner writing CSV/JSON artifacts.
"""

from .analysis import PowerLawFit, departure_time, ensemble_rms, fit_power_law
from .errors import ConfigError, NumericsError
from .flow import (
    CHI2_68,
    EnsembleOutcome,
    FlowState,
    GaussianState,
    ToyParams,
    classify_outcome,
    diffusion_matrix,
    drift_oracle_check,
    evolve_gaussian,
    integrate_flow,
    metastable_probability,
    qkt_drift,
    seed_ensemble,
    tdgl_drift,
)
from .linear_qkt import (
    ModeSpec,
    OccupancySeries,
    competitive_modes,
    departure_time_scaling,
    equilibrium_occupancy,
    freeze_out_time,
    frozen_correlation_length,
    integrate_occupancy,
    occupancy_rhs,
    validate_lag_solution,
)
from .ring import (
    RingField,
    ScanRow,
    WindingSample,
    domain_scan,
    integrate_ring,
    kz_scan,
    mode_occupations,
    random_walk_winding,
    sample_initial_field,
    winding_number,
    wrap_phase,
)
from .schedules import (
    QuenchSchedule,
    eval_schedule,
    make_constant,
    make_linear_bias,
    make_tanh,
)
from .toy_model import (
    MasterTrajectory,
    ProbabilityGrid,
    evolve_master,
    marginal_moments,
    master_rhs,
    stationary_distribution,
    toy_energy,
)

__version__ = "0.1.0"
