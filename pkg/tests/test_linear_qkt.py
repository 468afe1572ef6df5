import math

import numpy as np
import pytest

from quenchsim import (
    ConfigError,
    ModeSpec,
    competitive_modes,
    departure_time_scaling,
    equilibrium_occupancy,
    fit_power_law,
    freeze_out_time,
    frozen_correlation_length,
    integrate_occupancy,
    make_constant,
    make_linear_bias,
    occupancy_rhs,
    validate_lag_solution,
)

BE_HALF = 1.0 / math.expm1(0.5)  # Bose-Einstein occupation at x = 0.5


def _static(x):
    # constant schedule with beta*(E_k - mu) = x for an E_k = 0 mode
    return make_constant(beta=1.0, mu=-x), ModeSpec(e_k=0.0, gamma0=1.0)


def test_rhs_fixed_point():
    s, m = _static(0.5)
    assert abs(occupancy_rhs(BE_HALF, 0.0, s, m)) <= 1e-12 * m.gamma0


def test_rhs_spontaneous_term():
    s, m = _static(1.0)
    assert occupancy_rhs(0.0, 3.0, s, m) == pytest.approx(math.exp(-1.0), rel=1e-14)


def test_rhs_at_crossing():
    # beta*mu = 0 with E_k = mu: enhancement factor vanishes for any n
    s, m = _static(0.0)
    for n in (0.0, 1.0, 57.3):
        assert occupancy_rhs(n, 0.0, s, m) == pytest.approx(1.0, rel=1e-14)


def test_equilibrium_occupancy_values():
    s, m = _static(0.5)
    assert equilibrium_occupancy(s, m, 0.0) == pytest.approx(1.54149, abs=5e-6)
    s2, _ = _static(math.log(2.0))
    assert equilibrium_occupancy(s2, m, 0.0) == pytest.approx(1.0, rel=1e-14)
    s3, _ = _static(40.0)
    assert equilibrium_occupancy(s3, m, 0.0) < 1e-12


def test_equilibrium_undefined_at_crossing():
    s, m = _static(0.0)
    with pytest.raises(ConfigError, match="undefined"):
        equilibrium_occupancy(s, m, 0.0)


def test_convergence_to_fixed_point():
    s, m = _static(0.5)
    series = integrate_occupancy(s, m, 0.0, 100.0, n_i=0.0)
    assert abs(series.nbar[-1] - BE_HALF) / BE_HALF <= 1e-6
    assert series.nbar.min() >= 0.0
    assert series.capped_at is None


def test_lag_and_explosive_growth():
    tau_q = 100.0
    s = make_linear_bias(tau_q)
    m = ModeSpec(e_k=0.0, gamma0=1.0)
    that = freeze_out_time(tau_q, 1.0)
    # grid step 0.1 lands exactly on t = -t_hat/2, +t_hat, +2t_hat
    series = integrate_occupancy(s, m, -5.0 * tau_q, 2.0 * that, n_points=5201)

    i_lag = int(np.searchsorted(series.times, -that / 2.0))
    assert series.times[i_lag] == pytest.approx(-that / 2.0, abs=1e-9)
    assert series.nbar[i_lag] < series.nbar_eq[i_lag]

    # equilibrium curve exists only below the crossing
    assert np.isnan(series.nbar_eq[series.times > 0]).all()
    assert np.isfinite(series.nbar_eq[series.times < 0]).all()

    i1 = int(np.searchsorted(series.times, that))
    i2 = int(np.searchsorted(series.times, 2.0 * that))
    ratio = series.nbar[i2] / series.nbar[i1]
    # growth factor ~ e^{3/2} enhanced by the e^{beta mu} prefactor
    assert 4.0 < ratio < 10.0


def test_lag_holds_through_frozen_window():
    # nbar <= nbar_eq from 2 t_hat before the crossing onward
    tau_q = 1000.0
    s = make_linear_bias(tau_q)
    m = ModeSpec()
    that = freeze_out_time(tau_q, 1.0)
    series = integrate_occupancy(s, m, -5.0 * tau_q, -1e-4 * tau_q)
    sel = series.times >= -2.0 * that
    assert (series.nbar[sel] <= series.nbar_eq[sel] * (1.0 + 1e-9)).all()


def test_growth_cap_halts_integration():
    s = make_linear_bias(100.0)
    m = ModeSpec()
    series = integrate_occupancy(s, m, -500.0, 80.0, cap=1e3)
    assert series.capped_at is not None
    assert series.times[-1] == pytest.approx(series.capped_at)
    assert series.nbar[-1] == pytest.approx(1e3, rel=1e-6)


def test_integrate_validation():
    s, m = _static(0.5)
    with pytest.raises(ConfigError):
        integrate_occupancy(s, m, 10.0, 10.0)
    with pytest.raises(ConfigError):
        integrate_occupancy(s, m, 0.0, 1.0, n_i=-0.5)


def test_freeze_out_time():
    assert freeze_out_time(100.0, 1.0) == 10.0
    assert freeze_out_time(1.0, 1.0) == 1.0
    assert freeze_out_time(16.0, 4.0) == 2.0
    with pytest.raises(ConfigError):
        freeze_out_time(-1.0, 1.0)
    with pytest.raises(ConfigError):
        freeze_out_time(1.0, 0.0)


def test_frozen_correlation_length():
    assert frozen_correlation_length(16.0, 1.0) == 2.0
    assert frozen_correlation_length(1.0, 1.0) == 1.0
    assert frozen_correlation_length(1e4, 1.0) == pytest.approx(10.0, rel=1e-14)
    taus = np.logspace(2, 4, 9)
    fit = fit_power_law(taus, [frozen_correlation_length(t, 1.0) for t in taus])
    assert abs(fit.exponent - 0.25) <= 1e-12


def test_competitive_modes_ring_spectrum():
    spectrum = [ModeSpec(e_k=0.01 * k * k, gamma0=1.0, k=k) for k in range(-10, 11)]
    comp = competitive_modes(spectrum, beta=1.0, tau_q=100.0, gamma0=1.0)
    assert sorted(comp) == [-3, -2, -1, 0, 1, 2, 3]
    # threshold below the smallest nonzero beta*E_k leaves only k = 0
    assert competitive_modes(spectrum, 1.0, 1e6, 1.0) == [0]
    assert competitive_modes(spectrum, 1.0, 1e30, 1.0) == [0]


def test_validate_lag_solution_windows():
    m = ModeSpec()
    s = make_linear_bias(400.0)
    assert validate_lag_solution(s, m) < 0.05
    that = freeze_out_time(400.0, 1.0)
    assert validate_lag_solution(s, m, window=(-that / 10.0, that / 10.0)) < 0.005
    # coarse quench: linearization degrades but the number is still returned
    coarse = validate_lag_solution(make_linear_bias(4.0), m)
    assert coarse > 0.05
    with pytest.raises(ConfigError):
        validate_lag_solution(make_constant(beta=1.0, mu=-0.5), m)


def test_departure_scaling_returns_pairs():
    taus, tdeps = departure_time_scaling([100.0, 1000.0, 10000.0])
    assert taus.shape == tdeps.shape == (3,)
    assert (tdeps > 0).all()
    # |t_dep| grows with tau_q and sits near t_hat = sqrt(tau_q)
    assert (np.diff(tdeps) > 0).all()
    assert 50.0 <= tdeps[-1] <= 200.0
