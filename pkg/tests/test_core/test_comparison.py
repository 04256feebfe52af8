import numpy as np
import pytest

from core.comparison import (
    fit_exponent,
    max_position_deviation,
    pole_tables,
    position_deviation,
    power_ratio_series,
    radiated_energy_gap,
    resample,
    verdict_counts,
    worldline_deviation,
)
from core.exceptions import IncompatibleRunsError
from core.models import Trajectory, Worldline


def _traj(t, x, model="fo"):
    zeros = np.zeros_like(t)
    return Trajectory(model, t, x, zeros, zeros, zeros, zeros, zeros)


def _sine_powers(t, omega, eps):
    # FO power ~ f^2, Larmor ~ (f + eps f'/omega)^2 for a unit sinusoid
    s, c = np.sin(omega * t), np.cos(omega * t)
    return s**2, (s + eps * c) ** 2


def test_resample_identity_and_spline():
    t = np.linspace(0.0, 1.0, 201)
    assert np.array_equal(resample(t, t**2, t), t**2)
    dst = np.linspace(0.1, 0.9, 7)
    assert np.allclose(resample(t, t**3, dst), dst**3, atol=1e-10)


def test_resample_outside_range_raises():
    t = np.linspace(0.0, 1.0, 11)
    with pytest.raises(IncompatibleRunsError):
        resample(t, t, np.array([0.5, 1.5]))


def test_position_deviation_relative():
    t = np.linspace(0.0, 1.0, 11)
    a = _traj(t, 2.0 * t)
    b = _traj(t, 2.0 * t + 0.01 * t)
    absolute, relative = position_deviation(a, b)
    assert absolute == pytest.approx(0.01)
    assert relative == pytest.approx(0.01 / 2.01)


def test_self_comparison_is_zero():
    t = np.linspace(0.0, 1.0, 11)
    report = max_position_deviation([_traj(t, t)], [_traj(t, t)])
    assert report.values["max_abs_cm"] == 0.0
    assert report.passed is True


def test_sweep_exponent_fit():
    t = np.linspace(0.0, 1.0, 51)
    omega_tau = [1e-3, 1e-2, 1e-1]
    runs_a = [_traj(t, np.sin(t)) for _ in omega_tau]
    runs_b = [_traj(t, np.sin(t) * (1 + wt**2)) for wt in omega_tau]
    report = max_position_deviation(runs_a, runs_b, omega_tau=omega_tau)
    assert report.exponent == pytest.approx(2.0, abs=0.01)
    assert report.passed is True


def test_unpaired_sweeps_rejected():
    t = np.linspace(0.0, 1.0, 5)
    with pytest.raises(IncompatibleRunsError):
        max_position_deviation([_traj(t, t)], [])


def test_fit_exponent_rejects_non_positive():
    assert fit_exponent([1.0, 10.0], [2.0, 200.0]) == pytest.approx(2.0)
    with pytest.raises(IncompatibleRunsError):
        fit_exponent([1.0, 10.0], [0.0, 1.0])


def test_energy_gap_over_whole_periods():
    omega = 2.0 * np.pi
    t = np.linspace(0.0, 2.0, 801)
    p_fo, p_larmor = _sine_powers(t, omega, 1e-2)
    assert radiated_energy_gap(t, p_fo, p_larmor, omega) == pytest.approx(1e-4, rel=1e-5)


def test_energy_gap_needs_a_period():
    t = np.linspace(0.0, 0.5, 11)
    with pytest.raises(IncompatibleRunsError):
        radiated_energy_gap(t, t, t, 2.0 * np.pi)


def test_power_ratio_series_exponent():
    omega = 2.0 * np.pi
    t = np.linspace(0.0, 2.0, 801)
    runs = []
    omega_tau = [1e-3, 1e-2, 1e-1]
    for eps in omega_tau:
        p_fo, p_larmor = _sine_powers(t, omega, eps)
        zeros = np.zeros_like(t)
        runs.append(Trajectory("fo", t, zeros, zeros, zeros, zeros, p_fo, p_larmor))
    report = power_ratio_series(runs, [omega] * 3, omega_tau)
    assert report.exponent == pytest.approx(2.0, abs=0.01)
    assert report.passed is True


def test_pole_tables_agree_and_disagree():
    table = [
        {"model": "ald", "verdict": "NonCausal", "poles": [[[0.0, 0.0], 2], [[0.0, 1.0], 1]]},
        {"model": "fo", "verdict": "Marginal", "poles": [[[0.0, 0.0], 2]]},
    ]
    assert pole_tables(table, table).passed is True
    shifted = [dict(table[0], poles=[[[0.0, 0.0], 2], [[0.0, 1.1], 1]]), table[1]]
    report = pole_tables(table, shifted)
    assert report.passed is False
    assert report.values["max_pole_distance"] == pytest.approx(0.1)


def test_pole_tables_missing_model():
    with pytest.raises(IncompatibleRunsError):
        pole_tables([{"model": "ald", "verdict": "NonCausal", "poles": []}], [])


def test_verdict_counts():
    counts = verdict_counts([{"verdict": "Causal"}, {"verdict": "NonCausal"}, {"verdict": "NonCausal"}])
    assert counts == {"Causal": 1, "NonCausal": 2, "Marginal": 0}


def test_worldline_deviation():
    t = np.linspace(0.0, 1.0, 101)
    pos = np.column_stack([np.cos(t), np.sin(t), np.zeros_like(t)])
    ones = np.ones_like(t)
    a = Worldline("a", t, t, pos, pos, ones, 0 * t)
    b = Worldline("b", t, t, pos + [0.0, 0.0, 1e-3], pos, ones, 0 * t)
    assert worldline_deviation(a, b) == pytest.approx(1e-3)
