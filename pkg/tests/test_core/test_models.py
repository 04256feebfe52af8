import numpy as np
import pytest

from core.exceptions import PhysicsDomainError
from core.models import EnsembleConfig, EnsembleSummary, ModelNR, NoiseSpec, Trajectory


def test_series_order_bounds(particle):
    assert ModelNR("series", particle, order=3).label == "series(3)"
    for order in (None, 2, 31):
        with pytest.raises(PhysicsDomainError):
            ModelNR("series", particle, order=order)


def test_unknown_kind(particle):
    with pytest.raises(PhysicsDomainError):
        ModelNR("abraham", particle)


def test_oscillator_needs_spring(particle):
    with pytest.raises(PhysicsDomainError):
        ModelNR("oscillator", particle)


def test_fo_cutoff_needs_cutoff(particle, structured):
    with pytest.raises(PhysicsDomainError):
        ModelNR("fo_cutoff", particle)
    # zero bare mass collapses to FO
    assert not ModelNR("fo_cutoff", structured).carries_acceleration


def test_third_order_models_carry_acceleration(particle):
    assert ModelNR("ald", particle).carries_acceleration
    assert ModelNR("series", particle, order=5).carries_acceleration
    assert not ModelNR("fo", particle).carries_acceleration


def test_trajectory_columns_order():
    n = np.arange(3.0)
    traj = Trajectory("fo", n, n + 1, n + 2, n + 3, n + 4, n + 5, n + 6)
    cols = traj.columns()
    assert cols.shape == (3, len(Trajectory.COLUMNS))
    assert np.array_equal(cols[:, 1], n + 1)
    assert traj.final_state().x == 3.0


def test_ensemble_summary_columns_repeat_n():
    t = np.linspace(0, 1, 4)
    summary = EnsembleSummary(t, t, t, t, t, n=12)
    assert np.all(summary.columns()[:, -1] == 12)


def test_noise_spec_validation():
    with pytest.raises(PhysicsDomainError):
        NoiseSpec("pink", 300.0, 1.0)
    with pytest.raises(PhysicsDomainError):
        NoiseSpec("white_fdt", -1.0, 1.0)
    with pytest.raises(PhysicsDomainError):
        NoiseSpec("exp_correlated", 300.0, 1.0, tau_c=0.0)


def test_ensemble_needs_members():
    with pytest.raises(PhysicsDomainError):
        EnsembleConfig(n_members=0)
