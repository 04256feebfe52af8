import math

import numpy as np
import pytest

from core.comparison import fit_exponent, worldline_deviation
from core.exceptions import PhysicsDomainError
from dynamics.relativistic import (
    FieldTensor,
    field_tensor,
    four_state,
    four_velocity,
    frame_consistency,
    gyration_decay_rate,
    integrate_lab_time,
    integrate_proper_time,
    ll_type_accel,
    lorentz_four_force,
    mdot,
    nonrel_limit_deviation,
    project_g,
    reduce_order_relativistic,
    rel_fo_accel,
    threevector_rhs,
)


def _cyclotron_field(particle, omega_tau):
    omega_c = omega_tau / particle.tau_e
    b = omega_c * particle.mass_renormalized * particle.constants.c / particle.charge
    return omega_c, FieldTensor(B=(0.0, 0.0, b))


def _euclid(x):
    return float(np.linalg.norm(x))


def test_field_tensor_antisymmetric():
    F = field_tensor((1.0, 2.0, 3.0), (4.0, 5.0, 6.0))
    assert np.array_equal(F, -F.T)
    assert F[0, 1] == -1.0 and F[1, 2] == -6.0


def test_four_velocity_normalized(particle):
    c = particle.constants.c
    u = four_velocity([0.3 * c, -0.4 * c, 0.1 * c], c)
    assert mdot(u, u) / c**2 == pytest.approx(1.0, abs=1e-14)
    with pytest.raises(PhysicsDomainError):
        four_velocity([c, 0.0, 0.0], c)


def test_lorentz_force_in_electric_field(particle):
    c = particle.constants.c
    u = four_velocity([0.0, 0.0, 0.0], c)
    f = lorentz_four_force(particle, FieldTensor(E=(2.0, 0.0, 0.0)), u)
    assert f[1] == pytest.approx(particle.charge * 2.0)
    assert f[0] == 0.0


def test_lorentz_force_matches_gaussian_cross_product(particle):
    c = particle.constants.c
    v = np.array([0.1 * c, 0.0, 0.0])
    u = four_velocity(v, c)
    B = np.array([0.0, 0.0, 5.0])
    f = lorentz_four_force(particle, FieldTensor(B=tuple(B)), u)
    gamma = u[0] / c
    assert f[1:] == pytest.approx(gamma * particle.charge * np.cross(v, B) / c)


def test_unnormalized_velocity_rejected(particle):
    with pytest.raises(PhysicsDomainError):
        lorentz_four_force(particle, FieldTensor(), np.array([1.0, 0.0, 0.0, 0.0]))


def test_project_g_is_orthogonal(particle):
    c = particle.constants.c
    u = four_velocity([0.2 * c, 0.1 * c, 0.0], c)
    g = project_g(np.array([1.0, 2.0, -3.0, 4.0]), u, c)
    assert abs(mdot(g, u)) <= 1e-12 * _euclid(g) * _euclid(u)


@pytest.mark.parametrize("closure", ["zeroth_order", "self_consistent"])
def test_acceleration_orthogonal_to_velocity(particle, closure):
    c = particle.constants.c
    rng = np.random.default_rng(3)
    for _ in range(5):
        fields = FieldTensor(E=tuple(rng.normal(0, 1e12, 3)), B=tuple(rng.normal(0, 1e12, 3)), dE_dt=tuple(rng.normal(0, 1e30, 3)))
        u = four_velocity(rng.uniform(-0.5, 0.5, 3) * c, c)
        a = rel_fo_accel(particle, fields, None, u, closure=closure)
        assert abs(mdot(a, u)) <= 1e-10 * _euclid(a) * _euclid(u)


def test_zeroth_order_equals_ll_type(particle):
    c = particle.constants.c
    fields = FieldTensor(E=(0.0, 4e12, 0.0), B=(0.0, 0.0, 9.1e12))
    u = four_velocity([0.3 * c, 0.0, 0.2 * c], c)
    fo = rel_fo_accel(particle, fields, None, u)
    ll = ll_type_accel(particle, fields, None, u)
    assert np.allclose(fo, ll, rtol=0, atol=1e-12 * _euclid(fo))
    assert reduce_order_relativistic(fields).accel(particle, u) == pytest.approx(ll)


def test_closures_differ_at_second_order(particle):
    c = particle.constants.c
    _, fields = _cyclotron_field(particle, 1e-3)
    u = four_velocity([0.1 * c, 0.0, 0.0], c)
    zeroth = rel_fo_accel(particle, fields, None, u)
    self_consistent = rel_fo_accel(particle, fields, None, u, closure="self_consistent")
    gap = _euclid(zeroth - self_consistent) / _euclid(zeroth)
    assert 0 < gap < 1e-5


def test_unknown_closure(particle):
    c = particle.constants.c
    with pytest.raises(PhysicsDomainError):
        rel_fo_accel(particle, FieldTensor(), None, four_velocity([0, 0, 0], c), closure="first_order")


def test_threevector_without_radiation_is_lorentz(particle):
    c = particle.constants.c
    v = np.array([0.2 * c, 0.0, 0.0])
    E, B = np.array([0.0, 1.0, 0.0]), np.array([0.0, 0.0, 3.0])
    dp = threevector_rhs(particle, E, B, v, radiation=False)
    q = particle.charge / particle.mass_renormalized
    assert dp == pytest.approx(q * (E + np.cross(v, B) / c))
    with pytest.raises(PhysicsDomainError):
        threevector_rhs(particle, E, B, np.array([c, 0.0, 0.0]))


def test_threevector_matches_covariant_spatial_part(particle):
    c = particle.constants.c
    fields = FieldTensor(E=(1e12, 2e12, 0.0), B=(0.0, 3e12, 9e12))
    v = np.array([0.3 * c, -0.2 * c, 0.1 * c])
    u = four_velocity(v, c)
    a = rel_fo_accel(particle, fields, None, u)
    dp_dt = threevector_rhs(particle, fields.E, fields.B, v)
    assert dp_dt == pytest.approx(a[1:] / (u[0] / c), rel=1e-10)


def test_nonrelativistic_limit_scales_as_beta_squared(particle):
    betas = [1e-4, 1e-3, 1e-2]
    deviations = [nonrel_limit_deviation(particle, (1e3, 0.0, 0.0), b) for b in betas]
    assert fit_exponent(betas, deviations) == pytest.approx(2.0, abs=0.1)
    # 1 - gamma^-3 along the field
    assert deviations[2] == pytest.approx(1.5e-4, rel=1e-2)


def test_gyration_decay_matches_radiation_rate(particle):
    omega_c, fields = _cyclotron_field(particle, 1e-2)
    c = particle.constants.c
    initial = four_state(particle, 0.0, (0.0, 0.0, 0.0), (0.01 * c, 0.0, 0.0))
    span = (0.0, 10 * 2 * math.pi / omega_c)
    worldline = integrate_proper_time(particle, fields, initial, span, 1e-10, n_samples=2001)
    assert np.max(np.abs(worldline.norm_drift)) < 1e-6
    assert gyration_decay_rate(worldline) == pytest.approx(2 * particle.tau_e * omega_c**2, rel=1e-3)


def test_no_radiation_conserves_gyration(particle):
    omega_c, fields = _cyclotron_field(particle, 1e-2)
    c = particle.constants.c
    initial = four_state(particle, 0.0, (0.0, 0.0, 0.0), (0.01 * c, 0.0, 0.0))
    span = (0.0, 3 * 2 * math.pi / omega_c)
    worldline = integrate_proper_time(particle, fields, initial, span, 1e-10, radiation=False, n_samples=301)
    assert abs(gyration_decay_rate(worldline)) < 1e-6 * omega_c


def test_covariant_and_threevector_worldlines_agree(particle):
    omega_c, fields = _cyclotron_field(particle, 1e-2)
    c = particle.constants.c
    v0 = (0.01 * c, 0.0, 0.0)
    span = (0.0, 10 * 2 * math.pi / omega_c)
    covariant = integrate_proper_time(particle, fields, four_state(particle, 0.0, (0.0, 0.0, 0.0), v0), span, 1e-10, n_samples=4001)
    gamma0 = 1.0 / math.sqrt(1.0 - 1e-4)
    lab = integrate_lab_time(particle, fields, (0.0, 0.0, 0.0), v0, (0.0, 1.001 * gamma0 * span[1]), 1e-10, n_samples=4001)
    radius = 0.01 * c / omega_c
    assert worldline_deviation(covariant, lab) <= 1e-6 * radius


def test_frame_consistency_over_a_few_periods(particle):
    omega_c, fields = _cyclotron_field(particle, 1e-2)
    v0 = (0.01 * particle.constants.c, 0.0, 0.0)
    result = frame_consistency(particle, fields, v0, (0.0, 10 * 2 * math.pi / omega_c), 1e-10)
    assert result["integrator_error"] > 0
    assert result["ratio"] <= 10.0


@pytest.mark.slow
def test_frame_consistency_over_a_thousand_periods(particle):
    omega_c, fields = _cyclotron_field(particle, 1e-4)
    v0 = (0.01 * particle.constants.c, 0.0, 0.0)
    span = (0.0, 1000 * 2 * math.pi / omega_c)
    result = frame_consistency(particle, fields, v0, span, 1e-10, n_samples=200_001)
    assert result["n_steps"] >= 10_000
    assert result["max_step_drift"] <= 1e-6
    assert result["ratio"] <= 10.0


def test_ll_type_crossed_fields_runs(particle):
    fields = FieldTensor(E=(0.0, 4e12, 0.0), B=(0.0, 0.0, 9.1e12))
    initial = four_state(particle, 0.0, (0.0, 0.0, 0.0), (0.0, 0.0, 0.0))
    worldline = integrate_proper_time(particle, fields, initial, (0.0, 2e-20), 1e-10, kind="ll_type", n_samples=51)
    assert worldline.model.startswith("LL-type")
    assert np.all(worldline.gamma >= 1.0 - 1e-12)


def test_proper_time_rejects_threevector_kind(particle):
    initial = four_state(particle, 0.0, (0.0, 0.0, 0.0), (0.0, 0.0, 0.0))
    with pytest.raises(PhysicsDomainError):
        integrate_proper_time(particle, FieldTensor(), initial, (0.0, 1e-20), kind="rel_fo_3vector")
