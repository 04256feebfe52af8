import math

import numpy as np
import pytest

from core.exceptions import CausalityViolation, PhysicsDomainError
from core.physics import (
    Constants,
    ParticleParams,
    Units,
    cutoff_limit,
    effective_potential,
    electron,
    feynman,
    heat_bath_correlation_time,
    larmor_power,
    renormalize,
    sharp,
    tau_e,
)


def test_tau_e_for_electron(particle):
    assert tau_e(particle) == pytest.approx(6.266e-24, rel=1e-3)
    assert particle.tau_e == tau_e(particle)


def test_cutoff_limit_is_inverse_tau(particle):
    assert cutoff_limit(particle) == pytest.approx(1.596e23, rel=1e-3)


def test_renormalize_below_bound(particle):
    result = renormalize(particle.mass_renormalized, 0.25 / particle.tau_e)
    assert result.cutoff_ratio == pytest.approx(0.25)
    assert result.bare_mass == pytest.approx(0.75 * particle.mass_renormalized)
    assert not result.is_minimal_size


def test_renormalize_at_bound_is_minimal_size(particle):
    result = renormalize(particle.mass_renormalized, cutoff_limit(particle))
    assert result.bare_mass == 0.0
    assert result.is_minimal_size


def test_renormalize_above_bound_raises(particle):
    with pytest.raises(CausalityViolation) as info:
        renormalize(particle.mass_renormalized, 1.01 / particle.tau_e)
    assert info.value.bound == pytest.approx(cutoff_limit(particle))


def test_particle_with_cutoff_derives_bare_mass(structured, particle):
    assert structured.bare_mass == 0.0
    assert particle.bare_mass is None
    assert particle.is_point and not structured.is_point


def test_non_positive_mass_rejected():
    with pytest.raises(PhysicsDomainError):
        ParticleParams(charge=1.0, mass_renormalized=0.0)


def test_bad_constant_rejected():
    with pytest.raises(PhysicsDomainError):
        Constants(c=-1.0)


def test_larmor_power_is_mass_tau_a_squared(particle):
    a = np.array([0.0, 2.0, -3.0])
    expected = particle.mass_renormalized * particle.tau_e * a**2
    assert np.allclose(larmor_power(particle, a), expected, rtol=1e-15)


def test_heat_bath_correlation_time():
    assert heat_bath_correlation_time(1.0) == pytest.approx(1.2157e-12, rel=1e-4)
    assert heat_bath_correlation_time(300.0) == pytest.approx(1.2157e-12 / 300, rel=1e-4)
    assert heat_bath_correlation_time(0.0) is None
    with pytest.raises(PhysicsDomainError):
        heat_bath_correlation_time(-1.0)


def test_effective_potential():
    assert effective_potential(2.0, 3.0, 4.0, 0.5) == pytest.approx(0.5 * 2 * 9 + 2 * 0.5 * 12)


def test_form_factors():
    ff = feynman(2.0)
    assert ff(0.0) == pytest.approx(1.0)
    assert ff(2.0) == pytest.approx(0.5)
    assert sharp(2.0)(2.0) == pytest.approx(0.25)
    with pytest.raises(PhysicsDomainError):
        feynman(0.0)


@pytest.mark.parametrize("cutoff", [1e-3, 1.0, 1e20])
def test_sharp_form_factor_bounded_by_feynman(cutoff):
    w = cutoff * np.concatenate([[0.0], np.logspace(-6, 6, 241)])
    lorentzian, squared = feynman(cutoff)(w), sharp(cutoff)(w)
    assert np.all(squared <= lorentzian)
    for values in (lorentzian, squared):
        assert np.all(values > 0) and np.all(values <= 1)
    assert lorentzian[0] == squared[0] == 1.0


def test_units_make_tau_and_c_unity(particle):
    units = Units.for_particle(particle)
    assert units.to_internal(particle.tau_e, "time") == pytest.approx(1.0)
    assert units.to_internal(particle.constants.c, "velocity") == pytest.approx(1.0)
    assert units.to_internal(particle.mass_renormalized, "mass") == pytest.approx(1.0)


def test_units_round_trip_force(units):
    f = 3.7e-10
    assert units.to_physical(units.to_internal(f, "force"), "force") == pytest.approx(f, rel=1e-15)


def test_field_scale_gives_cyclotron_rate(particle, units):
    # internal B is omega_c * tau_e
    b = 1.0e4
    omega_c = particle.charge * b / (particle.mass_renormalized * particle.constants.c)
    assert float(units.field_to_internal(b)) == pytest.approx(omega_c * particle.tau_e, rel=1e-12)


def test_units_need_charge():
    with pytest.raises(PhysicsDomainError):
        Units.for_particle(ParticleParams(charge=0.0, mass_renormalized=1.0))


def test_custom_constants_flow_into_tau():
    consts = Constants(c=1.0, e_charge=math.sqrt(1.5), m_electron=1.0)
    assert tau_e(electron(consts)) == pytest.approx(1.0)
