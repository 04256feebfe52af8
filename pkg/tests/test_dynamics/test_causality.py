import numpy as np
import pytest

from core.exceptions import PhysicsDomainError
from core.models import ModelNR, Verdict
from core.physics import electron
from dynamics.causality import (
    ComplexPoly,
    find_poles,
    pole_residual,
    pole_survey,
    series_poles,
    susceptibility_of,
    verify_positive_real_part,
)
from dynamics.nonrel import fo_characteristic

OPTICAL_K = 8.2e3  # omega_0 ~ 3e15 1/s


def _non_origin(report):
    return [p for p, _ in report.poles if abs(p) > 1e-12]


def test_ald_pole_in_upper_half_plane(particle):
    report = find_poles(susceptibility_of(ModelNR("ald", particle)))
    assert report.verdict is Verdict.NON_CAUSAL
    (pole,) = report.offending_poles
    assert abs(pole - 1j) < 1e-9
    assert (0j, 2) in [(complex(round(p.real, 12), round(p.imag, 12)), m) for p, m in report.poles]


def test_runaway_free_branch_shares_ald_poles(particle):
    report = find_poles(susceptibility_of(ModelNR("ald_runaway_free", particle)))
    assert report.verdict is Verdict.NON_CAUSAL


@pytest.mark.parametrize("kind", ["newton", "fo", "fo_sharp"])
def test_second_order_models_are_marginal(particle, kind):
    report = find_poles(susceptibility_of(ModelNR(kind, particle)))
    assert report.verdict is Verdict.MARGINAL
    assert not report.offending_poles
    assert report.poles == [(0j, 2)]


def test_fo_susceptibility_matches_equation(particle):
    rt = susceptibility_of(ModelNR("fo", particle))
    omega = np.array([1e20, 3e21, 1e23])
    # alpha = x/f, and the FO characteristic is f/x
    assert np.allclose(rt.response(omega) * fo_characteristic(particle, omega), 1.0, rtol=1e-12)


def test_oscillator_is_causal(particle):
    report = find_poles(susceptibility_of(ModelNR("oscillator", particle, spring_constant=OPTICAL_K)))
    assert report.verdict is Verdict.CAUSAL
    assert all(p.imag < 0 for p, _ in report.poles)


@pytest.mark.parametrize("omega_tau", [1e-7, 1e-8, 1e-9, 1e-10])
def test_low_frequency_oscillator_stays_causal(particle, omega_tau):
    spring = particle.mass_renormalized * (omega_tau / particle.tau_e) ** 2
    report = find_poles(susceptibility_of(ModelNR("oscillator", particle, spring_constant=spring)))
    assert report.verdict is Verdict.CAUSAL
    assert [m for _, m in report.poles] == [1, 1]
    # z = +-sqrt(k - k^2/4) - i k/2 with k = (omega_0 tau_e)^2
    k = omega_tau**2
    for (pole, _), sign in zip(report.poles, (-1, 1)):
        assert pole.real == pytest.approx(sign * np.sqrt(k - k**2 / 4), rel=1e-9)
        assert pole.imag == pytest.approx(-k / 2, rel=1e-6)


def test_cutoff_below_bound_pole(consts):
    point = electron(consts)
    particle = electron(consts, cutoff_omega=0.5 / point.tau_e)
    report = find_poles(susceptibility_of(ModelNR("fo_cutoff", particle)))
    assert report.verdict is Verdict.MARGINAL
    (pole,) = _non_origin(report)
    # -i Omega tau_e / (1 - tau_e Omega)
    assert abs(pole - (-1j)) < 1e-9


def test_cutoff_at_bound_reduces_to_fo(structured):
    cutoff = susceptibility_of(ModelNR("fo_cutoff", structured))
    fo = susceptibility_of(ModelNR("fo", structured))
    z = np.array([0.3, 2.0 + 0.1j])
    assert np.allclose(cutoff(z), fo(z), rtol=1e-12)


@pytest.mark.parametrize("order", [3, 4, 7, 12, 30])
def test_series_poles_match_closed_form(particle, order):
    report = find_poles(susceptibility_of(ModelNR("series", particle, order=order)))
    assert report.verdict is Verdict.NON_CAUSAL
    found = sorted(_non_origin(report), key=lambda p: (round(p.real, 6), round(p.imag, 6)))
    expected = sorted(series_poles(order), key=lambda p: (round(p.real, 6), round(p.imag, 6)))
    assert len(found) == order - 2
    assert np.allclose(found, expected, atol=1e-9)


def test_series_order_three_pole_is_the_ald_pole():
    (pole,) = series_poles(3)
    assert abs(pole - 1j) < 1e-15


def test_pole_residuals_small(particle):
    rt = susceptibility_of(ModelNR("series", particle, order=20))
    report = find_poles(rt)
    assert max(pole_residual(rt, p) for p, _ in report.poles) < 1e-10


def test_positive_real_part_of_ohmic_damping(particle):
    check = verify_positive_real_part(particle, OPTICAL_K)
    assert check.verdict is Verdict.CAUSAL and check.positive
    assert check.re_mu == pytest.approx(OPTICAL_K * particle.tau_e, rel=1e-9)


def test_zero_spring_is_marginal(particle):
    assert verify_positive_real_part(particle, 0.0).verdict is Verdict.MARGINAL
    with pytest.raises(PhysicsDomainError):
        verify_positive_real_part(particle, -1.0)


def test_survey_lists_every_model(structured):
    reports = pole_survey(structured, max_order=6, spring_constant=OPTICAL_K)
    labels = [r.model for r in reports]
    assert labels[:4] == ["newton", "ald", "fo", "fo_sharp"]
    assert labels[4].startswith("fo_cutoff")
    assert labels[5:9] == ["series(3)", "series(4)", "series(5)", "series(6)"]
    assert labels[-1].startswith("oscillator")


def test_survey_without_cutoff_skips_fo_cutoff(particle):
    labels = [r.model for r in pole_survey(particle, max_order=3)]
    assert labels == ["newton", "ald", "fo", "fo_sharp", "series(3)"]


def test_complex_poly_trims_and_bounds():
    assert ComplexPoly((1, 2, 0, 0)).degree == 1
    assert list(ComplexPoly((0, 0, 2)).roots()) == [0, 0]
    with pytest.raises(PhysicsDomainError):
        ComplexPoly(tuple([1] * 40))
