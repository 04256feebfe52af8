import numpy as np
import pytest

from core.comparison import fit_exponent
from services.integrator import _segments, integrate_system, terminal


def test_exponential_decay_accuracy():
    result = integrate_system(lambda t, y: -y, (0.0, 2.0), [1.0], rtol=1e-10, atol=1e-14, t_eval=np.linspace(0, 2, 21))
    assert result.completed
    assert np.allclose(result.y[0], np.exp(-result.t), rtol=1e-8)
    assert len(result.t) == 21


def test_segments_split_at_breakpoints():
    assert _segments(0.0, 3.0, [1.0, 2.0, 5.0, 1.0]) == [(0.0, 1.0), (1.0, 2.0), (2.0, 3.0)]


def test_breakpoint_does_not_duplicate_outputs():
    # the force switches on at t = 1
    rhs = lambda t, y: [1.0 if t >= 1.0 else 0.0]
    t_eval = np.linspace(0.0, 2.0, 9)
    result = integrate_system(rhs, (0.0, 2.0), [0.0], t_eval=t_eval, breakpoints=[1.0])
    assert np.array_equal(result.t, t_eval)
    assert result.y[0, -1] == pytest.approx(1.0, rel=1e-9)
    assert result.y[0, 4] == pytest.approx(0.0, abs=1e-12)


def test_terminal_event_stops_run():
    guard = terminal(lambda t, y: y[0] - 10.0)
    result = integrate_system(lambda t, y: y, (0.0, 10.0), [1.0], events=[guard])
    assert not result.completed
    assert result.t_event == pytest.approx(np.log(10.0), rel=1e-6)
    assert result.step_t[-1] == pytest.approx(result.t_event)


def test_fixed_step_takes_uniform_steps():
    result = integrate_system(lambda t, y: [1.0], (0.0, 1.0), [0.0], fixed_step=0.1)
    assert result.n_steps in (10, 11)
    assert np.all(np.diff(result.step_t) <= 0.1 + 1e-12)
    assert result.step_y[0, -1] == pytest.approx(1.0)


def test_fixed_step_global_order():
    steps = [0.4, 0.2, 0.1]
    errors = []
    for h in steps:
        result = integrate_system(lambda t, y: [y[1], -y[0]], (0.0, 8.0), [0.0, 1.0], fixed_step=h)
        errors.append(abs(result.step_y[0, -1] - np.sin(8.0)))
    assert min(errors) > 1e-13
    # RK45 advances with its 5th-order solution
    assert fit_exponent(steps, errors) == pytest.approx(5.0, abs=0.5)


def test_vector_atol_accepted():
    result = integrate_system(lambda t, y: [y[1], -y[0]], (0.0, np.pi), [0.0, 1e-20], atol=np.array([1e-32, 1e-32]))
    assert result.step_y[0, -1] == pytest.approx(0.0, abs=1e-27)
