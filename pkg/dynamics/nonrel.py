"""Nonrelativistic equations of motion: Newton, ALD, FO and its relatives.

Public operations take and return CGS quantities. The right-hand-side
kernels are written once against (tau, mass) so the same code runs in CGS
(tau = tau_e, mass = M) and inside the integrator (tau = 1, mass = 1).
"""

import math

import numpy as np
from loguru import logger

from core.config import DEFAULT_TOL
from core.exceptions import PhysicsDomainError, RunawayDetected
from core.forces import Constant, ForceModel, Step, Zero
from core.models import MAX_SERIES_ORDER, ModelNR, StateNR, Trajectory
from core.physics import ParticleParams, Units, larmor_power, tau_e
from services.integrator import integrate_system, terminal

RUNAWAY_FACTOR = 1e6

# Gauss-Laguerre rule for the runaway-free ALD branch; nodes whose weight
# is below 1e-18 never matter and would reach far past the force domain
_NODES, _WEIGHTS = np.polynomial.laguerre.laggauss(64)
_KEEP = _WEIGHTS > 1e-18
_NODES, _WEIGHTS = _NODES[_KEEP], _WEIGHTS[_KEEP]


# ── kernels (unit-agnostic) ───────────────────────────────────────────
def _ald_jerk(tau, mass, f, a):
    return (a - f / mass) / tau


def _series_top(tau, mass, f, derivs):
    """Highest derivative x^(N) of the truncated series, derivs = x^(0..N-1)."""
    n_top = len(derivs)
    acc = f / mass - derivs[2]
    for n in range(3, n_top):
        acc -= (-1) ** n * tau ** (n - 2) * derivs[n]
    return acc / ((-1) ** n_top * tau ** (n_top - 2))


def _fo_cutoff_jerk(tau, mass, omega, f, fdot, a):
    # (m/Omega) a' + M a = f + f'/Omega, m = M (1 - tau Omega)
    bare = mass * (1.0 - tau * omega)
    return (omega * f + fdot - mass * omega * a) / bare


# ── public operations ─────────────────────────────────────────────────
def fo_accel(particle: ParticleParams, force: ForceModel, t: float) -> float:
    """(f + tau_e f') / M."""
    f, fdot, _ = force.value(t)
    return (f + tau_e(particle) * fdot) / particle.mass_renormalized


def fo_sharp_accel(particle: ParticleParams, force: ForceModel, t: float) -> float:
    """Sharper cutoff, Omega = 2/tau_e: (f + tau_e f' + tau_e^2 f''/4) / M."""
    tau = tau_e(particle)
    f, fdot, fddot = force.value(t)
    return (f + tau * fdot + 0.25 * tau**2 * fddot) / particle.mass_renormalized


def ald_extended_rhs(particle: ParticleParams, force: ForceModel, state: StateNR) -> tuple[float, float, float]:
    """First-order form of M x'' - M tau_e x''' = f."""
    if state.a is None:
        raise PhysicsDomainError("ALD state must carry the acceleration")
    f, _, _ = force.value(state.t)
    jerk = _ald_jerk(tau_e(particle), particle.mass_renormalized, f, state.a)
    return state.v, state.a, jerk


def ald_preacceleration(particle: ParticleParams, amplitude: float, t: float) -> float:
    """Runaway-free ALD response to a step force switched on at t = 0."""
    a_final = amplitude / particle.mass_renormalized
    if t >= 0:
        return a_final
    return a_final * math.exp(t / tau_e(particle))


def ald_runaway_free_accel(particle: ParticleParams, force: ForceModel, t: float) -> float:
    """a(t) = (1/M) int_0^inf e^{-s} f(t + tau_e s) ds, the non-runaway branch."""
    mass = particle.mass_renormalized
    if isinstance(force, Step):
        return ald_preacceleration(particle, force.amplitude, t - force.t_on)
    if isinstance(force, Constant):
        return force.amplitude / mass
    if type(force) in (Zero, ForceModel):
        return 0.0
    tau = tau_e(particle)
    total = sum(w * force.value(t + tau * s)[0] for s, w in zip(_NODES, _WEIGHTS))
    return total / mass


def fo_cutoff_rhs(particle: ParticleParams, force: ForceModel, state: StateNR) -> tuple[float, float, float]:
    """Feynman-form-factor electron with cutoff Omega < 1/tau_e, (x, v, a) system."""
    if particle.cutoff_omega is None or particle.bare_mass == 0:
        raise PhysicsDomainError("fo_cutoff_rhs needs a cutoff below 1/tau_e (positive bare mass)")
    f, fdot, _ = force.value(state.t)
    jerk = _fo_cutoff_jerk(tau_e(particle), particle.mass_renormalized, particle.cutoff_omega, f, fdot, state.a)
    return state.v, state.a, jerk


def series_rhs(particle: ParticleParams, force: ForceModel, order: int, t: float, derivs) -> np.ndarray:
    """Derivatives of (x, x', ..., x^(N-1)) for the series form truncated at n = N."""
    if not 3 <= order <= MAX_SERIES_ORDER:
        raise PhysicsDomainError(f"series truncation order must be in [3, {MAX_SERIES_ORDER}], got {order}")
    derivs = np.asarray(derivs, dtype=float)
    if len(derivs) != order:
        raise PhysicsDomainError(f"series state must hold {order} derivatives, got {len(derivs)}")
    f, _, _ = force.value(t)
    out = np.empty(order)
    out[:-1] = derivs[1:]
    out[-1] = _series_top(tau_e(particle), particle.mass_renormalized, f, derivs)
    return out


def series_characteristic(particle: ParticleParams, order: int, omega) -> np.ndarray:
    """Partial sum of the series form in the frequency domain (x ~ e^{-i omega t}).

    -M omega^2 sum_{k=0}^{N-2} (i omega tau_e)^k; tends to -M omega^2 / (1 - i omega tau_e).
    """
    z = 1j * np.asarray(omega, dtype=complex) * tau_e(particle)
    powers = np.stack([z**k for k in range(order - 1)])
    return -particle.mass_renormalized * np.asarray(omega) ** 2 * powers.sum(axis=0)


def fo_characteristic(particle: ParticleParams, omega) -> np.ndarray:
    omega = np.asarray(omega, dtype=complex)
    return -particle.mass_renormalized * omega**2 / (1 - 1j * omega * tau_e(particle))


def oscillator_rhs(particle: ParticleParams, spring_constant: float, drive: ForceModel, state: StateNR) -> tuple[float, float]:
    """M x'' + zeta x' + K x = f_drive with zeta = K tau_e."""
    if not spring_constant > 0:
        raise PhysicsDomainError(f"spring constant must be positive, got {spring_constant!r}")
    f, _, _ = drive.value(state.t)
    zeta = spring_constant * tau_e(particle)
    return state.v, (f - zeta * state.v - spring_constant * state.x) / particle.mass_renormalized


def oscillator_coupling(particle: ParticleParams, spring_constant: float) -> float:
    """Dimensionless weak-coupling measure zeta / sqrt(K M) = omega_0 tau_e."""
    zeta = spring_constant * tau_e(particle)
    return zeta / math.sqrt(spring_constant * particle.mass_renormalized)


def radiated_power_fo(particle: ParticleParams, force: ForceModel, t: float) -> float:
    """Radiation rate of the structured electron, tau_e f^2 / M."""
    f, _, _ = force.value(t)
    return tau_e(particle) * f * f / particle.mass_renormalized


def reduce_order(model: ModelNR) -> ModelNR:
    """Substitute M x''' = f' into the ALD radiation term.

    The result is the FO equation. The substitution is only good to order
    tau_e, and the model it produces describes an electron with structure,
    not the point charge it started from.
    """
    if model.kind == "fo":
        return model
    if model.kind != "ald":
        raise PhysicsDomainError(f"order reduction applies to the ALD model, got {model.kind!r}")
    logger.info("[EOM] Reduced ALD to FO: point charge -> structured electron")
    return ModelNR(kind="fo", particle=model.particle)


def runaway_efolding(times, accels, decades: float = 3.0) -> float:
    """e-folding time of |a| from a log-linear fit over the last decades of growth."""
    times = np.asarray(times, dtype=float)
    mags = np.abs(np.asarray(accels, dtype=float))
    keep = mags >= mags[-1] * 10.0 ** (-decades)
    if keep.sum() < 3:
        keep = slice(-3, None)
    slope, _ = np.polyfit(times[keep], np.log(mags[keep]), 1)
    return 1.0 / slope


def energy_decay_rate(trajectory: Trajectory, spring_constant: float, mass: float) -> float:
    """Decay rate of the mechanical energy M v^2/2 + K x^2/2 (log-linear fit)."""
    energy = 0.5 * mass * trajectory.v**2 + 0.5 * spring_constant * trajectory.x**2
    slope, _ = np.polyfit(trajectory.t, np.log(energy), 1)
    return -slope


# ── integration ───────────────────────────────────────────────────────
def _internal_force(force: ForceModel, units: Units):
    f_unit, fd_unit, fdd_unit = units.scale("force"), units.scale("force_rate"), units.scale("force_rate2")

    def evaluate(t):
        f, fd, fdd = force.value(t * units.time)
        return f / f_unit, fd / fd_unit, fdd / fdd_unit

    return evaluate


def _system(model: ModelNR, force: ForceModel, units: Units):
    """Internal-unit right-hand side and the acceleration it implies."""
    ext = _internal_force(force, units)
    kind = model.kind

    if kind == "fo_cutoff" and model.particle.bare_mass == 0:
        kind = "fo"

    if kind == "newton":
        accel = lambda t, y: ext(t)[0]
    elif kind == "fo":
        accel = lambda t, y: sum(ext(t)[:2])
    elif kind == "fo_sharp":
        def accel(t, y):
            f, fd, fdd = ext(t)
            return f + fd + 0.25 * fdd
    elif kind == "ald_runaway_free":
        particle, tau = model.particle, units.time
        def accel(t, y):
            return units.to_internal(ald_runaway_free_accel(particle, force, t * tau), "acceleration")
    elif kind == "oscillator":
        k = units.to_internal(model.spring_constant, "spring")
        # zeta = K tau_e, and tau_e is the time unit
        accel = lambda t, y: ext(t)[0] - k * y[1] - k * y[0]
    elif kind == "ald":
        def rhs(t, y):
            return [y[1], y[2], _ald_jerk(1.0, 1.0, ext(t)[0], y[2])]
        return rhs, lambda t, y: y[2]
    elif kind == "fo_cutoff":
        omega = units.to_internal(model.particle.cutoff_omega, "frequency")
        def rhs(t, y):
            f, fd, _ = ext(t)
            return [y[1], y[2], _fo_cutoff_jerk(1.0, 1.0, omega, f, fd, y[2])]
        return rhs, lambda t, y: y[2]
    elif kind == "series":
        def rhs(t, y):
            out = np.empty_like(y)
            out[:-1] = y[1:]
            out[-1] = _series_top(1.0, 1.0, ext(t)[0], y)
            return out
        return rhs, lambda t, y: y[2]
    else:
        raise PhysicsDomainError(f"no integrator for model {model.kind!r}")

    def rhs(t, y):
        return [y[1], accel(t, y)]

    return rhs, accel


def _initial_vector(model: ModelNR, force: ForceModel, initial: StateNR, units: Units) -> np.ndarray:
    x0 = units.to_internal(initial.x, "length")
    v0 = units.to_internal(initial.v, "velocity")
    if not model.carries_acceleration:
        return np.array([x0, v0])
    if initial.a is not None:
        a0 = units.to_internal(initial.a, "acceleration")
    else:
        # f/M, taken in internal units so a0 - f is exactly zero for a constant force
        a0 = _internal_force(force, units)(units.to_internal(initial.t, "time"))[0]
    if model.kind == "series":
        y = np.zeros(model.order)
        y[:3] = x0, v0, a0
        return y
    return np.array([x0, v0, a0])


def _force_scale(force: ForceModel, units: Units, t_span) -> tuple[float, float]:
    """Largest |f| and |f'| (internal units) on a uniform sampling of the span."""
    ext = _internal_force(force, units)
    values = np.array([ext(t)[:2] for t in np.linspace(t_span[0], t_span[1], 257)])
    return float(np.max(np.abs(values[:, 0]))), float(np.max(np.abs(values[:, 1])))


def _runaway_guard(a0: float, f_max: float) -> tuple:
    scale = max(abs(a0), f_max, 1e-300)
    threshold = RUNAWAY_FACTOR * scale

    def guard(t, y):
        return abs(y[2]) - threshold

    return terminal(guard), scale


def _absolute_tolerance(y0: np.ndarray, a_ref: float, duration: float, tol: float) -> np.ndarray:
    # internal magnitudes can be ~1e-30, so atol follows each component's own scale
    x_ref = max(abs(y0[0]), abs(y0[1]) * duration, a_ref * duration**2)
    v_ref = max(abs(y0[1]), a_ref * duration)
    refs = np.array([x_ref, v_ref] + [a_ref] * (len(y0) - 2))
    return tol * 1e-2 * np.maximum(refs, 1e-300)


def integrate(
    model: ModelNR,
    force: ForceModel,
    initial: StateNR,
    t_span: tuple[float, float],
    tol: float = DEFAULT_TOL,
    *,
    n_samples: int | None = None,
    fixed_step: float | None = None,
    t_eval=None,
) -> Trajectory:
    """Integrate a nonrelativistic model over t_span (seconds).

    Adaptive RK 4(5) with relative tolerance tol, or exactly fixed_step
    seconds per step. Output on t_eval (seconds), on n_samples uniform
    times, or on the accepted steps. Raises RunawayDetected (with the
    partial trajectory attached) when |a| grows past RUNAWAY_FACTOR times
    its reference scale.
    """
    if not tol > 0:
        raise PhysicsDomainError(f"tolerance must be positive, got {tol!r}")
    if not (math.isfinite(t_span[0]) and math.isfinite(t_span[1]) and t_span[1] > t_span[0]):
        raise PhysicsDomainError(f"time span must be finite and increasing, got {t_span!r}")
    particle = model.particle
    units = Units.for_particle(particle)
    span = (units.to_internal(t_span[0], "time"), units.to_internal(t_span[1], "time"))
    rhs, accel = _system(model, force, units)
    y0 = _initial_vector(model, force, initial, units)

    f_max, rate_max = _force_scale(force, units, span)
    a_ref = max(f_max, rate_max)
    events, scale = (), None
    if model.carries_acceleration:
        guard, scale = _runaway_guard(y0[2], f_max)
        events = (guard,)
        a_ref = max(a_ref, abs(y0[2]))
    if model.kind == "oscillator":
        a_ref = max(a_ref, units.to_internal(model.spring_constant, "spring") * (abs(y0[0]) + abs(y0[1])))
    atol = _absolute_tolerance(y0, a_ref, span[1] - span[0], tol)

    if t_eval is not None:
        t_eval = np.clip(units.to_internal(np.asarray(t_eval, dtype=float), "time"), *span)
    elif n_samples:
        t_eval = np.linspace(span[0], span[1], n_samples)
    logger.info(f"[EOM] Integrating {model.label} over [{t_span[0]:.4g}, {t_span[1]:.4g}] s ({span[1] - span[0]:.4g} tau_e)")
    result = integrate_system(
        rhs,
        span,
        y0,
        rtol=tol,
        atol=atol,
        t_eval=t_eval,
        breakpoints=[units.to_internal(b, "time") for b in force.breakpoints],
        events=events,
        fixed_step=units.to_internal(fixed_step, "time") if fixed_step else None,
        label=model.label,
    )

    trajectory = _to_trajectory(model, force, units, result.t, result.y, accel)
    trajectory.diagnostics.update(
        {"n_steps": result.n_steps, "nfev": result.nfev, "tau_e": units.time}
    )
    if not result.completed:
        a_steps = units.to_physical(result.step_y[2], "acceleration")
        t_steps = units.to_physical(result.step_t, "time")
        efold = runaway_efolding(t_steps, a_steps)
        amplification = abs(a_steps[-1]) / units.to_physical(scale, "acceleration")
        trajectory.diagnostics.update({"efolding_time": efold, "t_runaway": units.to_physical(result.t_event, "time")})
        logger.warning(f"[EOM] ⚠️ Runaway in {model.label}: e-folding {efold:.6g} s ({efold / units.time:.4f} tau_e)")
        raise RunawayDetected(efold, units.to_physical(result.t_event, "time"), amplification, trajectory)
    logger.info(f"[EOM] ✓ {model.label}: {result.n_steps} steps in {result.elapsed:.2f}s")
    return trajectory


def _to_trajectory(model, force, units, t_int, y_int, accel) -> Trajectory:
    particle = model.particle
    a_int = np.array([accel(t, y_int[:, i]) for i, t in enumerate(t_int)])
    t = units.to_physical(t_int, "time")
    f = np.array([force.value(ti)[0] for ti in t])
    a = units.to_physical(a_int, "acceleration")
    tau = units.time
    return Trajectory(
        model=model.label,
        t=t,
        x=units.to_physical(y_int[0], "length"),
        v=units.to_physical(y_int[1], "velocity"),
        a=a,
        f=f,
        p_fo=tau * f**2 / particle.mass_renormalized,
        p_larmor=larmor_power(particle, a),
    )
