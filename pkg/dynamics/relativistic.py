"""Relativistic structured-electron dynamics in uniform fields.

Metric signature (+,-,-,-). Four-vectors are contravariant arrays
(x^0, x^1, x^2, x^3); `mdot` lowers one index. The covariant equation is
integrated in proper time on (x^mu, u^mu); the three-vector form is
integrated in lab time on (x, gamma v). Both run in internal units where
c = 1, time is tau_e and the fields are e E tau_e / (M c), e B tau_e / (M c).
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from loguru import logger

from core.comparison import worldline_deviation
from core.config import DEFAULT_TOL
from core.exceptions import NormalizationDrift, PhysicsDomainError
from core.models import FourState, Worldline
from core.physics import ParticleParams, Units
from services.integrator import integrate_system, terminal

SIGNATURE = np.array([1.0, -1.0, -1.0, -1.0])
METRIC = np.diag(SIGNATURE)
NORM_DRIFT_LIMIT = 1e-6
NORM_INPUT_TOL = 1e-9
CLOSURES = ("zeroth_order", "self_consistent")
REL_KINDS = ("rel_fo_covariant", "rel_fo_3vector", "ll_type")
LL_LABEL = "LL-type (external reference)"


def mdot(x, y):
    return np.sum(x * y * SIGNATURE, axis=-1)


def antisym(upper: np.ndarray) -> np.ndarray:
    return upper - upper.T


def field_tensor(E, B) -> np.ndarray:
    """Contravariant F^{mu nu}, first row (0, -Ex, -Ey, -Ez)."""
    Ex, Ey, Ez = E
    Bx, By, Bz = B
    upper = np.array([
        [0.0, -Ex, -Ey, -Ez],
        [0.0, 0.0, -Bz, By],
        [0.0, 0.0, 0.0, -Bx],
        [0.0, 0.0, 0.0, 0.0],
    ])
    return antisym(upper)


@dataclass(frozen=True)
class FieldTensor:
    """Uniform E (statV/cm) and B (G), optionally ramping linearly in lab time."""
    E: tuple = (0.0, 0.0, 0.0)
    B: tuple = (0.0, 0.0, 0.0)
    dE_dt: tuple = (0.0, 0.0, 0.0)
    dB_dt: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        for name in ("E", "B", "dE_dt", "dB_dt"):
            value = np.asarray(getattr(self, name), dtype=float)
            if value.shape != (3,) or not np.all(np.isfinite(value)):
                raise PhysicsDomainError(f"{name} must be a finite 3-vector, got {getattr(self, name)!r}")
            object.__setattr__(self, name, tuple(float(c) for c in value))

    @property
    def is_static(self) -> bool:
        return not any(self.dE_dt) and not any(self.dB_dt)

    def at(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        return np.add(self.E, np.multiply(self.dE_dt, t)), np.add(self.B, np.multiply(self.dB_dt, t))

    def tensor(self, t: float = 0.0) -> np.ndarray:
        return field_tensor(*self.at(t))

    def rate(self) -> np.ndarray:
        """dF^{mu nu}/dt (lab time); dF/dtau = gamma * rate."""
        return field_tensor(self.dE_dt, self.dB_dt)

    def scaled(self, factor: float, rate_factor: float) -> "FieldTensor":
        return FieldTensor(
            E=tuple(np.multiply(self.E, factor)),
            B=tuple(np.multiply(self.B, factor)),
            dE_dt=tuple(np.multiply(self.dE_dt, rate_factor)),
            dB_dt=tuple(np.multiply(self.dB_dt, rate_factor)),
        )


def four_velocity(velocity, c: float) -> np.ndarray:
    v = np.asarray(velocity, dtype=float)
    beta2 = float(v @ v) / c**2
    if not beta2 < 1.0:
        raise PhysicsDomainError(f"|v|/c = {math.sqrt(beta2):.6g} must be below 1")
    gamma = 1.0 / math.sqrt(1.0 - beta2)
    return gamma * np.concatenate([[c], v])


def four_state(particle: ParticleParams, t0: float, position, velocity) -> FourState:
    c = particle.constants.c
    return FourState(
        tau=0.0,
        x=np.concatenate([[c * t0], np.asarray(position, dtype=float)]),
        u=four_velocity(velocity, c),
    )


# ── kernels (unit-agnostic: k = e/(M c)) ─────────────────────────────
def _projector_apply(u, w, c):
    return w - u * mdot(u, w) / c**2


def _fo_four_accel(F, dF, u, k, tau, c, closure):
    gu = SIGNATURE * u
    a0 = k * (F @ gu)
    if closure == "zeroth_order":
        fdot = k * (dF @ gu + F @ (SIGNATURE * a0))
        return a0 + tau * _projector_apply(u, fdot, c)
    # a = a0 + tau P k (dF g u + F g a): linear in a
    P = np.eye(4) - np.outer(u, gu) / c**2
    A = np.eye(4) - tau * k * (P @ F @ METRIC)
    rhs = a0 + tau * k * (P @ (dF @ gu))
    return np.linalg.solve(A, rhs)


def _ll_four_accel(F, dF, u, k, tau, c):
    # field-only: f/M + tau [ k dF u + k F f/M + (f.f) u / (M c)^2 ], f/M = k F u
    gu = SIGNATURE * u
    a0 = k * (F @ gu)
    return a0 + tau * (k * (dF @ gu) + k * (F @ (SIGNATURE * a0)) + mdot(a0, a0) * u / c**2)


def _threevector_dp_dt(E, B, dE, dB, v, tau, c):
    """d(gamma v)/dt with fields pre-multiplied by e/M."""
    gamma = 1.0 / math.sqrt(1.0 - float(v @ v) / c**2)
    force = E + np.cross(v, B) / c
    vdot0 = (force - v * float(v @ force) / c**2) / gamma
    dforce = dE + np.cross(vdot0, B) / c + np.cross(v, dB) / c
    radiation = gamma * dforce - gamma**3 / c**2 * np.cross(vdot0, np.cross(v, force))
    return force + tau * radiation


# ── public operations (CGS) ──────────────────────────────────────────
def _k(particle: ParticleParams) -> float:
    return particle.charge / (particle.mass_renormalized * particle.constants.c)


def _check_normalized(u, c):
    drift = mdot(u, u) / c**2 - 1.0
    if abs(drift) > NORM_INPUT_TOL:
        raise PhysicsDomainError(f"four-velocity not normalized: u.u/c^2 - 1 = {drift:.3g}")


def lorentz_four_force(particle: ParticleParams, F, u, t: float = 0.0) -> np.ndarray:
    """f^mu = (e/c) F^mu_nu u^nu, in dyn."""
    c = particle.constants.c
    u = np.asarray(u, dtype=float)
    _check_normalized(u, c)
    tensor = F.tensor(t) if isinstance(F, FieldTensor) else np.asarray(F, dtype=float)
    return particle.charge / c * (tensor @ (SIGNATURE * u))


def project_g(fdot, u, c: float) -> np.ndarray:
    """g^mu = fdot^mu - u^mu (u . fdot) / c^2, orthogonal to u."""
    u = np.asarray(u, dtype=float)
    _check_normalized(u, c)
    return _projector_apply(u, np.asarray(fdot, dtype=float), c)


def field_rate_along(fields: FieldTensor, u, c: float) -> np.ndarray:
    """dF/dtau = gamma dF/dt for uniform fields."""
    return (u[0] / c) * fields.rate()


def rel_fo_accel(
    particle: ParticleParams,
    F,
    dF_dtau,
    u,
    *,
    closure: str = "zeroth_order",
    t: float = 0.0,
) -> np.ndarray:
    """Four-acceleration of the covariant structured-electron equation, cm/s^2.

    closure picks the acceleration inside d/dtau (F u): the zeroth-order
    a0 = f/M, or the self-consistent solution of the resulting 4x4 system.
    """
    if closure not in CLOSURES:
        raise PhysicsDomainError(f"unknown closure {closure!r}; expected one of {', '.join(CLOSURES)}")
    c = particle.constants.c
    u = np.asarray(u, dtype=float)
    _check_normalized(u, c)
    tensor = F.tensor(t) if isinstance(F, FieldTensor) else np.asarray(F, dtype=float)
    if dF_dtau is None:
        dF_dtau = field_rate_along(F, u, c) if isinstance(F, FieldTensor) else np.zeros((4, 4))
    return _fo_four_accel(tensor, np.asarray(dF_dtau, dtype=float), u, _k(particle), particle.tau_e, c, closure)


def ll_type_accel(particle: ParticleParams, F, dF_dtau, u, t: float = 0.0) -> np.ndarray:
    """Field-only radiation term obtained by iterating the zeroth-order acceleration."""
    c = particle.constants.c
    u = np.asarray(u, dtype=float)
    _check_normalized(u, c)
    tensor = F.tensor(t) if isinstance(F, FieldTensor) else np.asarray(F, dtype=float)
    if dF_dtau is None:
        dF_dtau = field_rate_along(F, u, c) if isinstance(F, FieldTensor) else np.zeros((4, 4))
    return _ll_four_accel(tensor, np.asarray(dF_dtau, dtype=float), u, _k(particle), particle.tau_e, c)


def threevector_rhs(particle: ParticleParams, E, B, v, dE_dt=(0.0, 0.0, 0.0), dB_dt=(0.0, 0.0, 0.0), *, radiation: bool = True) -> np.ndarray:
    """d(gamma v)/dt of the three-vector form, cm/s^2 (Gaussian (v/c) x B)."""
    c = particle.constants.c
    v = np.asarray(v, dtype=float)
    if not float(v @ v) < c**2:
        raise PhysicsDomainError(f"|v| = {math.sqrt(float(v @ v)):.6g} cm/s must be below c")
    q = particle.charge / particle.mass_renormalized
    tau = particle.tau_e if radiation else 0.0
    return _threevector_dp_dt(
        q * np.asarray(E, float), q * np.asarray(B, float), q * np.asarray(dE_dt, float), q * np.asarray(dB_dt, float), v, tau, c
    )


@dataclass(frozen=True)
class ComparisonModel:
    """The order-reduced relativistic model, kept apart from the covariant equation."""
    fields: FieldTensor
    kind: str = "ll_type"
    label: str = LL_LABEL

    def accel(self, particle: ParticleParams, u, t: float = 0.0) -> np.ndarray:
        return ll_type_accel(particle, self.fields, None, u, t)


def reduce_order_relativistic(fields: FieldTensor) -> ComparisonModel:
    """Substitute a0 = f/M into the derivative terms; a reference model, not a replacement."""
    logger.info(f"[Rel] Built {LL_LABEL} comparison model")
    return ComparisonModel(fields=fields)


# ── integration ──────────────────────────────────────────────────────
def _internal(particle: ParticleParams, fields: FieldTensor) -> tuple[Units, FieldTensor]:
    units = Units.for_particle(particle)
    scale = 1.0 / units.field_scale
    return units, fields.scaled(scale, scale * units.time)


def integrate_proper_time(
    particle: ParticleParams,
    fields: FieldTensor,
    initial: FourState,
    tau_span: tuple[float, float],
    tol: float = DEFAULT_TOL,
    *,
    kind: str = "rel_fo_covariant",
    closure: str = "zeroth_order",
    radiation: bool = True,
    n_samples: Optional[int] = None,
    fixed_step: Optional[float] = None,
) -> Worldline:
    """Integrate the covariant equation (or the LL-type model) in proper time.

    u.u drift is measured at every accepted step and never corrected;
    a drift above NORM_DRIFT_LIMIT aborts with NormalizationDrift.
    """
    if kind not in ("rel_fo_covariant", "ll_type"):
        raise PhysicsDomainError(f"proper-time integration supports rel_fo_covariant and ll_type, got {kind!r}")
    if closure not in CLOSURES:
        raise PhysicsDomainError(f"unknown closure {closure!r}")
    c = particle.constants.c
    _check_normalized(np.asarray(initial.u, dtype=float), c)
    units, inner = _internal(particle, fields)
    tau = 1.0 if radiation else 0.0
    rate = inner.rate()

    def rhs(s, y):
        x, u = y[:4], y[4:]
        F = inner.tensor(x[0])
        dF = u[0] * rate
        if kind == "ll_type":
            a = _ll_four_accel(F, dF, u, 1.0, tau, 1.0)
        else:
            a = _fo_four_accel(F, dF, u, 1.0, tau, 1.0, closure)
        return np.concatenate([u, a])

    def drift_guard(s, y):
        u = y[4:]
        return abs(mdot(u, u) - 1.0) - NORM_DRIFT_LIMIT

    y0 = np.concatenate([
        units.to_internal(np.asarray(initial.x, float), "length"),
        units.to_internal(np.asarray(initial.u, float), "velocity"),
    ])
    s0, s1 = units.to_internal(tau_span[0], "time"), units.to_internal(tau_span[1], "time")
    label = LL_LABEL if kind == "ll_type" else f"rel_fo_covariant[{closure}]"
    t_eval = np.linspace(s0, s1, n_samples) if n_samples else None

    logger.info(f"[Rel] Integrating {label} over {s1 - s0:.4g} tau_e of proper time")
    result = integrate_system(
        rhs,
        (s0, s1),
        y0,
        rtol=tol,
        atol=tol * 1e-2,
        t_eval=t_eval,
        events=(terminal(drift_guard),),
        fixed_step=units.to_internal(fixed_step, "time") if fixed_step else None,
        label=label,
    )
    step_u = result.step_y[4:]
    step_drift = np.abs(mdot(step_u.T, step_u.T) - 1.0)
    if not result.completed:
        where = units.to_physical(result.t_event, "time")
        logger.warning(f"[Rel] ⚠️ u.u drift passed {NORM_DRIFT_LIMIT:g} at proper time {where:.6g} s")
        raise NormalizationDrift(where, float(step_drift.max()), NORM_DRIFT_LIMIT)

    worldline = _worldline_from_proper(result.t, result.y, units, label)
    worldline.diagnostics.update({
        "n_steps": result.n_steps,
        "nfev": result.nfev,
        "max_step_drift": float(step_drift.max()),
    })
    logger.info(f"[Rel] ✓ {label}: {result.n_steps} steps, max |u.u - 1| = {step_drift.max():.3g}")
    return worldline


def _worldline_from_proper(s, y, units: Units, label: str) -> Worldline:
    u = y[4:].T
    return Worldline(
        model=label,
        tau=units.to_physical(s, "time"),
        t=units.to_physical(y[0], "time"),   # x^0 = t in internal units
        position=units.to_physical(y[1:4].T, "length"),
        u=units.to_physical(u[:, 1:], "velocity"),
        gamma=u[:, 0],
        norm_drift=mdot(u, u) - 1.0,
    )


def integrate_lab_time(
    particle: ParticleParams,
    fields: FieldTensor,
    position,
    velocity,
    t_span: tuple[float, float],
    tol: float = DEFAULT_TOL,
    *,
    radiation: bool = True,
    n_samples: Optional[int] = None,
    t_eval=None,
) -> Worldline:
    """Integrate the three-vector form in lab time on (x, gamma v, tau)."""
    c = particle.constants.c
    four_velocity(velocity, c)  # |v| < c
    units, inner = _internal(particle, fields)
    tau = 1.0 if radiation else 0.0
    E0, B0 = np.asarray(inner.E), np.asarray(inner.B)
    dE, dB = np.asarray(inner.dE_dt), np.asarray(inner.dB_dt)

    def rhs(t, y):
        p = y[3:6]
        gamma = math.sqrt(1.0 + float(p @ p))
        v = p / gamma
        dp = _threevector_dp_dt(E0 + dE * t, B0 + dB * t, dE, dB, v, tau, 1.0)
        return np.concatenate([v, dp, [1.0 / gamma]])

    v0 = units.to_internal(np.asarray(velocity, float), "velocity")
    gamma0 = 1.0 / math.sqrt(1.0 - float(v0 @ v0))
    y0 = np.concatenate([units.to_internal(np.asarray(position, float), "length"), gamma0 * v0, [0.0]])
    span = (units.to_internal(t_span[0], "time"), units.to_internal(t_span[1], "time"))
    if t_eval is not None:
        t_eval = np.clip(units.to_internal(np.asarray(t_eval, float), "time"), *span)
    elif n_samples:
        t_eval = np.linspace(span[0], span[1], n_samples)

    result = integrate_system(rhs, span, y0, rtol=tol, atol=tol * 1e-2, t_eval=t_eval, label="rel_fo_3vector")
    p = result.y[3:6].T
    gamma = np.sqrt(1.0 + np.sum(p**2, axis=1))
    logger.info(f"[Rel] ✓ rel_fo_3vector: {result.n_steps} steps")
    return Worldline(
        model="rel_fo_3vector",
        tau=units.to_physical(result.y[6], "time"),
        t=units.to_physical(result.t, "time"),
        position=units.to_physical(result.y[0:3].T, "length"),
        u=units.to_physical(p, "velocity"),
        gamma=gamma,
        norm_drift=np.zeros_like(gamma),
        diagnostics={"n_steps": result.n_steps, "nfev": result.nfev},
    )


def gyration_decay_rate(worldline: Worldline, axis=(0.0, 0.0, 1.0)) -> float:
    """Decay rate (1/s, lab time) of |u_perp|^2 transverse to axis, log-linear fit."""
    n = np.asarray(axis, dtype=float)
    n = n / np.linalg.norm(n)
    u = worldline.u
    perp = u - np.outer(u @ n, n)
    slope, _ = np.polyfit(worldline.t, np.log(np.sum(perp**2, axis=1)), 1)
    return -slope


def nonrel_limit_deviation(particle: ParticleParams, E, beta: float, direction=None) -> float:
    """Relative gap between the covariant lab-frame dv/dt and the nonrelativistic eE/M.

    The velocity points along `direction` (default: along E) with |v| = beta c.
    """
    c = particle.constants.c
    E = np.asarray(E, dtype=float)
    n = np.asarray(direction if direction is not None else E, dtype=float)
    n = n / np.linalg.norm(n)
    v = beta * c * n
    u = four_velocity(v, c)
    fields = FieldTensor(E=tuple(E))
    a = rel_fo_accel(particle, fields, None, u)
    gamma = u[0] / c
    dp_dt = a[1:] / gamma
    dv_dt = (dp_dt - v * float(v @ dp_dt) / c**2) / gamma
    a_nonrel = particle.charge * E / particle.mass_renormalized
    return float(np.linalg.norm(dv_dt - a_nonrel) / np.linalg.norm(a_nonrel))


def frame_consistency(
    particle: ParticleParams,
    fields: FieldTensor,
    velocity,
    tau_span: tuple[float, float],
    tol: float = DEFAULT_TOL,
    *,
    n_samples: int = 4001,
    refine: float = 10.0,
) -> dict:
    """Cross-integrate the covariant and three-vector forms from the same start.

    Their worldline deviation is measured against the realized integrator
    error, taken as the larger self-convergence gap of either form between
    tol and tol / refine. A ratio of order one means the two forms differ
    only by integration error.
    """
    origin = (0.0, 0.0, 0.0)
    initial = four_state(particle, 0.0, origin, velocity)
    covariant = integrate_proper_time(particle, fields, initial, tau_span, tol, n_samples=n_samples)
    covariant_fine = integrate_proper_time(particle, fields, initial, tau_span, tol / refine, n_samples=n_samples)
    lab_span = (0.0, 1.001 * max(covariant.t[-1], covariant_fine.t[-1]))
    lab = integrate_lab_time(particle, fields, origin, velocity, lab_span, tol, n_samples=n_samples)
    lab_fine = integrate_lab_time(particle, fields, origin, velocity, lab_span, tol / refine, n_samples=n_samples)

    deviation = worldline_deviation(covariant, lab)
    integrator_error = max(worldline_deviation(covariant, covariant_fine), worldline_deviation(lab, lab_fine))
    ratio = deviation / integrator_error if integrator_error > 0 else (0.0 if deviation == 0 else math.inf)
    logger.info(f"[Rel] ✓ Frame consistency: deviation {deviation:.3g} cm = {ratio:.3g} x integrator error")
    return {
        "deviation": deviation,
        "integrator_error": integrator_error,
        "ratio": ratio,
        "max_step_drift": covariant.diagnostics["max_step_drift"],
        "n_steps": covariant.diagnostics["n_steps"],
    }
