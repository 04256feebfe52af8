"""Physical constants, particle parameters, form factors and unit scaling.

Gaussian CGS throughout. Integrators never see CGS numbers directly: the
Units layer measures time in tau_e, mass in M and length in c*tau_e, so
velocities come out in units of c and tau_e itself is 1.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from core.exceptions import CausalityViolation, PhysicsDomainError

# CODATA magnitudes, Gaussian units
SPEED_OF_LIGHT = 2.99792458e10      # cm/s
HBAR = 1.054571817e-27              # erg s
BOLTZMANN = 1.380649e-16            # erg/K
ELEMENTARY_CHARGE = 4.803204713e-10  # statC
ELECTRON_MASS = 9.1093837015e-28    # g

# |1 - tau_e*Omega| below this is the bound itself, not a violation
_BOUND_SNAP = 4 * np.finfo(float).eps


@dataclass(frozen=True)
class Constants:
    c: float = SPEED_OF_LIGHT
    hbar: float = HBAR
    kB: float = BOLTZMANN
    e_charge: float = ELEMENTARY_CHARGE
    m_electron: float = ELECTRON_MASS

    def __post_init__(self):
        for name in ("c", "hbar", "kB", "e_charge", "m_electron"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise PhysicsDomainError(f"constant {name} must be positive and finite, got {value!r}")


def _radiation_time(charge: float, mass: float, c: float) -> float:
    if not mass > 0:
        raise PhysicsDomainError(f"renormalized mass must be positive, got {mass!r} g")
    return (2.0 / 3.0) * charge**2 / (mass * c**3)


@dataclass(frozen=True)
class Renormalization:
    """Bare mass and where the cutoff sits relative to the causal bound."""
    bare_mass: float
    cutoff_ratio: float  # tau_e * Omega, causal iff <= 1

    @property
    def is_minimal_size(self) -> bool:
        return self.bare_mass == 0.0


def _bare_mass(mass: float, cutoff_omega: float, tau: float) -> Renormalization:
    if cutoff_omega < 0:
        raise PhysicsDomainError(f"cutoff frequency must be non-negative, got {cutoff_omega!r} 1/s")
    ratio = tau * cutoff_omega
    if abs(ratio - 1.0) <= _BOUND_SNAP:
        ratio = 1.0
    if ratio > 1.0:
        raise CausalityViolation(cutoff_omega, 1.0 / tau)
    return Renormalization(bare_mass=mass * (1.0 - ratio), cutoff_ratio=ratio)


@dataclass(frozen=True)
class ParticleParams:
    """Physical identity of the electron model.

    cutoff_omega None is the point-electron request; it is kept explicit
    rather than mapped to infinity so causality analysis can name the
    pathology. bare_mass is derived (None for the point electron).
    """
    charge: float
    mass_renormalized: float
    cutoff_omega: float | None = None
    constants: Constants = field(default_factory=Constants)
    bare_mass: float | None = field(init=False, default=None)

    def __post_init__(self):
        tau = _radiation_time(self.charge, self.mass_renormalized, self.constants.c)
        if self.cutoff_omega is not None:
            result = _bare_mass(self.mass_renormalized, self.cutoff_omega, tau)
            object.__setattr__(self, "bare_mass", result.bare_mass)

    @property
    def tau_e(self) -> float:
        return tau_e(self)

    @property
    def is_point(self) -> bool:
        return self.cutoff_omega is None


def electron(consts: Constants | None = None, cutoff_omega: float | None = None) -> ParticleParams:
    consts = consts or Constants()
    return ParticleParams(
        charge=consts.e_charge,
        mass_renormalized=consts.m_electron,
        cutoff_omega=cutoff_omega,
        constants=consts,
    )


# ── phys-core operations ──────────────────────────────────────────────
def tau_e(params: ParticleParams, consts: Constants | None = None) -> float:
    """Characteristic radiation time (2/3) e^2 / (M c^3), in seconds."""
    consts = consts or params.constants
    return _radiation_time(params.charge, params.mass_renormalized, consts.c)


def renormalize(
    mass_observed: float,
    cutoff_omega: float,
    *,
    charge: float | None = None,
    consts: Constants | None = None,
) -> Renormalization:
    """Bare mass m = M (1 - tau_e Omega).

    Raises CausalityViolation when Omega > 1/tau_e (negative bare mass).
    The charge defaults to the elementary charge.
    """
    consts = consts or Constants()
    charge = consts.e_charge if charge is None else charge
    tau = _radiation_time(charge, mass_observed, consts.c)
    return _bare_mass(mass_observed, cutoff_omega, tau)


def cutoff_limit(params: ParticleParams, consts: Constants | None = None) -> float:
    """Largest causal cutoff frequency, 1/tau_e."""
    tau = tau_e(params, consts)
    if tau == 0:
        return math.inf
    return 1.0 / tau


def larmor_power(params: ParticleParams, accel):
    """(2e^2/3c^3) a^2, i.e. M tau_e a^2."""
    return params.mass_renormalized * tau_e(params) * np.square(accel)


def heat_bath_correlation_time(temperature: float, consts: Constants | None = None) -> float | None:
    """hbar / (2 pi k T); None at T = 0, where the classical bath is silent."""
    consts = consts or Constants()
    if temperature < 0:
        raise PhysicsDomainError(f"temperature must be non-negative, got {temperature!r} K")
    if temperature == 0:
        return None
    return consts.hbar / (2.0 * math.pi * consts.kB * temperature)


def effective_potential(spring_constant: float, x, v, tau: float):
    """V_eff = K x^2 / 2 + K tau_e x v for the oscillator potential."""
    return 0.5 * spring_constant * np.square(x) + spring_constant * tau * np.multiply(x, v)


# ── form factors ──────────────────────────────────────────────────────
@dataclass(frozen=True)
class FormFactor:
    """f_k^2 as a function of real frequency."""
    omega: float
    kind: str = "feynman"  # "feynman" | "sharp"

    def __post_init__(self):
        if self.kind not in ("feynman", "sharp"):
            raise PhysicsDomainError(f"unknown form factor {self.kind!r}")
        if not self.omega > 0:
            raise PhysicsDomainError(f"form factor cutoff must be positive, got {self.omega!r}")

    def __call__(self, w):
        w = np.asarray(w, dtype=float)
        lorentzian = self.omega**2 / (self.omega**2 + w**2)
        if self.kind == "sharp":
            return lorentzian**2
        return lorentzian


def feynman(omega: float) -> FormFactor:
    return FormFactor(omega, "feynman")


def sharp(omega: float) -> FormFactor:
    return FormFactor(omega, "sharp")


# ── unit scaling ──────────────────────────────────────────────────────
# (mass, length, time) exponents
DIMENSIONS = {
    "time": (0, 0, 1),
    "frequency": (0, 0, -1),
    "length": (0, 1, 0),
    "velocity": (0, 1, -1),
    "acceleration": (0, 1, -2),
    "jerk": (0, 1, -3),
    "mass": (1, 0, 0),
    "force": (1, 1, -2),
    "force_rate": (1, 1, -3),
    "force_rate2": (1, 1, -4),
    "energy": (1, 2, -2),
    "power": (1, 2, -3),
    "spring": (1, 0, -2),
    "damping": (1, 0, -1),
}


@dataclass(frozen=True)
class Units:
    """Internal units: time tau_e, mass M, length c tau_e."""
    time: float
    mass: float
    length: float
    charge: float

    @classmethod
    def for_particle(cls, params: ParticleParams) -> "Units":
        tau = tau_e(params)
        if not tau > 0:
            raise PhysicsDomainError("internal units need tau_e > 0 (non-zero charge)")
        return cls(
            time=tau,
            mass=params.mass_renormalized,
            length=params.constants.c * tau,
            charge=params.charge,
        )

    def scale(self, kind: str | tuple[int, int, int]) -> float:
        m, l, t = DIMENSIONS[kind] if isinstance(kind, str) else kind
        return self.mass**m * self.length**l * self.time**t

    def to_internal(self, value, kind):
        return value / self.scale(kind)

    def to_physical(self, value, kind):
        return value * self.scale(kind)

    # fields enter only through e*E/(M c) and e*B/(M c), both rates
    @property
    def field_scale(self) -> float:
        return self.mass * (self.length / self.time) / (self.charge * self.time)

    def field_to_internal(self, value):
        return np.asarray(value, dtype=float) / self.field_scale

    def field_to_physical(self, value):
        return np.asarray(value, dtype=float) * self.field_scale
