from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional

import numpy as np

from core.exceptions import PhysicsDomainError
from core.physics import ParticleParams

MAX_SERIES_ORDER = 30

NONREL_KINDS = ("newton", "ald", "ald_runaway_free", "fo", "fo_sharp", "fo_cutoff", "series", "oscillator")


@dataclass(frozen=True)
class StateNR:
    """One-dimensional state; a is carried only by third-order models."""
    t: float
    x: float
    v: float
    a: Optional[float] = None


@dataclass(frozen=True)
class ModelNR:
    """Nonrelativistic equation of motion selector."""
    kind: str
    particle: ParticleParams
    order: Optional[int] = None            # series truncation N
    spring_constant: Optional[float] = None  # oscillator K, dyn/cm

    def __post_init__(self):
        if self.kind not in NONREL_KINDS:
            raise PhysicsDomainError(f"unknown model {self.kind!r}; expected one of {', '.join(NONREL_KINDS)}")
        if self.kind == "series":
            if self.order is None or not 3 <= self.order <= MAX_SERIES_ORDER:
                raise PhysicsDomainError(
                    f"series truncation order must be in [3, {MAX_SERIES_ORDER}], got {self.order!r}"
                )
        if self.kind == "oscillator":
            if self.spring_constant is None or not self.spring_constant > 0:
                raise PhysicsDomainError(f"spring constant must be positive, got {self.spring_constant!r}")
        if self.kind == "fo_cutoff" and self.particle.cutoff_omega is None:
            raise PhysicsDomainError("fo_cutoff needs a particle with a cutoff frequency")

    @property
    def carries_acceleration(self) -> bool:
        # at Omega = 1/tau_e the cutoff model collapses to FO
        if self.kind == "fo_cutoff":
            return self.particle.bare_mass != 0
        return self.kind in ("ald", "series")

    @property
    def label(self) -> str:
        if self.kind == "series":
            return f"series({self.order})"
        if self.kind == "oscillator":
            return f"oscillator(K={self.spring_constant:.6g})"
        if self.kind == "fo_cutoff":
            return f"fo_cutoff(Omega={self.particle.cutoff_omega:.6g})"
        return self.kind


@dataclass
class Trajectory:
    """Columnar time series of a nonrelativistic run, physical units."""
    model: str
    t: np.ndarray
    x: np.ndarray
    v: np.ndarray
    a: np.ndarray
    f: np.ndarray
    p_fo: np.ndarray
    p_larmor: np.ndarray
    diagnostics: Dict[str, float] = field(default_factory=dict)

    COLUMNS = ("t", "x", "v", "a", "f", "p_fo", "p_larmor")
    UNITS = ("s", "cm", "cm/s", "cm/s^2", "dyn", "erg/s", "erg/s")

    def columns(self) -> np.ndarray:
        return np.column_stack([getattr(self, name) for name in self.COLUMNS])

    def final_state(self) -> StateNR:
        return StateNR(t=float(self.t[-1]), x=float(self.x[-1]), v=float(self.v[-1]), a=float(self.a[-1]))


@dataclass
class StochasticTrajectory:
    """Members along axis 0, time along axis 1."""
    t: np.ndarray
    x: np.ndarray
    v: np.ndarray
    seeds: List[int] = field(default_factory=list)

    @property
    def n_members(self) -> int:
        return self.x.shape[0]


@dataclass
class EnsembleSummary:
    t: np.ndarray
    mean_x: np.ndarray
    mean_v: np.ndarray
    stderr_x: np.ndarray
    stderr_v: np.ndarray
    n: int
    max_deviation: Optional[float] = None   # vs deterministic FO, cm
    rms_deviation: Optional[float] = None
    members: Optional[StochasticTrajectory] = None

    COLUMNS = ("t", "mean_x", "mean_v", "stderr_x", "stderr_v", "n")
    UNITS = ("s", "cm", "cm/s", "cm", "cm/s", "1")

    def columns(self) -> np.ndarray:
        return np.column_stack(
            [self.t, self.mean_x, self.mean_v, self.stderr_x, self.stderr_v, np.full_like(self.t, self.n)]
        )


@dataclass(frozen=True)
class FourState:
    tau: float
    x: np.ndarray  # (ct, x, y, z), cm
    u: np.ndarray  # four-velocity, cm/s


@dataclass
class Worldline:
    model: str
    tau: np.ndarray
    t: np.ndarray
    position: np.ndarray   # (n, 3), cm
    u: np.ndarray          # (n, 3) spatial four-velocity, cm/s
    gamma: np.ndarray
    norm_drift: np.ndarray
    diagnostics: Dict[str, float] = field(default_factory=dict)

    COLUMNS = ("tau", "t", "x", "y", "z", "ux", "uy", "uz", "gamma", "norm_drift")
    UNITS = ("s", "s", "cm", "cm", "cm", "cm/s", "cm/s", "cm/s", "1", "1")

    def columns(self) -> np.ndarray:
        return np.column_stack(
            [self.tau, self.t, self.position, self.u, self.gamma, self.norm_drift]
        )


class Verdict(str, Enum):
    CAUSAL = "Causal"
    NON_CAUSAL = "NonCausal"
    MARGINAL = "Marginal"


@dataclass
class PoleReport:
    model: str
    poles: List[tuple]            # (complex omega*tau_e, multiplicity)
    verdict: Verdict
    offending_poles: List[complex] = field(default_factory=list)
    convention: str = "exp(-i omega t)"


@dataclass
class ComparisonReport:
    run_a: str
    run_b: str
    metric: str
    values: Dict[str, float] = field(default_factory=dict)
    tolerance: Optional[float] = None
    passed: Optional[bool] = None
    normalization: str = ""
    exponent: Optional[float] = None
    rows: List[dict] = field(default_factory=list)


@dataclass(frozen=True)
class NoiseSpec:
    """Classical fluctuating force; tau_c None means hbar/(2 pi k T)."""
    kind: str               # "white_fdt" | "exp_correlated"
    temperature: float      # K
    damping: float          # zeta, g/s
    seed: int = 0
    tau_c: Optional[float] = None  # s

    def __post_init__(self):
        if self.kind not in ("white_fdt", "exp_correlated"):
            raise PhysicsDomainError(f"unknown noise kind {self.kind!r}")
        if self.temperature < 0:
            raise PhysicsDomainError(f"temperature must be non-negative, got {self.temperature!r} K")
        if self.damping < 0:
            raise PhysicsDomainError(f"damping must be non-negative, got {self.damping!r} g/s")
        if self.tau_c is not None and not self.tau_c > 0:
            raise PhysicsDomainError(f"correlation time must be positive, got {self.tau_c!r} s")


@dataclass(frozen=True)
class EnsembleConfig:
    n_members: int
    base_seed: int = 0

    def __post_init__(self):
        if self.n_members < 1:
            raise PhysicsDomainError(f"ensemble needs at least one member, got {self.n_members}")
