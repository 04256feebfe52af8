"""External force models f(t) with their first and second time derivatives.

All values in dyn, dyn/s and dyn/s^2. A Step force reports zero
derivatives away from its onset and lists the onset as a breakpoint;
integrators stop and restart there.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from core.exceptions import ForceDomainError, PhysicsDomainError


@dataclass(frozen=True)
class ForceModel:
    """Base of the force family; the zero force."""

    @property
    def kind(self) -> str:
        return "zero"

    @property
    def breakpoints(self) -> tuple[float, ...]:
        return ()

    def value(self, t: float) -> tuple[float, float, float]:
        return 0.0, 0.0, 0.0


@dataclass(frozen=True)
class Zero(ForceModel):
    pass


@dataclass(frozen=True)
class Constant(ForceModel):
    amplitude: float

    @property
    def kind(self) -> str:
        return "constant"

    def value(self, t):
        return self.amplitude, 0.0, 0.0


@dataclass(frozen=True)
class Step(ForceModel):
    amplitude: float
    t_on: float = 0.0

    @property
    def kind(self) -> str:
        return "step"

    @property
    def breakpoints(self):
        return (self.t_on,)

    def value(self, t):
        return (self.amplitude if t >= self.t_on else 0.0), 0.0, 0.0


@dataclass(frozen=True)
class SinDrive(ForceModel):
    amplitude: float
    omega: float
    phase: float = 0.0

    @property
    def kind(self) -> str:
        return "sin"

    def value(self, t):
        arg = self.omega * t + self.phase
        s, c = math.sin(arg), math.cos(arg)
        return (
            self.amplitude * s,
            self.amplitude * self.omega * c,
            -self.amplitude * self.omega**2 * s,
        )


@dataclass(frozen=True)
class GaussianPulse(ForceModel):
    amplitude: float
    t0: float
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise PhysicsDomainError(f"pulse width must be positive, got {self.sigma!r} s")

    @property
    def kind(self) -> str:
        return "gaussian"

    def value(self, t):
        u = (t - self.t0) / self.sigma
        g = self.amplitude * math.exp(-0.5 * u * u)
        return g, -g * u / self.sigma, g * (u * u - 1.0) / self.sigma**2


@dataclass(frozen=True)
class Tabulated(ForceModel):
    """Uniformly sampled force; derivatives by centered differences."""
    t_start: float
    spacing: float
    samples: tuple[float, ...]
    _rates: np.ndarray = field(init=False, repr=False, compare=False)
    _curvatures: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(self.samples) < 3:
            raise PhysicsDomainError(f"tabulated force needs at least 3 samples, got {len(self.samples)}")
        if not self.spacing > 0:
            raise PhysicsDomainError(f"sample spacing must be positive, got {self.spacing!r} s")
        values = np.asarray(self.samples, dtype=float)
        rates = np.gradient(values, self.spacing, edge_order=2)
        object.__setattr__(self, "_rates", rates)
        object.__setattr__(self, "_curvatures", np.gradient(rates, self.spacing, edge_order=2))

    @property
    def kind(self) -> str:
        return "tabulated"

    @property
    def t_end(self) -> float:
        return self.t_start + self.spacing * (len(self.samples) - 1)

    def value(self, t):
        # rounding slack for times that went through the unit scaling
        slack = 1e-9 * self.spacing
        if t < self.t_start - slack or t > self.t_end + slack:
            raise ForceDomainError(
                f"t={t:.6g} s outside tabulated force domain [{self.t_start:.6g}, {self.t_end:.6g}] s"
            )
        grid = self.t_start + self.spacing * np.arange(len(self.samples))
        return (
            float(np.interp(t, grid, self.samples)),
            float(np.interp(t, grid, self._rates)),
            float(np.interp(t, grid, self._curvatures)),
        )


def evaluate_force(model: ForceModel, t: float) -> tuple[float, float, float]:
    """(f, df/dt, d2f/dt2) at time t."""
    return model.value(t)


def tabulate(model: ForceModel, t_start: float, t_end: float, n_samples: int) -> Tabulated:
    """Sample any analytic model onto a uniform table."""
    grid = np.linspace(t_start, t_end, n_samples)
    return Tabulated(
        t_start=t_start,
        spacing=float(grid[1] - grid[0]),
        samples=tuple(model.value(float(t))[0] for t in grid),
    )
