"""Exception hierarchy and the CLI exit-code contract.

Exit 2 means the physics said no (runaway, causality violation); exit 1
means the software failed (bad scenario, integrator trouble).
"""

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_VERDICT = 2


class RadReactError(Exception):
    """Base class for every error raised by radreact."""


# ── physics verdicts (exit 2) ──────────────────────────────────────────
class PhysicsVerdict(RadReactError):
    """The model did what the physics says it does, and that is a failure."""


class RunawayDetected(PhysicsVerdict):
    def __init__(self, efolding_time: float, t_detect: float, amplification: float, trajectory=None):
        self.efolding_time = efolding_time
        self.t_detect = t_detect
        self.amplification = amplification
        self.trajectory = trajectory  # partial run up to detection
        super().__init__(
            f"runaway detected at t={t_detect:.6g} s: |a| amplified by "
            f"{amplification:.3g}, e-folding time {efolding_time:.6g} s"
        )


class CausalityViolation(PhysicsVerdict):
    def __init__(self, cutoff_omega: float, bound: float):
        self.cutoff_omega = cutoff_omega
        self.bound = bound
        super().__init__(
            f"negative bare mass - causality violated: cutoff {cutoff_omega:.6g} 1/s "
            f"exceeds 1/tau_e = {bound:.6g} 1/s"
        )


class NonCausalModel(PhysicsVerdict):
    def __init__(self, models: list[str]):
        self.models = models
        super().__init__(f"upper half-plane poles found for: {', '.join(models)}")


# ── software errors (exit 1) ───────────────────────────────────────────
class ScenarioError(RadReactError):
    """Malformed or internally inconsistent scenario file."""


class PhysicsDomainError(RadReactError, ValueError):
    """An input outside the domain of an operation (non-positive mass, |v| >= c, ...)."""


class ForceDomainError(RadReactError, ValueError):
    """Force evaluated outside the domain of a tabulated force."""


class IntegrationError(RadReactError):
    """The integrator could not complete the requested span."""


class StepSizeUnderflow(IntegrationError):
    def __init__(self, t: float, message: str = ""):
        self.t = t
        super().__init__(f"step size underflow at t={t:.6g}: {message}".rstrip(": "))


class NormalizationDrift(IntegrationError):
    def __init__(self, tau: float, drift: float, limit: float):
        self.tau = tau
        self.drift = drift
        self.limit = limit
        super().__init__(
            f"four-velocity normalization drift {drift:.3g} exceeds {limit:.1g} "
            f"at proper time {tau:.6g} s"
        )


class IncompatibleRunsError(RadReactError):
    """Two runs cannot be compared with the requested metric."""


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, PhysicsVerdict):
        return EXIT_VERDICT
    return EXIT_ERROR
