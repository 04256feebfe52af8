"""Susceptibility construction and pole analysis.

Every transfer function is a ratio of polynomials in z = omega * tau_e with
the mass set to 1; time dependence is exp(-i omega t), so d/dt -> -i omega
and a causal response has all of its poles in the lower half-plane.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from loguru import logger
from numpy.polynomial import Polynomial

from core.exceptions import PhysicsDomainError
from core.models import MAX_SERIES_ORDER, ModelNR, PoleReport, Verdict
from core.physics import ParticleParams, Units

CONVENTION = "exp(-i omega t)"
MAX_DEGREE = 32
ROOT_MATCH_TOL = 1e-9   # omega*tau_e; relative to |root| below 1
REAL_AXIS_TOL = 1e-9    # relative to |pole|, upper cap
ROOT_NOISE = 1e3 * np.finfo(float).eps  # coefficient rounding seen by a computed root
NEWTON_POLISH = 2


@dataclass(frozen=True)
class ComplexPoly:
    """Ascending coefficients in z = omega * tau_e; exact trailing zeros trimmed."""
    coefficients: tuple

    def __post_init__(self):
        coeffs = [complex(c) for c in self.coefficients]
        while coeffs and coeffs[-1] == 0:
            coeffs.pop()
        if len(coeffs) - 1 > MAX_DEGREE:
            raise PhysicsDomainError(f"polynomial degree {len(coeffs) - 1} exceeds {MAX_DEGREE}")
        object.__setattr__(self, "coefficients", tuple(coeffs))

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    @property
    def poly(self) -> Polynomial:
        return Polynomial(np.array(self.coefficients or (0j,), dtype=complex))

    def __call__(self, z):
        return self.poly(np.asarray(z, dtype=complex))

    def roots(self) -> np.ndarray:
        if self.degree < 1:
            return np.empty(0, dtype=complex)
        # roots at the origin are exact; keep them out of the eigenvalue solve
        n_zero = next(i for i, c in enumerate(self.coefficients) if c != 0)
        rest = self.coefficients[n_zero:]
        found = Polynomial(np.array(rest, dtype=complex)).roots() if len(rest) > 1 else []
        return np.concatenate([np.zeros(n_zero, dtype=complex), np.asarray(found, dtype=complex)])

    @classmethod
    def from_roots(cls, roots, leading: complex = 1.0) -> "ComplexPoly":
        poly = Polynomial.fromroots(roots) if len(roots) else Polynomial([1.0])
        return cls(tuple(leading * np.asarray(poly.coef, dtype=complex)))


@dataclass(frozen=True)
class RationalTransfer:
    """alpha(omega) = numerator / denominator in internal units.

    tau and mass carry the scale back: alpha in cm/dyn is
    response(omega) = (tau^2 / M) * numerator(omega tau) / denominator(omega tau).
    """
    model: str
    numerator: ComplexPoly
    denominator: ComplexPoly
    tau: float
    mass: float
    convention: str = CONVENTION

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        return self.numerator(z) / self.denominator(z)

    def response(self, omega):
        """alpha at physical angular frequency omega (1/s), in cm/dyn."""
        return self(np.asarray(omega) * self.tau) * self.tau**2 / self.mass


@dataclass
class PositiveRealReport:
    positive: bool
    re_mu: float        # smallest Re mu~(omega) on the sample grid, g/s
    verdict: Verdict


# ── susceptibilities ─────────────────────────────────────────────────
def _series_denominator(order: int) -> list[complex]:
    # -z^2 sum_{k=0}^{N-2} (i z)^k
    return [0, 0] + [-(1j**k) for k in range(order - 1)]


def _oscillator_polys(k: float) -> tuple[list, list]:
    # K - M omega^2 - i omega K tau_e
    return [1], [k, -1j * k, -1]


def _cutoff_polys(particle: ParticleParams) -> tuple[list, list]:
    w = particle.cutoff_omega * particle.tau_e
    slack = particle.bare_mass / particle.mass_renormalized  # 1 - tau_e*Omega, exactly 0 at the bound
    # (Omega - i omega) / (-M omega^2 (Omega - i omega (1 - tau_e Omega)))
    return [w, -1j], [0, 0, -w, 1j * slack]


def _same_root(a: complex, b: complex) -> bool:
    return abs(a - b) <= ROOT_MATCH_TOL * min(1.0, max(abs(a), abs(b)))


def _cancel_common_roots(num: ComplexPoly, den: ComplexPoly) -> tuple[ComplexPoly, ComplexPoly]:
    zeros, poles = list(num.roots()), list(den.roots())
    kept_zeros = []
    cancelled = 0
    for z in zeros:
        idx = [i for i, p in enumerate(poles) if _same_root(z, p)]
        if idx:
            poles.pop(idx[0])
            cancelled += 1
        else:
            kept_zeros.append(z)
    if not cancelled:
        return num, den
    logger.debug(f"[Causality] Cancelled {cancelled} common root(s)")
    return (
        ComplexPoly.from_roots(kept_zeros, num.coefficients[-1]),
        ComplexPoly.from_roots(poles, den.coefficients[-1]),
    )


def susceptibility_of(model: ModelNR) -> RationalTransfer:
    """Generalized susceptibility alpha(omega) of a nonrelativistic model.

    The runaway-free ALD branch shares the ALD transfer function; the
    boundary condition that removes the runaway is exactly what makes it
    respond before the force arrives.
    """
    particle = model.particle
    kind = model.kind
    if kind == "newton":
        num, den = [1], [0, 0, -1]
    elif kind in ("ald", "ald_runaway_free"):
        num, den = [1], [0, 0, -1, -1j]
    elif kind == "fo":
        num, den = [1, -1j], [0, 0, -1]
    elif kind == "fo_sharp":
        num, den = [1, -1j, -0.25], [0, 0, -1]
    elif kind == "fo_cutoff":
        num, den = _cutoff_polys(particle)
    elif kind == "series":
        num, den = [1], _series_denominator(model.order)
    elif kind == "oscillator":
        units = Units.for_particle(particle)
        num, den = _oscillator_polys(units.to_internal(model.spring_constant, "spring"))
    else:
        raise PhysicsDomainError(f"no susceptibility for model {kind!r}")

    numerator, denominator = _cancel_common_roots(ComplexPoly(tuple(num)), ComplexPoly(tuple(den)))
    return RationalTransfer(
        model=model.label,
        numerator=numerator,
        denominator=denominator,
        tau=particle.tau_e,
        mass=particle.mass_renormalized,
    )


# ── poles ─────────────────────────────────────────────────────────────
def _polish(poly: Polynomial, roots: np.ndarray) -> np.ndarray:
    deriv = poly.deriv()
    polished = roots.copy()
    for _ in range(NEWTON_POLISH):
        for i, r in enumerate(polished):
            value, slope = poly(r), deriv(r)
            if value == 0 or slope == 0:
                continue
            candidate = r - value / slope
            if abs(poly(candidate)) < abs(value):
                polished[i] = candidate
    return polished


def _cluster(roots: np.ndarray) -> list[tuple[complex, int]]:
    clusters: list[list[complex]] = []
    for r in sorted(roots, key=lambda p: (p.real, p.imag)):
        for group in clusters:
            if _same_root(group[0], r):
                group.append(r)
                break
        else:
            clusters.append([r])
    return [(complex(np.mean(group)), len(group)) for group in clusters]


def _on_real_axis(poly: Polynomial, p: complex) -> bool:
    """|Im p| within the rounding uncertainty of the computed root.

    The uncertainty is the coefficient backward error over |P'(p)|, so a
    slightly damped low-frequency pole (Im p ~ -|p|^2) is still resolved.
    """
    slope = abs(poly.deriv()(p))
    size = float(np.polynomial.polynomial.polyval(abs(p), np.abs(poly.coef)))
    noise = ROOT_NOISE * size / slope if slope > 0 else np.inf
    return abs(p.imag) <= min(noise, REAL_AXIS_TOL * abs(p))


def find_poles(rt: RationalTransfer) -> PoleReport:
    """Roots of the denominator (companion matrix, Newton-polished) and the verdict."""
    den = rt.denominator
    if den.degree < 0:
        raise PhysicsDomainError(f"degenerate (zero) denominator for {rt.model}")
    roots = _polish(den.poly, den.roots())
    poles = _cluster(roots)

    on_axis = [_on_real_axis(den.poly, p) for p, _ in poles]
    offending = [p for (p, _), flat in zip(poles, on_axis) if p.imag > 0 and not flat]
    marginal = any(on_axis)
    if offending:
        verdict = Verdict.NON_CAUSAL
    elif marginal:
        verdict = Verdict.MARGINAL
    else:
        verdict = Verdict.CAUSAL

    if verdict is Verdict.NON_CAUSAL:
        listed = ", ".join(f"{p.real:+.6g}{p.imag:+.6g}i" for p in offending[:4])
        logger.warning(f"[Causality] ⚠️ {rt.model}: {len(offending)} upper half-plane pole(s) ({listed}) / tau_e")
    else:
        logger.debug(f"[Causality] {rt.model}: {verdict.value}")
    return PoleReport(
        model=rt.model,
        poles=poles,
        verdict=verdict,
        offending_poles=offending,
        convention=rt.convention,
    )


def pole_residual(rt: RationalTransfer, pole: complex) -> float:
    """|denominator(pole)| relative to the largest coefficient."""
    scale = max(abs(c) for c in rt.denominator.coefficients)
    return abs(rt.denominator(pole)) / scale


def series_poles(order: int) -> np.ndarray:
    """Closed-form non-origin poles of the order-N series, omega tau_e = -i exp(2 pi i k/(N-1))."""
    if not 3 <= order <= MAX_SERIES_ORDER:
        raise PhysicsDomainError(f"series truncation order must be in [3, {MAX_SERIES_ORDER}], got {order}")
    k = np.arange(1, order - 1)
    return -1j * np.exp(2j * np.pi * k / (order - 1))


def verify_positive_real_part(
    particle: ParticleParams,
    spring_constant: float,
    omegas: Optional[np.ndarray] = None,
) -> PositiveRealReport:
    """Re mu~(omega) of the Ohmic oscillator, read back from its susceptibility.

    1/alpha = K - M omega^2 - i omega mu~(omega), so mu~ = (K - M omega^2 - 1/alpha) / (i omega).
    K = 0 leaves no damping at all and is reported Marginal.
    """
    if spring_constant < 0:
        raise PhysicsDomainError(f"spring constant must be non-negative, got {spring_constant!r}")
    units = Units.for_particle(particle)
    k = units.to_internal(spring_constant, "spring")
    num, den = _oscillator_polys(k)
    rt = RationalTransfer(
        model=f"oscillator(K={spring_constant:.6g})",
        numerator=ComplexPoly(tuple(num)),
        denominator=ComplexPoly(tuple(den)),
        tau=particle.tau_e,
        mass=particle.mass_renormalized,
    )
    z = np.asarray(omegas, dtype=float) * units.time if omegas is not None else np.logspace(-6, 3, 91)
    z = z[z != 0]
    # combine as polynomials first; evaluating 1/alpha directly cancels catastrophically for small K
    excess = Polynomial([k, 0, -1]) * rt.numerator.poly - rt.denominator.poly
    mu = excess(z) / (1j * z * rt.numerator(z))
    re_mu = units.to_physical(float(np.min(mu.real)), "damping")
    if spring_constant == 0 or re_mu == 0:
        verdict = Verdict.MARGINAL
    elif re_mu > 0:
        verdict = Verdict.CAUSAL
    else:
        verdict = Verdict.NON_CAUSAL
    return PositiveRealReport(positive=verdict is Verdict.CAUSAL, re_mu=re_mu, verdict=verdict)


def pole_survey(
    particle: ParticleParams,
    max_order: int = MAX_SERIES_ORDER,
    spring_constant: Optional[float] = None,
) -> list[PoleReport]:
    """PoleReports for every model the particle supports, series orders 3..max_order."""
    models = [ModelNR(kind, particle) for kind in ("newton", "ald", "fo", "fo_sharp")]
    if particle.cutoff_omega is not None:
        models.append(ModelNR("fo_cutoff", particle))
    models += [ModelNR("series", particle, order=n) for n in range(3, max_order + 1)]
    if spring_constant is not None:
        models.append(ModelNR("oscillator", particle, spring_constant=spring_constant))

    reports = [find_poles(susceptibility_of(m)) for m in models]
    flagged = [r.model for r in reports if r.verdict is Verdict.NON_CAUSAL]
    logger.info(f"[Causality] ✓ Surveyed {len(reports)} models, {len(flagged)} non-causal")
    return reports
