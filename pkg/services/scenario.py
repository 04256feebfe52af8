"""Scenario files: one JSON document per run, validated with pydantic.

Every physical quantity carries its unit in the key name (`omega_per_s`,
`amplitude_dyn`, `t_span_s`). Checks that the physics modules would make
at run time (cutoff bound, Ohmic coupling, model/force pairing) are made
here, before anything is integrated.
"""

import json
import math
from pathlib import Path
from typing import Annotated, Literal, Optional, Union

from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from core.config import DEFAULT_TOL
from core.exceptions import PhysicsDomainError, ScenarioError
from core.forces import Constant, ForceModel, GaussianPulse, SinDrive, Step, Tabulated, Zero
from core.models import MAX_SERIES_ORDER, EnsembleConfig, ModelNR, NoiseSpec, StateNR
from core.physics import (
    BOLTZMANN,
    ELECTRON_MASS,
    ELEMENTARY_CHARGE,
    HBAR,
    SPEED_OF_LIGHT,
    Constants,
    ParticleParams,
    electron,
)
from dynamics.relativistic import FieldTensor, four_state
from services.storage import sha256_of

SCENARIO_VERSION = 1

DETERMINISTIC_KINDS = ("newton", "ald", "ald_runaway_free", "fo", "fo_sharp", "fo_cutoff", "series", "oscillator")
REL_KINDS = ("rel_fo_covariant", "rel_fo_3vector", "ll_type")
NOISE_KINDS = ("fo", "oscillator", "free_fluctuating")


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


# ── model selector ───────────────────────────────────────────────────
class SimpleModel(_Strict):
    kind: Literal["newton", "ald", "ald_runaway_free", "fo", "fo_sharp", "fo_cutoff", "free_fluctuating"]


class SeriesModel(_Strict):
    kind: Literal["series"]
    order: int = Field(ge=3, le=MAX_SERIES_ORDER)


class OscillatorModel(_Strict):
    kind: Literal["oscillator"]
    spring_constant_dyn_per_cm: float = Field(gt=0)


class SurveyModel(_Strict):
    kind: Literal["causality_survey"]
    max_order: int = Field(default=MAX_SERIES_ORDER, ge=3, le=MAX_SERIES_ORDER)
    spring_constant_dyn_per_cm: Optional[float] = Field(default=None, gt=0)


class RelModel(_Strict):
    kind: Literal["rel_fo_covariant", "rel_fo_3vector", "ll_type"]
    closure: Literal["zeroth_order", "self_consistent"] = "zeroth_order"
    radiation: bool = True


ModelBlock = Annotated[
    Union[SimpleModel, SeriesModel, OscillatorModel, SurveyModel, RelModel],
    Field(discriminator="kind"),
]


# ── particle / constants ─────────────────────────────────────────────
class ConstantsBlock(_Strict):
    c_cm_per_s: float = Field(default=SPEED_OF_LIGHT, gt=0)
    hbar_erg_s: float = Field(default=HBAR, gt=0)
    kB_erg_per_K: float = Field(default=BOLTZMANN, gt=0)
    e_statC: float = Field(default=ELEMENTARY_CHARGE, gt=0)
    m_electron_g: float = Field(default=ELECTRON_MASS, gt=0)

    def build(self) -> Constants:
        return Constants(
            c=self.c_cm_per_s,
            hbar=self.hbar_erg_s,
            kB=self.kB_erg_per_K,
            e_charge=self.e_statC,
            m_electron=self.m_electron_g,
        )


class ParticleBlock(_Strict):
    """Electron by default; cutoff either in 1/s or as tau_e * Omega."""
    species: Literal["electron", "custom"] = "electron"
    charge_statC: Optional[float] = None
    mass_g: Optional[float] = None
    cutoff_omega_per_s: Optional[float] = None
    cutoff_ratio: Optional[float] = Field(default=None, gt=0)

    @model_validator(mode="after")
    def _one_cutoff(self):
        if self.cutoff_omega_per_s is not None and self.cutoff_ratio is not None:
            raise ValueError("give cutoff_omega_per_s or cutoff_ratio, not both")
        if self.species == "custom" and (self.charge_statC is None or self.mass_g is None):
            raise ValueError("a custom particle needs charge_statC and mass_g")
        return self

    def build(self, consts: Constants) -> ParticleParams:
        base = electron(consts)
        charge = self.charge_statC if self.charge_statC is not None else base.charge
        mass = self.mass_g if self.mass_g is not None else base.mass_renormalized
        point = ParticleParams(charge=charge, mass_renormalized=mass, constants=consts)
        cutoff = self.cutoff_omega_per_s
        if self.cutoff_ratio is not None:
            cutoff = self.cutoff_ratio / point.tau_e
        if cutoff is None:
            return point
        return ParticleParams(charge=charge, mass_renormalized=mass, cutoff_omega=cutoff, constants=consts)


# ── forces and fields ────────────────────────────────────────────────
class ZeroForce(_Strict):
    kind: Literal["zero"]

    def build(self) -> ForceModel:
        return Zero()


class ConstantForce(_Strict):
    kind: Literal["constant"]
    amplitude_dyn: float

    def build(self) -> ForceModel:
        return Constant(self.amplitude_dyn)


class StepForce(_Strict):
    kind: Literal["step"]
    amplitude_dyn: float
    t_on_s: float = 0.0

    def build(self) -> ForceModel:
        return Step(self.amplitude_dyn, self.t_on_s)


class SinForce(_Strict):
    kind: Literal["sin"]
    amplitude_dyn: float
    omega_per_s: Optional[float] = Field(default=None, gt=0)  # taken from the sweep when absent
    phase_rad: float = 0.0

    def build(self, omega: Optional[float] = None) -> ForceModel:
        omega = omega if omega is not None else self.omega_per_s
        if omega is None:
            raise ScenarioError("sin force needs omega_per_s or a sweep")
        return SinDrive(self.amplitude_dyn, omega, self.phase_rad)


class GaussianForce(_Strict):
    kind: Literal["gaussian"]
    amplitude_dyn: float
    t0_s: float
    sigma_s: float = Field(gt=0)

    def build(self) -> ForceModel:
        return GaussianPulse(self.amplitude_dyn, self.t0_s, self.sigma_s)


class TabulatedForce(_Strict):
    kind: Literal["tabulated"]
    t_start_s: float
    spacing_s: float = Field(gt=0)
    samples_dyn: list[float] = Field(min_length=3)

    def build(self) -> ForceModel:
        return Tabulated(self.t_start_s, self.spacing_s, tuple(self.samples_dyn))


ForceBlock = Annotated[
    Union[ZeroForce, ConstantForce, StepForce, SinForce, GaussianForce, TabulatedForce],
    Field(discriminator="kind"),
]

Vector3 = tuple[float, float, float]


class FieldsBlock(_Strict):
    E_statV_per_cm: Vector3 = (0.0, 0.0, 0.0)
    B_gauss: Vector3 = (0.0, 0.0, 0.0)
    dE_dt_statV_per_cm_s: Vector3 = (0.0, 0.0, 0.0)
    dB_dt_gauss_per_s: Vector3 = (0.0, 0.0, 0.0)

    def build(self) -> FieldTensor:
        return FieldTensor(
            E=self.E_statV_per_cm, B=self.B_gauss, dE_dt=self.dE_dt_statV_per_cm_s, dB_dt=self.dB_dt_gauss_per_s
        )


# ── initial state / noise / ensemble / integrator ────────────────────
class InitialBlock(_Strict):
    x_cm: float = 0.0
    v_cm_per_s: float = 0.0
    a_cm_per_s2: Optional[float] = None
    position_cm: Vector3 = (0.0, 0.0, 0.0)
    velocity_cm_per_s: Vector3 = (0.0, 0.0, 0.0)


class NoiseBlock(_Strict):
    kind: Literal["white_fdt", "exp_correlated"]
    temperature_K: float = Field(ge=0)
    damping_g_per_s: Optional[float] = Field(default=None, ge=0)  # oscillator default: K tau_e
    seed: int = Field(default=0, ge=0)
    tau_c_s: Optional[float] = Field(default=None, gt=0)


class EnsembleBlock(_Strict):
    n_members: int = Field(ge=1)
    base_seed: int = Field(default=0, ge=0)
    keep_members: bool = False


class IntegratorBlock(_Strict):
    tol: float = Field(default=DEFAULT_TOL, gt=0, lt=1)
    t_span_s: Optional[tuple[float, float]] = None
    tau_span_s: Optional[tuple[float, float]] = None
    periods: Optional[float] = Field(default=None, gt=0)   # span in drive periods, for sweeps
    dt_s: Optional[float] = Field(default=None, gt=0)
    n_samples: Optional[int] = Field(default=None, ge=2)
    fixed_step_s: Optional[float] = Field(default=None, gt=0)
    record_every: int = Field(default=1, ge=1)
    thermal_start: bool = False

    @model_validator(mode="after")
    def _spans_increase(self):
        for name in ("t_span_s", "tau_span_s"):
            span = getattr(self, name)
            if span is not None and not (math.isfinite(span[0]) and math.isfinite(span[1]) and span[1] > span[0]):
                raise ValueError(f"{name} must be finite and increasing, got {span}")
        return self


class SweepBlock(_Strict):
    omega_tau: list[float] = Field(min_length=1)

    @model_validator(mode="after")
    def _positive(self):
        if any(not w > 0 for w in self.omega_tau):
            raise ValueError(f"sweep omega_tau values must be positive, got {self.omega_tau}")
        return self


class CompareTarget(_Strict):
    run: str = Field(min_length=1)  # run directory name under the same output root
    metric: Literal["max_position_deviation", "power_ratio_series", "pole_tables"]


class OutputsBlock(_Strict):
    keep_partial: bool = True   # write the trajectory up to a detected runaway
    compare_with: list[CompareTarget] = Field(default_factory=list)


# ── scenario ─────────────────────────────────────────────────────────
class Scenario(_Strict):
    version: Literal[1] = SCENARIO_VERSION
    name: str = Field(min_length=1, pattern=r"^[A-Za-z0-9_.-]+$")
    description: str = ""
    model: ModelBlock
    particle: ParticleBlock = Field(default_factory=ParticleBlock)
    constants: Optional[ConstantsBlock] = None
    force: Optional[ForceBlock] = None
    fields: Optional[FieldsBlock] = None
    initial: InitialBlock = Field(default_factory=InitialBlock)
    noise: Optional[NoiseBlock] = None
    ensemble: Optional[EnsembleBlock] = None
    integrator: IntegratorBlock = Field(default_factory=IntegratorBlock)
    sweep: Optional[SweepBlock] = None
    outputs: OutputsBlock = Field(default_factory=OutputsBlock)

    @property
    def kind(self) -> str:
        return self.model.kind

    @property
    def is_stochastic(self) -> bool:
        return self.noise is not None

    @model_validator(mode="after")
    def _consistent(self):
        kind = self.kind
        if kind == "causality_survey":
            if self.force is not None or self.fields is not None:
                raise ValueError("causality_survey takes neither force nor fields")
        elif kind in REL_KINDS:
            if self.fields is None or self.force is not None:
                raise ValueError(f"{kind} needs a fields block and no force block")
        else:
            if self.force is None or self.fields is not None:
                raise ValueError(f"{kind} needs a force block and no fields block")

        if self.noise is not None and kind not in NOISE_KINDS:
            raise ValueError(f"noise is only allowed for {', '.join(NOISE_KINDS)}, not {kind}")
        if kind == "free_fluctuating" and self.noise is None:
            raise ValueError("free_fluctuating needs a noise block")
        if self.ensemble is not None and self.noise is None:
            raise ValueError("an ensemble needs a noise block")
        if self.noise is not None and self.integrator.dt_s is None:
            raise ValueError("stochastic runs need integrator.dt_s")

        if self.sweep is not None:
            if kind not in DETERMINISTIC_KINDS or self.noise is not None:
                raise ValueError(f"sweeps are for deterministic one-dimensional models, not {kind}")
            if not isinstance(self.force, SinForce):
                raise ValueError("a sweep sets the drive frequency and needs a sin force")
        if isinstance(self.force, SinForce) and self.force.omega_per_s is None and self.sweep is None:
            raise ValueError("sin force needs omega_per_s or a sweep")

        if kind == "rel_fo_covariant" or kind == "ll_type":
            if self.integrator.tau_span_s is None:
                raise ValueError(f"{kind} integrates in proper time and needs integrator.tau_span_s")
        elif kind != "causality_survey":
            if self.integrator.t_span_s is None and self.integrator.periods is None:
                raise ValueError(f"{kind} needs integrator.t_span_s or integrator.periods")
            if self.integrator.periods is not None and not isinstance(self.force, SinForce):
                raise ValueError("integrator.periods needs a sin force")
        if kind == "fo_cutoff" and self.particle.cutoff_omega_per_s is None and self.particle.cutoff_ratio is None:
            raise ValueError("fo_cutoff needs a particle cutoff")
        return self

    # ── builders ───────────────────────────────────────────────────
    def build_constants(self) -> Constants:
        return self.constants.build() if self.constants is not None else Constants()

    def build_particle(self) -> ParticleParams:
        return self.particle.build(self.build_constants())

    def build_model(self, particle: Optional[ParticleParams] = None) -> ModelNR:
        particle = particle or self.build_particle()
        model = self.model
        if isinstance(model, SeriesModel):
            return ModelNR("series", particle, order=model.order)
        if isinstance(model, OscillatorModel):
            return ModelNR("oscillator", particle, spring_constant=model.spring_constant_dyn_per_cm)
        if model.kind not in DETERMINISTIC_KINDS:
            raise ScenarioError(f"{model.kind} is not a one-dimensional equation of motion")
        return ModelNR(model.kind, particle)

    def build_force(self, omega: Optional[float] = None) -> ForceModel:
        if self.force is None:
            raise ScenarioError(f"{self.name} has no force block")
        if isinstance(self.force, SinForce):
            return self.force.build(omega)
        return self.force.build()

    def build_fields(self) -> FieldTensor:
        if self.fields is None:
            raise ScenarioError(f"{self.name} has no fields block")
        return self.fields.build()

    def build_noise(self, particle: ParticleParams) -> NoiseSpec:
        noise = self.noise
        damping = noise.damping_g_per_s
        if damping is None:
            if not isinstance(self.model, OscillatorModel):
                raise ScenarioError(f"{self.kind} noise needs damping_g_per_s")
            damping = self.model.spring_constant_dyn_per_cm * particle.tau_e
        return NoiseSpec(kind=noise.kind, temperature=noise.temperature_K, damping=damping, seed=noise.seed, tau_c=noise.tau_c_s)

    def build_ensemble(self) -> EnsembleConfig:
        block = self.ensemble or EnsembleBlock(n_members=1, base_seed=self.noise.seed if self.noise else 0)
        return EnsembleConfig(n_members=block.n_members, base_seed=block.base_seed)

    def initial_state(self, t0: float) -> StateNR:
        return StateNR(t=t0, x=self.initial.x_cm, v=self.initial.v_cm_per_s, a=self.initial.a_cm_per_s2)

    def initial_four_state(self, particle: ParticleParams):
        return four_state(particle, 0.0, self.initial.position_cm, self.initial.velocity_cm_per_s)

    def drive_omegas(self, particle: ParticleParams) -> list[Optional[float]]:
        """Drive frequency (1/s) per sweep point; [None] without a sweep."""
        if self.sweep is None:
            return [None]
        return [w / particle.tau_e for w in self.sweep.omega_tau]

    def t_span(self, omega: Optional[float] = None) -> tuple[float, float]:
        span = self.integrator.t_span_s
        t0 = span[0] if span is not None else 0.0
        if self.integrator.periods is not None:
            omega = omega if omega is not None else self.force.omega_per_s
            return t0, t0 + self.integrator.periods * 2.0 * math.pi / omega
        return span

    def with_seed(self, seed: int) -> "Scenario":
        """Copy with the noise seed and ensemble base seed replaced."""
        update = {}
        if self.noise is not None:
            update["noise"] = self.noise.model_copy(update={"seed": seed})
        if self.ensemble is not None:
            update["ensemble"] = self.ensemble.model_copy(update={"base_seed": seed})
        return self.model_copy(update=update)

    def sha256(self) -> str:
        return sha256_of(self.model_dump(mode="json"))


def _static_checks(scenario: Scenario) -> None:
    """Checks that need the physical constants: cutoff bound, Ohmic coupling, |v| < c."""
    particle = scenario.build_particle()  # CausalityViolation for Omega > 1/tau_e
    if scenario.kind in DETERMINISTIC_KINDS:
        scenario.build_model(particle)
    if scenario.kind in REL_KINDS:
        scenario.initial_four_state(particle)
        scenario.build_fields()
    if scenario.noise is not None:
        spec = scenario.build_noise(particle)
        if isinstance(scenario.model, OscillatorModel):
            zeta = scenario.model.spring_constant_dyn_per_cm * particle.tau_e
            if abs(spec.damping - zeta) > 1e-9 * zeta:
                raise PhysicsDomainError(
                    f"noise damping {spec.damping:.6g} g/s must equal K tau_e = {zeta:.6g} g/s"
                )
            omega0 = math.sqrt(scenario.model.spring_constant_dyn_per_cm / particle.mass_renormalized)
            if scenario.integrator.dt_s * omega0 > 0.1:
                raise PhysicsDomainError(
                    f"dt * omega_0 = {scenario.integrator.dt_s * omega0:.3g} exceeds the stability bound 0.1"
                )


def parse_scenario(payload: dict, seed: Optional[int] = None) -> Scenario:
    """Validate a decoded scenario document; seed overrides every seed in it."""
    try:
        scenario = Scenario.model_validate(payload)
    except ValidationError as exc:
        raise ScenarioError(f"invalid scenario: {exc}") from exc
    if seed is not None:
        scenario = scenario.with_seed(seed)
    try:
        _static_checks(scenario)
    except PhysicsDomainError as exc:
        raise ScenarioError(f"scenario {scenario.name}: {exc}") from exc
    return scenario


def load_scenario(path: Path, seed: Optional[int] = None) -> Scenario:
    path = Path(path)
    if not path.is_file():
        raise ScenarioError(f"scenario file not found: {path}")
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise ScenarioError(f"{path} must hold a JSON object")
    scenario = parse_scenario(payload, seed)
    logger.info(f"[Scenario] Loaded {scenario.name} ({scenario.kind}) from {path}")
    return scenario
