"""Classical fluctuating forces and the Langevin runs built on them.

Members of an ensemble are integrated together as arrays, one row per
member, but each member draws its noise from its own seeded generator so
a member's path does not depend on which batch it ran in.
"""

import math
from typing import Callable, Optional, Sequence

import numpy as np
from loguru import logger
from scipy.signal import lfilter

from core.config import NOISE_BLOCK
from core.exceptions import IncompatibleRunsError, PhysicsDomainError
from core.forces import ForceModel, Zero
from core.models import EnsembleConfig, EnsembleSummary, NoiseSpec, StateNR, StochasticTrajectory, Trajectory
from core.physics import Constants, ParticleParams, Units, heat_bath_correlation_time
from services.ensemble import run_members

MAX_STEP_OMEGA = 0.1   # dt * omega_0 above this is rejected
COUPLING_RTOL = 1e-9   # zeta == K tau_e check

_MASK64 = (1 << 64) - 1


# ── seeds ─────────────────────────────────────────────────────────────
def splitmix64(index: int) -> int:
    z = (index + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def member_seeds(config: EnsembleConfig) -> list[int]:
    """seed_i = base_seed XOR splitmix64(i); pairwise distinct because splitmix64 is a bijection."""
    base = config.base_seed & _MASK64
    return [base ^ splitmix64(i) for i in range(config.n_members)]


# ── noise ─────────────────────────────────────────────────────────────
def correlation_time(spec: NoiseSpec, consts: Optional[Constants] = None) -> Optional[float]:
    if spec.kind != "exp_correlated":
        return None
    if spec.tau_c is not None:
        return spec.tau_c
    return heat_bath_correlation_time(spec.temperature, consts)


class NoiseStream:
    """Sequential noise values F_1, F_2, ... for one member, in dyn.

    white_fdt: independent N(0, 2 zeta k T / dt) per step.
    exp_correlated: exact AR(1) sampling of the stationary process with
    variance k T zeta / tau_c and correlation time tau_c; F_0 is a
    stationary draw available as `current`.
    """

    def __init__(
        self,
        spec: NoiseSpec,
        dt: float,
        rng: np.random.Generator,
        kT: float,
        consts: Optional[Constants] = None,
    ):
        if not dt > 0:
            raise PhysicsDomainError(f"noise time step must be positive, got {dt!r} s")
        self.spec = spec
        self.rng = rng
        strength = spec.damping * kT
        self.silent = strength == 0
        if spec.kind == "white_fdt":
            self.sigma = math.sqrt(2.0 * strength / dt)
            self.current = 0.0
            return
        tau_c = correlation_time(spec, consts)
        if tau_c is None:
            self.silent = True
            tau_c = math.inf
        self.sigma = math.sqrt(strength / tau_c) if not self.silent else 0.0
        self.rho = math.exp(-dt / tau_c)
        self.gain = self.sigma * math.sqrt(-math.expm1(-2.0 * dt / tau_c))
        self.current = self.sigma * rng.standard_normal() if not self.silent else 0.0

    def next(self, n: int) -> np.ndarray:
        if self.silent:
            return np.zeros(n)
        xi = self.rng.standard_normal(n)
        if self.spec.kind == "white_fdt":
            return self.sigma * xi
        block, _ = lfilter([self.gain], [1.0, -self.rho], xi, zi=[self.rho * self.current])
        self.current = float(block[-1])
        return block


def sample_noise(
    spec: NoiseSpec,
    dt: float,
    n_steps: int,
    rng: Optional[np.random.Generator] = None,
    consts: Optional[Constants] = None,
) -> np.ndarray:
    """n_steps values of the fluctuating force F(t) = -e E(t), in dyn."""
    rng = rng if rng is not None else np.random.default_rng(spec.seed)
    consts = consts or Constants()
    stream = NoiseStream(spec, dt, rng, consts.kB * spec.temperature, consts)
    blocks = []
    remaining = n_steps
    while remaining > 0:
        take = min(NOISE_BLOCK, remaining)
        blocks.append(stream.next(take))
        remaining -= take
    return np.concatenate(blocks) if blocks else np.empty(0)


def autocorrelation(series, max_lag: int) -> np.ndarray:
    """Normalized autocorrelation for lags 0..max_lag (FFT, zero-padded)."""
    x = np.asarray(series, dtype=float)
    x = x - x.mean()
    n = len(x)
    spectrum = np.fft.rfft(x, 2 * n)
    acf = np.fft.irfft(spectrum * np.conj(spectrum))[: max_lag + 1]
    acf /= n - np.arange(max_lag + 1)
    return acf / acf[0]


def fit_decay_rate(times, values, floor: float = 0.05) -> float:
    """Rate of exp(-rate t) from a log-linear fit, using values above floor * values[0]."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    keep = values > floor * values[0]
    stop = np.argmin(keep) if not keep.all() else len(keep)
    slope, _ = np.polyfit(times[:stop], np.log(values[:stop]), 1)
    return -slope


# ── Heun integration ──────────────────────────────────────────────────
def _step_count(t_span, dt) -> int:
    span = t_span[1] - t_span[0]
    if not (dt > 0 and span > 0):
        raise PhysicsDomainError(f"need dt > 0 and an increasing span, got dt={dt!r}, span={t_span!r}")
    return max(1, int(round(span / dt)))


def record_times(particle: ParticleParams, t_span, dt: float, record_every: int = 1) -> np.ndarray:
    """Times (s) at which a Langevin run records its state."""
    n_steps = _step_count(t_span, dt)
    records = np.arange(0, n_steps + 1, record_every)
    if records[-1] != n_steps:
        records = np.append(records, n_steps)
    units = Units.for_particle(particle)
    return t_span[0] + units.to_physical(records * units.to_internal(dt, "time"), "time")


def _heun(
    accel: Callable,
    x0: np.ndarray,
    v0: np.ndarray,
    streams: Sequence[NoiseStream],
    n_steps: int,
    dt: float,
    force_unit: float,
    record_every: int,
    rate_term: bool,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Stochastic Heun over a batch of members, internal units.

    accel(t, x, v) is the deterministic acceleration. Noise enters as a
    velocity kick: F dt for white noise, the trapezoid of F plus the exact
    increment tau_e (F_{n+1} - F_n) for the correlated process.
    """
    x, v = x0.astype(float).copy(), v0.astype(float).copy()
    correlated = streams[0].spec.kind == "exp_correlated"
    current = np.array([s.current for s in streams]) / force_unit
    records = [0]
    xs, vs = [x.copy()], [v.copy()]
    step = 0
    while step < n_steps:
        take = min(NOISE_BLOCK, n_steps - step)
        block = np.stack([s.next(take) for s in streams]) / force_unit
        for j in range(take):
            t = step * dt
            upcoming = block[:, j]
            if correlated:
                kick = 0.5 * dt * (current + upcoming)
                if rate_term:
                    kick = kick + (upcoming - current)
            else:
                kick = dt * upcoming
            a0 = accel(t, x, v)
            x_pred = x + dt * v
            v_pred = v + dt * a0 + kick
            a1 = accel(t + dt, x_pred, v_pred)
            x = x + 0.5 * dt * (v + v_pred)
            v = v + 0.5 * dt * (a0 + a1) + kick
            current = upcoming
            step += 1
            if step % record_every == 0 or step == n_steps:
                records.append(step)
                xs.append(x.copy())
                vs.append(v.copy())
    return np.array(records), np.stack(xs, axis=1), np.stack(vs, axis=1)


def _members(seeds, spec, dt, consts: Constants):
    kT = consts.kB * spec.temperature
    rngs = [np.random.default_rng(seed) for seed in seeds]
    return rngs, [NoiseStream(spec, dt, rng, kT, consts) for rng in rngs]


def _pack(records, xs, vs, t0, dt, units, seeds) -> StochasticTrajectory:
    return StochasticTrajectory(
        t=t0 + units.to_physical(records * dt, "time"),
        x=units.to_physical(xs, "length"),
        v=units.to_physical(vs, "velocity"),
        seeds=list(seeds),
    )


def langevin_oscillator(
    particle: ParticleParams,
    spring_constant: float,
    spec: NoiseSpec,
    initial: StateNR,
    t_span: tuple[float, float],
    dt: float,
    *,
    drive: Optional[ForceModel] = None,
    seeds: Optional[Sequence[int]] = None,
    record_every: int = 1,
    thermal_start: bool = False,
) -> StochasticTrajectory:
    """M x'' + zeta x' + K x = f_drive(t) + F(t) with zeta = K tau_e.

    One row per seed (default: the noise seed). With thermal_start
    each member starts from a Boltzmann draw instead of `initial`.
    """
    if not spring_constant > 0:
        raise PhysicsDomainError(f"spring constant must be positive, got {spring_constant!r}")
    zeta = spring_constant * particle.tau_e
    if abs(spec.damping - zeta) > COUPLING_RTOL * zeta:
        raise PhysicsDomainError(
            f"noise damping {spec.damping:.6g} g/s must equal K tau_e = {zeta:.6g} g/s for the Ohmic oscillator"
        )
    omega0 = math.sqrt(spring_constant / particle.mass_renormalized)
    if dt * omega0 > MAX_STEP_OMEGA:
        raise PhysicsDomainError(f"dt * omega_0 = {dt * omega0:.3g} exceeds the stability bound {MAX_STEP_OMEGA}")

    units = Units.for_particle(particle)
    consts = particle.constants
    kT = consts.kB * spec.temperature
    seeds = list(seeds) if seeds is not None else [spec.seed]
    rngs, streams = _members(seeds, spec, dt, consts)

    m = len(seeds)
    if thermal_start:
        x0 = np.array([rng.normal(0.0, math.sqrt(kT / spring_constant)) for rng in rngs])
        v0 = np.array([rng.normal(0.0, math.sqrt(kT / particle.mass_renormalized)) for rng in rngs])
    else:
        x0, v0 = np.full(m, initial.x), np.full(m, initial.v)

    k = units.to_internal(spring_constant, "spring")
    drive = drive or Zero()
    f_unit = units.scale("force")
    t0_int = units.to_internal(t_span[0], "time")

    def accel(t, x, v):
        # internal zeta equals internal K
        f = drive.value((t0_int + t) * units.time)[0] / f_unit
        return f - k * v - k * x

    n_steps = _step_count(t_span, dt)
    dt_int = units.to_internal(dt, "time")
    logger.debug(f"[Langevin] oscillator: {m} member(s), {n_steps} steps, dt*omega0={dt * omega0:.3g}")
    records, xs, vs = _heun(
        accel,
        units.to_internal(x0, "length"),
        units.to_internal(v0, "velocity"),
        streams,
        n_steps,
        dt_int,
        f_unit,
        record_every,
        rate_term=False,
    )
    return _pack(records, xs, vs, t_span[0], dt_int, units, seeds)


def fo_fluctuating(
    particle: ParticleParams,
    force: ForceModel,
    spec: NoiseSpec,
    initial: StateNR,
    t_span: tuple[float, float],
    dt: float,
    *,
    seeds: Optional[Sequence[int]] = None,
    record_every: int = 1,
) -> StochasticTrajectory:
    """M x'' = f + tau_e f' + F + tau_e F' (the structured electron with fluctuations).

    The tau_e F' term is dropped for white noise, which has no pathwise
    derivative; for the correlated process it enters exactly.
    """
    units = Units.for_particle(particle)
    seeds = list(seeds) if seeds is not None else [spec.seed]
    _, streams = _members(seeds, spec, dt, particle.constants)
    f_unit, fd_unit = units.scale("force"), units.scale("force_rate")
    t0_int = units.to_internal(t_span[0], "time")

    def accel(t, x, v):
        f, fd, _ = force.value((t0_int + t) * units.time)
        return f / f_unit + fd / fd_unit

    m = len(seeds)
    n_steps = _step_count(t_span, dt)
    dt_int = units.to_internal(dt, "time")
    records, xs, vs = _heun(
        accel,
        np.full(m, units.to_internal(initial.x, "length")),
        np.full(m, units.to_internal(initial.v, "velocity")),
        streams,
        n_steps,
        dt_int,
        f_unit,
        record_every,
        rate_term=True,
    )
    return _pack(records, xs, vs, t_span[0], dt_int, units, seeds)


def free_fluctuating(
    particle: ParticleParams,
    spec: NoiseSpec,
    t_span: tuple[float, float],
    dt: float,
    *,
    initial: Optional[StateNR] = None,
    seeds: Optional[Sequence[int]] = None,
    record_every: int = 1,
) -> StochasticTrajectory:
    """M x'' = F(t) + tau_e F'(t): fluctuations with no dissipative term."""
    initial = initial or StateNR(t=t_span[0], x=0.0, v=0.0)
    return fo_fluctuating(particle, Zero(), spec, initial, t_span, dt, seeds=seeds, record_every=record_every)


# ── ensemble statistics ──────────────────────────────────────────────
def summarize(members: StochasticTrajectory, reference: Optional[Trajectory] = None, keep_members: bool = False) -> EnsembleSummary:
    """Pointwise mean and standard error; deviation from a reference on the same grid."""
    n = members.n_members
    if members.x.shape != members.v.shape or members.x.shape[1] != len(members.t):
        raise IncompatibleRunsError(f"ensemble members on mismatched grids: {members.x.shape} vs {len(members.t)} times")
    mean_x, mean_v = members.x.mean(axis=0), members.v.mean(axis=0)
    if n > 1:
        stderr_x = members.x.std(axis=0, ddof=1) / math.sqrt(n)
        stderr_v = members.v.std(axis=0, ddof=1) / math.sqrt(n)
    else:
        stderr_x, stderr_v = np.zeros_like(mean_x), np.zeros_like(mean_v)

    summary = EnsembleSummary(
        t=members.t, mean_x=mean_x, mean_v=mean_v, stderr_x=stderr_x, stderr_v=stderr_v, n=n,
        members=members if keep_members else None,
    )
    if reference is not None:
        if len(reference.t) != len(members.t) or not np.allclose(reference.t, members.t, rtol=1e-12, atol=0):
            raise IncompatibleRunsError("reference trajectory is not on the ensemble time grid")
        deviation = mean_x - reference.x
        summary.max_deviation = float(np.max(np.abs(deviation)))
        summary.rms_deviation = float(np.sqrt(np.mean(deviation**2)))
    return summary


def ensemble_mean(
    config: EnsembleConfig,
    member_run: Callable[[list[int]], StochasticTrajectory],
    reference: Optional[Trajectory] = None,
    *,
    keep_members: bool = False,
    max_workers: Optional[int] = None,
) -> EnsembleSummary:
    """Run config.n_members seeded members through member_run and reduce them.

    member_run maps a list of seeds to a StochasticTrajectory with one row
    per seed. Batches run concurrently; the reduction is in member order.
    """
    seeds = member_seeds(config)
    members = run_members(seeds, member_run, max_workers=max_workers)
    summary = summarize(members, reference, keep_members)
    if summary.max_deviation is not None:
        logger.info(f"[Ensemble] n={summary.n}: max |<x> - x_FO| = {summary.max_deviation:.4g} cm")
    return summary


def ensemble_convergence(
    member_run: Callable[[list[int]], StochasticTrajectory],
    reference: Trajectory,
    sizes: Sequence[int] = (100, 1000, 10000),
    replicates: int = 4,
    base_seed: int = 0,
    max_workers: Optional[int] = None,
) -> dict:
    """RMS deviation of the ensemble mean from the reference for each size, averaged over replicates.

    The log-log slope against n should be -1/2.
    """
    rms = []
    for n in sizes:
        values = []
        for r in range(replicates):
            config = EnsembleConfig(n_members=n, base_seed=base_seed ^ splitmix64(1 << 32 | r))
            values.append(ensemble_mean(config, member_run, reference, max_workers=max_workers).rms_deviation)
        rms.append(float(np.mean(values)))
    slope, _ = np.polyfit(np.log(sizes), np.log(rms), 1)
    logger.info(f"[Ensemble] ✓ Convergence slope {slope:.3f} over n={list(sizes)}")
    return {"sizes": list(sizes), "rms_deviation": rms, "slope": float(slope)}


def equipartition_ratio(members: StochasticTrajectory, spring_constant: float, temperature: float, kB: float, discard: float = 0.0) -> float:
    """<K x^2> / kT over members and the recorded times after the discarded fraction."""
    start = int(discard * len(members.t))
    return float(np.mean(spring_constant * members.x[:, start:] ** 2) / (kB * temperature))


def mode_decay_rate(members: StochasticTrajectory, omega0: float, floor: float = 0.2) -> float:
    """Decay rate of |<z_0* z_t>|^2 for z = x + i v / omega_0; equals zeta / M for the Ohmic oscillator."""
    z = members.x + 1j * members.v / omega0
    corr = np.abs(np.mean(np.conj(z[:, :1]) * z, axis=0)) ** 2
    return fit_decay_rate(members.t - members.t[0], corr, floor)


def velocity_diffusion_rate(members: StochasticTrajectory) -> float:
    """Slope of Var[v](t); 2 zeta k T / M^2 for white noise on a free particle."""
    variance = members.v.var(axis=0, ddof=1) if members.n_members > 1 else np.zeros(len(members.t))
    slope, _ = np.polyfit(members.t - members.t[0], variance, 1)
    return float(slope)
