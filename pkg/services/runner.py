"""Scenario pipeline: build → integrate → reduce → write.

One scenario per call. Artifacts go to <out_dir>/<scenario name>/ and are
written only after the physics has finished, so a failed run leaves the
report describing why rather than half a trajectory. Physics verdicts
(runaway, non-causal model under strict mode) are recorded in the report
and then re-raised for the caller to map onto an exit status.
"""

import math
import time
from dataclasses import dataclass
from functools import partial
from pathlib import Path
from typing import Optional

import numpy as np
from loguru import logger

from core.comparison import METRICS, max_position_deviation, pole_tables, power_ratio_series, verdict_counts
from core.config import OUT_DIR
from core.exceptions import IncompatibleRunsError, NonCausalModel, PhysicsVerdict, RunawayDetected
from core.forces import Constant, SinDrive, Zero
from core.models import ComparisonReport, ModelNR, Verdict
from core.physics import ParticleParams, cutoff_limit
from dynamics.causality import find_poles, pole_survey, susceptibility_of, verify_positive_real_part
from dynamics.nonrel import energy_decay_rate, integrate, oscillator_coupling
from dynamics.relativistic import LL_LABEL, gyration_decay_rate, integrate_lab_time, integrate_proper_time
from dynamics.stochastic import (
    ensemble_mean,
    equipartition_ratio,
    fo_fluctuating,
    free_fluctuating,
    langevin_oscillator,
    mode_decay_rate,
    record_times,
    velocity_diffusion_rate,
)
from services.scenario import DETERMINISTIC_KINDS, REL_KINDS, Scenario
from services.storage import (
    ENSEMBLE_FILE,
    MEMBERS_DIR,
    REPORT_FILE,
    TRAJECTORY_FILE,
    WORLDLINE_FILE,
    load_trajectories,
    pole_report_dict,
    read_report,
    run_dir,
    sweep_file,
    write_ensemble,
    write_members,
    write_report,
    write_trajectory,
    write_worldline,
)


@dataclass
class RunResult:
    name: str
    directory: Path
    report: dict


# ── helpers ──────────────────────────────────────────────────────────
def _particle_summary(particle: ParticleParams) -> dict:
    return {
        "charge_statC": particle.charge,
        "mass_g": particle.mass_renormalized,
        "tau_e_s": particle.tau_e,
        "cutoff_limit_per_s": cutoff_limit(particle),
        "cutoff_omega_per_s": particle.cutoff_omega,
        "bare_mass_g": particle.bare_mass,
    }


def _seed(scenario: Scenario):
    if scenario.ensemble is not None:
        return scenario.ensemble.base_seed
    if scenario.noise is not None:
        return scenario.noise.seed
    return "none"


def _csv_meta(scenario: Scenario) -> dict:
    return {"scenario": scenario.name, "scenario_sha256": scenario.sha256(), "seed": _seed(scenario)}


def _check_strict(reports, strict_causal: bool) -> None:
    flagged = [r.model for r in reports if r.verdict is Verdict.NON_CAUSAL]
    if strict_causal and flagged:
        raise NonCausalModel(flagged)


# ── deterministic one-dimensional runs ────────────────────────────────
def _run_deterministic(scenario: Scenario, particle: ParticleParams, directory: Path, report: dict, strict_causal: bool) -> None:
    model = scenario.build_model(particle)
    poles = find_poles(susceptibility_of(model))
    report["causality"] = pole_report_dict(poles)
    _check_strict([poles], strict_causal)

    integ = scenario.integrator
    meta = _csv_meta(scenario)
    rows, trajectories = [], []
    for i, omega in enumerate(scenario.drive_omegas(particle)):
        force = scenario.build_force(omega)
        span = scenario.t_span(omega)
        name = TRAJECTORY_FILE if scenario.sweep is None else sweep_file(i)
        try:
            trajectory = integrate(
                model,
                force,
                scenario.initial_state(span[0]),
                span,
                integ.tol,
                n_samples=integ.n_samples,
                fixed_step=integ.fixed_step_s,
            )
        except RunawayDetected as exc:
            report["runaway"] = {
                "file": name,
                "efolding_time_s": exc.efolding_time,
                "efolding_over_tau_e": exc.efolding_time / particle.tau_e,
                "t_detect_s": exc.t_detect,
                "amplification": exc.amplification,
            }
            if scenario.outputs.keep_partial and exc.trajectory is not None:
                trajectories.append((name, exc.trajectory))
                _write_trajectories(directory, trajectories, meta)
            raise

        row = {"file": name, "t_span_s": list(span), **trajectory.diagnostics}
        if isinstance(force, SinDrive):
            row["drive_omega_per_s"] = force.omega
            row["omega_tau"] = force.omega * particle.tau_e
        if isinstance(force, Constant) and force.amplitude != 0:
            mean = float(np.mean(trajectory.a))
            row["accel_relative_spread"] = float((trajectory.a.max() - trajectory.a.min()) / abs(mean))
        if model.kind == "oscillator" and isinstance(force, Zero):
            row["energy_decay_rate_per_s"] = energy_decay_rate(trajectory, model.spring_constant, particle.mass_renormalized)
            row["expected_decay_rate_per_s"] = model.spring_constant * particle.tau_e / particle.mass_renormalized
        rows.append(row)
        trajectories.append((name, trajectory))

    _write_trajectories(directory, trajectories, meta)
    report["runs"] = rows
    if all("omega_tau" in row for row in rows):
        report["omega_tau"] = [row["omega_tau"] for row in rows]
        report["drive_omega_per_s"] = [row["drive_omega_per_s"] for row in rows]


def _write_trajectories(directory: Path, trajectories, meta: dict) -> None:
    for name, trajectory in trajectories:
        write_trajectory(directory / name, trajectory, meta)


# ── stochastic runs ───────────────────────────────────────────────────
def _member_run(scenario: Scenario, particle: ParticleParams, spec, span):
    integ = scenario.integrator
    initial = scenario.initial_state(span[0])
    if scenario.kind == "oscillator":
        return partial(
            _oscillator_members,
            particle,
            scenario.model.spring_constant_dyn_per_cm,
            spec,
            initial,
            span,
            integ.dt_s,
            scenario.build_force(),
            integ.record_every,
            integ.thermal_start,
        )
    if scenario.kind == "fo":
        return partial(_fo_members, particle, scenario.build_force(), spec, initial, span, integ.dt_s, integ.record_every)
    return partial(_free_members, particle, spec, span, integ.dt_s, initial, integ.record_every)


def _oscillator_members(particle, spring_constant, spec, initial, span, dt, drive, record_every, thermal_start, seeds):
    return langevin_oscillator(
        particle, spring_constant, spec, initial, span, dt,
        drive=drive, seeds=seeds, record_every=record_every, thermal_start=thermal_start,
    )


def _fo_members(particle, force, spec, initial, span, dt, record_every, seeds):
    return fo_fluctuating(particle, force, spec, initial, span, dt, seeds=seeds, record_every=record_every)


def _free_members(particle, spec, span, dt, initial, record_every, seeds):
    return free_fluctuating(particle, spec, span, dt, initial=initial, seeds=seeds, record_every=record_every)


def _run_stochastic(scenario: Scenario, particle: ParticleParams, directory: Path, report: dict, strict_causal: bool) -> None:
    spec = scenario.build_noise(particle)
    config = scenario.build_ensemble()
    integ = scenario.integrator
    span = scenario.t_span()
    meta = {**_csv_meta(scenario), "noise": spec.kind, "n_members": config.n_members}

    reference = None
    if scenario.kind == "fo":
        # deterministic FO on the recording grid of the members
        grid = record_times(particle, span, integ.dt_s, integ.record_every)
        model = ModelNR("fo", particle)
        reference = integrate(model, scenario.build_force(), scenario.initial_state(span[0]), span, integ.tol, t_eval=grid)
        report["causality"] = pole_report_dict(find_poles(susceptibility_of(model)))
    elif scenario.kind == "oscillator":
        model = scenario.build_model(particle)
        poles = find_poles(susceptibility_of(model))
        report["causality"] = pole_report_dict(poles)
        _check_strict([poles], strict_causal)

    summary = ensemble_mean(config, _member_run(scenario, particle, spec, span), reference, keep_members=True)
    members = summary.members

    stats = {
        "n_members": summary.n,
        "base_seed": config.base_seed,
        "noise": spec.kind,
        "temperature_K": spec.temperature,
        "damping_g_per_s": spec.damping,
        "final_stderr_x_cm": float(summary.stderr_x[-1]),
        "final_stderr_v_cm_per_s": float(summary.stderr_v[-1]),
    }
    if summary.max_deviation is not None:
        stats["max_deviation_cm"] = summary.max_deviation
        stats["rms_deviation_cm"] = summary.rms_deviation
    if scenario.kind == "oscillator" and spec.temperature > 0:
        K = scenario.model.spring_constant_dyn_per_cm
        omega0 = math.sqrt(K / particle.mass_renormalized)
        stats["equipartition_ratio"] = equipartition_ratio(
            members, K, spec.temperature, particle.constants.kB, discard=0.0 if integ.thermal_start else 0.5
        )
        stats["coupling"] = oscillator_coupling(particle, K)
        if integ.thermal_start and members.n_members > 1:
            stats["mode_decay_rate_per_s"] = mode_decay_rate(members, omega0)
            stats["expected_decay_rate_per_s"] = spec.damping / particle.mass_renormalized
    if scenario.kind == "free_fluctuating" and members.n_members > 1:
        stats["velocity_diffusion_rate"] = velocity_diffusion_rate(members)
        if spec.kind == "white_fdt":
            kT = particle.constants.kB * spec.temperature
            stats["expected_diffusion_rate"] = 2.0 * spec.damping * kT / particle.mass_renormalized**2
    report["ensemble"] = stats

    write_ensemble(directory / ENSEMBLE_FILE, summary, meta)
    if reference is not None:
        write_trajectory(directory / TRAJECTORY_FILE, reference, meta)
    if scenario.ensemble is not None and scenario.ensemble.keep_members:
        write_members(directory / MEMBERS_DIR, members, meta)


# ── relativistic runs ─────────────────────────────────────────────────
def _run_relativistic(scenario: Scenario, particle: ParticleParams, directory: Path, report: dict, strict_causal: bool) -> None:
    fields = scenario.build_fields()
    integ = scenario.integrator
    block = scenario.model
    if block.kind == "rel_fo_3vector":
        worldline = integrate_lab_time(
            particle,
            fields,
            scenario.initial.position_cm,
            scenario.initial.velocity_cm_per_s,
            integ.t_span_s,
            integ.tol,
            radiation=block.radiation,
            n_samples=integ.n_samples,
        )
    else:
        worldline = integrate_proper_time(
            particle,
            fields,
            scenario.initial_four_state(particle),
            integ.tau_span_s,
            integ.tol,
            kind=block.kind,
            closure=block.closure,
            radiation=block.radiation,
            n_samples=integ.n_samples,
            fixed_step=integ.fixed_step_s,
        )

    summary = {
        **worldline.diagnostics,
        "label": LL_LABEL if block.kind == "ll_type" else worldline.model,
        "closure": block.closure if block.kind != "rel_fo_3vector" else None,
        "final_gamma": float(worldline.gamma[-1]),
        "max_norm_drift": float(np.max(np.abs(worldline.norm_drift))),
    }
    E, B = fields.at(0.0)
    if fields.is_static and not np.any(E) and np.any(B) and block.radiation:
        summary["gyration_decay_rate_per_s"] = gyration_decay_rate(worldline, axis=B)
    report["worldline"] = summary
    write_worldline(directory / WORLDLINE_FILE, worldline, _csv_meta(scenario))


# ── causality survey ─────────────────────────────────────────────────
def _run_survey(scenario: Scenario, particle: ParticleParams, directory: Path, report: dict, strict_causal: bool) -> None:
    block = scenario.model
    reports = pole_survey(particle, block.max_order, block.spring_constant_dyn_per_cm)
    table = [pole_report_dict(r) for r in reports]
    report["poles"] = table
    report["verdict_counts"] = verdict_counts(table)
    if block.spring_constant_dyn_per_cm is not None:
        check = verify_positive_real_part(particle, block.spring_constant_dyn_per_cm)
        report["positive_real_part"] = {"positive": check.positive, "min_re_mu_g_per_s": check.re_mu, "verdict": check.verdict}
    _check_strict(reports, strict_causal)


def _handler(kind: str, is_stochastic: bool):
    if is_stochastic or kind == "free_fluctuating":
        return _run_stochastic
    if kind in DETERMINISTIC_KINDS:
        return _run_deterministic
    if kind in REL_KINDS:
        return _run_relativistic
    if kind == "causality_survey":
        return _run_survey
    raise IncompatibleRunsError(f"no runner for model kind {kind!r}")


# ── public ───────────────────────────────────────────────────────────
def run_scenario(scenario: Scenario, out_dir: Optional[Path] = None, *, strict_causal: bool = False) -> RunResult:
    """Run one scenario and write its artifacts; PhysicsVerdicts propagate after the report is written."""
    start = time.time()
    logger.info(f"[Runner] Starting scenario {scenario.name} ({scenario.kind})")
    root = Path(out_dir) if out_dir is not None else Path(OUT_DIR)
    directory = run_dir(root, scenario.name)
    particle = scenario.build_particle()
    report = {
        "scenario": scenario.name,
        "version": scenario.version,
        "scenario_sha256": scenario.sha256(),
        "model": scenario.kind,
        "seed": _seed(scenario),
        "particle": _particle_summary(particle),
        "strict_causal": strict_causal,
    }

    handler = _handler(scenario.kind, scenario.is_stochastic)
    try:
        handler(scenario, particle, directory, report, strict_causal)
    except PhysicsVerdict as exc:
        report["verdict"] = {"kind": type(exc).__name__, "message": str(exc)}
        write_report(directory / REPORT_FILE, report)
        logger.warning(f"[Runner] ⚠️ {scenario.name}: {exc}")
        raise

    comparisons = []
    for target in scenario.outputs.compare_with:
        result = compare_runs(directory, root / target.run, target.metric)
        write_report(directory / f"compare_{target.run}_{target.metric}.json", result)
        comparisons.append({"run": target.run, "metric": target.metric, "passed": result.passed, "exponent": result.exponent})
    if comparisons:
        report["comparisons"] = comparisons
    report["verdict"] = None
    write_report(directory / REPORT_FILE, report)
    logger.info(f"[Runner] ✓ {scenario.name} done in {time.time() - start:.2f}s → {directory}")
    return RunResult(name=scenario.name, directory=directory, report=report)


def compare_runs(run_a: Path, run_b: Optional[Path], metric: str) -> ComparisonReport:
    """Compare two run directories (or one, for power_ratio_series) with the named metric."""
    if metric not in METRICS:
        raise IncompatibleRunsError(f"unknown metric {metric!r}; expected one of {', '.join(METRICS)}")
    run_a = Path(run_a)
    run_b = Path(run_b) if run_b is not None else run_a
    names = (run_a.name, run_b.name)
    report_a = read_report(run_a / REPORT_FILE)
    logger.info(f"[Compare] {metric}: {names[0]} vs {names[1]}")

    if metric == "pole_tables":
        report_b = read_report(run_b / REPORT_FILE)
        if "poles" not in report_a or "poles" not in report_b:
            raise IncompatibleRunsError("pole_tables compares causality_survey runs")
        return pole_tables(report_a["poles"], report_b["poles"], names)

    runs_a = load_trajectories(run_a)
    if metric == "power_ratio_series":
        if run_b != run_a:
            raise IncompatibleRunsError("power_ratio_series reads a single run")
        if "drive_omega_per_s" not in report_a:
            raise IncompatibleRunsError(f"{names[0]} has no sinusoidal drive to average over")
        return power_ratio_series(runs_a, report_a["drive_omega_per_s"], report_a["omega_tau"], name=names[0])

    runs_b = load_trajectories(run_b)
    omega_tau = report_a.get("omega_tau") if len(runs_a) > 1 else None
    return max_position_deviation(runs_a, runs_b, omega_tau, names)
