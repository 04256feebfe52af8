"""Comparison metrics between runs and the scaling-exponent fits built on them."""

import numpy as np
from loguru import logger
from scipy.interpolate import CubicSpline

from core.exceptions import IncompatibleRunsError
from core.models import ComparisonReport, Trajectory, Verdict, Worldline

METRICS = ("max_position_deviation", "power_ratio_series", "pole_tables")

# fitted exponent must land within this of the expected power
EXPONENT_TOL = 0.2


def resample(t_src, values, t_dst) -> np.ndarray:
    """Cubic-spline resampling onto t_dst, which must lie inside t_src."""
    t_src = np.asarray(t_src, dtype=float)
    t_dst = np.asarray(t_dst, dtype=float)
    if len(t_src) == len(t_dst) and np.array_equal(t_src, t_dst):
        return np.asarray(values, dtype=float)
    span = t_src[-1] - t_src[0]
    slack = 1e-12 * abs(span)
    if t_dst[0] < t_src[0] - slack or t_dst[-1] > t_src[-1] + slack:
        raise IncompatibleRunsError(
            f"cannot resample onto [{t_dst[0]:.6g}, {t_dst[-1]:.6g}] s from [{t_src[0]:.6g}, {t_src[-1]:.6g}] s"
        )
    return CubicSpline(t_src, values, axis=0)(np.clip(t_dst, t_src[0], t_src[-1]))


def _common_grid(a: Trajectory, b: Trajectory) -> np.ndarray:
    if len(a.t) == len(b.t) and np.array_equal(a.t, b.t):
        return a.t
    lo, hi = max(a.t[0], b.t[0]), min(a.t[-1], b.t[-1])
    if not hi > lo:
        raise IncompatibleRunsError("runs do not overlap in time")
    return a.t[(a.t >= lo) & (a.t <= hi)]


def position_deviation(a: Trajectory, b: Trajectory) -> tuple[float, float]:
    """(max |x_a - x_b| in cm, the same relative to max |x_b|)."""
    grid = _common_grid(a, b)
    xa = resample(a.t, a.x, grid)
    xb = resample(b.t, b.x, grid)
    absolute = float(np.max(np.abs(xa - xb)))
    scale = float(np.max(np.abs(xb)))
    return absolute, (absolute / scale if scale > 0 else absolute)


def fit_exponent(parameters, deviations) -> float:
    """Slope of log(deviation) against log(parameter)."""
    p = np.asarray(parameters, dtype=float)
    d = np.asarray(deviations, dtype=float)
    if len(p) < 2 or np.any(p <= 0) or np.any(d <= 0):
        raise IncompatibleRunsError("exponent fit needs at least two positive (parameter, deviation) pairs")
    slope, _ = np.polyfit(np.log(p), np.log(d), 1)
    return float(slope)


def max_position_deviation(
    runs_a: list[Trajectory],
    runs_b: list[Trajectory],
    omega_tau: list[float] | None = None,
    names: tuple[str, str] = ("a", "b"),
    expected_exponent: float = 2.0,
) -> ComparisonReport:
    """Pointwise position deviation, paired by index; exponent fitted when a sweep is given."""
    if len(runs_a) != len(runs_b):
        raise IncompatibleRunsError(f"runs hold {len(runs_a)} and {len(runs_b)} trajectories; sweeps must pair by index")
    rows = []
    for i, (a, b) in enumerate(zip(runs_a, runs_b)):
        absolute, relative = position_deviation(a, b)
        row = {"index": i, "max_abs_cm": absolute, "relative": relative}
        if omega_tau is not None:
            row["omega_tau"] = omega_tau[i]
        rows.append(row)

    report = ComparisonReport(
        run_a=names[0],
        run_b=names[1],
        metric="max_position_deviation",
        values={"max_abs_cm": max(r["max_abs_cm"] for r in rows), "relative": max(r["relative"] for r in rows)},
        normalization="max |x_a - x_b| (cm); relative to max |x_b| over the common grid",
        rows=rows,
    )
    if omega_tau is not None and len(rows) >= 2:
        report.exponent = fit_exponent(omega_tau, [r["relative"] for r in rows])
        report.tolerance = EXPONENT_TOL
        report.passed = abs(report.exponent - expected_exponent) <= EXPONENT_TOL
        logger.info(f"[Compare] Deviation exponent {report.exponent:.3f} (expected {expected_exponent})")
    else:
        report.passed = True
    return report


def radiated_energy_gap(t, p_fo, p_larmor, omega: float) -> float:
    """|E_Larmor - E_FO| / E_FO over the largest whole number of drive periods.

    Pointwise the two powers differ at first order in omega tau_e through a
    term that averages to zero over a period, so only whole periods are used.
    """
    t = np.asarray(t, dtype=float)
    period = 2.0 * np.pi / omega
    n_periods = int(np.floor((t[-1] - t[0]) / period * (1 + 1e-12)))
    if n_periods < 1:
        raise IncompatibleRunsError(f"run spans {(t[-1] - t[0]) / period:.3g} drive periods; need at least one")
    end = t[0] + n_periods * period
    p_fo = np.asarray(p_fo, dtype=float)
    gap = CubicSpline(t, np.asarray(p_larmor, dtype=float) - p_fo).integrate(t[0], end)
    energy = CubicSpline(t, p_fo).integrate(t[0], end)
    return abs(float(gap)) / float(energy)


def power_ratio_series(
    runs: list[Trajectory],
    omegas: list[float],
    omega_tau: list[float],
    name: str = "run",
    expected_exponent: float = 2.0,
) -> ComparisonReport:
    """Radiated-energy gap between the FO rate and Larmor along each run, with its exponent."""
    if not (len(runs) == len(omegas) == len(omega_tau)):
        raise IncompatibleRunsError("power ratio needs one drive frequency per run")
    rows = [
        {"index": i, "omega_tau": wt, "relative_gap": radiated_energy_gap(r.t, r.p_fo, r.p_larmor, w)}
        for i, (r, w, wt) in enumerate(zip(runs, omegas, omega_tau))
    ]
    report = ComparisonReport(
        run_a=name,
        run_b=name,
        metric="power_ratio_series",
        values={"max_relative_gap": max(r["relative_gap"] for r in rows)},
        normalization="|E_Larmor - E_FO| / E_FO, energies over whole drive periods",
        rows=rows,
    )
    if len(rows) >= 2:
        report.exponent = fit_exponent(omega_tau, [r["relative_gap"] for r in rows])
        report.tolerance = EXPONENT_TOL
        report.passed = abs(report.exponent - expected_exponent) <= EXPONENT_TOL
        logger.info(f"[Compare] Power gap exponent {report.exponent:.3f}")
    else:
        report.passed = True
    return report


def _pole_key(p: complex) -> tuple[float, float]:
    return round(p.real, 9), round(p.imag, 9)


def pole_tables(table_a: list[dict], table_b: list[dict], names: tuple[str, str] = ("a", "b"), tol: float = 1e-9) -> ComparisonReport:
    """Model-by-model verdict and pole-location agreement between two pole tables."""
    by_model = {row["model"]: row for row in table_b}
    rows, mismatches, worst = [], 0, 0.0
    for row in table_a:
        other = by_model.get(row["model"])
        if other is None:
            raise IncompatibleRunsError(f"model {row['model']} missing from {names[1]}")
        pa = sorted((complex(*p) for p, _ in row["poles"]), key=_pole_key)
        pb = sorted((complex(*p) for p, _ in other["poles"]), key=_pole_key)
        if len(pa) != len(pb):
            distance = float("inf")
        else:
            distance = max((abs(x - y) for x, y in zip(pa, pb)), default=0.0)
        same = row["verdict"] == other["verdict"]
        mismatches += not same
        worst = max(worst, distance)
        rows.append({"model": row["model"], "verdict_a": row["verdict"], "verdict_b": other["verdict"], "max_pole_distance": distance})
    return ComparisonReport(
        run_a=names[0],
        run_b=names[1],
        metric="pole_tables",
        values={"verdict_mismatches": mismatches, "max_pole_distance": worst},
        tolerance=tol,
        passed=mismatches == 0 and worst <= tol,
        normalization="pole distances in units of 1/tau_e",
        rows=rows,
    )


def verdict_counts(table: list[dict]) -> dict[str, int]:
    counts = {v.value: 0 for v in Verdict}
    for row in table:
        counts[row["verdict"]] += 1
    return counts


def worldline_deviation(a: Worldline, b: Worldline) -> float:
    """Largest spatial distance (cm) between two worldlines at common lab times."""
    lo, hi = max(a.t[0], b.t[0]), min(a.t[-1], b.t[-1])
    grid = a.t[(a.t >= lo) & (a.t <= hi)]
    if len(grid) < 2:
        raise IncompatibleRunsError("worldlines do not overlap in lab time")
    pb = resample(b.t, b.position, grid)
    pa = resample(a.t, a.position, grid)
    return float(np.max(np.linalg.norm(pa - pb, axis=1)))
