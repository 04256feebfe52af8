"""Run artifacts: columnar CSV with a commented header, JSON reports, run directories.

Floats are written with 17 significant digits so a reload reproduces every
value bit for bit; reports are dumped with sorted keys so identical runs
give identical bytes.
"""

import dataclasses
import hashlib
import json
import math
import re
from enum import Enum
from pathlib import Path
from typing import Any, Optional

import numpy as np
from loguru import logger

from core.exceptions import IncompatibleRunsError
from core.models import EnsembleSummary, PoleReport, StochasticTrajectory, Trajectory, Worldline

FLOAT_FMT = "%.17g"
COMPLEX_DIGITS = 12

TRAJECTORY_FILE = "trajectory.csv"
REPORT_FILE = "report.json"
ENSEMBLE_FILE = "ensemble.csv"
WORLDLINE_FILE = "worldline.csv"
MEMBERS_DIR = "members"

_SWEEP_FILE = re.compile(r"^trajectory_(\d+)\.csv$")


# ── hashing / JSON ────────────────────────────────────────────────────
def canonical_json(payload: Any) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def sha256_of(payload: Any) -> str:
    return hashlib.sha256(canonical_json(payload).encode("utf-8")).hexdigest()


def _round_sig(x: float, digits: int = COMPLEX_DIGITS) -> float:
    return float(f"{x:.{digits}g}")


def to_jsonable(value: Any) -> Any:
    """Plain JSON types; complex as [re, im] rounded to 12 digits, non-finite floats as strings."""
    if isinstance(value, Enum):
        return value.value
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        return {f.name: to_jsonable(getattr(value, f.name)) for f in dataclasses.fields(value)}
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_jsonable(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (complex, np.complexfloating)):
        return [to_jsonable(_round_sig(value.real)), to_jsonable(_round_sig(value.imag))]
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isfinite(value):
            return value
        return "nan" if math.isnan(value) else ("inf" if value > 0 else "-inf")
    if isinstance(value, Path):
        return value.as_posix()
    return value


def pole_report_dict(report: PoleReport) -> dict:
    return {
        "model": report.model,
        "verdict": report.verdict.value,
        "convention": report.convention,
        "units": "1/tau_e",
        "poles": [[to_jsonable(complex(p)), int(mult)] for p, mult in report.poles],
        "offending_poles": [to_jsonable(complex(p)) for p in report.offending_poles],
    }


def _write_text(path: Path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return path


def write_report(path: Path, report: Any) -> Path:
    text = json.dumps(to_jsonable(report), sort_keys=True, indent=2, ensure_ascii=True) + "\n"
    logger.debug(f"[Storage] Writing {path}")
    return _write_text(path, text)


def read_report(path: Path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise IncompatibleRunsError(f"no report at {path}")
    return json.loads(path.read_text(encoding="utf-8"))


# ── columnar CSV ─────────────────────────────────────────────────────
def write_columns(path: Path, data: np.ndarray, names, units, meta: Optional[dict] = None) -> Path:
    """CSV with '# key: value' header lines, then '# columns:' and '# units:'."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = [f"{key}: {value}" for key, value in sorted((meta or {}).items())]
    header += [f"columns: {','.join(names)}", f"units: {','.join(units)}"]
    np.savetxt(path, np.atleast_2d(data), fmt=FLOAT_FMT, delimiter=",", header="\n".join(header), comments="# ")
    logger.debug(f"[Storage] Wrote {path} ({len(data)} rows)")
    return path


def read_columns(path: Path) -> tuple[dict, dict[str, np.ndarray]]:
    """(header metadata, column name -> values)."""
    path = Path(path)
    if not path.is_file():
        raise IncompatibleRunsError(f"no data file at {path}")
    meta = {}
    with path.open(encoding="utf-8") as handle:
        for line in handle:
            if not line.startswith("#"):
                break
            key, _, value = line[1:].strip().partition(": ")
            meta[key] = value
    if "columns" not in meta:
        raise IncompatibleRunsError(f"{path} has no '# columns:' header")
    names = meta.pop("columns").split(",")
    meta.pop("units", None)
    data = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    if data.shape[1] != len(names):
        raise IncompatibleRunsError(f"{path}: {data.shape[1]} columns but header names {len(names)}")
    return meta, {name: data[:, i] for i, name in enumerate(names)}


def write_trajectory(path: Path, trajectory: Trajectory, meta: Optional[dict] = None) -> Path:
    return write_columns(path, trajectory.columns(), Trajectory.COLUMNS, Trajectory.UNITS, {"model": trajectory.model, **(meta or {})})


def load_trajectory(path: Path) -> Trajectory:
    meta, cols = read_columns(path)
    return Trajectory(model=meta.get("model", ""), **{name: cols[name] for name in Trajectory.COLUMNS})


def write_worldline(path: Path, worldline: Worldline, meta: Optional[dict] = None) -> Path:
    return write_columns(path, worldline.columns(), Worldline.COLUMNS, Worldline.UNITS, {"model": worldline.model, **(meta or {})})


def load_worldline(path: Path) -> Worldline:
    meta, cols = read_columns(path)
    return Worldline(
        model=meta.get("model", ""),
        tau=cols["tau"],
        t=cols["t"],
        position=np.column_stack([cols["x"], cols["y"], cols["z"]]),
        u=np.column_stack([cols["ux"], cols["uy"], cols["uz"]]),
        gamma=cols["gamma"],
        norm_drift=cols["norm_drift"],
    )


def write_ensemble(path: Path, summary: EnsembleSummary, meta: Optional[dict] = None) -> Path:
    return write_columns(path, summary.columns(), EnsembleSummary.COLUMNS, EnsembleSummary.UNITS, meta)


def load_ensemble(path: Path) -> EnsembleSummary:
    _, cols = read_columns(path)
    return EnsembleSummary(
        t=cols["t"],
        mean_x=cols["mean_x"],
        mean_v=cols["mean_v"],
        stderr_x=cols["stderr_x"],
        stderr_v=cols["stderr_v"],
        n=int(cols["n"][0]),
    )


def write_members(directory: Path, members: StochasticTrajectory, meta: Optional[dict] = None) -> list[Path]:
    """One file per member, member_<i>.csv, each carrying its own seed."""
    paths = []
    for i, seed in enumerate(members.seeds):
        data = np.column_stack([members.t, members.x[i], members.v[i]])
        paths.append(write_columns(Path(directory) / f"member_{i}.csv", data, ("t", "x", "v"), ("s", "cm", "cm/s"), {**(meta or {}), "seed": seed}))
    return paths


# ── run directories ──────────────────────────────────────────────────
def run_dir(out_dir: Path, name: str) -> Path:
    path = Path(out_dir) / name
    path.mkdir(parents=True, exist_ok=True)
    return path


def sweep_file(index: int) -> str:
    return f"trajectory_{index}.csv"


def load_trajectories(directory: Path) -> list[Trajectory]:
    """trajectory.csv, or every trajectory_<i>.csv in index order."""
    directory = Path(directory)
    single = directory / TRAJECTORY_FILE
    if single.is_file():
        return [load_trajectory(single)]
    indexed = sorted(
        (int(m.group(1)), p) for p in directory.iterdir() if (m := _SWEEP_FILE.match(p.name))
    )
    if not indexed:
        raise IncompatibleRunsError(f"{directory} holds no trajectory files")
    return [load_trajectory(p) for _, p in indexed]
