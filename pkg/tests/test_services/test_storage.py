import json

import numpy as np
import pytest

from core.exceptions import IncompatibleRunsError
from core.models import ComparisonReport, EnsembleSummary, PoleReport, StochasticTrajectory, Trajectory, Verdict, Worldline
from services.storage import (
    canonical_json,
    load_ensemble,
    load_trajectories,
    load_trajectory,
    load_worldline,
    pole_report_dict,
    read_columns,
    read_report,
    sha256_of,
    sweep_file,
    to_jsonable,
    write_ensemble,
    write_members,
    write_report,
    write_trajectory,
    write_worldline,
)


def _trajectory(model="fo", n=7):
    t = np.linspace(0.0, 1e-21, n)
    rng = np.random.default_rng(5)
    cols = [rng.standard_normal(n) * 10.0 ** rng.integers(-30, 10) for _ in range(6)]
    return Trajectory(model, t, *cols)


def test_trajectory_reload_is_bit_exact(tmp_path):
    traj = _trajectory()
    path = write_trajectory(tmp_path / "trajectory.csv", traj, {"scenario_sha256": "abc", "seed": "none"})
    loaded = load_trajectory(path)
    assert loaded.model == "fo"
    for name in Trajectory.COLUMNS:
        assert np.array_equal(getattr(loaded, name), getattr(traj, name))


def test_csv_header_carries_meta_and_units(tmp_path):
    path = write_trajectory(tmp_path / "t.csv", _trajectory(), {"seed": 11})
    text = path.read_text()
    assert "# seed: 11" in text
    assert "# columns: t,x,v,a,f,p_fo,p_larmor" in text
    assert "# units: s,cm,cm/s,cm/s^2,dyn,erg/s,erg/s" in text
    meta, cols = read_columns(path)
    assert meta["seed"] == "11"
    assert set(cols) == set(Trajectory.COLUMNS)


def test_single_row_file(tmp_path):
    traj = _trajectory(n=1)
    loaded = load_trajectory(write_trajectory(tmp_path / "one.csv", traj))
    assert loaded.t.shape == (1,)


def test_worldline_round_trip(tmp_path):
    n = 5
    pos = np.arange(3 * n, dtype=float).reshape(n, 3) * 1.1e-9
    wl = Worldline("rel_fo_3vector", np.linspace(0, 1, n), np.linspace(0, 1.1, n), pos, pos * 3e10, np.ones(n), np.zeros(n))
    loaded = load_worldline(write_worldline(tmp_path / "worldline.csv", wl))
    assert np.array_equal(loaded.position, pos)
    assert loaded.model == "rel_fo_3vector"


def test_ensemble_round_trip(tmp_path):
    t = np.linspace(0.0, 1.0, 4)
    summary = EnsembleSummary(t, t * 2, t * 3, t * 0.1, t * 0.2, n=250)
    loaded = load_ensemble(write_ensemble(tmp_path / "ensemble.csv", summary))
    assert loaded.n == 250
    assert np.array_equal(loaded.mean_v, t * 3)


def test_members_written_with_their_seeds(tmp_path):
    t = np.linspace(0.0, 1.0, 3)
    members = StochasticTrajectory(t, np.ones((2, 3)), np.zeros((2, 3)), seeds=[17, 99])
    paths = write_members(tmp_path / "members", members)
    assert [p.name for p in paths] == ["member_0.csv", "member_1.csv"]
    meta, _ = read_columns(paths[1])
    assert meta["seed"] == "99"


def test_sweep_files_load_in_numeric_order(tmp_path):
    for i in (0, 2, 10, 1):
        write_trajectory(tmp_path / sweep_file(i), _trajectory(model=f"m{i}"))
    assert [t.model for t in load_trajectories(tmp_path)] == ["m0", "m1", "m2", "m10"]


def test_missing_files_raise(tmp_path):
    with pytest.raises(IncompatibleRunsError):
        load_trajectories(tmp_path)
    with pytest.raises(IncompatibleRunsError):
        read_report(tmp_path / "report.json")


def test_to_jsonable_handles_physics_types():
    value = {
        "z": 1j + 1e-20,
        "inf": float("inf"),
        "nan": float("nan"),
        "verdict": Verdict.NON_CAUSAL,
        "arr": np.array([1.5, 2.5]),
        "n": np.int64(3),
        "ok": np.bool_(True),
    }
    out = to_jsonable(value)
    assert out["z"] == [1e-20, 1.0]
    assert out["inf"] == "inf" and out["nan"] == "nan"
    assert out["verdict"] == "NonCausal"
    assert out["arr"] == [1.5, 2.5]
    assert out["n"] == 3 and out["ok"] is True
    json.dumps(out)


def test_complex_rounded_to_twelve_digits():
    assert to_jsonable(complex(0.1234567890123456, 0.0)) == [0.123456789012, 0.0]


def test_pole_report_dict_layout():
    report = PoleReport("ald", [(0j, 2), (1j, 1)], Verdict.NON_CAUSAL, [1j])
    out = pole_report_dict(report)
    assert out["poles"] == [[[0.0, 0.0], 2], [[0.0, 1.0], 1]]
    assert out["offending_poles"] == [[0.0, 1.0]]
    assert out["units"] == "1/tau_e"


def test_report_bytes_are_deterministic(tmp_path):
    report = ComparisonReport("a", "b", "max_position_deviation", values={"z": 1.0, "a": 2.0}, passed=True)
    first = write_report(tmp_path / "one.json", report).read_bytes()
    second = write_report(tmp_path / "two.json", report).read_bytes()
    assert first == second
    assert read_report(tmp_path / "one.json")["values"] == {"a": 2.0, "z": 1.0}


def test_hash_ignores_key_order():
    assert canonical_json({"b": 1, "a": [1, 2]}) == '{"a":[1,2],"b":1}'
    assert sha256_of({"b": 1, "a": 2}) == sha256_of({"a": 2, "b": 1})
