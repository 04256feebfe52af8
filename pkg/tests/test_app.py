import json

import pytest

from app import main
from core.exceptions import EXIT_ERROR, EXIT_OK, EXIT_VERDICT


def test_run_success(scenario_path, out_dir):
    code = main(["run", str(scenario_path("fo_constant_force")), "--out-dir", str(out_dir)])
    assert code == EXIT_OK
    assert (out_dir / "fo_constant_force" / "report.json").is_file()


def test_runaway_exits_with_verdict(scenario_path, out_dir):
    assert main(["run", str(scenario_path("ald_runaway")), "--out-dir", str(out_dir)]) == EXIT_VERDICT


def test_bad_scenario_exits_with_error(tmp_path, out_dir):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"version": 1, "name": "bad", "model": {"kind": "fo"}}))
    assert main(["run", str(bad), "--out-dir", str(out_dir)]) == EXIT_ERROR


def test_cutoff_above_bound_exits_with_verdict(tmp_path, out_dir):
    path = tmp_path / "too_big.json"
    path.write_text(json.dumps({
        "version": 1,
        "name": "too_big",
        "model": {"kind": "fo_cutoff"},
        "particle": {"cutoff_ratio": 2.0},
        "force": {"kind": "zero"},
        "integrator": {"t_span_s": [0.0, 1e-21]},
    }))
    assert main(["run", str(path), "--out-dir", str(out_dir)]) == EXIT_VERDICT


def test_poles_prints_table(capsys):
    assert main(["poles", "ald"]) == EXIT_OK
    table = json.loads(capsys.readouterr().out)
    assert table[0]["verdict"] == "NonCausal"
    assert table[0]["offending_poles"][0][1] == pytest.approx(1.0)


def test_poles_strict_causal(capsys):
    assert main(["poles", "ald", "--strict-causal"]) == EXIT_VERDICT
    assert main(["poles", "fo", "--strict-causal"]) == EXIT_OK


def test_poles_series_and_oscillator(capsys):
    assert main(["poles", "series", "--order", "5"]) == EXIT_OK
    series = json.loads(capsys.readouterr().out)[0]
    assert series["model"] == "series(5)"
    assert main(["poles", "oscillator", "--spring-constant", "8.2e3"]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)[0]["verdict"] == "Causal"


def test_poles_all_with_cutoff(capsys):
    assert main(["poles", "all", "--order", "6", "--cutoff-ratio", "0.5"]) == EXIT_OK
    models = [row["model"] for row in json.loads(capsys.readouterr().out)]
    assert "ald" in models and "series(6)" in models
    assert any(m.startswith("fo_cutoff") for m in models)


def test_compare_self(scenario_path, out_dir, tmp_path, capsys):
    main(["run", str(scenario_path("fo_constant_force")), "--out-dir", str(out_dir)])
    capsys.readouterr()
    run = out_dir / "fo_constant_force"
    out = tmp_path / "cmp.json"
    code = main(["compare", str(run), str(run), "--metric", "max_position_deviation", "--out", str(out)])
    assert code == EXIT_OK
    assert json.loads(out.read_text())["values"]["max_abs_cm"] == 0.0
    assert json.loads(capsys.readouterr().out)["metric"] == "max_position_deviation"


def test_compare_missing_run_exits_with_error(tmp_path):
    assert main(["compare", str(tmp_path / "a"), str(tmp_path / "b"), "--metric", "pole_tables"]) == EXIT_ERROR


def test_unknown_command_is_argparse_error():
    with pytest.raises(SystemExit):
        main(["integrate"])
