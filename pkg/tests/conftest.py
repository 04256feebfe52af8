from pathlib import Path

import pytest

from core.physics import Constants, Units, electron

SCENARIO_DIR = Path(__file__).resolve().parents[1] / "scenarios"


@pytest.fixture
def consts():
    return Constants()


@pytest.fixture
def particle(consts):
    return electron(consts)


@pytest.fixture
def structured(consts):
    """Electron at the causal bound, Omega = 1/tau_e (zero bare mass)."""
    point = electron(consts)
    return electron(consts, cutoff_omega=1.0 / point.tau_e)


@pytest.fixture
def units(particle):
    return Units.for_particle(particle)


@pytest.fixture
def out_dir(tmp_path):
    path = tmp_path / "runs"
    path.mkdir()
    return path


@pytest.fixture
def scenario_path():
    def _path(name: str) -> Path:
        return SCENARIO_DIR / f"{name}.json"

    return _path
