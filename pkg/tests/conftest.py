import json

import pytest

from nltr.config import default_config
from nltr.sweeps import surfaces_for

ACCEPTANCE_LINES: list = []

SMALL_GRID = {"f_start": 0.7e9, "f_stop": 1.4e9, "f_points": 8,
              "p_start": -40.0, "p_stop": 30.0, "p_points": 15}


@pytest.fixture(scope="session")
def cfg():
    return default_config()


@pytest.fixture(scope="session")
def surfaces(cfg):
    """Default-grid NC surfaces (built once, then read from the disk cache)."""
    return surfaces_for(cfg)


@pytest.fixture(scope="session")
def small_cache(tmp_path_factory):
    return tmp_path_factory.mktemp("cache")


@pytest.fixture
def small_config(tmp_path, monkeypatch, small_cache):
    """Config file on a coarse surface grid, with a test-session cache directory."""
    monkeypatch.setenv("NLTR_CACHE_DIR", str(small_cache))
    path = tmp_path / "small.json"
    path.write_text(json.dumps({"surface_grid": SMALL_GRID,
                                "sweeps": {"freq": {"n": 11}, "power": {"n": 15}},
                                "output_dir": str(tmp_path / "out")}))
    return path


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
