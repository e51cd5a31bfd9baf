"""Shared fixtures for integration tests."""

import json

import pytest

SMALL_LINE = {
    "name": "small_line",
    "n_agents": 8,
    "n_anchors": 2,
    "delta_m": 25.0,
    "r_max_m": 25.0,
    "n_elements": 9,
    "path_loss": {"kind": "free_space"},
    "monte_carlo": {"n_trials": 3, "seed": 1},
    "curves": ["vertical", "uniform_random"],
}


@pytest.fixture
def small_line():
    """A fresh copy of the small test configuration."""
    return json.loads(json.dumps(SMALL_LINE))


@pytest.fixture
def write_config(tmp_path, small_line):
    """Write the small configuration, with top-level overrides, and return its path."""

    def _write(name: str = "config.json", drop: tuple[str, ...] = (), **overrides) -> str:
        data = {**small_line, **overrides}
        for key in drop:
            data.pop(key, None)
        path = tmp_path / name
        path.write_text(json.dumps(data))
        return str(path)

    return _write


@pytest.fixture
def out_dir(tmp_path):
    """Output directory that does not exist yet."""
    return tmp_path / "out"
