"""Shared fixtures: the two reference parameter sets and their profiles"""
import json
import math

import pytest

from params import PlasmaParams
from stationary import GridRequest, solve_stationary

SQRT2 = math.sqrt(2.0)


@pytest.fixture(scope="session")
def nondegenerate_params():
    return PlasmaParams(m=1.0, R=1.0, gamma=2.0, T_inf=0.5, u_inf=-2.0, phi_b=-0.05)


@pytest.fixture(scope="session")
def degenerate_params():
    return PlasmaParams(m=1.0, R=1.0, gamma=2.0, T_inf=0.5, u_inf=-SQRT2, phi_b=0.01)


@pytest.fixture(scope="session")
def nondegenerate_profile(nondegenerate_params):
    return solve_stationary(nondegenerate_params)


@pytest.fixture(scope="session")
def degenerate_profile(degenerate_params):
    return solve_stationary(degenerate_params)


@pytest.fixture(scope="session")
def coarse_nondegenerate_profile(nondegenerate_params):
    return solve_stationary(nondegenerate_params, GridRequest(N=256))


@pytest.fixture
def output_root(tmp_path, monkeypatch):
    root = tmp_path / "out"
    monkeypatch.setenv("SHEATHLAB_OUTPUT_ROOT", str(root))
    return root


def write_config(path, params, **sections):
    payload = {"params": params}
    payload.update(sections)
    path.write_text(json.dumps(payload, indent=2))
    return path


@pytest.fixture
def degenerate_config(tmp_path):
    """Small degenerate run: N=256, t_end=2"""
    return write_config(
        tmp_path / "degenerate.json",
        {"m": 1.0, "R": 1.0, "gamma": 2.0, "T_inf": 0.5, "u_inf": -SQRT2, "phi_b": 0.01},
        grid={"N": 256},
        evolution={"t_end": 2.0, "observer_period": 0.1},
        output_prefix="degenerate",
    )
