from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from maxcond.grid import ObservationSet, make_grid
from maxcond.models import (gaussian_kernel, make_log_gaussian_model, make_max_linear_model,
                            make_moving_max_model, power_variogram)

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

TOY_PROFILES = np.array([[1.0, 0.2, 0.3], [0.2, 1.0, 0.3], [0.5, 0.5, 1.0]])


@pytest.fixture
def toy():
    return make_max_linear_model(make_grid([0.0, 1.0, 2.0]), np.ones(3), TOY_PROFILES, normalize=True)


@pytest.fixture
def toy_obs(toy):
    return ObservationSet.on(toy.grid, [0, 1], [1.3, 0.7])


@pytest.fixture
def log_gauss():
    return make_log_gaussian_model(make_grid([0.0, 1.0, 0.5]), power_variogram(1.0, 1.0))


@pytest.fixture
def moving_max():
    return make_moving_max_model(make_grid([0.5, 1.5, 2.5, 3.5, 4.5]), gaussian_kernel(0.5), (0.0, 5.0))


@pytest.fixture(scope="session")
def configs():
    return CONFIGS


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = next((m for n, m in list(sys.modules.items()) if n.endswith("test_acceptance")), None)
    lines = getattr(mod, "LINES", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
