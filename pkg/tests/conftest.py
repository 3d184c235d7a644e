"""General functions and fixtures related to `pytest`."""

import sys
from pathlib import Path
from typing import Callable, Generator

import numpy as np
import pytest
from hydra import compose, initialize
from omegaconf import DictConfig

from blowup.functionals import clustered_y_grid
from blowup.model import EquationSpec, make_equation
from blowup.radial_solver import (
    Controls,
    RadialGrid,
    RadialTrajectory,
    evolve,
    make_initial_data,
)

# Initialise Hydra
initialize(config_path="../config", version_base=None)


def pytest_configure() -> None:
    """Set a global flag when `pytest` is being run."""
    setattr(sys, "_called_from_test", True)


def pytest_unconfigure() -> None:
    """Unset the global flag when `pytest` is finished."""
    delattr(sys, "_called_from_test")


@pytest.fixture(scope="session")
def make_cfg(tmp_path_factory) -> Generator[Callable[..., DictConfig], None, None]:
    """Compose small configurations writing into a temporary output root."""
    output_root = tmp_path_factory.mktemp("outputs")

    def _make_cfg(experiment: str, *overrides: str) -> DictConfig:
        return compose(
            config_name="config",
            overrides=[
                f"experiment={experiment}",
                f"dirs.output={output_root}",
                "grid.n_points=101",
                "similarity.n_points=101",
                "similarity.s_start=1.0",
                "similarity.s_end=3.0",
                "functionals.quadrature_points=801",
                "functionals.hardy_sobolev_functions=10",
                *overrides,
            ],
        )

    yield _make_cfg


@pytest.fixture(scope="session")
def cfg(make_cfg) -> Generator[DictConfig, None, None]:
    yield make_cfg("simulate")


@pytest.fixture(scope="session")
def pure_cubic() -> Generator[EquationSpec, None, None]:
    yield make_equation("pure_power", p=3.0, N=1)


@pytest.fixture(scope="session")
def blowup_run(pure_cubic) -> Generator[RadialTrajectory, None, None]:
    """Constant data u = 1, which blows up everywhere at the ODE blow-up time."""
    grid = RadialGrid(r_min=-10.0, r_max=10.0, n_points=101)
    initial_data = make_initial_data(grid, kind="constant", amplitude=1.0)
    yield evolve(pure_cubic, initial_data, grid, Controls(cfl=0.5))


@pytest.fixture(scope="session")
def sine_grid() -> Generator[np.ndarray, None, None]:
    yield clustered_y_grid(2001, cutoff=1e-5, kind="sine")


@pytest.fixture(scope="session")
def argth_grid() -> Generator[np.ndarray, None, None]:
    yield clustered_y_grid(2001, cutoff=1e-5, kind="argth")


@pytest.fixture
def output_dir(tmp_path) -> Generator[Path, None, None]:
    yield tmp_path
