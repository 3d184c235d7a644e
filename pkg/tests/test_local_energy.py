"""Unit tests for the `local_energy` module."""

import math

import numpy as np
import pytest

from blowup.exceptions import DomainCoverage, InvalidParameter
from blowup.local_energy import (
    E_bar,
    local_energy_readouts,
    surface_measure,
    verify_energy_lemma,
)
from blowup.model import make_equation
from blowup.radial_solver import Controls, RadialGrid, evolve, make_initial_data


@pytest.fixture(scope="module")
def small_data_run(pure_cubic):
    grid = RadialGrid(r_min=-6.0, r_max=6.0, n_points=241)
    initial_data = make_initial_data(grid, kind="gaussian", amplitude=0.5)
    return evolve(pure_cubic, initial_data, grid, Controls(t_end=0.9))


def test_surface_measure() -> None:
    assert surface_measure(2) == pytest.approx(2 * math.pi)


class TestEBar:
    grid = RadialGrid(r_min=-2.0, r_max=2.0, n_points=401)

    @pytest.mark.parametrize("t", ids=["t=0", "t=0.5"], argvalues=[0.0, 0.5])
    def test_kinetic_energy_in_one_dimension(self, pure_cubic, t: float) -> None:
        u, ut = np.zeros(401), np.ones(401)
        assert E_bar(u, ut, self.grid, t, 1.0, pure_cubic) == pytest.approx(1 - t)

    def test_kinetic_energy_in_three_dimensions(self) -> None:
        spec = make_equation("pure_power", p=2.0, N=3)
        grid = RadialGrid(r_min=1e-3, r_max=2.0, n_points=2001)
        u, ut = np.zeros(2001), np.ones(2001)
        energy = E_bar(u, ut, grid, 0.0, 1.0, spec)
        assert energy == pytest.approx(2 * math.pi / 3, rel=1e-5)

    @pytest.mark.parametrize(
        "lam, expected",
        ids=["lambda=1", "lambda=0.5"],
        argvalues=[(1.0, 0.5), (0.5, -0.25)],
    )
    def test_dilated_klein_gordon_term(self, lam: float, expected: float) -> None:
        spec = make_equation("klein_gordon", p=3.0)
        u, ut = np.ones(401), np.zeros(401)
        assert E_bar(u, ut, self.grid, 0.0, lam, spec) == pytest.approx(expected)

    def test_grid_must_cover_the_ball(self, pure_cubic) -> None:
        grid = RadialGrid(r_min=-0.5, r_max=0.5, n_points=11)
        with pytest.raises(DomainCoverage):
            E_bar(np.zeros(11), np.zeros(11), grid, 0.0, 1.0, pure_cubic)

    @pytest.mark.parametrize(
        "t, lam", ids=["late", "no-dilation"], argvalues=[(1.0, 1.0), (0.0, 0.0)]
    )
    def test_invalid(self, pure_cubic, t: float, lam: float) -> None:
        with pytest.raises(InvalidParameter):
            E_bar(np.zeros(401), np.zeros(401), self.grid, t, lam, pure_cubic)


class TestEnergyLemma:
    def test_readouts(self, small_data_run, pure_cubic) -> None:
        readouts = local_energy_readouts(small_data_run, 1.0, pure_cubic)
        assert readouts[0].t == 0.0
        assert readouts[-1].t == pytest.approx(0.9)
        assert readouts[0].boundary_flux_integral == 0.0
        boundary = [readout.boundary_flux_integral for readout in readouts]
        assert np.all(np.diff(boundary) >= 0)

    def test_inequality_holds(self, small_data_run, pure_cubic) -> None:
        report = verify_energy_lemma(small_data_run, 1.0, pure_cubic)
        assert report.violations == []
        assert report.fitted_C >= 0
        assert report.additive_term == 1.0

    def test_invalid_dilation(self, small_data_run, pure_cubic) -> None:
        with pytest.raises(InvalidParameter):
            verify_energy_lemma(small_data_run, 2.0, pure_cubic)
