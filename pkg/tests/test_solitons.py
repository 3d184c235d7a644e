"""Unit tests for the `solitons` module."""

import math

import numpy as np
import pytest

from blowup import solitons
from blowup.exceptions import FitFailure, InvalidParameter
from blowup.solitons import (
    SolitonParams,
    decompose,
    decompose_frames,
    estimate_k_from_energy,
    fit_single,
    kappa,
    kappa0,
    kappa_dy,
    seed_centers,
    soliton_frame,
    soliton_lipschitz_ratios,
)


class TestSolitonParams:
    @pytest.mark.parametrize(
        "d, theta",
        ids=["d=1", "d=-2", "theta=0"],
        argvalues=[(1.0, 1), (-2.0, 1), (0.0, 0)],
    )
    def test_invalid(self, d: float, theta: int) -> None:
        with pytest.raises(InvalidParameter):
            SolitonParams(d=d, theta=theta)

    def test_center(self) -> None:
        assert SolitonParams(d=-math.tanh(0.5), theta=1).zeta == pytest.approx(0.5)


class TestProfiles:
    @pytest.mark.parametrize("p", ids=["p=2", "p=3", "p=5"], argvalues=[2.0, 3.0, 5.0])
    def test_centred_soliton_is_kappa0(self, p: float) -> None:
        y = np.linspace(-0.9, 0.9, 7)
        np.testing.assert_allclose(kappa(p, 0.0, y), kappa0(p))

    @pytest.mark.parametrize("d", ids=["d=-0.6", "d=0.3"], argvalues=[-0.6, 0.3])
    def test_derivative(self, d: float) -> None:
        y = np.linspace(-0.9, 0.9, 19)
        step = 1e-6
        difference = (kappa(3.0, d, y + step) - kappa(3.0, d, y - step)) / (2 * step)
        np.testing.assert_allclose(kappa_dy(3.0, d, y), difference, rtol=1e-6)

    @pytest.mark.parametrize("p", ids=["p=2", "p=3"], argvalues=[2.0, 3.0])
    def test_bump_in_argth_coordinates(self, p: float) -> None:
        zeta = 0.7
        xi = np.linspace(-3.0, 3.0, 13)
        y = np.tanh(xi)
        W = kappa(p, -math.tanh(zeta), y) * (1 - y**2) ** (1 / (p - 1))
        expected = kappa0(p) / np.cosh(xi - zeta) ** (2 / (p - 1))
        np.testing.assert_allclose(W, expected, rtol=1e-10)

    def test_alternating_signs(self, argth_grid) -> None:
        frame = soliton_frame(3.0, theta1=-1, zetas=[-3.0, 3.0], y_grid=argth_grid)
        seeds = seed_centers(frame, 3.0)
        assert [sign for _, sign in seeds] == [-1, 1]
        assert seeds[0][0] == pytest.approx(-3.0, abs=0.02)
        assert seeds[1][0] == pytest.approx(3.0, abs=0.02)


class TestFitSingle:
    @pytest.mark.parametrize(
        "d, theta", ids=["positive", "negative"], argvalues=[(0.3, 1), (-0.5, -1)]
    )
    def test_recovers_the_soliton(self, argth_grid, d: float, theta: int) -> None:
        frame = soliton_frame(
            3.0, theta1=theta, zetas=[-math.atanh(d)], y_grid=argth_grid
        )
        params, residual = fit_single(frame, 3.0)
        assert params.theta == theta
        assert params.d == pytest.approx(d, abs=1e-5)
        assert residual < 1e-4


class TestDecompose:
    @pytest.mark.parametrize(
        "theta1, zetas",
        ids=["one", "two", "three"],
        argvalues=[(1, [0.4]), (1, [-2.5, 2.5]), (-1, [-3.0, 0.0, 3.0])],
    )
    def test_recovers_the_centers(self, argth_grid, theta1: int, zetas: list) -> None:
        frame = soliton_frame(3.0, theta1=theta1, zetas=zetas, y_grid=argth_grid)
        decomposition = decompose(frame, 3.0)
        assert decomposition.converged
        assert decomposition.k == len(zetas)
        assert decomposition.theta1 == theta1
        np.testing.assert_allclose(decomposition.zetas, zetas, atol=1e-4)
        assert decomposition.signs[0] == theta1

    def test_energy_count_of_separated_solitons(self, argth_grid) -> None:
        frame = soliton_frame(3.0, theta1=1, zetas=[-2.5, 2.5], y_grid=argth_grid)
        assert decompose(frame, 3.0).k_energy == 2

    def test_null_frame(self, argth_grid) -> None:
        frame = soliton_frame(3.0, theta1=1, zetas=[], y_grid=argth_grid)
        decomposition = decompose(frame, 3.0)
        assert decomposition.k == 0
        assert decomposition.converged

    def test_invalid_k_max(self, argth_grid) -> None:
        frame = soliton_frame(3.0, theta1=1, zetas=[0.0], y_grid=argth_grid)
        with pytest.raises(InvalidParameter):
            decompose(frame, 3.0, k_max=6)

    def test_non_finite_residuals(self, argth_grid, monkeypatch) -> None:
        frame = soliton_frame(3.0, theta1=1, zetas=[0.0], y_grid=argth_grid)
        monkeypatch.setattr(
            solitons,
            "_fit_k",
            lambda frame, p, k, theta1, centers: (
                tuple(float(i) for i in range(k)),
                math.nan,
            ),
        )
        with pytest.raises(FitFailure):
            decompose(frame, 3.0, k_max=2)

    def test_frames(self, argth_grid) -> None:
        frames = [
            soliton_frame(3.0, theta1=1, zetas=[zeta], y_grid=argth_grid, s=s)
            for s, zeta in enumerate([0.0, 0.5])
        ]
        decompositions = decompose_frames(frames, 3.0)
        assert [decomposition.k for decomposition in decompositions] == [1, 1]


class TestEnergyCount:
    @pytest.mark.parametrize(
        "ratio, expected",
        ids=["none", "one", "three"],
        argvalues=[(0.2, 0), (1.1, 1), (2.9, 3)],
    )
    def test_rounding(self, ratio: float, expected: int) -> None:
        assert estimate_k_from_energy(ratio * 4 / 3, 3.0) == expected

    def test_non_finite(self) -> None:
        with pytest.raises(InvalidParameter):
            estimate_k_from_energy(math.nan, 3.0)


def test_soliton_map_is_lipschitz_in_the_center(sine_grid) -> None:
    pairs = np.array([[0.0, 0.1], [0.5, 0.6], [-0.9, 0.9], [0.8, 0.9]])
    ratios = soliton_lipschitz_ratios(3.0, pairs, sine_grid)
    assert np.all(ratios > 0)
    assert np.all(ratios < 10)
