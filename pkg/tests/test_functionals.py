"""Unit tests for the `functionals` module."""

import math

import numpy as np
import pytest

from blowup.exceptions import InvalidGrid, InvalidParameter
from blowup.functionals import (
    Criterion,
    FunctionalReadout,
    E0,
    H_total,
    I_term,
    J_term,
    WeightKind,
    blowup_criterion,
    boundedness_check,
    check_hardy_sobolev,
    clustered_y_grid,
    hardy_sobolev_sweep,
    hnorm,
    monotonicity_report,
    soliton_energy,
    weighted_integral,
)
from blowup.model import make_equation
from blowup.similarity import SimilarityFrame, WTrajectory, evolve_w, uniform_y_grid
from blowup.solitons import kappa, kappa0, kappa_dy


def constant_frame(y_grid: np.ndarray, value: float, ws: float = 0.0, s: float = 0.0):
    return SimilarityFrame(
        r0=0.0,
        T0=1.0,
        s=s,
        y_grid=y_grid,
        w=np.full_like(y_grid, value),
        ws=np.full_like(y_grid, ws),
        wy=np.zeros_like(y_grid),
    )


def make_readout(s: float, dissipation: float, E0_value: float = 1.0):
    return FunctionalReadout(
        s=s, E0=E0_value, I=0.0, J=0.0, E=E0_value, H=E0_value, dissipation=dissipation
    )


class TestQuadratureGrids:
    @pytest.mark.parametrize("kind", ["sine", "argth"])
    def test_symmetric_with_cutoff(self, kind: str) -> None:
        grid = clustered_y_grid(101, cutoff=1e-3, kind=kind)
        np.testing.assert_array_equal(grid, -grid[::-1])
        assert grid[-1] == pytest.approx(1 - 1e-3)
        assert np.all(np.diff(grid) > 0)

    def test_clusters_toward_the_edges(self, sine_grid) -> None:
        spacing = np.diff(sine_grid)
        assert spacing[0] < spacing[len(spacing) // 2]

    def test_unknown_kind(self) -> None:
        with pytest.raises(ValueError):
            clustered_y_grid(11, kind="chebyshev")

    @pytest.mark.parametrize(
        "n_points, cutoff", ids=["cutoff", "size"], argvalues=[(11, 1.5), (2, 1e-3)]
    )
    def test_invalid(self, n_points: int, cutoff: float) -> None:
        with pytest.raises(InvalidGrid):
            clustered_y_grid(n_points, cutoff=cutoff)


class TestWeightedIntegral:
    @pytest.mark.parametrize(
        "p, expected",
        ids=["p=2", "p=3", "p=5"],
        argvalues=[(2.0, 16 / 15), (3.0, 4 / 3), (5.0, math.pi / 2)],
    )
    def test_weight_mass(self, sine_grid, p: float, expected: float) -> None:
        assert weighted_integral(1.0, sine_grid, p) == pytest.approx(expected, rel=1e-4)

    def test_weight_kinds(self, sine_grid) -> None:
        # For p = 3 the weights are 1 - y², (1 - y²)² and 1
        over = weighted_integral(1.0, sine_grid, 3.0, WeightKind.RHO_OVER)
        times = weighted_integral(1.0, sine_grid, 3.0, WeightKind.RHO_TIMES)
        assert over == pytest.approx(2.0, rel=1e-4)
        assert times == pytest.approx(16 / 15, rel=1e-4)

    def test_odd_integrand_vanishes(self, sine_grid) -> None:
        integral = weighted_integral(sine_grid**3, sine_grid, 3.0)
        assert integral == pytest.approx(0.0, abs=1e-12)


class TestEnergies:
    @pytest.mark.parametrize("p", ids=["p=2", "p=3", "p=5"], argvalues=[2.0, 3.0, 5.0])
    def test_kappa0_energy(self, sine_grid, p: float) -> None:
        frame = constant_frame(sine_grid, kappa0(p))
        assert E0(frame, p) == pytest.approx(soliton_energy(p), rel=1e-3)

    @pytest.mark.parametrize(
        "d", ids=["d=-0.5", "d=0.5", "d=0.8"], argvalues=[-0.5, 0.5, 0.8]
    )
    def test_every_soliton_has_the_same_energy(self, argth_grid, d: float) -> None:
        frame = SimilarityFrame(
            r0=0.0,
            T0=1.0,
            s=0.0,
            y_grid=argth_grid,
            w=np.asarray(kappa(3.0, d, argth_grid)),
            ws=np.zeros_like(argth_grid),
            wy=np.asarray(kappa_dy(3.0, d, argth_grid)),
        )
        assert E0(frame, 3.0) == pytest.approx(soliton_energy(3.0), rel=1e-3)

    def test_klein_gordon_perturbation_term(self, sine_grid) -> None:
        spec = make_equation("klein_gordon", p=3.0)
        frame = constant_frame(sine_grid, kappa0(3.0))
        assert I_term(frame, 1.0, spec) == pytest.approx(math.exp(-2) * 4 / 3, rel=1e-4)

    def test_unperturbed_term_vanishes(self, sine_grid, pure_cubic) -> None:
        frame = constant_frame(sine_grid, kappa0(3.0))
        assert I_term(frame, 1.0, pure_cubic) == 0.0

    def test_cross_term(self, sine_grid, pure_cubic) -> None:
        frame = constant_frame(sine_grid, kappa0(3.0), ws=1.0)
        expected = -math.exp(-pure_cubic.gamma * 2.0) * math.sqrt(2) * 4 / 3
        assert J_term(frame, 2.0, pure_cubic) == pytest.approx(expected, rel=1e-4)

    def test_total(self, sine_grid, pure_cubic) -> None:
        frame = constant_frame(sine_grid, kappa0(3.0), ws=1.0)
        readout = H_total(frame, 2.0, pure_cubic, mu=3.0)
        gamma = pure_cubic.gamma
        assert readout.E == pytest.approx(readout.E0 + readout.I + readout.J)
        assert readout.H == pytest.approx(
            readout.E * math.exp(3 / gamma * math.exp(-2 * gamma))
            + 3.0 * math.exp(-4 * gamma)
        )
        assert readout.dissipation == pytest.approx(2.0, rel=1e-4)

    def test_negative_mu(self, sine_grid, pure_cubic) -> None:
        with pytest.raises(InvalidParameter):
            H_total(constant_frame(sine_grid, 1.0), 0.0, pure_cubic, mu=-1.0)


class TestMonotonicity:
    @pytest.mark.parametrize("preset", ["pure_power", "klein_gordon"])
    def test_no_violations_along_a_solution(self, preset: str) -> None:
        spec = make_equation(preset, p=3.0)
        y = uniform_y_grid(201)
        w0 = kappa0(3.0) - 0.05 * (1 + 0.4 * y**2)
        w_trajectory = evolve_w(spec, 0.0, 1.0, w0, np.zeros_like(y), y, (1.0, 3.0))
        report = monotonicity_report(w_trajectory, spec)
        assert report.violations == []
        assert report.H_values[-1] < report.H_values[0]
        assert report.fitted_C >= 0
        assert report.mu >= 1.0

    def test_growing_energy_is_flagged(self, sine_grid, pure_cubic) -> None:
        s_values = np.linspace(10.0, 11.0, 21)
        frames = tuple(
            constant_frame(sine_grid, 0.5 * (s - 9.0), s=s) for s in s_values
        )
        w_trajectory = WTrajectory(frames=frames, spec=pure_cubic, r0=0.0, T0=1.0)
        report = monotonicity_report(w_trajectory, pure_cubic, mu=0.0)
        assert len(report.violations) > 0
        assert report.max_violation > report.tolerance
        assert report.mu == 0.0


class TestCriterion:
    @pytest.mark.parametrize(
        "H, expected",
        ids=["positive", "zero", "rounding", "negative"],
        argvalues=[
            (1.0, Criterion.CONSISTENT),
            (0.0, Criterion.CONSISTENT),
            (-1e-12, Criterion.CONSISTENT),
            (-1e-3, Criterion.VIOLATES_CRITERION),
        ],
    )
    def test_sign_of_H(self, H: float, expected: Criterion) -> None:
        readout = FunctionalReadout(
            s=0.0, E0=0.0, I=0.0, J=0.0, E=0.0, H=H, dissipation=0.0
        )
        assert blowup_criterion(readout) == expected


class TestNorms:
    def test_hnorm_of_kappa0(self, sine_grid) -> None:
        frame = constant_frame(sine_grid, kappa0(3.0))
        assert hnorm(frame, 3.0) == pytest.approx(math.sqrt(8 / 3), rel=1e-4)

    def test_hardy_sobolev_ratio_of_constant(self, sine_grid) -> None:
        ratio = check_hardy_sobolev(
            np.ones_like(sine_grid), np.zeros_like(sine_grid), sine_grid, 3.0
        )
        assert ratio == pytest.approx(1.5, rel=1e-4)

    def test_hardy_sobolev_ratio_of_zero(self, sine_grid) -> None:
        zeros = np.zeros_like(sine_grid)
        assert math.isnan(check_hardy_sobolev(zeros, zeros, sine_grid, 3.0))

    def test_hardy_sobolev_sweep(self, sine_grid) -> None:
        ratio = hardy_sobolev_sweep(3.0, sine_grid, n_functions=10, seed=1)
        assert 0 < ratio < 10
        assert ratio == hardy_sobolev_sweep(3.0, sine_grid, n_functions=10, seed=1)


class TestBoundedness:
    def test_decaying_dissipation(self) -> None:
        readouts = [make_readout(s, math.exp(-s)) for s in np.linspace(0.0, 4.0, 81)]
        report = boundedness_check(readouts, window=1.0)
        assert report.dissipation_decays
        assert report.tail_dissipation < report.head_dissipation
        assert report.E0_bound == 1.0

    def test_growing_dissipation(self) -> None:
        readouts = [make_readout(s, s) for s in np.linspace(0.0, 4.0, 81)]
        assert not boundedness_check(readouts).dissipation_decays

    def test_too_short(self) -> None:
        readouts = [make_readout(s, 1.0) for s in np.linspace(0.0, 1.5, 31)]
        with pytest.raises(InvalidParameter):
            boundedness_check(readouts, window=1.0)
