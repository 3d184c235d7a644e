"""Unit tests for the `geometry` module."""

import math

import numpy as np
import pytest

from blowup.exceptions import InsufficientRange, InvalidParameter
from blowup.geometry import (
    SignHint,
    characteristic_brackets,
    classify_point,
    cone_test,
    consistency_flags,
    corner_derivative_check,
    corner_fit,
    corner_graph,
    sign_rule,
    speed_bound_check,
)
from blowup.model import make_equation
from blowup.radial_solver import (
    BlowupGraph,
    PointClass,
    RadialGrid,
    RadialTrajectory,
    Status,
    estimate_blowup_time,
)

SIGN_CHANGE = np.array([-1.0, -0.5, 0.5, 1.0])


def make_graph(r: np.ndarray, T: np.ndarray) -> BlowupGraph:
    return BlowupGraph(
        r_samples=r,
        T_estimates=T,
        fit_quality=np.ones_like(r),
        classification=tuple(PointClass.UNKNOWN for _ in r),
    )


def make_trajectory(u_last: np.ndarray, status: Status) -> RadialTrajectory:
    """A two-sample trajectory on [-1.5, 1.5] whose last sample is `u_last`."""
    grid = RadialGrid(r_min=-1.5, r_max=1.5, n_points=u_last.size)
    u = np.stack([np.ones_like(u_last), u_last])
    return RadialTrajectory(
        grid=grid,
        spec=make_equation("pure_power"),
        times=np.array([0.0, 1.0]),
        u=u,
        ut=np.zeros_like(u),
        status=status,
        amplitude_history=np.max(np.abs(u), axis=1),
    )


class TestClassifyPoint:
    @pytest.mark.parametrize(
        "series, expected",
        ids=["one-soliton", "two-solitons", "oscillating", "too-short"],
        argvalues=[
            ([2.0, 1.5, 4 / 3, 4 / 3, 4 / 3], PointClass.NON_CHARACTERISTIC),
            ([3.0, 2.8, 8 / 3, 8 / 3, 8 / 3], PointClass.CHARACTERISTIC_CANDIDATE),
            ([1.0, 2.0, 1.0, 2.0, 1.0, 2.0], PointClass.UNKNOWN),
            ([4 / 3, 4 / 3], PointClass.UNKNOWN),
        ],
    )
    def test_energy_levels(self, series: list, expected: PointClass) -> None:
        assert classify_point(series, 3.0) == expected

    def test_non_finite_tail(self) -> None:
        assert classify_point([1.0, 1.0, math.nan, 1.0], 3.0) == PointClass.UNKNOWN


class TestConeTest:
    r = np.linspace(-1.0, 1.0, 41)

    def test_flat_graph(self) -> None:
        assert cone_test(make_graph(self.r, np.ones_like(self.r)), 0.0, delta0=0.5)

    def test_light_cone_corner(self) -> None:
        graph = make_graph(self.r, 1 - np.abs(self.r))
        assert not cone_test(graph, 0.0, delta0=0.5)
        assert not cone_test(graph, 0.0, delta0=0.99)

    def test_window(self) -> None:
        T = np.where(np.abs(self.r) < 0.5, 1.0, 0.0)
        graph = make_graph(self.r, T)
        assert cone_test(graph, 0.0, delta0=0.5, window=0.4)
        assert not cone_test(graph, 0.0, delta0=0.5)

    @pytest.mark.parametrize("delta0", ids=["zero", "one"], argvalues=[0.0, 1.0])
    def test_invalid_slope(self, delta0: float) -> None:
        with pytest.raises(InvalidParameter):
            cone_test(make_graph(self.r, np.ones_like(self.r)), 0.0, delta0=delta0)

    def test_point_outside_the_graph(self) -> None:
        with pytest.raises(InsufficientRange):
            cone_test(make_graph(self.r, np.ones_like(self.r)), 2.0, delta0=0.5)


class TestCornerFit:
    @pytest.mark.parametrize(
        "p, k, side",
        ids=["p=3-k=2-right", "p=3-k=3-left", "p=2-k=2-right", "p=5-k=2-left"],
        argvalues=[
            (3.0, 2, "right"),
            (3.0, 3, "left"),
            (2.0, 2, "right"),
            (5.0, 2, "left"),
        ],
    )
    def test_recovers_the_exponent(self, p: float, k: int, side: str) -> None:
        graph = corner_graph(r0=0.3, T0=1.0, p=p, k=k, amplitude=0.5)
        fit = corner_fit(graph, r0=0.3, p=p, k=k, side=side)
        assert fit.exponent_fit == pytest.approx(fit.exponent_theory, rel=1e-6)
        assert fit.exponent_theory == (k - 1) * (p - 1) / 2
        assert fit.amplitude == pytest.approx(0.5, rel=1e-6)
        assert fit.fit_quality == pytest.approx(1.0)

    def test_derivative_check(self) -> None:
        graph = corner_graph(r0=0.0, T0=1.0, p=3.0, k=2)
        for side in ("left", "right"):
            fit = corner_fit(graph, r0=0.0, p=3.0, k=2, side=side)
            assert corner_derivative_check(graph, fit) < 0.02

    def test_no_corner(self) -> None:
        graph = corner_graph(r0=0.0, T0=1.0, p=3.0, k=1)
        with pytest.raises(InsufficientRange):
            corner_fit(graph, r0=0.0, p=3.0, k=1)

    def test_narrow_window(self) -> None:
        graph = corner_graph(
            r0=0.0, T0=1.0, p=3.0, k=2, x_values=np.geomspace(1e-3, 5e-3, 20)
        )
        with pytest.raises(InsufficientRange):
            corner_fit(graph, r0=0.0, p=3.0, k=2)

    def test_unknown_side(self) -> None:
        graph = corner_graph(r0=0.0, T0=1.0, p=3.0, k=2)
        with pytest.raises(ValueError):
            corner_fit(graph, r0=0.0, p=3.0, k=2, side="above")

    def test_invalid_distances(self) -> None:
        with pytest.raises(InvalidParameter):
            corner_graph(r0=0.0, T0=1.0, p=3.0, k=2, x_values=np.array([0.5, 1.5]))


class TestSpeedBound:
    def test_ode_blowup_rate(self, blowup_run) -> None:
        T_r0, _ = estimate_blowup_time(blowup_run, r_index=50)
        check = speed_bound_check(blowup_run, r0=0.0, T_r0=T_r0, p=3.0, k=1)
        assert check.consistent
        assert check.C4_fit >= 1
        assert np.all(check.lower_ratio >= 1 - 1e-12)
        assert np.all(check.upper_ratio <= 1 + 1e-12)

    def test_invalid_window(self, blowup_run) -> None:
        with pytest.raises(InvalidParameter):
            speed_bound_check(blowup_run, r0=0.0, T_r0=2.0, p=3.0, k=1, tau_max=1.0)

    def test_no_times_in_window(self, blowup_run) -> None:
        with pytest.raises(InsufficientRange):
            speed_bound_check(blowup_run, r0=0.0, T_r0=-1.0, p=3.0, k=1)


class TestSignRule:
    def test_positive_blowup(self, blowup_run) -> None:
        hint = sign_rule(blowup_run, r_interval=(-1.0, 1.0))
        assert hint == SignHint.NON_CHARACTERISTIC_BY_SIGN

    def test_negative_solution(self) -> None:
        trajectory = make_trajectory(-np.ones(4), Status.BLOWUP_DETECTED)
        assert sign_rule(trajectory, r_interval=(-1.0, 1.0), t0=0.5) is not None

    def test_sign_change(self) -> None:
        trajectory = make_trajectory(SIGN_CHANGE, Status.BLOWUP_DETECTED)
        assert sign_rule(trajectory, r_interval=(-1.5, 1.5)) is None

    def test_no_blowup(self) -> None:
        trajectory = make_trajectory(np.ones(4), Status.COMPLETED)
        assert sign_rule(trajectory, r_interval=(-1.5, 1.5)) is None


class TestBrackets:
    def test_sign_flip(self) -> None:
        trajectory = make_trajectory(SIGN_CHANGE, Status.BLOWUP_DETECTED)
        graph = make_graph(trajectory.grid.r, np.ones(4))
        assert characteristic_brackets(trajectory, graph) == [(-0.5, 0.5)]

    def test_poor_fits_are_skipped(self) -> None:
        trajectory = make_trajectory(SIGN_CHANGE, Status.BLOWUP_DETECTED)
        graph = BlowupGraph(
            r_samples=trajectory.grid.r,
            T_estimates=np.ones(4),
            fit_quality=np.array([1.0, 0.5, 1.0, 1.0]),
            classification=tuple(PointClass.UNKNOWN for _ in range(4)),
        )
        assert characteristic_brackets(trajectory, graph) == [(-1.5, 0.5)]


class TestConsistencyFlags:
    def test_agreement(self) -> None:
        classes = [PointClass.NON_CHARACTERISTIC, PointClass.CHARACTERISTIC_CANDIDATE]
        hints = [SignHint.NON_CHARACTERISTIC_BY_SIGN, None]
        assert consistency_flags(classes, hints) == []

    def test_length_mismatch(self) -> None:
        with pytest.raises(ValueError):
            consistency_flags([PointClass.UNKNOWN], [])
