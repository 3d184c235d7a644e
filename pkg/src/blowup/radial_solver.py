"""Integration of the radial equation up to blow-up, and the blow-up graph.

The radial equation is

    ∂ₜ²u = ∂ᵣ²u + ((N-1)/r)∂ᵣu + |u|^{p-1}u + f(u) + g(r, t, ∂ᵣu, ∂ₜu),

integrated as the first order system (u, v = ∂ₜu) with second order centred
differences in space and the classical fourth order Runge-Kutta method in time.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from enum import StrEnum
from typing import Callable

import numpy as np
from numpy.typing import NDArray
from scipy.integrate import solve_ivp
from scipy.stats import linregress
from tqdm.auto import tqdm

from .exceptions import (
    DomainTooSmall,
    InsufficientGrowth,
    InvalidGrid,
    InvalidParameter,
    NonFinite,
    PreconditionError,
    SpatialDependence,
)
from .model import EquationSpec
from .utils import make_rng

logger = logging.getLogger(__package__)


class Status(StrEnum):
    """The way an integration ended."""

    COMPLETED = "Completed"
    BLOWUP_DETECTED = "BlowupDetected"
    UNSTABLE = "Unstable"


class PointClass(StrEnum):
    """Classification of a point of the blow-up graph."""

    NON_CHARACTERISTIC = "NonCharacteristic"
    CHARACTERISTIC_CANDIDATE = "CharacteristicCandidate"
    UNKNOWN = "Unknown"


@dataclass(frozen=True)
class RadialGrid:
    """A uniform grid on [r_min, r_max].

    Args:
        r_min:
            The left end. Must be positive for N ≥ 2.
        r_max:
            The right end.
        n_points:
            The number of grid points, at least 3.

    Raises:
        InvalidGrid:
            If r_max ≤ r_min or n_points < 3.
    """

    r_min: float
    r_max: float
    n_points: int

    def __post_init__(self) -> None:
        if not self.r_max > self.r_min:
            raise InvalidGrid(f"Need r_max > r_min, got [{self.r_min}, {self.r_max}].")
        if self.n_points < 3:
            raise InvalidGrid(f"Need at least 3 grid points, got {self.n_points}.")

    @property
    def dr(self) -> float:
        """The grid spacing."""
        return (self.r_max - self.r_min) / (self.n_points - 1)

    @property
    def r(self) -> NDArray[np.float64]:
        """The grid points."""
        return np.linspace(self.r_min, self.r_max, self.n_points)

    def check_dimension(self, N: int) -> None:
        """Check that the grid avoids the origin in dimension N ≥ 2.

        Raises:
            InvalidGrid:
                If N ≥ 2 and r_min ≤ 0.
        """
        if N >= 2 and self.r_min <= 0:
            raise InvalidGrid(
                f"The grid must avoid the origin when N ≥ 2, got r_min={self.r_min}."
            )


@dataclass(frozen=True)
class Controls:
    """Numerical controls of the radial integration.

    Args:
        cfl:
            The ratio Δt/Δr of the initial step, in (0, 1].
        blowup_threshold:
            The amplitude at which blow-up is declared.
        max_steps:
            The maximal number of time steps.
        t_end:
            An optional final time.
        save_every:
            Store every `save_every`-th state. The final state is always stored.
        boundary_tolerance:
            The relative deviation of a monitored edge from its own ODE evolution at
            which a disturbance is considered to have reached the edge.
        amplitude_floor:
            The amplitude below which no step halving happens.
    """

    cfl: float = 0.5
    blowup_threshold: float = 1e8
    max_steps: int = 200_000
    t_end: float | None = None
    save_every: int = 1
    boundary_tolerance: float = 1e-8
    amplitude_floor: float = 1.0

    def __post_init__(self) -> None:
        if not 0 < self.cfl <= 1:
            raise InvalidParameter(
                f"The CFL fraction must be in (0, 1], got {self.cfl}."
            )
        if not self.blowup_threshold > 0 or not self.boundary_tolerance > 0:
            raise InvalidParameter("Thresholds and tolerances must be positive.")
        if self.max_steps < 1 or self.save_every < 1:
            raise InvalidParameter("max_steps and save_every must be positive.")


@dataclass(frozen=True)
class InitialData:
    """Initial values (u₀, u₁) sampled on a grid."""

    u0: NDArray[np.float64]
    u1: NDArray[np.float64]


@dataclass(frozen=True)
class RadialTrajectory:
    """Time-indexed samples of (u, ∂ₜu) on a radial grid.

    Args:
        grid:
            The grid.
        spec:
            The equation that was integrated.
        times:
            The strictly increasing sample times.
        u:
            The solution, of shape (len(times), n_points).
        ut:
            The time derivative, of the same shape.
        status:
            How the integration ended.
        amplitude_history:
            max|u| at every sample time.
        controls:
            The numerical controls.
    """

    grid: RadialGrid
    spec: EquationSpec
    times: NDArray[np.float64]
    u: NDArray[np.float64]
    ut: NDArray[np.float64]
    status: Status
    amplitude_history: NDArray[np.float64]
    controls: Controls = field(default_factory=Controls)

    def state(self, index: int) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        """The pair (u, ∂ₜu) at a sample index."""
        return self.u[index], self.ut[index]


@dataclass(frozen=True)
class BlowupGraph:
    """Sampled blow-up times T(r) with per-point classification."""

    r_samples: NDArray[np.float64]
    T_estimates: NDArray[np.float64]
    fit_quality: NDArray[np.float64]
    classification: tuple[PointClass, ...]

    def with_classification(self, classification: list[PointClass]) -> "BlowupGraph":
        """A copy of the graph with a new classification."""
        if len(classification) != len(self.r_samples):
            raise ValueError("The classification must have one entry per sample.")
        return replace(self, classification=tuple(classification))


@dataclass(frozen=True)
class ODETrajectory:
    """A trajectory of the scalar ODE U'' = |U|^{p-1}U + f(U) + g(0, t, 0, U')."""

    t: NDArray[np.float64]
    u: NDArray[np.float64]
    ut: NDArray[np.float64]
    blowup_time: float
    status: Status


def rk4_step(
    rhs: Callable[[float, NDArray[np.float64]], NDArray[np.float64]],
    t: float,
    y: NDArray[np.float64],
    dt: float,
) -> NDArray[np.float64]:
    """One step of the classical fourth order Runge-Kutta method.

    Args:
        rhs:
            The right-hand side F(t, y) of y' = F(t, y).
        t:
            The current time.
        y:
            The current state.
        dt:
            The step.

    Returns:
        The state at t + dt.
    """
    k1 = rhs(t, y)
    k2 = rhs(t + 0.5 * dt, y + 0.5 * dt * k1)
    k3 = rhs(t + 0.5 * dt, y + 0.5 * dt * k2)
    k4 = rhs(t + dt, y + dt * k3)
    return y + dt / 6 * (k1 + 2 * (k2 + k3) + k4)


def make_initial_data(
    grid: RadialGrid,
    kind: str,
    amplitude: float = 1.0,
    velocity: float = 0.0,
    width: float = 1.0,
    center: float = 0.0,
) -> InitialData:
    """Initial data presets.

    Args:
        grid:
            The grid.
        kind:
            One of `zero`, `constant`, `gaussian` (A·exp(-((r-c)/w)²)) and `plateaus`
            (A·tanh((r-c)/w), two plateaus of opposite signs).
        amplitude:
            The amplitude A.
        velocity:
            The scale of u₁, which has the shape of u₀/A (constant for `plateaus`).
        width:
            The width w.
        center:
            The center c.

    Returns:
        The initial data.

    Raises:
        ValueError:
            If the kind is unknown.
    """
    r = grid.r
    match kind:
        case "zero":
            shape = np.zeros_like(r)
            return InitialData(u0=shape, u1=np.zeros_like(r))
        case "constant":
            shape = np.ones_like(r)
        case "gaussian":
            shape = np.exp(-(((r - center) / width) ** 2))
        case "plateaus":
            return InitialData(
                u0=amplitude * np.tanh((r - center) / width),
                u1=velocity * np.ones_like(r),
            )
        case _:
            raise ValueError(f"Unsupported initial data: {kind!r}")
    return InitialData(u0=amplitude * shape, u1=velocity * shape)


def _radial_rhs(
    spec: EquationSpec, grid: RadialGrid
) -> Callable[[float, NDArray[np.float64]], NDArray[np.float64]]:
    """The method-of-lines right-hand side with Neumann ghost points at both edges."""
    r = grid.r
    x = np.abs(r)
    inv_dr2 = 1 / grid.dr**2
    inv_2dr = 1 / (2 * grid.dr)
    drift = (spec.N - 1) / r if spec.N >= 2 else None

    def rhs(t: float, y: NDArray[np.float64]) -> NDArray[np.float64]:
        u, v = y
        padded = np.concatenate(([u[1]], u, [u[-2]]))
        urr = (padded[2:] - 2 * u + padded[:-2]) * inv_dr2
        ur = (padded[2:] - padded[:-2]) * inv_2dr
        acceleration = urr + spec.source(u, x, t, ur, v)
        if drift is not None:
            acceleration = acceleration + drift * ur
        return np.stack([v, acceleration])

    return rhs


def _edge_rhs(
    spec: EquationSpec, x: NDArray[np.float64]
) -> Callable[[float, NDArray[np.float64]], NDArray[np.float64]]:
    """The scalar ODE of spatially flat data, one copy per monitored edge."""
    zero = np.zeros_like(x)

    def rhs(t: float, y: NDArray[np.float64]) -> NDArray[np.float64]:
        u, v = y
        return np.stack([v, 0.0 + spec.source(u, x, t, zero, v)])

    return rhs


def _collect(
    spec: EquationSpec,
    grid: RadialGrid,
    controls: Controls,
    times: list[float],
    states: list[NDArray[np.float64]],
    status: Status,
) -> RadialTrajectory:
    stacked = np.stack(states)
    return RadialTrajectory(
        grid=grid,
        spec=spec,
        times=np.asarray(times),
        u=stacked[:, 0],
        ut=stacked[:, 1],
        status=status,
        amplitude_history=np.max(np.abs(stacked[:, 0]), axis=1),
        controls=controls,
    )


def evolve(
    spec: EquationSpec,
    initial_data: InitialData,
    grid: RadialGrid,
    controls: Controls | None = None,
) -> RadialTrajectory:
    """Integrate the radial equation until blow-up, t_end or max_steps.

    The step starts at Δt = cfl·Δr and is halved whenever max|u| doubles since the
    last halving. Each monitored edge (r_max, and r_min when N = 1) is evolved
    alongside by the ODE of flat data; a deviation from it means that a spatial
    disturbance reached the edge.

    Args:
        spec:
            The equation.
        initial_data:
            The initial values on the grid.
        grid:
            The grid.
        controls:
            The numerical controls. Defaults to `Controls()`.

    Returns:
        The trajectory.

    Raises:
        InvalidGrid:
            If the grid does not avoid the origin for N ≥ 2, or the data does not
            match the grid.
        NonFinite:
            If the state becomes non-finite.
        DomainTooSmall:
            If a disturbance reaches a monitored edge before blow-up.
    """
    controls = controls or Controls()
    grid.check_dimension(spec.N)
    if initial_data.u0.shape != (grid.n_points,) or initial_data.u1.shape != (
        grid.n_points,
    ):
        raise InvalidGrid("The initial data does not match the grid.")

    edges = [grid.n_points - 1] if spec.N >= 2 else [0, grid.n_points - 1]
    rhs = _radial_rhs(spec=spec, grid=grid)
    edge_rhs = _edge_rhs(spec=spec, x=np.abs(grid.r[edges]))

    y = np.stack([initial_data.u0, initial_data.u1]).astype(float)
    edge_y = y[:, edges].copy()
    t, step = 0.0, 0
    dt = controls.cfl * grid.dr
    amplitude = float(np.max(np.abs(y[0])))
    reference_amplitude = max(amplitude, controls.amplitude_floor)
    times, states = [t], [y]
    status = Status.COMPLETED

    while True:
        if amplitude >= controls.blowup_threshold:
            status = Status.BLOWUP_DETECTED
            break
        if step >= controls.max_steps:
            break
        if controls.t_end is not None:
            remaining = controls.t_end - t
            if remaining <= 1e-12 * max(1.0, abs(controls.t_end)):
                break
            h = min(dt, remaining)
        else:
            h = dt

        y = rk4_step(rhs, t, y, h)
        edge_y = rk4_step(edge_rhs, t, edge_y, h)
        t += h
        step += 1

        if not np.all(np.isfinite(y)):
            times.append(t)
            states.append(y)
            trajectory = _collect(spec, grid, controls, times, states, Status.UNSTABLE)
            raise NonFinite(
                f"The solution became non-finite at t={t:.6g} after {step} steps.",
                trajectory=trajectory,
            )

        amplitude = float(np.max(np.abs(y[0])))
        while amplitude >= 2 * reference_amplitude:
            dt /= 2
            reference_amplitude *= 2

        if step % controls.save_every == 0:
            times.append(t)
            states.append(y)

        deviation = np.abs(y[0, edges] - edge_y[0])
        if amplitude < controls.blowup_threshold and np.any(
            deviation > controls.boundary_tolerance * (1 + np.abs(edge_y[0]))
        ):
            if times[-1] != t:
                times.append(t)
                states.append(y)
            trajectory = _collect(spec, grid, controls, times, states, Status.COMPLETED)
            raise DomainTooSmall(
                f"A disturbance reached the edge of [{grid.r_min}, {grid.r_max}] at "
                f"t={t:.6g}; enlarge the domain.",
                trajectory=trajectory,
            )

    if times[-1] != t:
        times.append(t)
        states.append(y)

    logger.info(
        f"Integration ended with status {status} at t={t:.10g} after {step} steps, "
        f"max|u|={amplitude:.4g}."
    )
    return _collect(spec, grid, controls, times, states, status)


def _check_spatial_independence(
    spec: EquationSpec, samples: int = 200, tolerance: float = 1e-10
) -> None:
    """Raise SpatialDependence if g visibly depends on its first argument."""
    if spec.g_is_zero:
        return
    rng = make_rng(0)
    t = rng.uniform(0.0, 10.0, samples)
    v = rng.uniform(-10.0, 10.0, samples)
    z = rng.uniform(-10.0, 10.0, samples)
    at_origin = np.asarray(spec.g(np.zeros(samples), t, v, z), dtype=float)
    x = rng.uniform(0.0, 10.0, samples)
    elsewhere = np.asarray(spec.g(x, t, v, z), dtype=float)
    discrepancy = np.abs(at_origin - elsewhere) / (1 + np.abs(at_origin))
    if np.max(discrepancy) > tolerance:
        raise SpatialDependence(
            "The ODE of flat data requires g independent of |x|, but g varies with "
            f"|x| by up to {np.max(discrepancy):.3g}."
        )


def ode_reference(
    spec: EquationSpec,
    u0: float,
    u1: float,
    t_end: float,
    blowup_threshold: float = 1e8,
) -> ODETrajectory:
    """Integrate the ODE U'' = |U|^{p-1}U + f(U) + g(0, t, 0, U') of flat data.

    Args:
        spec:
            The equation. Its g must not depend on |x|.
        u0:
            The initial value.
        u1:
            The initial derivative.
        t_end:
            The final time, unless blow-up happens first.
        blowup_threshold:
            The amplitude at which integration stops.

    Returns:
        The trajectory. If it blows up, the blow-up time is refined from the
        final state by the local rate, T ≈ t + 2|U|/((p-1)|U'|).

    Raises:
        SpatialDependence:
            If g depends on |x|.
    """
    _check_spatial_independence(spec=spec)

    def rhs(t: float, y: NDArray[np.float64]) -> list[float]:
        u, ut = np.asarray(y[0]), np.asarray(y[1])
        return [float(ut), float(spec.source(u, 0.0, t, np.asarray(0.0), ut))]

    def blowup(t: float, y: NDArray[np.float64]) -> float:
        return abs(y[0]) - blowup_threshold

    setattr(blowup, "terminal", True)
    setattr(blowup, "direction", 1)

    solution = solve_ivp(
        rhs,
        (0.0, t_end),
        [float(u0), float(u1)],
        method="DOP853",
        rtol=1e-12,
        atol=1e-12,
        events=blowup,
    )
    u, ut = solution.y
    if solution.status == 1:
        event_u, event_ut = solution.y_events[0][0]
        event_t = float(solution.t_events[0][0])
        blowup_time = event_t + 2 * abs(event_u) / ((spec.p - 1) * abs(event_ut))
        status = Status.BLOWUP_DETECTED
    else:
        blowup_time = math.nan
        status = Status.COMPLETED
    return ODETrajectory(
        t=solution.t, u=u, ut=ut, blowup_time=blowup_time, status=status
    )


def fit_blowup_time(
    times: NDArray[np.float64],
    amplitude: NDArray[np.float64],
    p: float,
    floor: float = 100.0,
) -> tuple[float, float]:
    """Extrapolate the blow-up time of an amplitude series.

    Fits z = |u|^{-(p-1)/2} linearly in t on the final window where |u| grows
    monotonically and stays above the floor; the zero of the fit is the estimate.

    Args:
        times:
            The sample times.
        amplitude:
            The samples of |u|.
        p:
            The power of the nonlinearity.
        floor:
            The fitting floor.

    Returns:
        The pair (T_est, R²).

    Raises:
        InsufficientGrowth:
            If the amplitude never exceeds the floor, or the growing window is too
            short for a fit.
    """
    amplitude = np.abs(np.asarray(amplitude, dtype=float))
    if not np.any(amplitude >= floor):
        raise InsufficientGrowth(f"The amplitude never exceeds the floor {floor}.")

    non_increasing = np.flatnonzero(np.diff(amplitude) <= 0)
    start = int(non_increasing[-1]) + 1 if non_increasing.size else 0
    below_floor = np.flatnonzero(amplitude[start:] < floor)
    if below_floor.size:
        start += int(below_floor[-1]) + 1
    if amplitude.size - start < 3:
        raise InsufficientGrowth("The final growing window has fewer than 3 samples.")

    z = amplitude[start:] ** (-(p - 1) / 2)
    fit = linregress(times[start:], z)
    if not fit.slope < 0:
        raise InsufficientGrowth("The amplitude does not grow at the blow-up rate.")
    return float(-fit.intercept / fit.slope), float(fit.rvalue**2)


def estimate_blowup_time(
    trajectory: RadialTrajectory, r_index: int, floor: float = 100.0
) -> tuple[float, float]:
    """Estimate the blow-up time at a grid point.

    Args:
        trajectory:
            A trajectory that blew up.
        r_index:
            The index of the grid point.
        floor:
            The fitting floor.

    Returns:
        The pair (T_est, fit_quality), the quality being the R² of the linear fit.

    Raises:
        InsufficientGrowth:
            If |u| never exceeds the floor at the point.
        PreconditionError:
            If the trajectory did not blow up.
    """
    amplitude = np.abs(trajectory.u[:, r_index])
    if not np.any(amplitude >= floor):
        raise InsufficientGrowth(
            f"|u| never exceeds {floor} at r={trajectory.grid.r[r_index]:.6g}."
        )
    if trajectory.status != Status.BLOWUP_DETECTED:
        raise PreconditionError(
            f"Blow-up times need a run that blew up, got status {trajectory.status}."
        )
    return fit_blowup_time(
        times=trajectory.times, amplitude=amplitude, p=trajectory.spec.p, floor=floor
    )


def blowup_graph(trajectory: RadialTrajectory, floor: float = 100.0) -> BlowupGraph:
    """Estimate T(r) at every grid point of a run that blew up.

    Points where the fit is impossible get NaN estimates. All points are classified
    as Unknown; the geometry module refines the classification.

    Args:
        trajectory:
            A trajectory that blew up.
        floor:
            The fitting floor.

    Returns:
        The blow-up graph.

    Raises:
        PreconditionError:
            If the trajectory did not blow up.
    """
    if trajectory.status != Status.BLOWUP_DETECTED:
        raise PreconditionError(
            f"A blow-up graph needs a run that blew up, got status {trajectory.status}."
        )
    n_points = trajectory.grid.n_points
    T_estimates = np.full(n_points, np.nan)
    fit_quality = np.full(n_points, np.nan)
    for index in tqdm(range(n_points), desc="Fitting blow-up times", leave=False):
        try:
            T_estimates[index], fit_quality[index] = estimate_blowup_time(
                trajectory=trajectory, r_index=index, floor=floor
            )
        except InsufficientGrowth:
            continue
    fitted = int(np.sum(np.isfinite(T_estimates)))
    logger.info(f"Fitted blow-up times at {fitted} of {n_points} grid points.")
    return BlowupGraph(
        r_samples=trajectory.grid.r,
        T_estimates=T_estimates,
        fit_quality=fit_quality,
        classification=tuple(PointClass.UNKNOWN for _ in range(n_points)),
    )


def is_one_lipschitz(
    graph: BlowupGraph, tolerance: float, min_quality: float = 0.99
) -> bool:
    """Check |T(rᵢ) - T(rⱼ)| ≤ |rᵢ - rⱼ| + tolerance on well-fitted samples.

    Args:
        graph:
            The blow-up graph.
        tolerance:
            The fit tolerance.
        min_quality:
            Samples with a lower fit quality are ignored.

    Returns:
        Whether the property holds.
    """
    valid = np.isfinite(graph.T_estimates) & (
        np.nan_to_num(graph.fit_quality) > min_quality
    )
    r, T = graph.r_samples[valid], graph.T_estimates[valid]
    distances = np.abs(r[:, None] - r[None, :])
    slack = distances + tolerance - np.abs(T[:, None] - T[None, :])
    return bool(np.all(slack >= 0))
