"""Similarity variables around a blow-up point.

For a blow-up point (r₀, T₀) the similarity profile is

    w(y, s) = (T₀ - t)^{2/(p-1)} u(r₀ + y e^{-s}, T₀ - e^{-s}),   |y| < 1,

and it satisfies a damped wave equation in (y, s) whose spatial part is the
degenerate operator 𝓛w = (1/ρ)∂ᵧ(ρ(1-y²)∂ᵧw) with weight ρ(y) = (1-y²)^{2/(p-1)}.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray
from scipy.interpolate import RectBivariateSpline

from .exceptions import (
    CutoffViolation,
    InvalidGrid,
    InvalidParameter,
    NonFinite,
    OutOfDomain,
)
from .model import EquationSpec, scaled_nonlinearity
from .radial_solver import RadialTrajectory, rk4_step

logger = logging.getLogger(__package__)


DEFAULT_CUTOFF = 1e-3


@dataclass(frozen=True)
class SimilarityFrame:
    """The similarity profile and its derivatives at one slow time.

    Args:
        r0:
            The scaling center.
        T0:
            The scaling time.
        s:
            The slow time, s = -log(T₀ - t).
        y_grid:
            The grid, symmetric about 0 inside (-1, 1).
        w:
            The profile.
        ws:
            Its s-derivative.
        wy:
            Its y-derivative.

    Raises:
        InvalidGrid:
            If the grid is not symmetric inside (-1, 1) or the arrays do not match it.
    """

    r0: float
    T0: float
    s: float
    y_grid: NDArray[np.float64]
    w: NDArray[np.float64]
    ws: NDArray[np.float64]
    wy: NDArray[np.float64]

    def __post_init__(self) -> None:
        check_y_grid(self.y_grid)
        shape = self.y_grid.shape
        if self.w.shape != shape or self.ws.shape != shape or self.wy.shape != shape:
            raise InvalidGrid("The profile arrays do not match the y grid.")


@dataclass(frozen=True)
class WTrajectory:
    """Frames of the similarity profile at increasing slow times on one grid."""

    frames: tuple[SimilarityFrame, ...]
    spec: EquationSpec
    r0: float
    T0: float
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        s = self.s_values
        if np.any(np.diff(s) <= 0):
            raise ValueError("The frames must have strictly increasing slow times.")
        if any(
            frame.y_grid is not self.frames[0].y_grid
            and not np.array_equal(frame.y_grid, self.frames[0].y_grid)
            for frame in self.frames
        ):
            raise InvalidGrid("All frames must share one y grid.")

    @property
    def s_values(self) -> NDArray[np.float64]:
        """The slow times of the frames."""
        return np.array([frame.s for frame in self.frames])

    @property
    def y_grid(self) -> NDArray[np.float64]:
        """The shared grid."""
        return self.frames[0].y_grid


@dataclass(frozen=True)
class SimilarityControls:
    """Numerical controls of the w-equation integrator.

    Args:
        cfl:
            The ratio Δs/Δy of the largest step.
        frame_interval:
            The slow-time spacing of the recorded frames.
        edge_factor:
            The ratio of edge amplitude to interior median that signals a cutoff
            violation.
        edge_floor:
            Edge amplitudes below this never signal a violation.
    """

    cfl: float = 0.25
    frame_interval: float = 0.05
    edge_factor: float = 10.0
    edge_floor: float = 1e-8

    def __post_init__(self) -> None:
        if not 0 < self.cfl <= 1:
            raise InvalidParameter(
                f"The CFL fraction must be in (0, 1], got {self.cfl}."
            )
        if not self.frame_interval > 0:
            raise InvalidParameter("The frame interval must be positive.")


def check_y_grid(y_grid: NDArray[np.float64]) -> None:
    """Raise InvalidGrid unless the grid is increasing, symmetric and inside (-1, 1)."""
    if y_grid.ndim != 1 or y_grid.size < 3:
        raise InvalidGrid("A y grid needs at least 3 points.")
    if np.any(np.diff(y_grid) <= 0):
        raise InvalidGrid("A y grid must be strictly increasing.")
    if np.max(np.abs(y_grid)) >= 1:
        raise InvalidGrid("A y grid must lie inside (-1, 1).")
    if not np.allclose(y_grid, -y_grid[::-1], rtol=0, atol=1e-12):
        raise InvalidGrid("A y grid must be symmetric about 0.")


def uniform_y_grid(
    n_points: int, cutoff: float = DEFAULT_CUTOFF
) -> NDArray[np.float64]:
    """A uniform grid on [-(1-ε), 1-ε].

    Examples:
        >>> uniform_y_grid(5, cutoff=0.5).tolist()
        [-0.5, -0.25, 0.0, 0.25, 0.5]
    """
    if not 0 < cutoff < 1:
        raise InvalidGrid(f"The cutoff must be in (0, 1), got {cutoff}.")
    if n_points < 3:
        raise InvalidGrid(f"A y grid needs at least 3 points, got {n_points}.")
    return np.linspace(-(1 - cutoff), 1 - cutoff, n_points)


def rho(y: NDArray[np.float64] | float, p: float) -> NDArray[np.float64] | float:
    """The weight ρ(y) = (1-y²)^{2/(p-1)}.

    Examples:
        >>> float(rho(0.5, 3.0))
        0.75
    """
    return (1 - np.square(y)) ** (2 / (p - 1))


def trapezoid_weights(y_grid: NDArray[np.float64]) -> NDArray[np.float64]:
    """The weights of the composite trapezoid rule on a (possibly uneven) grid."""
    h = np.diff(y_grid)
    weights = np.zeros_like(y_grid)
    weights[:-1] += h / 2
    weights[1:] += h / 2
    return weights


def apply_L(
    w: NDArray[np.float64], y_grid: NDArray[np.float64], p: float
) -> NDArray[np.float64]:
    """The flux-form discretization of 𝓛w = (1/ρ)∂ᵧ(ρ(1-y²)∂ᵧw).

    With fluxes F_{j+1/2} = a(y_{j+1/2})(w_{j+1} - w_j)/h_{j+1/2}, a = ρ(1-y²), and no
    flux through the cutoff edges, (𝓛w)_j = (F_{j+1/2} - F_{j-1/2})/(ρ_j q_j), where
    q_j are the trapezoid weights. The discrete identity
    Σ q_j ρ_j (𝓛w)_j v_j = -Σ F_{j+1/2}(v_{j+1} - v_j) holds exactly.

    Args:
        w:
            The samples.
        y_grid:
            The grid.
        p:
            The power of the nonlinearity.

    Returns:
        The samples of 𝓛w.
    """
    h = np.diff(y_grid)
    midpoints = 0.5 * (y_grid[1:] + y_grid[:-1])
    flux = (1 - midpoints**2) ** ((p + 1) / (p - 1)) * np.diff(w) / h
    divergence = np.zeros_like(w, dtype=float)
    divergence[:-1] += flux
    divergence[1:] -= flux
    return divergence / (rho(y_grid, p) * trapezoid_weights(y_grid))


def dirichlet_form(
    w: NDArray[np.float64], y_grid: NDArray[np.float64], p: float
) -> float:
    """The discrete Dirichlet form Σ a(y_{j+1/2})(w_{j+1} - w_j)²/h_{j+1/2}.

    It is the counterpart of ∫(∂ᵧw)²(1-y²)ρ dy for which
    ∫(𝓛w)·w ρ dy = -dirichlet_form(w) holds exactly under the trapezoid rule.
    """
    h = np.diff(y_grid)
    midpoints = 0.5 * (y_grid[1:] + y_grid[:-1])
    coefficients = (1 - midpoints**2) ** ((p + 1) / (p - 1))
    return float(np.sum(coefficients * np.diff(w) ** 2 / h))


def to_similarity(
    trajectory: RadialTrajectory,
    r0: float,
    T0: float,
    s_values: NDArray[np.float64],
    y_grid: NDArray[np.float64],
    fit_quality: float | None = None,
) -> WTrajectory:
    """Transform a physical trajectory to similarity variables around (r₀, T₀).

    u and ∂ₜu are interpolated by bicubic splines in (t, r); ∂ᵣu is the r-derivative
    of the spline. Then, with τ = T₀ - t = e^{-s} and a = 2/(p-1),

        w = τᵃu,   ∂ᵧw = τ^{a+1}∂ᵣu,   ∂ₛw = -a·w - y∂ᵧw + τ^{a+1}∂ₜu.

    Args:
        trajectory:
            The physical trajectory.
        r0:
            The scaling center.
        T0:
            The scaling time, usually the fitted blow-up time at r₀.
        s_values:
            The increasing slow times.
        y_grid:
            The grid.
        fit_quality:
            The quality of the fit that produced T₀, kept in the metadata.

    Returns:
        The trajectory of similarity frames.

    Raises:
        OutOfDomain:
            If a requested time or backward cone leaves the simulated region.
    """
    check_y_grid(y_grid)
    s_values = np.asarray(s_values, dtype=float)
    a = 2 / (trajectory.spec.p - 1)
    times, r = trajectory.times, trajectory.grid.r
    t_requested = T0 - np.exp(-s_values)

    if np.min(t_requested) < times[0] or np.max(t_requested) > times[-1]:
        raise OutOfDomain(
            f"The times {t_requested.min():.6g}..{t_requested.max():.6g} leave the "
            f"simulated range [{times[0]:.6g}, {times[-1]:.6g}]."
        )
    reach = math.exp(-float(np.min(s_values))) * float(np.max(np.abs(y_grid)))
    if r0 - reach < r[0] or r0 + reach > r[-1]:
        raise OutOfDomain(
            f"The backward cone [{r0 - reach:.6g}, {r0 + reach:.6g}] leaves the grid "
            f"[{r[0]:.6g}, {r[-1]:.6g}]."
        )

    # Only the rows around the requested times enter the splines
    first = max(int(np.searchsorted(times, t_requested.min())) - 4, 0)
    last = min(int(np.searchsorted(times, t_requested.max())) + 5, times.size)
    if last - first < 4:
        raise OutOfDomain("Too few stored times around the requested window.")
    window = slice(first, last)
    u_spline = RectBivariateSpline(times[window], r, trajectory.u[window], kx=3, ky=3)
    ut_spline = RectBivariateSpline(times[window], r, trajectory.ut[window], kx=3, ky=3)

    frames = []
    for s, t in zip(s_values, t_requested):
        tau = math.exp(-s)
        r_values = r0 + y_grid * tau
        t_values = np.full_like(y_grid, t)
        u = u_spline.ev(t_values, r_values)
        ur = u_spline.ev(t_values, r_values, dy=1)
        ut = ut_spline.ev(t_values, r_values)
        w = tau**a * u
        wy = tau ** (a + 1) * ur
        ws = -a * w - y_grid * wy + tau ** (a + 1) * ut
        frames.append(
            SimilarityFrame(r0=r0, T0=T0, s=float(s), y_grid=y_grid, w=w, ws=ws, wy=wy)
        )

    metadata = dict(cutoff=1 - float(np.max(y_grid)), fit_quality=fit_quality)
    return WTrajectory(
        frames=tuple(frames), spec=trajectory.spec, r0=r0, T0=T0, metadata=metadata
    )


def _w_rhs(spec: EquationSpec, r0: float, T0: float, y_grid: NDArray[np.float64]):
    """The right-hand side of the first order system (w, v = ∂ₛw)."""
    p = spec.p
    a = 2 / (p - 1)
    linear = 2 * (p + 1) / (p - 1) ** 2
    damping = (p + 3) / (p - 1)
    forcing_exponent = 2 * p / (p - 1)

    def rhs(s: float, state: NDArray[np.float64]) -> NDArray[np.float64]:
        w, v = state
        wy = np.gradient(w, y_grid)
        acceleration = (
            apply_L(w, y_grid, p)
            - linear * w
            + np.abs(w) ** (p - 1) * w
            - damping * v
            - 2 * y_grid * np.gradient(v, y_grid)
        )
        if spec.N >= 2:
            tau = math.exp(-s)
            acceleration += tau * (spec.N - 1) / (r0 + y_grid * tau) * wy
        if not spec.f_is_zero:
            acceleration += scaled_nonlinearity(spec, w, s)
        if not spec.g_is_zero:
            tau = math.exp(-s)
            physical = math.exp((a + 1) * s)
            with np.errstate(over="ignore", invalid="ignore"):
                acceleration += math.exp(-forcing_exponent * s) * spec.g(
                    np.abs(r0 + y_grid * tau),
                    T0 - tau,
                    physical * wy,
                    physical * (v + y_grid * wy + a * w),
                )
        return np.stack([v, acceleration])

    return rhs


def _check_edges(
    w: NDArray[np.float64], s: float, controls: SimilarityControls
) -> None:
    edge = max(abs(w[0]), abs(w[-1]))
    interior = float(np.median(np.abs(w)))
    if edge > controls.edge_floor and edge > controls.edge_factor * interior:
        raise CutoffViolation(
            f"The profile concentrates at the cutoff at s={s:.6g}: edge amplitude "
            f"{edge:.4g} against interior median {interior:.4g}."
        )


def evolve_w(
    spec: EquationSpec,
    r0: float,
    T0: float,
    w_init: NDArray[np.float64],
    ws_init: NDArray[np.float64],
    y_grid: NDArray[np.float64],
    s_range: tuple[float, float],
    controls: SimilarityControls | None = None,
) -> WTrajectory:
    """Integrate the w-equation directly on the y grid.

    The system (w, v = ∂ₛw) is stepped with the fourth order Runge-Kutta method. The
    mixed term -2y∂²_{y,s}w is discretized as -2y∂ᵧv. Frames are recorded every
    `controls.frame_interval`; the step is the largest one not exceeding cfl·Δy
    that lands on every frame.

    Args:
        spec:
            The equation.
        r0:
            The scaling center.
        T0:
            The scaling time.
        w_init:
            The initial profile.
        ws_init:
            The initial s-derivative.
        y_grid:
            The grid.
        s_range:
            The pair (s_start, s_end).
        controls:
            The numerical controls.

    Returns:
        The trajectory of frames, starting with the initial one.

    Raises:
        OutOfDomain:
            If N ≥ 2 and the start violates s ≥ max(-log T₀, -log(r₀/2)).
        NonFinite:
            If the profile becomes non-finite.
        CutoffViolation:
            If the profile concentrates at the cutoff edges.
    """
    controls = controls or SimilarityControls()
    check_y_grid(y_grid)
    s_start, s_end = map(float, s_range)
    if not s_end > s_start:
        raise InvalidParameter(f"Need s_end > s_start, got {s_range}.")
    if spec.N >= 2:
        if not r0 > 0 or not T0 > 0:
            raise OutOfDomain("N ≥ 2 needs a positive scaling center and time.")
        s_min = max(-math.log(T0), -math.log(r0 / 2))
        if s_start < s_min:
            raise OutOfDomain(
                f"The slow time must start at s ≥ {s_min:.6g} for r₀={r0}, T₀={T0}."
            )

    rhs = _w_rhs(spec=spec, r0=r0, T0=T0, y_grid=y_grid)
    state = np.stack([w_init, ws_init]).astype(float)
    max_step = controls.cfl * float(np.min(np.diff(y_grid)))

    n_frames = math.ceil((s_end - s_start) / controls.frame_interval - 1e-9)
    frame_times = np.minimum(
        s_start + controls.frame_interval * np.arange(n_frames + 1), s_end
    )

    def make_frame(s: float, state: NDArray[np.float64]) -> SimilarityFrame:
        return SimilarityFrame(
            r0=r0,
            T0=T0,
            s=s,
            y_grid=y_grid,
            w=state[0].copy(),
            ws=state[1].copy(),
            wy=np.gradient(state[0], y_grid),
        )

    frames = [make_frame(s_start, state)]
    for s_from, s_to in zip(frame_times[:-1], frame_times[1:]):
        n_steps = max(math.ceil((s_to - s_from) / max_step), 1)
        step = (s_to - s_from) / n_steps
        for index in range(n_steps):
            state = rk4_step(rhs, s_from + index * step, state, step)
        if not np.all(np.isfinite(state)):
            raise NonFinite(f"The profile became non-finite by s={s_to:.6g}.")
        _check_edges(w=state[0], s=float(s_to), controls=controls)
        frames.append(make_frame(float(s_to), state))

    logger.info(
        f"Integrated the similarity equation over s ∈ [{s_start:.4g}, {s_end:.4g}] "
        f"with {len(frames)} frames."
    )
    metadata = dict(cutoff=1 - float(np.max(y_grid)), fit_quality=None)
    return WTrajectory(
        frames=tuple(frames), spec=spec, r0=r0, T0=T0, metadata=metadata
    )
