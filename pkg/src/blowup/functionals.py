"""Weighted quadrature and the energy functionals of the similarity profile.

All integrals are composite trapezoid sums on a y grid symmetric about 0. The
quadrature grids cluster toward the cutoff edges, where the weights degenerate.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import StrEnum

import numpy as np
from numpy.typing import NDArray
from scipy.integrate import trapezoid
from scipy.special import beta

from .exceptions import InvalidGrid, InvalidParameter
from .model import EquationSpec, scaled_antiderivative
from .similarity import SimilarityFrame, WTrajectory, rho
from .utils import make_rng

logger = logging.getLogger(__package__)


DEFAULT_QUADRATURE_CUTOFF = 1e-5


class WeightKind(StrEnum):
    """The weights of the integrals."""

    RHO = "rho"
    RHO_TIMES = "rho*(1-y^2)"
    RHO_OVER = "rho/(1-y^2)"


class Criterion(StrEnum):
    """The outcome of the blow-up criterion."""

    CONSISTENT = "Consistent"
    VIOLATES_CRITERION = "ViolatesCriterion"


@dataclass(frozen=True)
class FunctionalReadout:
    """The functionals of one frame; E = E0 + I + J."""

    s: float
    E0: float
    I: float  # noqa: E741
    J: float
    E: float
    H: float
    dissipation: float


@dataclass(frozen=True)
class MonotonicityReport:
    """H along a trajectory and the frames where it increases beyond the tolerance.

    Args:
        s_values:
            The slow times.
        H_values:
            H at each slow time.
        violations:
            Pairs (s, ΔH) where H increased by more than the tolerance.
        max_violation:
            The largest increase of H between frames, 0 if H never increases.
        tolerance:
            The tolerance 1e-3·max|H|.
        fitted_C:
            The smallest constant C making the raw energy inequality hold.
        mu:
            The constant μ used in H.
        readouts:
            The per-frame readouts.
    """

    s_values: NDArray[np.float64]
    H_values: NDArray[np.float64]
    violations: list[tuple[float, float]]
    max_violation: float
    tolerance: float
    fitted_C: float
    mu: float
    readouts: tuple[FunctionalReadout, ...] = field(default=())


@dataclass(frozen=True)
class BoundednessReport:
    """Boundedness of E0 and decay of the time-averaged dissipation along a run."""

    E0_bound: float
    head_dissipation: float
    tail_dissipation: float
    dissipation_decays: bool


def clustered_y_grid(
    n_points: int, cutoff: float = DEFAULT_QUADRATURE_CUTOFF, kind: str = "sine"
) -> NDArray[np.float64]:
    """A quadrature grid on [-(1-ε), 1-ε] clustered toward the edges.

    Args:
        n_points:
            The number of points.
        cutoff:
            The cutoff ε.
        kind:
            `sine` for y = (1-ε)sin(πξ/2) with ξ uniform on [-1, 1], or `argth` for
            y = tanh ξ with ξ uniform on [-argth(1-ε), argth(1-ε)].

    Returns:
        The grid.

    Raises:
        InvalidGrid:
            If the cutoff is not in (0, 1) or fewer than 3 points are requested.
        ValueError:
            If the kind is unknown.

    Examples:
        >>> grid = clustered_y_grid(5, cutoff=0.1)
        >>> [round(float(y), 4) for y in grid]
        [-0.9, -0.6364, 0.0, 0.6364, 0.9]
    """
    if not 0 < cutoff < 1:
        raise InvalidGrid(f"The cutoff must be in (0, 1), got {cutoff}.")
    if n_points < 3:
        raise InvalidGrid(f"A y grid needs at least 3 points, got {n_points}.")
    match kind:
        case "sine":
            xi = np.linspace(-1.0, 1.0, n_points)
            grid = (1 - cutoff) * np.sin(np.pi * xi / 2)
        case "argth":
            edge = math.atanh(1 - cutoff)
            grid = np.tanh(np.linspace(-edge, edge, n_points))
        case _:
            raise ValueError(f"Unsupported grid kind: {kind!r}")
    # Exact symmetry
    return 0.5 * (grid - grid[::-1])


def weight(
    y_grid: NDArray[np.float64], p: float, weight_kind: WeightKind | str
) -> NDArray[np.float64]:
    """The weight ρ, ρ(1-y²) or ρ/(1-y²) on the grid."""
    one_minus = 1 - np.square(y_grid)
    match WeightKind(weight_kind):
        case WeightKind.RHO:
            return rho(y_grid, p)
        case WeightKind.RHO_TIMES:
            return one_minus ** ((p + 1) / (p - 1))
        case WeightKind.RHO_OVER:
            return one_minus ** ((3 - p) / (p - 1))


def weighted_integral(
    samples: NDArray[np.float64] | float,
    y_grid: NDArray[np.float64],
    p: float,
    weight_kind: WeightKind | str = WeightKind.RHO,
) -> float:
    """The trapezoid approximation of ∫ samples·weight dy.

    Args:
        samples:
            The samples on the grid, or a constant.
        y_grid:
            The grid.
        p:
            The power of the nonlinearity.
        weight_kind:
            The weight.

    Returns:
        The integral.

    Examples:
        >>> grid = clustered_y_grid(2000)
        >>> round(weighted_integral(1.0, grid, 3.0), 5)
        1.33333
    """
    values = np.broadcast_to(np.asarray(samples, dtype=float), y_grid.shape)
    return float(trapezoid(values * weight(y_grid, p, weight_kind), y_grid))


def soliton_energy(p: float) -> float:
    """E0(κ₀) = κ₀²/(p-1)·B(1/2, 2/(p-1) + 1), the energy of every soliton.

    Examples:
        >>> round(soliton_energy(3.0), 12)
        1.333333333333
    """
    kappa0_squared = (2 * (p + 1) / (p - 1) ** 2) ** (2 / (p - 1))
    return kappa0_squared / (p - 1) * float(beta(0.5, 2 / (p - 1) + 1))


def E0(frame: SimilarityFrame, p: float) -> float:
    """The energy ∫[½(∂ₛw)² + ½(∂ᵧw)²(1-y²) + (p+1)/(p-1)²·w² - |w|^{p+1}/(p+1)]ρ dy.

    Args:
        frame:
            The frame.
        p:
            The power of the nonlinearity.

    Returns:
        The energy.
    """
    y, w = frame.y_grid, frame.w
    integrand = (
        0.5 * frame.ws**2
        + 0.5 * frame.wy**2 * (1 - y**2)
        + (p + 1) / (p - 1) ** 2 * w**2
        - np.abs(w) ** (p + 1) / (p + 1)
    )
    return weighted_integral(integrand, y, p)


def I_term(frame: SimilarityFrame, s: float, spec: EquationSpec) -> float:  # noqa: E743
    """The term -e^{-2(p+1)s/(p-1)}∫F(e^{2s/(p-1)}w)ρ dy of the perturbation f."""
    if spec.f_is_zero:
        return 0.0
    values = scaled_antiderivative(spec, frame.w, s)
    return -weighted_integral(values, frame.y_grid, spec.p)


def J_term(frame: SimilarityFrame, s: float, spec: EquationSpec) -> float:
    """The term -e^{-γs}∫w∂ₛw ρ dy."""
    return -math.exp(-spec.gamma * s) * weighted_integral(
        frame.w * frame.ws, frame.y_grid, spec.p
    )


def H_total(
    frame: SimilarityFrame, s: float, spec: EquationSpec, mu: float
) -> FunctionalReadout:
    """All functionals of a frame, with H = E·exp(((p+3)/(2γ))e^{-γs}) + μe^{-2γs}.

    Args:
        frame:
            The frame.
        s:
            The slow time.
        spec:
            The equation.
        mu:
            The constant μ ≥ 0.

    Returns:
        The readout.

    Raises:
        InvalidParameter:
            If μ is negative.
    """
    if mu < 0:
        raise InvalidParameter(f"μ must be non-negative, got {mu}.")
    p, gamma = spec.p, spec.gamma
    energy0 = E0(frame, p)
    i_value = I_term(frame, s, spec)
    j_value = J_term(frame, s, spec)
    energy = energy0 + i_value + j_value
    H = energy * math.exp((p + 3) / (2 * gamma) * math.exp(-gamma * s)) + mu * math.exp(
        -2 * gamma * s
    )
    dissipation = weighted_integral(frame.ws**2, frame.y_grid, p, WeightKind.RHO_OVER)
    return FunctionalReadout(
        s=s, E0=energy0, I=i_value, J=j_value, E=energy, H=H, dissipation=dissipation
    )


def calibrate_mu(
    fitted_C: float, p: float, gamma: float, s_start: float, margin: float = 1.0
) -> float:
    """The constant μ = C·exp(((p+3)/(2γ))e^{-γs₀})/(2γ) + margin.

    With this μ the decay of μe^{-2γs} dominates the additive term Ce^{-2γs} of the
    raw energy inequality from s₀ on.
    """
    return (
        fitted_C
        * math.exp((p + 3) / (2 * gamma) * math.exp(-gamma * s_start))
        / (2 * gamma)
        + margin
    )


def fit_inequality_constant(
    readouts: list[FunctionalReadout] | tuple[FunctionalReadout, ...],
    spec: EquationSpec,
) -> float:
    """The smallest C ≥ 0 with dE/ds ≤ ((p+3)/2)e^{-γs}E - (3/(p-1))D + Ce^{-2γs}.

    dE/ds is approximated by finite differences over the readouts and D is the
    dissipation.
    """
    if len(readouts) < 2:
        return 0.0
    p, gamma = spec.p, spec.gamma
    s = np.array([readout.s for readout in readouts])
    energy = np.array([readout.E for readout in readouts])
    dissipation = np.array([readout.dissipation for readout in readouts])
    dE = np.gradient(energy, s)
    excess = (
        dE
        - (p + 3) / 2 * np.exp(-gamma * s) * energy
        + 3 / (p - 1) * dissipation
    ) * np.exp(2 * gamma * s)
    return max(0.0, float(np.max(excess)))


def monotonicity_report(
    w_trajectory: WTrajectory,
    spec: EquationSpec,
    mu: float | None = None,
    margin: float = 1.0,
) -> MonotonicityReport:
    """Evaluate H along a trajectory and flag increases.

    Args:
        w_trajectory:
            The trajectory, with frames at most 0.05 apart in s.
        spec:
            The equation.
        mu:
            The constant μ. If None, it is calibrated from the fitted constant of the
            raw energy inequality and the first slow time of the trajectory.
        margin:
            The margin added when calibrating μ.

    Returns:
        The report.
    """
    s_values = w_trajectory.s_values
    provisional = [H_total(frame, frame.s, spec, 0.0) for frame in w_trajectory.frames]
    fitted_C = fit_inequality_constant(readouts=provisional, spec=spec)
    if mu is None:
        mu = calibrate_mu(
            fitted_C=fitted_C,
            p=spec.p,
            gamma=spec.gamma,
            s_start=float(s_values[0]),
            margin=margin,
        )

    readouts = tuple(H_total(frame, frame.s, spec, mu) for frame in w_trajectory.frames)
    H_values = np.array([readout.H for readout in readouts])
    increments = np.diff(H_values)
    tolerance = 1e-3 * float(np.max(np.abs(H_values)))
    violations = [
        (float(s), float(increase))
        for s, increase in zip(s_values[1:], increments)
        if increase > tolerance
    ]
    max_violation = max(0.0, float(np.max(increments))) if increments.size else 0.0
    if violations:
        logger.warning(
            f"H increases beyond the tolerance {tolerance:.3g} at {len(violations)} "
            f"of {increments.size} steps."
        )
    return MonotonicityReport(
        s_values=s_values,
        H_values=H_values,
        violations=violations,
        max_violation=max_violation,
        tolerance=tolerance,
        fitted_C=fitted_C,
        mu=mu,
        readouts=readouts,
    )


def blowup_criterion(readout: FunctionalReadout, tolerance: float = 1e-10) -> Criterion:
    """Check H ≥ 0 on a frame of an existing solution.

    Examples:
        >>> readout = FunctionalReadout(
        ...     s=0.0, E0=0.0, I=0.0, J=0.0, E=0.0, H=-1.0, dissipation=0.0
        ... )
        >>> blowup_criterion(readout).value
        'ViolatesCriterion'
    """
    if readout.H < -tolerance:
        return Criterion.VIOLATES_CRITERION
    return Criterion.CONSISTENT


def hnorm_arrays(
    q1: NDArray[np.float64],
    q1_prime: NDArray[np.float64],
    q2: NDArray[np.float64],
    y_grid: NDArray[np.float64],
    p: float,
) -> float:
    """The norm (∫(q₁² + q₁'²(1-y²) + q₂²)ρ dy)^{1/2} of sampled arrays."""
    integrand = q1**2 + q1_prime**2 * (1 - y_grid**2) + q2**2
    return math.sqrt(max(weighted_integral(integrand, y_grid, p), 0.0))


def hnorm(frame: SimilarityFrame, p: float) -> float:
    """The H-norm of the pair (w, ∂ₛw)."""
    return hnorm_arrays(frame.w, frame.wy, frame.ws, frame.y_grid, p)


def check_hardy_sobolev(
    h: NDArray[np.float64],
    h_prime: NDArray[np.float64],
    y_grid: NDArray[np.float64],
    p: float,
) -> float:
    """The ratio ∫h²ρ/(1-y²) / (∫h²ρ + ∫h'²ρ(1-y²)).

    Returns:
        The ratio, or NaN if the denominator is below 1e-14.
    """
    numerator = weighted_integral(h**2, y_grid, p, WeightKind.RHO_OVER)
    denominator = weighted_integral(h**2, y_grid, p) + weighted_integral(
        h_prime**2, y_grid, p, WeightKind.RHO_TIMES
    )
    if denominator < 1e-14:
        logger.warning("The Hardy-Sobolev ratio is undefined for a null function.")
        return math.nan
    return numerator / denominator


def hardy_sobolev_sweep(
    p: float,
    y_grid: NDArray[np.float64],
    n_functions: int = 500,
    n_modes: int = 8,
    seed: int = 4242,
) -> float:
    """The largest Hardy-Sobolev ratio over random truncated cosine series.

    The test functions are h(y) = Σₖ aₖcos(kπy/2) with standard normal coefficients
    damped as 1/(1+k).

    Args:
        p:
            The power of the nonlinearity.
        y_grid:
            The grid.
        n_functions:
            The number of random functions.
        n_modes:
            The number of cosine modes.
        seed:
            The seed of the coefficients.

    Returns:
        The largest ratio.
    """
    rng = make_rng(seed)
    modes = np.arange(n_modes)
    coefficients = rng.normal(size=(n_functions, n_modes)) / (1 + modes)
    phases = np.pi * modes[:, None] * y_grid[None, :] / 2
    h_values = coefficients @ np.cos(phases)
    h_primes = coefficients @ (-np.pi * modes[:, None] / 2 * np.sin(phases))
    ratios = [
        check_hardy_sobolev(h, h_prime, y_grid, p)
        for h, h_prime in zip(h_values, h_primes)
    ]
    return float(np.nanmax(ratios))


def boundedness_check(
    readouts: list[FunctionalReadout] | tuple[FunctionalReadout, ...],
    window: float = 1.0,
) -> BoundednessReport:
    """Check that E0 stays bounded and the time-averaged dissipation decays.

    Args:
        readouts:
            The readouts of a trajectory, at increasing slow times.
        window:
            The length of the averaging window.

    Returns:
        The report, comparing the average dissipation over the first and the last
        window.

    Raises:
        InvalidParameter:
            If the readouts span less than two windows.
    """
    s = np.array([readout.s for readout in readouts])
    if s.size < 2 or s[-1] - s[0] < 2 * window:
        raise InvalidParameter("The readouts must span at least two windows.")
    dissipation = np.array([readout.dissipation for readout in readouts])
    head = s <= s[0] + window
    tail = s >= s[-1] - window
    head_average = float(trapezoid(dissipation[head], s[head])) / window
    tail_average = float(trapezoid(dissipation[tail], s[tail])) / window
    return BoundednessReport(
        E0_bound=float(max(abs(readout.E0) for readout in readouts)),
        head_dissipation=head_average,
        tail_dissipation=tail_average,
        dissipation_decays=tail_average <= head_average,
    )
