"""Energy of the dilated solution in the shrinking ball {|x| < 1 - t}.

For λ ∈ (0, 1] the dilated solution U = λ^{2/(p-1)}u(λx, λt) solves the equation
with the perturbations of `EquationSpec.rescaled`. Its local energy

    𝓔(t) = ∫_{|x|<1-t} ½(∂ₜU)² + ½|∇U|² - |U|^{p+1}/(p+1) - F_λ(U) dx

obeys 𝓔(t) ≤ C[𝓔(0) + ∫₀ᵗ∫_{|x|=1-s}|U|^{p+1} + λ∫₀ᵗ∫_{|x|<1-s}|U|^{p+1} + λ^{2/(p-1)}],
which is checked here with a fitted constant C.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy.integrate import cumulative_trapezoid, trapezoid
from scipy.special import gamma

from .exceptions import DomainCoverage, InvalidParameter
from .model import EquationSpec, antiderivative_F
from .radial_solver import RadialGrid, RadialTrajectory

logger = logging.getLogger(__package__)


@dataclass(frozen=True)
class LocalEnergyReadout:
    """The local energy and the cumulative integrals of |U|^{p+1} at time t."""

    t: float
    E_bar: float
    boundary_flux_integral: float
    interior_integral: float
    lam: float


@dataclass(frozen=True)
class LemmaReport:
    """The fitted constant of the local energy inequality along a run.

    Args:
        readouts:
            The per-time readouts.
        fitted_C:
            The smallest C ≥ 0 for which the inequality holds wherever its right side
            is positive.
        violations:
            Times where the inequality fails for every C, because the local energy
            is positive while the bracket on the right is not.
        additive_term:
            The term λ^{2/(p-1)}.
        lam:
            The dilation λ.
    """

    readouts: tuple[LocalEnergyReadout, ...]
    fitted_C: float
    violations: list[float]
    additive_term: float
    lam: float


def surface_measure(N: int) -> float:
    """The measure ω_{N-1} = 2π^{N/2}/Γ(N/2) of the unit sphere.

    Examples:
        >>> round(surface_measure(1), 12), round(surface_measure(3), 12)
        (2.0, 12.566370614359)
    """
    return float(2 * math.pi ** (N / 2) / gamma(N / 2))


def _ball_integral(
    values: NDArray[np.float64], grid: RadialGrid, radius: float, N: int
) -> float:
    """∫_{|x|<radius} of a radial function sampled on the grid."""
    r = grid.r
    if N == 1:
        if grid.r_min > -radius or grid.r_max < radius:
            raise DomainCoverage(
                f"The grid [{grid.r_min}, {grid.r_max}] does not cover the ball of "
                f"radius {radius}."
            )
        lower, upper = -radius, radius
        measure = np.ones_like(r)
    else:
        if grid.r_max < radius or grid.r_min >= radius:
            raise DomainCoverage(
                f"The grid [{grid.r_min}, {grid.r_max}] does not cover the ball of "
                f"radius {radius}."
            )
        lower, upper = grid.r_min, radius
        measure = surface_measure(N) * r ** (N - 1)

    inside = (r > lower) & (r < upper)
    points = np.concatenate(([lower], r[inside], [upper]))
    integrand = np.interp(points, r, values * measure)
    return float(trapezoid(integrand, points))


def _boundary_density(
    u: NDArray[np.float64], grid: RadialGrid, radius: float, p: float, N: int
) -> float:
    """|U|^{p+1} on the sphere |x| = radius, times its measure."""
    power = np.abs(u) ** (p + 1)
    if N == 1:
        edges = np.interp([-radius, radius], grid.r, power)
        return float(edges.sum())
    sphere = surface_measure(N) * radius ** (N - 1)
    return float(sphere * np.interp(radius, grid.r, power))


def E_bar(
    u: NDArray[np.float64],
    ut: NDArray[np.float64],
    grid: RadialGrid,
    t: float,
    lam: float,
    spec: EquationSpec,
) -> float:
    """The local energy 𝓔 of a radial state over the ball |x| < 1 - t.

    Args:
        u:
            The dilated solution U on the grid.
        ut:
            Its time derivative.
        grid:
            The grid.
        t:
            The time, in [0, 1).
        lam:
            The dilation λ ∈ (0, 1].
        spec:
            The undilated equation; F_λ is taken from `spec.rescaled(lam)`.

    Returns:
        The local energy.

    Raises:
        InvalidParameter:
            If t or λ is out of range.
        DomainCoverage:
            If the grid does not cover the ball.
    """
    if not 0 <= t < 1:
        raise InvalidParameter(f"The time must be in [0, 1), got {t}.")
    if not 0 < lam <= 1:
        raise InvalidParameter(f"The dilation must be in (0, 1], got {lam}.")
    p = spec.p
    ur = np.gradient(u, grid.r)
    integrand = 0.5 * ut**2 + 0.5 * ur**2 - np.abs(u) ** (p + 1) / (p + 1)
    if not spec.f_is_zero:
        integrand = integrand - np.asarray(antiderivative_F(spec.rescaled(lam), u))
    return _ball_integral(integrand, grid, 1 - t, spec.N)


def local_energy_readouts(
    trajectory: RadialTrajectory, lam: float, spec: EquationSpec
) -> tuple[LocalEnergyReadout, ...]:
    """The local energy and cumulative integrals at every stored time t < 1.

    Args:
        trajectory:
            A run of the dilated equation.
        lam:
            The dilation λ.
        spec:
            The undilated equation.

    Returns:
        The readouts.
    """
    grid, p, N = trajectory.grid, spec.p, spec.N
    chosen = np.flatnonzero(trajectory.times < 1)
    times = trajectory.times[chosen]
    energies, boundary, interior = [], [], []
    for index, t in zip(chosen, times):
        u, ut = trajectory.state(index)
        energies.append(E_bar(u, ut, grid, float(t), lam, spec))
        boundary.append(_boundary_density(u, grid, 1 - t, p, N))
        interior.append(_ball_integral(np.abs(u) ** (p + 1), grid, 1 - t, N))
    boundary_cumulative = cumulative_trapezoid(boundary, times, initial=0.0)
    interior_cumulative = lam * cumulative_trapezoid(interior, times, initial=0.0)
    return tuple(
        LocalEnergyReadout(
            t=float(t),
            E_bar=float(energy),
            boundary_flux_integral=float(boundary_value),
            interior_integral=float(interior_value),
            lam=lam,
        )
        for t, energy, boundary_value, interior_value in zip(
            times, energies, boundary_cumulative, interior_cumulative
        )
    )


def verify_energy_lemma(
    trajectory: RadialTrajectory, lam: float, spec: EquationSpec
) -> LemmaReport:
    """Fit the constant of the local energy inequality along a run.

    Args:
        trajectory:
            A run of the dilated equation, from `spec.rescaled(lam)`.
        lam:
            The dilation λ ∈ (0, 1].
        spec:
            The undilated equation.

    Returns:
        The report.
    """
    if not 0 < lam <= 1:
        raise InvalidParameter(f"The dilation must be in (0, 1], got {lam}.")
    readouts = local_energy_readouts(trajectory=trajectory, lam=lam, spec=spec)
    additive_term = lam ** (2 / (spec.p - 1))
    energy = np.array([readout.E_bar for readout in readouts])
    bracket = (
        energy[0]
        + np.array([readout.boundary_flux_integral for readout in readouts])
        + np.array([readout.interior_integral for readout in readouts])
        + additive_term
    )
    positive = bracket > 0
    ratios = energy[positive] / bracket[positive]
    fitted_C = max(0.0, float(np.max(ratios, initial=0.0)))
    violations = [
        readout.t
        for readout, value, right in zip(readouts, energy, bracket)
        if right <= 0 and value > 0
    ]
    logger.info(
        f"Local energy inequality holds with C={fitted_C:.4g} for λ={lam} "
        f"({len(violations)} violations)."
    )
    return LemmaReport(
        readouts=readouts,
        fitted_C=fitted_C,
        violations=violations,
        additive_term=additive_term,
        lam=lam,
    )
