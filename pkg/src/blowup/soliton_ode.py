"""The ODE system of soliton centers and its explicit zero-barycenter solution.

The centers ζ₁ < ... < ζ_k of k alternating solitons follow

    (1/c₁)ζ̇ᵢ = e^{-(2/(p-1))(ζᵢ - ζᵢ₋₁)} - e^{-(2/(p-1))(ζᵢ₊₁ - ζᵢ)},

where the interaction terms of the missing neighbours of ζ₁ and ζ_k are dropped.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray
from scipy.integrate import solve_ivp
from tqdm.auto import tqdm

from .exceptions import InvalidParameter, StepFailure
from .protocols import Forcing

logger = logging.getLogger(__package__)


MIN_GAP = 1e-8


@dataclass(frozen=True)
class CenterSystem:
    """The center system for k solitons.

    Args:
        p:
            The power of the nonlinearity.
        k:
            The number of solitons, at least 2.
        c1:
            The positive time scale of the interactions.
        alpha_bar:
            The offsets of the explicit solution; computed when omitted.

    Raises:
        InvalidParameter:
            If k < 2, c1 ≤ 0, p ≤ 1, or the offsets do not sum to zero.
    """

    p: float
    k: int
    c1: float = 1.0
    alpha_bar: tuple[float, ...] = field(default=())

    def __post_init__(self) -> None:
        if self.k < 2:
            raise InvalidParameter(f"The center system needs k ≥ 2, got {self.k}.")
        if not self.c1 > 0 or not self.p > 1:
            raise InvalidParameter(f"Need c1 > 0 and p > 1, got {self.c1}, {self.p}.")
        if not self.alpha_bar:
            object.__setattr__(
                self, "alpha_bar", tuple(alpha_bars(self.p, self.k, self.c1))
            )
        if len(self.alpha_bar) != self.k or abs(sum(self.alpha_bar)) > 1e-12:
            raise InvalidParameter("The offsets must have length k and sum to zero.")

    @property
    def rate(self) -> float:
        """The interaction rate 2/(p-1)."""
        return 2 / (self.p - 1)

    @property
    def drift(self) -> NDArray[np.float64]:
        """The coefficients (i-(k+1)/2)(p-1)/2 of log s in the explicit solution."""
        index = np.arange(1, self.k + 1)
        return (index - (self.k + 1) / 2) * (self.p - 1) / 2


@dataclass(frozen=True)
class PowerLawForcing:
    """The forcing c/s^{exponent}, uniform or antisymmetric (i-(k+1)/2)·c/s^{exponent}.

    Raises:
        InvalidParameter:
            If the exponent is not larger than 1.
        ValueError:
            If the profile is unknown.
    """

    c: float
    exponent: float = 1.5
    profile: str = "uniform"

    def __post_init__(self) -> None:
        if not self.exponent > 1:
            raise InvalidParameter(
                f"The forcing must decay faster than 1/s, got exponent {self.exponent}."
            )
        if self.profile not in ("uniform", "antisymmetric"):
            raise ValueError(f"Unsupported forcing profile: {self.profile!r}")

    def __call__(self, index: NDArray[np.int64], s: float) -> NDArray[np.float64]:
        magnitude = self.c / s**self.exponent
        if self.profile == "uniform":
            return np.full(index.shape, magnitude)
        return (index - (index.size + 1) / 2) * magnitude


@dataclass(frozen=True)
class CenterTrajectory:
    """Samples of the centers, of shape (len(s), k)."""

    s: NDArray[np.float64]
    zetas: NDArray[np.float64]

    @property
    def barycenters(self) -> NDArray[np.float64]:
        """The barycenter at every sample."""
        return self.zetas.mean(axis=1)


@dataclass(frozen=True)
class ConvergenceReport:
    """Convergence of a center trajectory to the shifted explicit solution.

    Args:
        shift:
            The shift ζ₀, the mean of ζᵢ - ζ̄ᵢ at the last sample.
        max_deviation:
            max |ζᵢ - ζ̄ᵢ - ζ₀| at the last sample.
        barycenter_drift:
            The largest change of the barycenter along the trajectory.
        deviation_history:
            max |ζᵢ - ζ̄ᵢ - ζ₀(s)| at every sample.
    """

    shift: float
    max_deviation: float
    barycenter_drift: float
    deviation_history: NDArray[np.float64]


def alpha_bars(p: float, k: int, c1: float = 1.0) -> NDArray[np.float64]:
    """The offsets ᾱᵢ of the explicit solution.

    Substituting ζ̄ᵢ(s) = (i-(k+1)/2)((p-1)/2)log s + ᾱᵢ in the system turns it into
    a telescoping system for bᵢ = e^{-(2/(p-1))(ᾱᵢ₊₁ - ᾱᵢ)}, solved by
    bᵢ = (p-1)i(k-i)/(4c₁) > 0. The offsets are normalised to sum to zero.

    Args:
        p:
            The power of the nonlinearity.
        k:
            The number of solitons, at least 2.
        c1:
            The interaction time scale.

    Returns:
        The offsets.

    Raises:
        InvalidParameter:
            If k < 2 or c1 ≤ 0.

    Examples:
        >>> [round(float(alpha), 5) for alpha in alpha_bars(3.0, 2)]
        [-0.34657, 0.34657]
    """
    if k < 2:
        raise InvalidParameter(f"The center system needs k ≥ 2, got {k}.")
    if not c1 > 0:
        raise InvalidParameter(f"c1 must be positive, got {c1}.")
    index = np.arange(1, k)
    couplings = (p - 1) * index * (k - index) / (4 * c1)
    gaps = -(p - 1) / 2 * np.log(couplings)
    offsets = np.concatenate(([0.0], np.cumsum(gaps)))
    return offsets - offsets.mean()


def zeta_bar(
    system: CenterSystem, s: float | NDArray[np.float64]
) -> NDArray[np.float64]:
    """The explicit solution ζ̄ᵢ(s) = (i-(k+1)/2)((p-1)/2)log s + ᾱᵢ.

    Args:
        system:
            The system.
        s:
            A slow time or an array of slow times.

    Returns:
        The centers, of shape (k,) or (len(s), k).

    Raises:
        InvalidParameter:
            If some s ≤ 0.
    """
    s_array = np.asarray(s, dtype=float)
    if np.any(s_array <= 0):
        raise InvalidParameter("The explicit solution needs s > 0.")
    return np.log(s_array)[..., None] * system.drift + np.asarray(system.alpha_bar)


def center_rhs(system: CenterSystem, zetas: NDArray[np.float64]) -> NDArray[np.float64]:
    """The right-hand side c₁(e^{-a(ζᵢ-ζᵢ₋₁)} - e^{-a(ζᵢ₊₁-ζᵢ)}) with a = 2/(p-1)."""
    interactions = np.exp(-system.rate * np.diff(zetas))
    from_left = np.concatenate(([0.0], interactions))
    from_right = np.concatenate((interactions, [0.0]))
    return system.c1 * (from_left - from_right)


def explicit_residual(system: CenterSystem, s_values: NDArray[np.float64]) -> float:
    """max |(1/c₁)ζ̄̇ᵢ - RHS(ζ̄)| over the samples, with ζ̄̇ taken analytically."""
    residuals = [
        np.max(np.abs(system.drift / s - center_rhs(system, zeta_bar(system, s))))
        / system.c1
        for s in np.asarray(s_values, dtype=float)
    ]
    return float(np.max(residuals))


def integrate_system(
    system: CenterSystem,
    zeta_init: NDArray[np.float64],
    s_range: tuple[float, float],
    forcing: Forcing | None = None,
    n_samples: int = 200,
    rtol: float = 1e-12,
    atol: float = 1e-12,
) -> CenterTrajectory:
    """Integrate the center system, optionally forced, by adaptive Runge-Kutta.

    Args:
        system:
            The system.
        zeta_init:
            The strictly increasing initial centers.
        s_range:
            The pair (s_start, s_end), with s_start > 0.
        forcing:
            A forcing term of (i, s), or None.
        n_samples:
            The number of log-spaced output samples.
        rtol:
            The relative tolerance.
        atol:
            The absolute tolerance.

    Returns:
        The trajectory.

    Raises:
        InvalidParameter:
            If the initial centers do not match k or are not increasing.
        StepFailure:
            If a gap collapses below 1e-8 or the integrator fails.
    """
    zeta_init = np.asarray(zeta_init, dtype=float)
    if zeta_init.shape != (system.k,) or np.any(np.diff(zeta_init) <= 0):
        raise InvalidParameter("The initial centers must be k increasing values.")
    s_start, s_end = map(float, s_range)
    if not 0 < s_start < s_end:
        raise InvalidParameter(f"Need 0 < s_start < s_end, got {s_range}.")
    index = np.arange(1, system.k + 1)

    def rhs(s: float, zetas: NDArray[np.float64]) -> NDArray[np.float64]:
        values = center_rhs(system, zetas)
        if forcing is not None:
            values = values + forcing(index, s)
        return values

    def collapse(s: float, zetas: NDArray[np.float64]) -> float:
        return float(np.min(np.diff(zetas))) - MIN_GAP

    setattr(collapse, "terminal", True)

    s_eval = np.geomspace(s_start, s_end, n_samples)
    s_eval[0], s_eval[-1] = s_start, s_end
    solution = solve_ivp(
        rhs,
        (s_start, s_end),
        zeta_init,
        method="DOP853",
        t_eval=s_eval,
        events=collapse,
        rtol=rtol,
        atol=atol,
    )
    if solution.status == 1:
        raise StepFailure(
            f"Two centers collapsed at s={solution.t_events[0][0]:.6g}."
        )
    if solution.status != 0:
        raise StepFailure(f"The center integration failed: {solution.message}")
    return CenterTrajectory(s=solution.t, zetas=solution.y.T)


def barycenter(zetas: NDArray[np.float64] | list[float]) -> float:
    """The mean of the centers.

    Examples:
        >>> barycenter([1.0, 2.0, 3.0])
        2.0
    """
    return float(np.mean(zetas))


def convergence_report(
    trajectory: CenterTrajectory, system: CenterSystem
) -> ConvergenceReport:
    """Compare a center trajectory with the explicit solution shifted by its barycenter.

    Args:
        trajectory:
            The trajectory.
        system:
            The system.

    Returns:
        The report.
    """
    differences = trajectory.zetas - zeta_bar(system, trajectory.s)
    shifts = differences.mean(axis=1)
    deviations = np.max(np.abs(differences - shifts[:, None]), axis=1)
    barycenters = trajectory.barycenters
    report = ConvergenceReport(
        shift=float(shifts[-1]),
        max_deviation=float(deviations[-1]),
        barycenter_drift=float(np.max(np.abs(barycenters - barycenters[0]))),
        deviation_history=deviations,
    )
    logger.info(
        f"Centers converge to the explicit solution shifted by {report.shift:.6g}, "
        f"final deviation {report.max_deviation:.3g}."
    )
    return report


def ensemble(
    system: CenterSystem,
    n_runs: int,
    s_range: tuple[float, float],
    rng: np.random.Generator,
    spread: float = 0.3,
    forcing: Forcing | None = None,
) -> list[ConvergenceReport]:
    """Convergence reports of runs started at randomly perturbed explicit solutions.

    The perturbations are uniform in [-spread, spread], re-centred to keep the
    barycenter at 0, and rejected when they break the ordering.
    """
    base = zeta_bar(system, s_range[0])
    reports = []
    for _ in tqdm(range(n_runs), desc="Integrating center systems", leave=False):
        while True:
            perturbation = rng.uniform(-spread, spread, system.k)
            start = base + perturbation - perturbation.mean()
            if np.all(np.diff(start) > 0.1):
                break
        trajectory = integrate_system(
            system=system, zeta_init=start, s_range=s_range, forcing=forcing
        )
        reports.append(convergence_report(trajectory, system))
    return reports

