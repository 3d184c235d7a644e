"""The soliton family κ(d, y) and decompositions of frames into alternating solitons.

In the coordinate ξ = argth y, with d = -tanh ζ, the profile
W = κ(d, y)(1-y²)^{1/(p-1)} equals κ₀ sech^{2/(p-1)}(ξ - ζ), a bump centred at ζ.
Centers are therefore optimised in ζ.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy.optimize import least_squares, minimize_scalar
from scipy.signal import argrelextrema
from tqdm.auto import tqdm

from .exceptions import FitFailure, InvalidParameter
from .functionals import E0, hnorm, hnorm_arrays, soliton_energy, weight
from .similarity import SimilarityFrame, trapezoid_weights

logger = logging.getLogger(__package__)


MAX_CENTER = math.atanh(0.999)


@dataclass(frozen=True)
class SolitonParams:
    """A single soliton θκ(d, ·)."""

    d: float
    theta: int

    def __post_init__(self) -> None:
        if not abs(self.d) < 1:
            raise InvalidParameter(f"Need |d| < 1, got d={self.d}.")
        if self.theta not in (-1, 1):
            raise InvalidParameter(f"The sign must be ±1, got {self.theta}.")

    @property
    def zeta(self) -> float:
        """The center ζ = -argth d."""
        return -math.atanh(self.d)


@dataclass(frozen=True)
class SolitonDecomposition:
    """An alternating sum θ₁Σ(-1)^{i+1}κ(-tanh ζᵢ, ·) fitted to a frame.

    Args:
        k:
            The number of solitons.
        theta1:
            The sign of the first soliton.
        zetas:
            The strictly increasing centers.
        residual_hnorm:
            The H-norm of the residual.
        converged:
            Whether the residual is below the decomposition tolerance.
        k_energy:
            The number of solitons predicted by the energy, for cross-checking.
    """

    k: int
    theta1: int
    zetas: tuple[float, ...]
    residual_hnorm: float
    converged: bool
    k_energy: int | None = None

    @property
    def ds(self) -> tuple[float, ...]:
        """The parameters dᵢ = -tanh ζᵢ."""
        return tuple(-math.tanh(zeta) for zeta in self.zetas)

    @property
    def signs(self) -> tuple[int, ...]:
        """The alternating signs θ₁(-1)^{i+1}."""
        return tuple(self.theta1 * (-1) ** i for i in range(self.k))


def kappa0(p: float) -> float:
    """κ₀ = (2(p+1)/(p-1)²)^{1/(p-1)}.

    Examples:
        >>> round(kappa0(3.0), 6)
        1.414214
    """
    return (2 * (p + 1) / (p - 1) ** 2) ** (1 / (p - 1))


def kappa(
    p: float, d: float, y: NDArray[np.float64] | float
) -> NDArray[np.float64] | float:
    """κ(d, y) = κ₀(1-d²)^{1/(p-1)}/(1+dy)^{2/(p-1)}.

    Examples:
        >>> round(float(kappa(3.0, 0.5, 0.0)), 6)
        1.224745
    """
    return kappa0(p) * (1 - d**2) ** (1 / (p - 1)) / (1 + d * np.asarray(y)) ** (
        2 / (p - 1)
    )


def kappa_dy(
    p: float, d: float, y: NDArray[np.float64] | float
) -> NDArray[np.float64] | float:
    """The y-derivative of κ(d, y)."""
    a = 2 / (p - 1)
    return (
        -a
        * d
        * kappa0(p)
        * (1 - d**2) ** (1 / (p - 1))
        / (1 + d * np.asarray(y)) ** (a + 1)
    )


def soliton_sum(
    p: float,
    theta1: int,
    zetas: NDArray[np.float64] | list[float],
    y: NDArray[np.float64],
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """The sum θ₁Σ(-1)^{i+1}κ(-tanh ζᵢ, y) and its y-derivative."""
    values = np.zeros_like(y, dtype=float)
    derivative = np.zeros_like(y, dtype=float)
    for index, zeta in enumerate(zetas):
        sign = theta1 * (-1) ** index
        d = -math.tanh(zeta)
        values += sign * kappa(p, d, y)
        derivative += sign * kappa_dy(p, d, y)
    return values, derivative


def soliton_frame(
    p: float,
    theta1: int,
    zetas: NDArray[np.float64] | list[float],
    y_grid: NDArray[np.float64],
    s: float = 0.0,
) -> SimilarityFrame:
    """A static frame (θ₁Σ(-1)^{i+1}κ(-tanh ζᵢ, ·), 0)."""
    w, wy = soliton_sum(p, theta1, zetas, y_grid)
    return SimilarityFrame(
        r0=0.0, T0=0.0, s=s, y_grid=y_grid, w=w, ws=np.zeros_like(w), wy=wy
    )


def _single_residual(
    frame: SimilarityFrame, p: float, theta: int, zeta: float
) -> float:
    d = -math.tanh(zeta)
    y = frame.y_grid
    return hnorm_arrays(
        frame.w - theta * kappa(p, d, y),
        frame.wy - theta * kappa_dy(p, d, y),
        frame.ws,
        y,
        p,
    )


def fit_single(
    frame: SimilarityFrame, p: float, n_starts: int = 5, n_coarse: int = 41
) -> tuple[SolitonParams, float]:
    """Fit θκ(d, ·) to a frame in the H-norm.

    The residual is scanned on a coarse grid of ζ = -argth d in [-argth 0.999,
    argth 0.999] for both signs; the best local minima are refined by bounded Brent
    search (golden-section steps with parabolic acceleration).

    Args:
        frame:
            The frame.
        p:
            The power of the nonlinearity.
        n_starts:
            The number of refined starts.
        n_coarse:
            The number of coarse ζ values.

    Returns:
        The fitted soliton and the residual H-norm.
    """
    coarse = np.linspace(-MAX_CENTER, MAX_CENTER, n_coarse)
    candidates = []
    for theta in (1, -1):
        values = np.array([_single_residual(frame, p, theta, zeta) for zeta in coarse])
        for index in np.argsort(values, kind="stable")[:n_starts]:
            candidates.append((float(values[index]), theta, int(index)))
    candidates.sort(key=lambda candidate: candidate[0])

    best_value, best_theta, best_zeta = math.inf, 1, 0.0
    for _, theta, index in candidates[:n_starts]:
        lower = coarse[max(index - 1, 0)]
        upper = coarse[min(index + 1, n_coarse - 1)]
        result = minimize_scalar(
            lambda zeta: _single_residual(frame, p, theta, zeta),
            bounds=(lower, upper),
            method="bounded",
            options=dict(xatol=1e-12, maxiter=500),
        )
        if result.fun < best_value:
            best_value, best_theta = float(result.fun), theta
            best_zeta = float(result.x)

    return SolitonParams(d=-math.tanh(best_zeta), theta=best_theta), best_value


def seed_centers(
    frame: SimilarityFrame, p: float, threshold: float = 0.1
) -> list[tuple[float, int]]:
    """Signed local extrema of W = w(1-y²)^{1/(p-1)} in ξ = argth y.

    Consecutive extrema of the same sign are merged into the largest one, so the
    result alternates in sign.

    Args:
        frame:
            The frame.
        p:
            The power of the nonlinearity.
        threshold:
            Extrema below this fraction of max|W| are ignored.

    Returns:
        The pairs (ζ, sign), ordered by ζ.
    """
    y = frame.y_grid
    W = frame.w * (1 - y**2) ** (1 / (p - 1))
    peak = float(np.max(np.abs(W)))
    if peak == 0:
        return []
    maxima = argrelextrema(W, np.greater_equal, order=1)[0]
    minima = argrelextrema(W, np.less_equal, order=1)[0]
    extrema = sorted(
        [(int(i), 1) for i in maxima if W[i] > threshold * peak]
        + [(int(i), -1) for i in minima if W[i] < -threshold * peak]
    )

    merged: list[tuple[int, int]] = []
    for index, sign in extrema:
        if merged and merged[-1][1] == sign:
            if abs(W[index]) > abs(W[merged[-1][0]]):
                merged[-1] = (index, sign)
            continue
        merged.append((index, sign))
    return [(math.atanh(y[index]), sign) for index, sign in merged]


def _initial_centers(
    seeds: list[tuple[float, int]], k: int
) -> tuple[list[float], int]:
    """k alternating starting centers from the seeds, padded with gaps of 1.5."""
    if not seeds:
        return [1.5 * (i - (k - 1) / 2) for i in range(k)], 1
    if len(seeds) >= k:
        # The most central run of k seeds
        offsets = [abs(zeta) for zeta, _ in seeds]
        windows = range(len(seeds) - k + 1)
        start = min(windows, key=lambda j: sum(offsets[j : j + k]))
        chosen = seeds[start : start + k]
        return [zeta for zeta, _ in chosen], chosen[0][1]
    centers = [zeta for zeta, _ in seeds]
    while len(centers) < k:
        centers.append(centers[-1] + 1.5)
    return centers, seeds[0][1]


def _decomposition_residual(
    frame: SimilarityFrame, p: float, theta1: int, k: int
):
    y = frame.y_grid
    sqrt_rho_q = np.sqrt(weight(y, p, "rho") * trapezoid_weights(y))
    sqrt_one_minus = np.sqrt(1 - y**2)

    def residual(parameters: NDArray[np.float64]) -> NDArray[np.float64]:
        offsets = np.cumsum(np.exp(parameters[1:]))
        zetas = parameters[0] + np.concatenate(([0.0], offsets))
        values, derivative = soliton_sum(p, theta1, zetas, y)
        return np.concatenate(
            [
                sqrt_rho_q * (frame.w - values),
                sqrt_rho_q * sqrt_one_minus * (frame.wy - derivative),
                sqrt_rho_q * frame.ws,
            ]
        )

    return residual


def _fit_k(
    frame: SimilarityFrame, p: float, k: int, theta1: int, centers: list[float]
) -> tuple[tuple[float, ...], float]:
    gaps = np.maximum(np.diff(centers), 0.05)
    start = np.concatenate(([centers[0]], np.log(gaps)))
    lower = np.concatenate(([-2 * MAX_CENTER], np.full(k - 1, math.log(1e-3))))
    upper = np.concatenate(([2 * MAX_CENTER], np.full(k - 1, math.log(4 * MAX_CENTER))))
    start = np.clip(start, lower + 1e-9, upper - 1e-9)
    result = least_squares(
        _decomposition_residual(frame, p, theta1, k),
        start,
        bounds=(lower, upper),
        method="trf",
        xtol=1e-14,
        ftol=1e-14,
        gtol=1e-14,
        max_nfev=2000,
    )
    zetas = result.x[0] + np.concatenate(([0.0], np.cumsum(np.exp(result.x[1:]))))
    return tuple(float(zeta) for zeta in zetas), float(np.linalg.norm(result.fun))


def decompose(
    frame: SimilarityFrame,
    p: float,
    k_max: int = 5,
    tolerance_fraction: float = 0.05,
) -> SolitonDecomposition:
    """Decompose a frame into alternating solitons.

    For k = 1, ..., k_max the centers are fitted by nonlinear least squares over ζ₁
    and the logarithms of the gaps ζᵢ₊₁ - ζᵢ, which keeps them ordered. The smallest
    k whose residual is below `tolerance_fraction`·‖frame‖_H is returned; otherwise
    the best fit is returned with `converged=False`. A null frame decomposes into
    k = 0 solitons.

    Args:
        frame:
            The frame.
        p:
            The power of the nonlinearity.
        k_max:
            The largest number of solitons, at most 5.
        tolerance_fraction:
            The decomposition tolerance relative to the frame norm.

    Returns:
        The decomposition.

    Raises:
        InvalidParameter:
            If k_max is not in 1..5.
        FitFailure:
            If every fit has a non-finite residual.
    """
    if not 1 <= k_max <= 5:
        raise InvalidParameter(f"k_max must be in 1..5, got {k_max}.")
    frame_norm = hnorm(frame, p)
    k_energy = estimate_k_from_energy(E0(frame, p), p)
    if frame_norm < 1e-12:
        return SolitonDecomposition(
            k=0,
            theta1=1,
            zetas=(),
            residual_hnorm=frame_norm,
            converged=True,
            k_energy=k_energy,
        )

    tolerance = tolerance_fraction * frame_norm
    seeds = seed_centers(frame, p)
    best: SolitonDecomposition | None = None
    for k in range(1, k_max + 1):
        centers, theta1 = _initial_centers(seeds, k)
        zetas, residual = _fit_k(frame, p, k, theta1, centers)
        if residual >= tolerance:
            flipped_zetas, flipped_residual = _fit_k(frame, p, k, -theta1, centers)
            if flipped_residual < residual:
                zetas, residual, theta1 = flipped_zetas, flipped_residual, -theta1
        candidate = SolitonDecomposition(
            k=k,
            theta1=theta1,
            zetas=zetas,
            residual_hnorm=residual,
            converged=residual < tolerance,
            k_energy=k_energy,
        )
        if candidate.converged:
            best = candidate
            break
        if best is None or residual < best.residual_hnorm:
            best = candidate

    if best is None or not math.isfinite(best.residual_hnorm):
        raise FitFailure(f"No finite decomposition was found for k = 1, ..., {k_max}.")
    if best.k != k_energy:
        logger.info(
            f"The residual selects k={best.k} solitons while the energy suggests "
            f"k={k_energy}."
        )
    return best


def decompose_frames(
    frames: list[SimilarityFrame] | tuple[SimilarityFrame, ...],
    p: float,
    k_max: int = 5,
    tolerance_fraction: float = 0.05,
) -> list[SolitonDecomposition]:
    """Decompose a sequence of frames."""
    return [
        decompose(frame, p, k_max=k_max, tolerance_fraction=tolerance_fraction)
        for frame in tqdm(frames, desc="Decomposing frames", leave=False)
    ]


def estimate_k_from_energy(E0_value: float, p: float) -> int:
    """The number of solitons E0/E0(κ₀), rounded; 0 below one half.

    Examples:
        >>> estimate_k_from_energy(2 * (4 / 3) * 1.02, 3.0)
        2
    """
    if not math.isfinite(E0_value):
        raise InvalidParameter(f"The energy must be finite, got {E0_value}.")
    ratio = E0_value / soliton_energy(p)
    if ratio < 0.5:
        return 0
    return int(math.floor(ratio + 0.5))


def soliton_lipschitz_ratios(
    p: float, pairs: NDArray[np.float64], y_grid: NDArray[np.float64]
) -> NDArray[np.float64]:
    """‖(κ(d₁), 0) - (κ(d₂), 0)‖_H / |argth d₁ - argth d₂| for pairs (d₁, d₂)."""
    ratios = []
    zeros = np.zeros_like(y_grid)
    for d1, d2 in pairs:
        distance = hnorm_arrays(
            kappa(p, d1, y_grid) - kappa(p, d2, y_grid),
            kappa_dy(p, d1, y_grid) - kappa_dy(p, d2, y_grid),
            zeros,
            y_grid,
            p,
        )
        ratios.append(distance / abs(math.atanh(d1) - math.atanh(d2)))
    return np.asarray(ratios)
