"""Classification of blow-up points and the shape of the blow-up graph near them.

A point is non-characteristic when the blow-up graph lies above a cone of slope
δ₀ < 1 through it. Near a characteristic point where k solitons collide,

    T(r) - T(r₀) + |r - r₀| ∼ ν|r - r₀| / |log|r - r₀||^{(k-1)(p-1)/2},

which the corner fit below recovers from a sampled graph.
"""

import logging
import math
from dataclasses import dataclass
from enum import StrEnum
from typing import Sequence

import numpy as np
from numpy.typing import NDArray
from scipy.stats import linregress

from .exceptions import InsufficientRange, InvalidParameter
from .functionals import soliton_energy
from .radial_solver import BlowupGraph, PointClass, RadialTrajectory, Status

logger = logging.getLogger(__package__)


class SignHint(StrEnum):
    """Hints on a point's class derived from the sign of the solution."""

    NON_CHARACTERISTIC_BY_SIGN = "NonCharacteristicBySign"


@dataclass(frozen=True)
class CornerFit:
    """A fit of the corner form on one side of r₀.

    Args:
        r0:
            The point.
        k_assumed:
            The assumed number of solitons at r₀.
        side:
            `left` or `right`.
        amplitude:
            The estimated prefactor of the corner form.
        exponent_fit:
            The fitted exponent of |log|r - r₀||.
        exponent_theory:
            The exponent (k-1)(p-1)/2.
        r_window:
            The range of r used.
        fit_quality:
            The R² of the regression.
    """

    r0: float
    k_assumed: int
    side: str
    amplitude: float
    exponent_fit: float
    exponent_theory: float
    r_window: tuple[float, float]
    fit_quality: float


@dataclass(frozen=True)
class SpeedCheck:
    """The blow-up rate sup|u| against |log(T-t)|^{(k-1)/2}/(T-t)^{2/(p-1)}.

    Args:
        t_values:
            The times used.
        sup_u:
            sup |u| over the backward light cone at each time.
        ratios:
            sup|u| divided by the predicted rate.
        lower_ratio:
            ratios·C₄, at least 1 by construction.
        upper_ratio:
            ratios/C₄, at most 1 by construction.
        C4_fit:
            The smallest C₄ with 1/C₄ ≤ ratios ≤ C₄.
        band_width:
            (max ratio - min ratio)/mean ratio.
        consistent:
            False if the solution does not grow, in which case the ratios vanish.
    """

    t_values: NDArray[np.float64]
    sup_u: NDArray[np.float64]
    ratios: NDArray[np.float64]
    lower_ratio: NDArray[np.float64]
    upper_ratio: NDArray[np.float64]
    C4_fit: float
    band_width: float
    consistent: bool


def classify_point(
    E0_series: Sequence[float] | NDArray[np.float64],
    p: float,
    tolerance: float | None = None,
    tail_fraction: float = 0.25,
) -> PointClass:
    """Classify a point from the energy E0 of its similarity profile along s.

    The tail of the series counts as stable if its spread is within the tolerance.
    A stable tail below 2E0(κ₀) - tolerance means fewer than two solitons, so the
    point is non-characteristic; a stable tail at the two-soliton level or above
    makes it a characteristic candidate.

    Args:
        E0_series:
            E0 at increasing slow times.
        p:
            The power of the nonlinearity.
        tolerance:
            The tolerance, 0.15·E0(κ₀) by default.
        tail_fraction:
            The fraction of the series forming its tail, at least 3 values.

    Returns:
        The classification.

    Examples:
        >>> classify_point([1.5, 1.4, 4 / 3, 4 / 3, 4 / 3, 4 / 3], 3.0).value
        'NonCharacteristic'
    """
    level = soliton_energy(p)
    tolerance = 0.15 * level if tolerance is None else tolerance
    series = np.asarray(E0_series, dtype=float)
    tail = series[-max(3, int(math.ceil(tail_fraction * series.size))) :]
    if tail.size < 3 or not np.all(np.isfinite(tail)):
        return PointClass.UNKNOWN
    if np.ptp(tail) > tolerance:
        return PointClass.UNKNOWN
    if tail.mean() < 2 * level - tolerance:
        return PointClass.NON_CHARACTERISTIC
    return PointClass.CHARACTERISTIC_CANDIDATE


def _valid_samples(
    graph: BlowupGraph, min_quality: float
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    valid = np.isfinite(graph.T_estimates) & (
        np.nan_to_num(graph.fit_quality) >= min_quality
    )
    return graph.r_samples[valid], graph.T_estimates[valid]


def _value_at(r: NDArray[np.float64], T: NDArray[np.float64], r0: float) -> float:
    if r.size == 0 or not r[0] <= r0 <= r[-1]:
        raise InsufficientRange(f"The graph has no valid samples around r₀={r0}.")
    return float(np.interp(r0, r, T))


def cone_test(
    graph: BlowupGraph,
    r0: float,
    delta0: float,
    window: float | None = None,
    tolerance: float = 1e-9,
    min_quality: float = 0.99,
) -> bool:
    """Check that the graph lies above the cone T(r₀) - δ₀|r - r₀| near r₀.

    Args:
        graph:
            The blow-up graph.
        r0:
            The point.
        delta0:
            The slope δ₀ in (0, 1).
        window:
            Only samples with |r - r₀| ≤ window are checked; all by default.
        tolerance:
            The fit tolerance.
        min_quality:
            Samples with a lower fit quality are ignored.

    Returns:
        Whether the graph lies above the cone.

    Raises:
        InvalidParameter:
            If δ₀ is not in (0, 1).
        InsufficientRange:
            If r₀ is outside the valid samples.
    """
    if not 0 < delta0 < 1:
        raise InvalidParameter(f"δ₀ must be in (0, 1), got {delta0}.")
    r, T = _valid_samples(graph, min_quality)
    T0 = _value_at(r, T, r0)
    distance = np.abs(r - r0)
    inside = distance <= (np.inf if window is None else window)
    return bool(np.all(T[inside] >= T0 - delta0 * distance[inside] - tolerance))


def corner_graph(
    r0: float,
    T0: float,
    p: float,
    k: int,
    amplitude: float = 1.0,
    x_values: NDArray[np.float64] | None = None,
) -> BlowupGraph:
    """A synthetic graph T(r) = T₀ - x + A·x/|log x|^{(k-1)(p-1)/2}, x = |r - r₀|.

    Args:
        r0:
            The corner.
        T0:
            The blow-up time at the corner.
        p:
            The power of the nonlinearity.
        k:
            The number of solitons at the corner.
        amplitude:
            The prefactor A.
        x_values:
            The distances sampled on both sides, inside (0, 1). Three decades of
            geometric spacing by default.

    Returns:
        The graph, with unit fit quality.
    """
    x = np.geomspace(1e-4, 1e-1, 60) if x_values is None else np.asarray(x_values)
    if np.any(x <= 0) or np.any(x >= 1):
        raise InvalidParameter("The distances must lie in (0, 1).")
    exponent = (k - 1) * (p - 1) / 2
    profile = T0 - x + amplitude * x / np.abs(np.log(x)) ** exponent
    r = np.concatenate((r0 - x[::-1], [r0], r0 + x))
    T = np.concatenate((profile[::-1], [T0], profile))
    return BlowupGraph(
        r_samples=r,
        T_estimates=T,
        fit_quality=np.ones_like(r),
        classification=tuple(PointClass.UNKNOWN for _ in r),
    )


def _side_samples(
    graph: BlowupGraph, r0: float, side: str, min_quality: float
) -> tuple[NDArray[np.float64], NDArray[np.float64], float]:
    r, T = _valid_samples(graph, min_quality)
    T0 = _value_at(r, T, r0)
    match side:
        case "right":
            chosen = r > r0
        case "left":
            chosen = r < r0
        case _:
            raise ValueError(f"Unsupported side: {side!r}")
    x = np.abs(r[chosen] - r0)
    keep = x < 1
    return x[keep], T[chosen][keep], T0


def corner_fit(
    graph: BlowupGraph,
    r0: float,
    p: float,
    k: int,
    side: str = "right",
    min_decades: float = 1.0,
    min_quality: float = 0.99,
) -> CornerFit:
    """Fit the corner form on one side of r₀.

    Regresses log[(T(r) - T(r₀) + x)/x] on log|log x|, x = |r - r₀| < 1; the slope is
    minus the exponent and the intercept the log of the amplitude.

    Args:
        graph:
            The blow-up graph.
        r0:
            The point.
        p:
            The power of the nonlinearity.
        k:
            The assumed number of solitons.
        side:
            `left` or `right`.
        min_decades:
            The least range of x, in decades.
        min_quality:
            Samples with a lower fit quality are ignored.

    Returns:
        The fit.

    Raises:
        InsufficientRange:
            If fewer than 3 usable samples remain, their range is too narrow, or the
            graph shows no corner (T(r) - T(r₀) + x ≡ x, as for a flat graph).
    """
    x, T, T0 = _side_samples(graph, r0, side, min_quality)
    excess = T - T0 + x
    usable = excess > 0
    x, excess = x[usable], excess[usable]
    if x.size < 3:
        raise InsufficientRange(f"Only {x.size} usable samples on the {side} side.")
    decades = math.log10(x.max() / x.min())
    if decades < min_decades:
        raise InsufficientRange(
            f"The samples span {decades:.2f} decades, need {min_decades}."
        )
    response = np.log(excess / x)
    regressor = np.log(np.abs(np.log(x)))
    if np.ptp(response) < 1e-12:
        raise InsufficientRange(
            "The graph has no corner at r₀: T(r) - T(r₀) + |r - r₀| equals |r - r₀|."
        )
    fit = linregress(regressor, response)
    return CornerFit(
        r0=r0,
        k_assumed=k,
        side=side,
        amplitude=float(math.exp(fit.intercept)),
        exponent_fit=float(-fit.slope),
        exponent_theory=(k - 1) * (p - 1) / 2,
        r_window=(float(x.min()), float(x.max())),
        fit_quality=float(fit.rvalue**2),
    )


def corner_derivative_check(
    graph: BlowupGraph, fit: CornerFit, min_quality: float = 0.99
) -> float:
    """Compare the numerical T'(r) + θ(r) with the derivative of the fitted form.

    With θ = sign(r - r₀), L = |log x| and exponent e, the fitted form gives
    T'(r) + θ = θ·A·L^{-e}(1 + e/L). The endpoints of the window are excluded.

    Returns:
        The largest relative deviation over the window.
    """
    x, T, _ = _side_samples(graph, fit.r0, fit.side, min_quality)
    inside = (x >= fit.r_window[0]) & (x <= fit.r_window[1])
    x, T = x[inside], T[inside]
    order = np.argsort(x)
    x, T = x[order], T[order]
    if x.size < 5:
        raise InsufficientRange("Too few samples for a derivative check.")
    theta = 1.0 if fit.side == "right" else -1.0
    # dT/dr = θ·dT/dx
    numerical = theta * np.gradient(T, x) + theta
    logs = np.abs(np.log(x))
    predicted = theta * fit.amplitude * logs ** (-fit.exponent_fit) * (
        1 + fit.exponent_fit / logs
    )
    deviation = np.abs(numerical - predicted)[1:-1] / np.abs(predicted)[1:-1]
    return float(np.max(deviation))


def speed_bound_check(
    trajectory: RadialTrajectory,
    r0: float,
    T_r0: float,
    p: float,
    k: int,
    tau_max: float = 0.5,
) -> SpeedCheck:
    """Compare sup|u| over the backward light cone of (r₀, T(r₀)) with the rate.

    The predicted rate is |log τ|^{(k-1)/2}/τ^{2/(p-1)}, τ = T(r₀) - t, evaluated at
    the stored times with 0 < τ ≤ tau_max.

    Args:
        trajectory:
            The trajectory.
        r0:
            The point.
        T_r0:
            Its blow-up time.
        p:
            The power of the nonlinearity.
        k:
            The number of solitons at r₀.
        tau_max:
            The largest τ used, below 1 so that |log τ| > 0.

    Returns:
        The check.

    Raises:
        InsufficientRange:
            If no stored time falls in the window.
        InvalidParameter:
            If tau_max is not in (0, 1).
    """
    if not 0 < tau_max < 1:
        raise InvalidParameter(f"tau_max must be in (0, 1), got {tau_max}.")
    tau = T_r0 - trajectory.times
    chosen = (tau > 0) & (tau <= tau_max)
    if not np.any(chosen):
        raise InsufficientRange("No stored time lies in the light cone window.")
    r = trajectory.grid.r
    sup_u = []
    for index in np.flatnonzero(chosen):
        cone = np.abs(r - r0) < tau[index]
        if not np.any(cone):
            cone = np.abs(r - r0) == np.min(np.abs(r - r0))
        sup_u.append(float(np.max(np.abs(trajectory.u[index, cone]))))
    sup = np.asarray(sup_u)
    tau = tau[chosen]
    ratios = sup * tau ** (2 / (p - 1)) / np.abs(np.log(tau)) ** ((k - 1) / 2)

    consistent = bool(np.all(ratios > 0))
    if consistent:
        C4 = float(max(ratios.max(), 1 / ratios.min()))
        band_width = float(np.ptp(ratios) / ratios.mean())
    else:
        logger.warning("The solution does not grow in the backward light cone.")
        C4, band_width = math.inf, math.inf
    lower, upper = (ratios * C4, ratios / C4) if consistent else (ratios, ratios)
    return SpeedCheck(
        t_values=trajectory.times[chosen],
        sup_u=sup,
        ratios=ratios,
        lower_ratio=lower,
        upper_ratio=upper,
        C4_fit=C4,
        band_width=band_width,
        consistent=consistent,
    )


def sign_rule(
    trajectory: RadialTrajectory,
    r_interval: tuple[float, float],
    t0: float = 0.0,
    tolerance: float = 1e-10,
) -> SignHint | None:
    """Hint that a region holds no characteristic point because u has a sign.

    Args:
        trajectory:
            A trajectory that blew up.
        r_interval:
            The interval (r_a, r_b); the hint applies to its interior points.
        t0:
            The sign is checked from this time on.
        tolerance:
            The tolerance on the sign.

    Returns:
        The hint, or None if u changes sign or the run did not blow up.
    """
    if trajectory.status != Status.BLOWUP_DETECTED:
        return None
    r = trajectory.grid.r
    region = (r >= r_interval[0]) & (r <= r_interval[1])
    values = trajectory.u[trajectory.times >= t0][:, region]
    if values.size == 0:
        return None
    if np.min(values) >= -tolerance or np.max(values) <= tolerance:
        return SignHint.NON_CHARACTERISTIC_BY_SIGN
    return None


def characteristic_brackets(
    trajectory: RadialTrajectory, graph: BlowupGraph, min_quality: float = 0.99
) -> list[tuple[float, float]]:
    """Intervals between neighbouring well-fitted points where u flips sign at blow-up.

    Non-characteristic points with opposite signs of u near blow-up enclose a
    characteristic point.
    """
    quality = np.nan_to_num(graph.fit_quality)
    valid = np.flatnonzero(np.isfinite(graph.T_estimates) & (quality >= min_quality))
    signs = np.sign(trajectory.u[-1, valid])
    return [
        (float(graph.r_samples[left]), float(graph.r_samples[right]))
        for left, right, sign_left, sign_right in zip(
            valid[:-1], valid[1:], signs[:-1], signs[1:]
        )
        if sign_left * sign_right < 0
    ]


def consistency_flags(
    classes: Sequence[PointClass], hints: Sequence[SignHint | None]
) -> list[int]:
    """Indices where a sign hint co-occurs with a characteristic candidate.

    Examples:
        >>> consistency_flags(
        ...     [PointClass.CHARACTERISTIC_CANDIDATE, PointClass.NON_CHARACTERISTIC],
        ...     [SignHint.NON_CHARACTERISTIC_BY_SIGN, None],
        ... )
        [0]
    """
    if len(classes) != len(hints):
        raise ValueError("Need one hint per class.")
    flags = [
        index
        for index, (point_class, hint) in enumerate(zip(classes, hints))
        if point_class == PointClass.CHARACTERISTIC_CANDIDATE
        and hint == SignHint.NON_CHARACTERISTIC_BY_SIGN
    ]
    if flags:
        logger.warning(
            f"The sign rule contradicts the energy criterion at {len(flags)} points."
        )
    return flags
