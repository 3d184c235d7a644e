"""Equation instances, the perturbation hypotheses and the antiderivative F.

The equations are

    ∂ₜ²U = ΔU + |U|^{p-1}U + f(U) + g(|x|, t, ∇U·x/|x|, ∂ₜU),

with the Klein-Gordon equation (f(u) = -u, g ≡ 0) and the pure power equation
(f ≡ g ≡ 0) as presets.
"""

import logging
import math
import warnings
from dataclasses import dataclass, replace
from typing import Any, Callable

import numpy as np
from numpy.typing import NDArray
from omegaconf import DictConfig
from scipy.integrate import IntegrationWarning, quad

from .exceptions import InvalidExponent, InvalidParameter
from .expressions import (
    NONLINEARITY_VARIABLES,
    PERTURBATION_VARIABLES,
    parse_perturbation,
)
from .protocols import Nonlinearity, Perturbation
from .utils import make_rng

logger = logging.getLogger(__package__)


PRESETS = ("klein_gordon", "pure_power", "custom")


def _zero_nonlinearity(u: NDArray[np.float64] | float) -> NDArray[np.float64]:
    return np.zeros(np.shape(u))


def _zero_perturbation(
    x: NDArray[np.float64] | float,
    t: NDArray[np.float64] | float,
    v: NDArray[np.float64] | float,
    z: NDArray[np.float64] | float,
) -> NDArray[np.float64]:
    shape = np.broadcast_shapes(np.shape(x), np.shape(t), np.shape(v), np.shape(z))
    return np.zeros(shape)


class _LinearNonlinearity:
    """The map u ↦ c·u together with its antiderivative u ↦ c·u²/2."""

    def __init__(self, coefficient: float) -> None:
        self.coefficient = coefficient

    def __call__(self, u: NDArray[np.float64] | float) -> NDArray[np.float64]:
        return self.coefficient * np.asarray(u, dtype=float)

    def antiderivative(self, u: NDArray[np.float64] | float) -> NDArray[np.float64]:
        return 0.5 * self.coefficient * np.square(np.asarray(u, dtype=float))


@dataclass(frozen=True)
class EquationSpec:
    """A validated instance of the perturbed semilinear wave equation.

    Args:
        p:
            The power of the nonlinearity |u|^{p-1}u.
        N:
            The space dimension.
        f:
            The perturbation of the nonlinearity, vectorised.
        g:
            The perturbation g(|x|, t, ∂ᵣu, ∂ₜu), vectorised.
        q:
            The sub-power in the bound |f(u)| ≤ M(1+|u|^q).
        M:
            The bound constant of both perturbations.
        preset:
            The name of the preset the spec was built from.
        F:
            A closed-form antiderivative of f, or None to use quadrature.
        f_linear:
            The constant c if f(u) = c·u, which allows the similarity-variable terms
            to be evaluated in log space.
        f_is_zero:
            Whether f vanishes identically.
        g_is_zero:
            Whether g vanishes identically.
        f_expr:
            The grammar expression f was parsed from, if any.
        g_expr:
            The grammar expression g was parsed from, if any.
        scale:
            The dilation λ if the spec belongs to the rescaled family, else 1.

    Raises:
        InvalidExponent:
            If p ≤ 1, if p > 1 + 4/(N-1) when N ≥ 2, or if q is not in [1, p).
        InvalidParameter:
            If N < 1 or M ≤ 0.
    """

    p: float
    N: int
    f: Nonlinearity
    g: Perturbation
    q: float = 1.0
    M: float = 1.0
    preset: str = "custom"
    F: Callable | None = None
    f_linear: float | None = None
    f_is_zero: bool = False
    g_is_zero: bool = False
    f_expr: str | None = None
    g_expr: str | None = None
    scale: float = 1.0

    def __post_init__(self) -> None:
        if not self.p > 1:
            raise InvalidExponent(f"The power p must be larger than 1, got {self.p}.")
        if int(self.N) != self.N or self.N < 1:
            raise InvalidParameter(
                f"The dimension N must be a positive integer, got {self.N}."
            )
        if self.N >= 2 and self.p > 1 + 4 / (self.N - 1):
            raise InvalidExponent(
                f"The power p={self.p} exceeds the conformal bound "
                f"1 + 4/(N-1) = {1 + 4 / (self.N - 1)} in dimension N={self.N}."
            )
        if not 1 <= self.q < self.p:
            raise InvalidExponent(
                f"The sub-power q must satisfy 1 ≤ q < p, got q={self.q} and "
                f"p={self.p}."
            )
        if not self.M > 0:
            raise InvalidParameter(
                f"The bound constant M must be positive, got {self.M}."
            )

    @property
    def gamma(self) -> float:
        """The decay rate min(1/2, (p-q)/(p-1)) of the perturbative terms."""
        return min(0.5, (self.p - self.q) / (self.p - 1))

    @property
    def is_unperturbed(self) -> bool:
        """Whether both perturbations vanish identically."""
        return self.f_is_zero and self.g_is_zero

    def source(
        self,
        u: NDArray[np.float64],
        x: NDArray[np.float64] | float,
        t: float,
        ur: NDArray[np.float64],
        ut: NDArray[np.float64],
    ) -> NDArray[np.float64]:
        """The zeroth order terms |u|^{p-1}u + f(u) + g(x, t, ∂ᵣu, ∂ₜu).

        Args:
            u:
                The solution values.
            x:
                The radii |x|.
            t:
                The time.
            ur:
                The radial derivative.
            ut:
                The time derivative.

        Returns:
            The source term, of the same shape as u.
        """
        values = np.abs(u) ** (self.p - 1) * u
        if not self.f_is_zero:
            values = values + self.f(u)
        if not self.g_is_zero:
            values = values + self.g(x, t, ur, ut)
        return values

    def rescaled(self, lam: float) -> "EquationSpec":
        """The equation of the dilated solution λ^{2/(p-1)}u(λx, λt).

        Args:
            lam:
                The dilation λ > 0.

        Returns:
            The spec with f_λ(U) = λ^{2p/(p-1)}f(λ^{-2/(p-1)}U) and
            g_λ(r,t,v,z) = λ^{2p/(p-1)}g(λr, λt, λ^{-(p+1)/(p-1)}v, λ^{-(p+1)/(p-1)}z).

        Raises:
            InvalidParameter:
                If λ is not positive.
        """
        if not lam > 0:
            raise InvalidParameter(f"The dilation must be positive, got {lam}.")
        if lam == 1:
            return self

        a = 2 / (self.p - 1)
        outer = lam ** (self.p * a)
        inner = lam ** (-a)
        derivative_factor = lam ** (-(self.p + 1) / (self.p - 1))
        f, g, F = self.f, self.g, self.F

        energy_factor = lam ** ((self.p + 1) * a)
        f_linear = None if self.f_linear is None else self.f_linear * outer * inner

        def f_lam(u):
            return outer * f(inner * np.asarray(u, dtype=float))

        def F_lam(u):
            return energy_factor * F(inner * np.asarray(u, dtype=float))

        def g_lam(x, t, v, z):
            return outer * g(
                lam * np.asarray(x, dtype=float),
                lam * np.asarray(t, dtype=float),
                derivative_factor * np.asarray(v, dtype=float),
                derivative_factor * np.asarray(z, dtype=float),
            )

        return replace(
            self,
            f=f_lam,
            g=g_lam,
            F=None if F is None else F_lam,
            f_linear=f_linear,
            scale=self.scale * lam,
        )


@dataclass(frozen=True)
class PerturbationReport:
    """Sampled satisfaction of the growth and Lipschitz hypotheses on f and g."""

    f_bound_ok: bool
    g_bound_ok: bool
    g_lipschitz_estimate: float
    samples_used: int


def make_equation(
    preset: str = "pure_power",
    p: float = 3.0,
    N: int = 1,
    q: float | None = None,
    M: float | None = None,
    f_expr: str | None = None,
    g_expr: str | None = None,
    f: Nonlinearity | None = None,
    g: Perturbation | None = None,
) -> EquationSpec:
    """Build an equation from a preset or from custom perturbations.

    Args:
        preset:
            One of `klein_gordon`, `pure_power` and `custom`.
        p:
            The power of the nonlinearity.
        N:
            The space dimension.
        q:
            The sub-power of f. Defaults to 1.
        M:
            The bound constant. Defaults to 1.
        f_expr:
            Grammar expression of f in the variable `u`, for the custom preset.
        g_expr:
            Grammar expression of g in the variables `x, t, v, z`, for the custom
            preset.
        f:
            A callable f, for the custom preset, used when `f_expr` is not given.
        g:
            A callable g, for the custom preset, used when `g_expr` is not given.

    Returns:
        The validated equation.

    Raises:
        ValueError:
            If the preset is unknown.

    Examples:
        >>> spec = make_equation("klein_gordon", p=3.0, N=3)
        >>> float(spec.f(2.0)), spec.q, spec.gamma
        (-2.0, 1.0, 0.5)
    """
    q = 1.0 if q is None else float(q)
    M = 1.0 if M is None else float(M)
    match preset:
        case "klein_gordon":
            linear = _LinearNonlinearity(coefficient=-1.0)
            return EquationSpec(
                p=float(p),
                N=int(N),
                f=linear,
                g=_zero_perturbation,
                q=q,
                M=M,
                preset=preset,
                F=linear.antiderivative,
                f_linear=-1.0,
                g_is_zero=True,
                f_expr="-u",
                g_expr="0",
            )
        case "pure_power":
            return EquationSpec(
                p=float(p),
                N=int(N),
                f=_zero_nonlinearity,
                g=_zero_perturbation,
                q=q,
                M=M,
                preset=preset,
                F=_zero_nonlinearity,
                f_is_zero=True,
                g_is_zero=True,
                f_expr="0",
                g_expr="0",
            )
        case "custom":
            f_linear: float | None = None
            f_is_zero = g_is_zero = False
            F: Callable | None = None
            if f_expr is not None:
                parsed_f = parse_perturbation(f_expr, NONLINEARITY_VARIABLES)
                f_is_zero = parsed_f.is_zero
                f_linear = parsed_f.linear_coefficient()
                f = parsed_f
                if f_is_zero:
                    F = _zero_nonlinearity
                elif f_linear is not None:
                    F = _LinearNonlinearity(coefficient=f_linear).antiderivative
            elif f is None:
                f, F, f_is_zero = _zero_nonlinearity, _zero_nonlinearity, True
            if g_expr is not None:
                parsed_g = parse_perturbation(g_expr, PERTURBATION_VARIABLES)
                g_is_zero = parsed_g.is_zero
                g = parsed_g
            elif g is None:
                g, g_is_zero = _zero_perturbation, True
            return EquationSpec(
                p=float(p),
                N=int(N),
                f=f,
                g=g,
                q=q,
                M=M,
                preset=preset,
                F=F,
                f_linear=f_linear,
                f_is_zero=f_is_zero,
                g_is_zero=g_is_zero,
                f_expr=f_expr,
                g_expr=g_expr,
            )
        case _:
            raise ValueError(f"Unsupported equation preset: {preset!r}")


def equation_from_config(cfg: DictConfig | dict) -> EquationSpec:
    """Build an equation from the `equation` block of a configuration.

    Args:
        cfg:
            A mapping with keys `preset, p, N` and optionally `q, M, f_expr, g_expr`.

    Returns:
        The equation.
    """
    return make_equation(
        preset=cfg["preset"],
        p=cfg["p"],
        N=cfg["N"],
        q=cfg.get("q"),
        M=cfg.get("M"),
        f_expr=cfg.get("f_expr"),
        g_expr=cfg.get("g_expr"),
    )


def equation_to_dict(spec: EquationSpec) -> dict[str, Any]:
    """Serialise an equation to the keys of the `equation` configuration block.

    Args:
        spec:
            The equation.

    Returns:
        The serialised equation.

    Raises:
        ValueError:
            If the spec is rescaled, or if a custom perturbation was given as a raw
            callable rather than an expression.
    """
    if spec.scale != 1:
        raise ValueError("Rescaled equations cannot be serialised.")
    if spec.preset == "custom" and (
        (spec.f_expr is None and not spec.f_is_zero)
        or (spec.g_expr is None and not spec.g_is_zero)
    ):
        raise ValueError("Custom equations need expressions to be serialised.")
    return dict(
        preset=spec.preset,
        p=spec.p,
        N=spec.N,
        q=spec.q,
        M=spec.M,
        f_expr=spec.f_expr if spec.f_expr is not None else "0",
        g_expr=spec.g_expr if spec.g_expr is not None else "0",
    )


def _integrate_f(f: Nonlinearity, u: float) -> float:
    """F(u) by adaptive quadrature, or NaN if the quadrature fails."""
    if u == 0:
        return 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("error", IntegrationWarning)
        try:
            value, _ = quad(lambda v: float(f(np.asarray(v))), 0.0, float(u), limit=200)
        except (IntegrationWarning, ArithmeticError, ValueError):
            return math.nan
    return value if math.isfinite(value) else math.nan


def antiderivative_F(
    spec: EquationSpec, u: NDArray[np.float64] | float
) -> NDArray[np.float64] | float:
    """The antiderivative F(u) = ∫₀ᵘ f(v) dv.

    Args:
        spec:
            The equation.
        u:
            A value or an array of values.

    Returns:
        F(u), of the same shape as u. Failed quadratures give NaN.
    """
    if spec.F is not None:
        values = np.asarray(spec.F(u), dtype=float) + np.zeros(np.shape(u))
    else:
        integrate = np.vectorize(
            lambda value: _integrate_f(spec.f, value), otypes=[float]
        )
        values = integrate(np.asarray(u, dtype=float))
    if np.ndim(u) == 0:
        return float(values)
    return values


def scaled_antiderivative(
    spec: EquationSpec, w: NDArray[np.float64], s: float
) -> NDArray[np.float64]:
    """The similarity-variable term e^{-2(p+1)s/(p-1)}F(e^{2s/(p-1)}w).

    Linear perturbations f(u) = c·u are evaluated in log space as (c/2)e^{-2s}w².

    Args:
        spec:
            The equation.
        w:
            The similarity profile.
        s:
            The slow time.

    Returns:
        The term, of the same shape as w.
    """
    if spec.f_is_zero:
        return np.zeros_like(w)
    if spec.f_linear is not None:
        return 0.5 * spec.f_linear * math.exp(-2 * s) * np.square(w)
    a = 2 / (spec.p - 1)
    with np.errstate(over="ignore", invalid="ignore"):
        return math.exp(-(spec.p + 1) * a * s) * np.asarray(
            antiderivative_F(spec, math.exp(a * s) * w)
        )


def scaled_nonlinearity(
    spec: EquationSpec, w: NDArray[np.float64], s: float
) -> NDArray[np.float64]:
    """The similarity-variable term e^{-2ps/(p-1)}f(e^{2s/(p-1)}w).

    Args:
        spec:
            The equation.
        w:
            The similarity profile.
        s:
            The slow time.

    Returns:
        The term, of the same shape as w.
    """
    if spec.f_is_zero:
        return np.zeros_like(w)
    if spec.f_linear is not None:
        return spec.f_linear * math.exp(-2 * s) * w
    a = 2 / (spec.p - 1)
    with np.errstate(over="ignore", invalid="ignore"):
        return math.exp(-spec.p * a * s) * spec.f(math.exp(a * s) * w)


def validate_hypotheses(
    spec: EquationSpec, sample_count: int = 1000, seed: int = 4242
) -> PerturbationReport:
    """Check the growth hypotheses on f and g and estimate the Lipschitz constant of g.

    f is sampled on a log-spaced grid of |u| up to 10⁶ of both signs, and g on random
    4-tuples. Violations are reported, not raised.

    Args:
        spec:
            The equation.
        sample_count:
            The number of samples for each of f and g, at least 100.
        seed:
            The seed of the random 4-tuples.

    Returns:
        The report.

    Raises:
        InvalidParameter:
            If fewer than 100 samples are requested.
    """
    if sample_count < 100:
        raise InvalidParameter(f"At least 100 samples are needed, got {sample_count}.")

    magnitudes = np.logspace(-6, 6, sample_count // 2)
    u = np.concatenate([-magnitudes[::-1], [0.0], magnitudes])
    with np.errstate(all="ignore"):
        f_values = np.asarray(spec.f(u), dtype=float)
    f_bound = spec.M * (1 + np.abs(u) ** spec.q)
    f_bound_ok = bool(
        np.all(np.isfinite(f_values) & (np.abs(f_values) <= f_bound * (1 + 1e-12)))
    )

    rng = make_rng(seed)
    x = rng.uniform(0.0, 100.0, sample_count)
    t = rng.uniform(0.0, 100.0, sample_count)
    v = rng.choice([-1.0, 1.0], sample_count) * 10 ** rng.uniform(-6, 6, sample_count)
    z = rng.choice([-1.0, 1.0], sample_count) * 10 ** rng.uniform(-6, 6, sample_count)
    points = np.stack([x, t, v, z])
    with np.errstate(all="ignore"):
        g_values = np.asarray(spec.g(*points), dtype=float)
    g_bound = spec.M * (1 + np.abs(v) + np.abs(z))
    g_bound_ok = bool(
        np.all(np.isfinite(g_values) & (np.abs(g_values) <= g_bound * (1 + 1e-12)))
    )

    direction = rng.normal(size=points.shape)
    direction /= np.linalg.norm(direction, axis=0)
    step = 1e-6 * (1 + np.max(np.abs(points), axis=0))
    shifted = points + step * direction
    shifted[0] = np.abs(shifted[0])
    actual_step = np.linalg.norm(shifted - points, axis=0)
    with np.errstate(all="ignore"):
        differences = np.abs(np.asarray(spec.g(*shifted), dtype=float) - g_values)
        ratios = differences / actual_step
    finite_ratios = ratios[np.isfinite(ratios)]
    lipschitz = float(finite_ratios.max()) if finite_ratios.size else math.inf

    report = PerturbationReport(
        f_bound_ok=f_bound_ok,
        g_bound_ok=g_bound_ok,
        g_lipschitz_estimate=lipschitz,
        samples_used=int(u.size + sample_count),
    )
    if not (f_bound_ok and g_bound_ok):
        logger.warning(f"The growth hypotheses fail on the samples: {report}")
    return report
