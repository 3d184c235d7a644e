"""Unit tests for the `model` module."""

import math

import numpy as np
import pytest

from blowup.exceptions import InvalidExponent, InvalidParameter
from blowup.model import (
    antiderivative_F,
    equation_from_config,
    equation_to_dict,
    make_equation,
    scaled_antiderivative,
    scaled_nonlinearity,
    validate_hypotheses,
)


class TestMakeEquation:
    @pytest.mark.parametrize(
        "preset, p, N, q, expected_gamma",
        ids=["klein_gordon-cubic", "pure_power-quadratic", "klein_gordon-3d"],
        argvalues=[
            ("klein_gordon", 3.0, 1, 1.0, 0.5),
            ("pure_power", 2.0, 1, 1.0, 0.5),
            ("klein_gordon", 3.0, 3, 2.5, 0.25),
        ],
    )
    def test_gamma(
        self, preset: str, p: float, N: int, q: float, expected_gamma: float
    ) -> None:
        spec = make_equation(preset, p=p, N=N, q=q)
        assert spec.gamma == pytest.approx(expected_gamma)

    @pytest.mark.parametrize(
        "p, N, q",
        ids=["p-at-one", "above-conformal", "q-below-one", "q-at-p"],
        argvalues=[(1.0, 1, 1.0), (4.0, 3, 1.0), (3.0, 1, 0.5), (3.0, 1, 3.0)],
    )
    def test_invalid_exponents(self, p: float, N: int, q: float) -> None:
        with pytest.raises(InvalidExponent):
            make_equation("pure_power", p=p, N=N, q=q)

    def test_conformal_power_is_allowed(self) -> None:
        assert make_equation("pure_power", p=3.0, N=3).p == 3.0

    def test_invalid_bound_constant(self) -> None:
        with pytest.raises(InvalidParameter):
            make_equation("pure_power", M=0.0)

    def test_unknown_preset(self) -> None:
        with pytest.raises(ValueError, match="Unsupported"):
            make_equation("sine_gordon")

    def test_source(self) -> None:
        spec = make_equation("klein_gordon", p=3.0)
        u = np.array([-2.0, 0.5, 2.0])
        values = spec.source(u, x=0.0, t=0.0, ur=np.zeros(3), ut=np.zeros(3))
        np.testing.assert_allclose(values, u**3 - u)

    def test_custom_expressions(self) -> None:
        spec = make_equation(
            "custom", p=3.0, f_expr="-u", g_expr="v/10", M=1.0
        )
        assert spec.f_linear == pytest.approx(-1.0)
        assert not spec.g_is_zero
        values = spec.source(
            np.array([1.0]), x=0.0, t=0.0, ur=np.array([10.0]), ut=np.array([0.0])
        )
        np.testing.assert_allclose(values, [1.0])


class TestSerialisation:
    @pytest.mark.parametrize(
        "preset",
        ids=["klein_gordon", "pure_power"],
        argvalues=["klein_gordon", "pure_power"],
    )
    def test_presets_round_trip(self, preset: str) -> None:
        spec = make_equation(preset, p=2.0, N=1)
        restored = equation_from_config(equation_to_dict(spec))
        assert equation_to_dict(restored) == equation_to_dict(spec)

    def test_custom_callables_are_not_serialisable(self) -> None:
        spec = make_equation("custom", p=3.0, f=lambda u: 0.5 * np.tanh(u))
        with pytest.raises(ValueError):
            equation_to_dict(spec)

    def test_rescaled_is_not_serialisable(self) -> None:
        with pytest.raises(ValueError):
            equation_to_dict(make_equation("klein_gordon").rescaled(0.5))

    def test_from_config_block(self, cfg) -> None:
        spec = equation_from_config(cfg.equation)
        assert spec.preset == cfg.equation.preset
        assert spec.p == cfg.equation.p


class TestRescaled:
    def test_unit_dilation_is_identity(self) -> None:
        spec = make_equation("klein_gordon")
        assert spec.rescaled(1.0) is spec

    def test_klein_gordon_mass_scales(self) -> None:
        # f(u) = -u becomes -λ²U after the dilation
        spec = make_equation("klein_gordon", p=3.0).rescaled(0.1)
        assert float(spec.f(2.0)) == pytest.approx(-0.02)
        assert spec.f_linear == pytest.approx(-0.01)
        assert float(antiderivative_F(spec, 2.0)) == pytest.approx(-0.02)

    def test_pure_power_is_invariant(self) -> None:
        spec = make_equation("pure_power", p=3.0).rescaled(0.3)
        assert spec.f_is_zero and spec.scale == pytest.approx(0.3)

    def test_invalid_dilation(self) -> None:
        with pytest.raises(InvalidParameter):
            make_equation("pure_power").rescaled(0.0)


class TestAntiderivative:
    def test_closed_form(self) -> None:
        spec = make_equation("klein_gordon")
        np.testing.assert_allclose(antiderivative_F(spec, np.array([2.0])), [-2.0])

    def test_quadrature(self) -> None:
        spec = make_equation("custom", p=3.0, f_expr="tanh(u)")
        assert antiderivative_F(spec, 1.0) == pytest.approx(math.log(math.cosh(1.0)))

    def test_scaled_terms_of_linear_perturbation(self) -> None:
        spec = make_equation("klein_gordon", p=3.0)
        w = np.array([1.0, 2.0])
        np.testing.assert_allclose(
            scaled_nonlinearity(spec, w, s=1.0), -math.exp(-2.0) * w
        )
        np.testing.assert_allclose(
            scaled_antiderivative(spec, w, s=1.0), -0.5 * math.exp(-2.0) * w**2
        )

    def test_scaled_terms_match_generic_path(self) -> None:
        linear = make_equation("klein_gordon", p=3.0)
        generic = make_equation("custom", p=3.0, f=lambda u: -np.asarray(u))
        w = np.array([0.3, -1.2])
        np.testing.assert_allclose(
            scaled_nonlinearity(generic, w, s=2.0),
            scaled_nonlinearity(linear, w, s=2.0),
        )
        np.testing.assert_allclose(
            scaled_antiderivative(generic, w, s=2.0),
            scaled_antiderivative(linear, w, s=2.0),
            rtol=1e-8,
        )


class TestValidateHypotheses:
    def test_klein_gordon_satisfies_hypotheses(self) -> None:
        report = validate_hypotheses(make_equation("klein_gordon"), sample_count=200)
        assert report.f_bound_ok and report.g_bound_ok

    def test_superlinear_f_fails(self) -> None:
        spec = make_equation("custom", p=3.0, f_expr="u^2", M=1.0)
        assert not validate_hypotheses(spec, sample_count=200).f_bound_ok

    def test_lipschitz_estimate(self) -> None:
        spec = make_equation("custom", p=3.0, g_expr="v/2", M=1.0)
        report = validate_hypotheses(spec, sample_count=200)
        assert report.g_bound_ok
        assert 0.4 < report.g_lipschitz_estimate <= 0.5 * (1 + 1e-6)

    def test_too_few_samples(self) -> None:
        with pytest.raises(InvalidParameter):
            validate_hypotheses(make_equation("pure_power"), sample_count=10)
