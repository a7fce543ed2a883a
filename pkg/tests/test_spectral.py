"""
Tests for the periodic grid, transforms and Fourier multipliers
"""
import math

import numpy as np
import pytest

from processors.spectral import (
    GridFunction,
    GridSpec,
    Spectrum,
    derivative,
    forward_transform,
    interpolate,
    inverse_transform,
    kernel_constant,
    kernel_constant_closed_form,
    kernel_lambda_pow,
    lambda_pow,
    signum_multiplier,
    translate,
    wiener_norm,
)
from shared.exceptions import InvalidParameterError, SpectralContractError
from shared.utils import relative_error


def _roundoff(spec, order):
    """Round-off floor of an order-`order` spectral derivative: N max|xi|^order machine eps"""
    return spec.n * float(np.max(spec.rxi)) ** order * np.finfo(float).eps


class TestGridSpec:
    """Grid construction and validation"""

    def test_points_start_at_minus_half_period(self, unit_grid):
        """x_j = -L + j dx"""
        assert unit_grid.x[0] == pytest.approx(-math.pi)
        assert unit_grid.dx == pytest.approx(2.0 * math.pi / 64)
        assert unit_grid.x[-1] == pytest.approx(math.pi - unit_grid.dx)

    def test_frequencies(self, wide_grid):
        """xi_k = pi k / L"""
        assert wide_grid.xi[1] == pytest.approx(1.0 / 16.0)
        assert wide_grid.rxi.shape == (65,)

    @pytest.mark.parametrize('n', [0, 4, 100])
    def test_rejects_bad_sizes(self, n):
        """N must be a power of two of at least 8"""
        with pytest.raises(InvalidParameterError, match="power of two"):
            GridSpec(n, 1.0)

    def test_rejects_nonpositive_half_period(self):
        with pytest.raises(InvalidParameterError, match="Half-period"):
            GridSpec(16, 0.0)


class TestGridFunction:
    """Samples, norms and arithmetic"""

    def test_values_are_read_only(self, cosine):
        with pytest.raises(ValueError):
            cosine.values[0] = 2.0

    def test_rejects_wrong_length(self, unit_grid):
        with pytest.raises(InvalidParameterError, match="Expected 64 samples"):
            GridFunction(unit_grid, np.zeros(10))

    def test_rejects_nan(self, unit_grid):
        with pytest.raises(InvalidParameterError, match="non-finite"):
            GridFunction(unit_grid, np.full(64, np.nan))

    def test_norms_of_cosine(self, cosine):
        """||cos||_2^2 = pi and ||cos||_L1 = 4 on one period"""
        assert cosine.l2_norm() ** 2 == pytest.approx(math.pi, rel=1e-12)
        assert cosine.l1_norm() == pytest.approx(4.0, rel=1e-2)
        assert cosine.sup_norm() == pytest.approx(1.0)
        assert cosine.oscillation() == pytest.approx(2.0)

    def test_arithmetic(self, cosine):
        doubled = 2.0 * cosine
        assert np.allclose((doubled - cosine).values, cosine.values)
        assert np.allclose((cosine * 3.0).values, 3.0 * cosine.values)
        assert np.allclose((cosine + doubled).values, 3.0 * cosine.values)
        assert np.array_equal((-cosine).values, -cosine.values)

    def test_arithmetic_needs_matching_grids(self, cosine):
        with pytest.raises(InvalidParameterError, match="Grid mismatch"):
            cosine + GridFunction.zeros(GridSpec(64, 2.0 * math.pi))
        with pytest.raises(TypeError):
            cosine + 1.0


class TestForwardTransform:
    """Torus normalization of the coefficients"""

    def test_cosine_mode_coefficients(self, unit_grid):
        """cos(3x) has coefficient 1/2 at k = 3 and k = -3"""
        g = GridFunction.from_callable(unit_grid, lambda x: np.cos(3.0 * x))
        spectrum = forward_transform(g)
        assert spectrum.coefficient(3) == pytest.approx(0.5, abs=1e-14)
        assert spectrum.coefficient(-3) == pytest.approx(0.5, abs=1e-14)
        assert abs(spectrum.coefficient(2)) < 1e-14

    def test_parseval(self, bump):
        """dx sum f^2 = 2L sum |c_k|^2"""
        coeffs = forward_transform(bump).coeffs
        energy = 2.0 * bump.spec.half_period * float(np.sum(np.abs(coeffs) ** 2))
        assert energy == pytest.approx(bump.l2_norm() ** 2, rel=1e-12)

    def test_constant_is_zero_mode(self, unit_grid):
        g = GridFunction(unit_grid, np.full(64, 2.5))
        assert forward_transform(g).coefficient(0) == pytest.approx(2.5)

    def test_round_trip(self, bump):
        assert relative_error(inverse_transform(forward_transform(bump)).values, bump.values) < 1e-13

    def test_non_hermitian_coefficients_rejected(self, unit_grid):
        coeffs = np.zeros(64, dtype=complex)
        coeffs[1] = 1.0
        with pytest.raises(SpectralContractError, match="Hermitian"):
            inverse_transform(Spectrum(unit_grid, coeffs))


class TestMultipliers:
    """Derivatives, fractional powers and the signum multiplier"""

    def test_derivative_of_sine(self, unit_grid):
        g = GridFunction.from_callable(unit_grid, np.sin)
        assert np.allclose(derivative(g, 1).values, np.cos(unit_grid.x), atol=1e-13)
        assert np.allclose(derivative(g, 2).values, -np.sin(unit_grid.x), atol=1e-13)
        assert np.allclose(derivative(g, 3).values, -np.cos(unit_grid.x), atol=_roundoff(unit_grid, 3))

    def test_derivative_order_validated(self, cosine):
        with pytest.raises(InvalidParameterError, match="order"):
            derivative(cosine, 4)

    @pytest.mark.parametrize('s', [0.0, 0.5, 1.0, 1.5, 2.0])
    def test_lambda_pow_on_single_mode(self, unit_grid, s):
        """Lambda^s cos(3x) = 3^s cos(3x)"""
        g = GridFunction.from_callable(unit_grid, lambda x: np.cos(3.0 * x))
        assert np.allclose(lambda_pow(g, s).values, 3.0 ** s * g.values, atol=1e-12)

    @pytest.mark.parametrize('operator', [
        lambda g: derivative(g, 1),
        lambda g: derivative(g, 3),
        lambda g: lambda_pow(g, 0.5),
        lambda g: lambda_pow(g, 1.0),
        signum_multiplier,
    ])
    def test_multipliers_are_linear(self, bump, gentle_bump, operator):
        combined = operator(2.0 * bump - 0.5 * gentle_bump).values
        expected = 2.0 * operator(bump).values - 0.5 * operator(gentle_bump).values
        assert np.allclose(combined, expected, rtol=0.0, atol=1e-12)

    def test_lambda_pow_annihilates_constants(self, unit_grid):
        g = GridFunction(unit_grid, np.full(64, 4.0))
        assert np.allclose(lambda_pow(g, 0.7).values, 0.0, atol=1e-14)

    @pytest.mark.parametrize('s', [-0.1, 2.5])
    def test_lambda_pow_range(self, cosine, s):
        with pytest.raises(InvalidParameterError, match="Fractional exponent"):
            lambda_pow(cosine, s)

    def test_signum_derivative_is_minus_lambda(self, unit_grid):
        """d/dx of the i sgn(xi) multiplier equals -Lambda"""
        g = GridFunction.from_callable(unit_grid, lambda x: np.cos(2.0 * x) + 0.3 * np.sin(5.0 * x))
        left = derivative(signum_multiplier(g), 1).values
        assert np.allclose(left, -lambda_pow(g, 1.0).values, atol=1e-12)


class TestWienerNorm:
    """sum_k |xi_k|^s |coeffs[k]|"""

    def test_single_mode(self, wide_grid):
        g = GridFunction.from_callable(wide_grid, lambda x: 0.4 * np.sin(3.0 * x / 16.0))
        assert wiener_norm(g, 1.0) == pytest.approx(0.4 * 3.0 / 16.0, rel=1e-12)
        assert wiener_norm(g, 0.0) == pytest.approx(0.4, rel=1e-12)

    def test_zero(self, zero):
        assert wiener_norm(zero, 2.1) == 0.0

    def test_negative_exponent_rejected(self, cosine):
        with pytest.raises(InvalidParameterError, match="nonnegative"):
            wiener_norm(cosine, -1.0)


class TestInterpolation:
    """Band-limited evaluation off the grid"""

    def test_reproduces_samples(self, bump):
        assert np.allclose(interpolate(bump, bump.spec.x), bump.values, atol=1e-12)

    def test_off_grid_sine(self, unit_grid):
        g = GridFunction.from_callable(unit_grid, np.sin)
        points = np.array([0.123, -2.5, 3.0])
        assert np.allclose(interpolate(g, points), np.sin(points), atol=1e-13)

    def test_translate(self, unit_grid):
        g = GridFunction.from_callable(unit_grid, np.sin)
        rows = translate(g.values, unit_grid, np.array([0.3, -1.1]))
        assert np.allclose(rows[0], np.sin(unit_grid.x - 0.3), atol=1e-13)
        assert np.allclose(rows[1], np.sin(unit_grid.x + 1.1), atol=1e-13)


class TestKernelForm:
    """Singular-integral evaluation of Lambda^s against the Fourier multiplier"""

    @pytest.mark.parametrize('s', [0.25, 0.5, 0.75])
    def test_calibrated_constant_matches_closed_form(self, s):
        assert kernel_constant(s) == pytest.approx(kernel_constant_closed_form(s), rel=1e-4)

    def test_closed_form_value(self):
        assert kernel_constant_closed_form(0.5) == pytest.approx(0.19947, abs=1e-5)

    def test_agrees_with_multiplier(self, cosine):
        kernel = kernel_lambda_pow(cosine, 0.5).values
        assert relative_error(kernel, lambda_pow(cosine, 0.5).values) < 1e-3

    def test_error_shrinks_under_refinement(self):
        """The kernel/multiplier gap decreases at least linearly in dx"""
        errors = []
        for n in (16, 32):
            g = GridFunction.from_callable(GridSpec(n, math.pi), lambda x: np.cos(3.0 * x))
            errors.append(relative_error(kernel_lambda_pow(g, 0.5).values, lambda_pow(g, 0.5).values))
        assert errors[1] <= errors[0] / 2.0 or errors[1] < 1e-10

    @pytest.mark.parametrize('s', [0.0, 0.99])
    def test_exponent_range(self, cosine, s):
        with pytest.raises(InvalidParameterError, match="Kernel exponent"):
            kernel_lambda_pow(cosine, s)

    def test_tail_cut_range(self, cosine):
        with pytest.raises(InvalidParameterError, match="tail_cut"):
            kernel_lambda_pow(cosine, 0.5, tail_cut=4.0)
