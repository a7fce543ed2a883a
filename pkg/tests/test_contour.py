"""
Tests for the contour-equation right-hand sides and their oracles
"""
import math

import numpy as np
import pytest

from processors.contour import (
    ContourModel,
    PhysParams,
    RegularizationParams,
    RhsForm,
    arctan_flux,
    default_big_c,
    delta_quotient,
    eval_rhs_arctan,
    eval_rhs_muskat,
    eval_rhs_regularized,
    eval_T,
    eval_T_series,
    linear_symbol_values,
    origin_series_correction,
    tail_bound,
    transport_constant,
)
from processors.lattice_sums import origin_correction
from processors.quadrature import QuadratureConfig
from processors.spectral import GridFunction, apply_multiplier, derivative, fractional_symbol, lambda_pow
from processors.verification import check_linearization
from shared.exceptions import InvalidParameterError, SeriesDivergenceError, UnstableConfigurationError
from shared.utils import relative_error


class TestParameters:
    """Densities and regularization parameters"""

    def test_normalized_preset(self):
        p = PhysParams.normalized()
        assert (p.rho2 - p.rho1) / (2.0 * math.pi) == pytest.approx(1.0)
        assert p.rho == pytest.approx(math.pi)

    @pytest.mark.parametrize('rho1, rho2', [(2.0, 1.0), (1.0, 1.0)])
    def test_unstable_case_rejected(self, rho1, rho2):
        with pytest.raises(UnstableConfigurationError, match="rho2 > rho1"):
            PhysParams(rho1, rho2)

    @pytest.mark.parametrize('eps', [0.0, -0.1, 0.3])
    def test_regularization_range(self, eps):
        with pytest.raises(InvalidParameterError, match="eps"):
            RegularizationParams(eps)

    def test_default_constant_is_positive(self, physics):
        r = RegularizationParams(0.1)
        assert r.resolved_big_c(physics) == pytest.approx(default_big_c(physics))
        assert default_big_c(physics) > 0
        assert RegularizationParams(0.1, big_c=3.0).resolved_big_c(physics) == 3.0

    def test_transport_constant_tends_to_one(self):
        assert transport_constant(0.0) == 1.0
        assert transport_constant(1e-7) == pytest.approx(1.0, rel=1e-6)
        assert transport_constant(0.25) < 1.0


class TestLinearSymbol:
    """Fourier-diagonal part of each model"""

    def test_unregularized(self, physics):
        xi = np.array([0.0, 0.5, -2.0])
        assert np.allclose(linear_symbol_values(xi, physics), -math.pi * np.abs(xi))

    def test_small_eps_recovers_unregularized(self, physics):
        xi = np.array([0.25, 1.0, 3.0])
        r = RegularizationParams(1e-6, big_c=1.0)
        assert np.allclose(linear_symbol_values(xi, physics, r), -math.pi * xi, rtol=1e-4)


class TestDeltaQuotient:
    def test_grid_offset(self, bump):
        j, step = 60, 3
        alpha = step * bump.spec.dx
        expected = (bump.values[j] - bump.values[j - step]) / alpha
        assert delta_quotient(bump, j, alpha) == pytest.approx(expected, rel=1e-10)

    def test_tiny_offset_gives_slope(self, bump):
        slope = derivative(bump, 1).values[60]
        assert delta_quotient(bump, 60, 1e-6 * bump.spec.dx) == pytest.approx(slope)


class TestNonlinearCorrection:
    """T(f) by quadrature, by Taylor series and its symmetries"""

    def test_zero_and_constant_data(self, wide_grid):
        assert np.all(eval_T(GridFunction.zeros(wide_grid)).values == 0.0)
        flat = GridFunction(wide_grid, np.full(wide_grid.n, 1.5))
        assert np.allclose(eval_T(flat).values, 0.0, atol=1e-14)

    def test_odd_in_f(self, bump):
        assert np.allclose(eval_T(-1.0 * bump).values, -eval_T(bump).values, atol=1e-14)

    def test_translation_equivariance(self, bump):
        shifted = eval_T(bump.shifted(7)).values
        assert np.allclose(shifted, np.roll(eval_T(bump).values, 7), atol=1e-13)

    def test_cubic_at_small_amplitude(self, bump):
        small = eval_T(0.01 * bump).sup_norm()
        double = eval_T(0.02 * bump).sup_norm()
        assert double / small == pytest.approx(8.0, rel=1e-2)

    def test_series_matches_quadrature(self, gentle_bump, quad):
        """Six Taylor terms reproduce T at slope 0.3"""
        series = eval_T_series(gentle_bump, 6, quad).values
        assert relative_error(series, eval_T(gentle_bump, quad).values) < 1e-6

    def test_series_error_decays_geometrically(self, gentle_bump, quad):
        """Each extra Taylor term shrinks the error by at least slope^2"""
        exact = eval_T(gentle_bump, quad).values
        slope = derivative(gentle_bump, 1).sup_norm()
        errors = [np.max(np.abs(eval_T_series(gentle_bump, n, quad).values - exact)) for n in range(1, 4)]
        assert all(b <= slope ** 2 * a for a, b in zip(errors, errors[1:]))

    def test_matches_direct_image_sum_at_the_apex(self, bump, quad):
        """Trapezoid over grid offsets on 200 periods each side, no closure"""
        spec = bump.spec
        apex = int(np.argmax(bump.values))
        fx = derivative(bump, 1).values
        offsets = np.arange(-200 * spec.n, 200 * spec.n + 1)
        offsets = offsets[offsets != 0]
        alpha = offsets * spec.dx
        behind = (apex - offsets) % spec.n
        d = (bump.values[apex] - bump.values[behind]) / alpha
        slope_change = (fx[apex] - fx[behind]) / alpha
        origin = derivative(bump, 2).values[apex] * fx[apex] ** 2 / (1.0 + fx[apex] ** 2)
        direct = spec.dx * (np.sum(slope_change * d ** 2 / (1.0 + d ** 2)) + origin) / math.pi
        assert abs(direct) > 1e-4
        assert eval_T(bump, quad).values[apex] == pytest.approx(direct, rel=1e-6)

    def test_series_diverges_at_unit_slope(self, bump):
        steep = bump * (1.2 / derivative(bump, 1).sup_norm())
        with pytest.raises(SeriesDivergenceError, match="diverges"):
            eval_T_series(steep, 3)

    def test_series_terms_validated(self, bump):
        with pytest.raises(InvalidParameterError, match="n_terms"):
            eval_T_series(bump, 0)


class TestRightHandSides:
    """Equivalent forms of the contour equation"""

    def test_muskat_and_arctan_forms_agree(self, bump, physics, quad):
        muskat = eval_rhs_muskat(bump, physics, quad).values
        arctan = eval_rhs_arctan(bump, physics, quad).values
        assert relative_error(muskat, arctan) < 1e-6

    def test_midpoint_rule_agrees(self, bump, physics):
        trapezoid = eval_rhs_arctan(bump, physics, QuadratureConfig()).values
        midpoint = eval_rhs_arctan(bump, physics, QuadratureConfig(rule='midpoint')).values
        assert relative_error(midpoint, trapezoid) < 1e-5

    def test_flux_derivative_is_arctan_rhs(self, bump, physics, quad):
        flux = derivative(arctan_flux(bump, physics, quad), 1).values
        assert relative_error(flux, eval_rhs_arctan(bump, physics, quad).values) < 1e-9

    def test_zero_data(self, zero, physics):
        assert np.all(eval_rhs_muskat(zero, physics).values == 0.0)
        assert np.all(eval_rhs_arctan(zero, physics).values == 0.0)

    def test_linear_regime(self, wide_grid, physics):
        """At tiny amplitude f_t = -rho Lambda f"""
        g = GridFunction.from_callable(wide_grid, lambda x: 1e-6 * np.exp(-x ** 2 / 16.0))
        expected = -physics.rho * lambda_pow(g, 1.0).values
        assert relative_error(eval_rhs_arctan(g, physics).values, expected) < 1e-9

    def test_linearization_deviation_scales_quadratically(self, wide_grid, physics, quad):
        result = check_linearization(wide_grid, physics, quad)
        assert result.passed, result.detail


class TestRegularizedModel:
    """The eps-regularized right-hand side"""

    def test_viscous_part_alone(self, bump, physics):
        r = RegularizationParams(0.1, big_c=2.0)
        got = eval_rhs_regularized(bump, physics, r, include_transport=False).values
        symbol = -0.1 * 2.0 * fractional_symbol(bump.spec, 0.9) - 0.1 * bump.spec.rxi ** 2
        assert np.allclose(got, apply_multiplier(bump, symbol).values, atol=1e-14)

    def test_small_eps_approaches_arctan_form(self, bump, physics):
        r = RegularizationParams(1e-4, big_c=1.0)
        regularized = eval_rhs_regularized(bump, physics, r).values
        assert relative_error(regularized, eval_rhs_arctan(bump, physics).values) < 1e-2

    def test_converges_to_arctan_form_at_first_order(self, bump, physics, quad):
        target = eval_rhs_arctan(bump, physics, quad).values
        errors = []
        for eps in (1e-2, 5e-3, 2.5e-3):
            r = RegularizationParams(eps, big_c=1.0)
            errors.append(relative_error(eval_rhs_regularized(bump, physics, r, quad).values, target))
        orders = [math.log2(a / b) for a, b in zip(errors, errors[1:])]
        assert all(0.8 <= order <= 1.2 for order in orders), orders

    def test_origin_correction_keeps_leading_power(self):
        eps, step = 0.1, 0.05
        fx = np.array([1e-3, -2e-3])
        leading = origin_correction(3.0 * eps, step) * fx ** 3 / 3.0
        assert np.allclose(origin_series_correction(fx, eps, step), leading, rtol=1e-5, atol=0.0)

    def test_origin_correction_beyond_unit_slope(self):
        eps, step = 0.1, 0.05
        fx = np.array([1.5, -3.0])
        expected = origin_correction(3.0 * eps, step) * (fx - np.arctan(fx))
        assert np.allclose(origin_series_correction(fx, eps, step), expected, rtol=1e-14)

    def test_origin_correction_weights_each_power(self):
        eps, step = 0.2, 0.05
        fx = np.array([0.6])
        weights = [origin_correction(p * eps, step) for p in (3, 5, 7, 9)]
        terms = [fx ** 3 / 3.0, -fx ** 5 / 5.0, fx ** 7 / 7.0]
        rest = fx - np.arctan(fx) - sum(terms)
        expected = sum(w * t for w, t in zip(weights, terms)) + weights[3] * rest
        assert np.allclose(origin_series_correction(fx, eps, step), expected, rtol=1e-13)
        assert not np.allclose(expected, weights[0] * (fx - np.arctan(fx)), rtol=1e-6)

    def test_model_rhs_matches_function(self, bump, physics):
        r = RegularizationParams(0.1)
        model = ContourModel(physics, QuadratureConfig(), r)
        assert model.form is RhsForm.REGULARIZED
        assert relative_error(model.rhs(bump).values, eval_rhs_regularized(bump, physics, r).values) < 1e-12


class TestContourModel:
    """Split into linear symbol and nonlinear remainder"""

    @pytest.mark.parametrize('form, function', [(RhsForm.MUSKAT, eval_rhs_muskat), (RhsForm.ARCTAN, eval_rhs_arctan)])
    def test_split_reassembles_rhs(self, bump, physics, form, function):
        model = ContourModel(physics, QuadratureConfig(), form=form)
        assert relative_error(model.rhs(bump).values, function(bump, physics).values) < 1e-12

    def test_default_form(self, physics):
        assert ContourModel(physics).form is RhsForm.MUSKAT

    def test_form_conflicts(self, physics):
        with pytest.raises(InvalidParameterError, match="cannot carry"):
            ContourModel(physics, regularization=RegularizationParams(0.1), form=RhsForm.ARCTAN)
        with pytest.raises(InvalidParameterError, match="requires RegularizationParams"):
            ContourModel(physics, form=RhsForm.REGULARIZED)

    def test_linear_only(self, bump, physics):
        model = ContourModel(physics, include_nonlinear=False)
        assert np.all(model.nonlinear(bump) == 0.0)


class TestTailBound:
    """Bound on the neglected far-field of the alpha integral"""

    def test_shrinks_with_cut_off(self, bump):
        near = tail_bound(bump, QuadratureConfig(tail_cut=5.0))
        far = tail_bound(bump, QuadratureConfig(tail_cut=20.0))
        assert far == pytest.approx(near / 16.0)

    def test_closed_integral_bound_is_tiny(self, bump):
        assert tail_bound(bump, QuadratureConfig()) < 1e-6 * eval_T(bump).sup_norm()

    def test_zero_data(self, zero):
        assert tail_bound(zero) == 0.0
