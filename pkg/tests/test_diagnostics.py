"""
Tests for the dissipation integral, the conservation and decay monitors and the weak form
"""
import math

import numpy as np
import pytest

from processors.diagnostics import (
    DISSIPATION_CONSTANT,
    DISSIPATION_SAMPLE,
    SeparableBump,
    StepSamples,
    compute_record,
    default_test_function,
    dissipation_bound_check,
    dissipation_estimate,
    dissipation_integral,
    energy_balance,
    energy_rate,
    linear_dissipation,
    log_kernel_identity,
    maximum_principle_monitor,
    weak_form_functionals,
    weak_form_residual,
    wiener_decay_monitor,
)
from processors.initdata import ProfileKind, ProfileSpec, build_profile
from processors.spectral import GridFunction, GridSpec, wiener_norm
from processors.timestepping import StepperConfig, Trajectory, simulate
from shared.exceptions import InvalidParameterError


def _scaled_trajectory(g, factors, dt=0.1):
    return Trajectory(tuple(dt * i for i in range(len(factors))), tuple(g * a for a in factors))


def _profile(u):
    inside = np.abs(u) < 1.0
    safe = np.where(inside, u, 0.0)
    return np.where(inside, np.exp(-1.0 / (1.0 - safe ** 2)), 0.0)


class TestLogKernelIdentity:
    @pytest.mark.parametrize('a', [1.0, 2.0, -0.5])
    def test_closed_form(self, a):
        computed, exact = log_kernel_identity(a)
        assert exact == pytest.approx(2.0 * math.pi * abs(a))
        assert computed == pytest.approx(exact, rel=1e-6)


class TestDissipation:
    """D = int int ln(1 + (delta_alpha f)^2)"""

    def test_zero_data(self, zero):
        assert dissipation_integral(zero) == 0.0

    def test_nonnegative(self, bump):
        assert dissipation_integral(bump) > 0.0

    def test_bound_holds(self, bump):
        check = dissipation_bound_check(bump)
        assert check.ok
        assert check.bound == pytest.approx(DISSIPATION_CONSTANT * bump.l1_norm())
        assert 0.0 < check.ratio < 1.0

    def test_quadratic_limit(self, bump):
        small = bump * 1e-3
        assert dissipation_integral(small) == pytest.approx(linear_dissipation(small), rel=1e-3)

    def test_error_bar_is_small(self, bump):
        value, error = dissipation_estimate(bump)
        assert error < 1e-3 * value

    def test_rejects_bad_decimation(self, bump):
        with pytest.raises(InvalidParameterError, match="decimate"):
            dissipation_integral(bump, decimate=0)

    def test_invariant_under_shift_and_reflection(self, bump):
        lopsided = bump + bump.shifted(7) * 0.5
        reflected = GridFunction(lopsided.spec, lopsided.values[(-np.arange(lopsided.spec.n)) % lopsided.spec.n])
        value = dissipation_integral(lopsided)
        assert dissipation_integral(lopsided.shifted(11)) == pytest.approx(value, rel=1e-12)
        assert dissipation_integral(reflected) == pytest.approx(value, rel=1e-10)

    def test_increases_with_amplitude(self, bump):
        values = [dissipation_integral(bump * scale) for scale in (0.25, 0.5, 1.0, 2.0)]
        assert all(b > a for a, b in zip(values, values[1:]))


class TestEnergyRate:
    def test_rate_matches_dissipation(self, bump, physics, quad):
        rate = energy_rate(bump, physics, quad)
        assert rate.rate < 0.0
        assert rate.rate == pytest.approx(rate.expected, rel=1e-6)

    def test_dissipation_splits_into_two_integrals(self, bump, physics, quad):
        """D / 2 = I1 - I2"""
        rate = energy_rate(bump, physics, quad)
        dissipation = dissipation_integral(bump, 1, quad)
        assert rate.i1 - rate.i2 == pytest.approx(0.5 * dissipation, rel=1e-10)


class TestEnergyBalance:
    def test_static_trajectory_without_dissipation(self, bump, physics):
        traj = Trajectory((0.0, 1.0), (bump, bump))
        reports = energy_balance(traj, physics, dissipation=[0.0, 0.0])
        assert [report.residual for report in reports] == [0.0, 0.0]
        assert reports[0].rhs == pytest.approx(bump.l2_norm() ** 2)

    def test_short_run_conserves(self, gentle_bump, physics, quad):
        traj, records = simulate(gentle_bump, physics, None, StepperConfig(t_final=0.1), quad, cadence=1)
        reports = energy_balance(traj, physics, dissipation=[record.dissipation for record in records])
        assert max(abs(report.relative_residual) for report in reports) < 1e-3
        assert reports[-1].lhs == pytest.approx(reports[-1].rhs, rel=1e-3)


class TestMaximumPrinciple:
    def test_decaying_trajectory(self, bump):
        report = maximum_principle_monitor(_scaled_trajectory(bump, [1.0, 0.9, 0.8]))
        assert report.ok
        assert report.slope_stayed_below_one
        assert report.observed_decay_rate == pytest.approx(-math.log(0.8) / 0.2)

    def test_growth_is_reported(self, bump):
        report = maximum_principle_monitor(_scaled_trajectory(bump, [1.0, 0.9, 1.1]))
        assert not report.ok
        assert not report.sup_f.ok
        assert report.sup_f.first_violation_time == pytest.approx(0.2)
        assert report.sup_f.max_violation > 0.0

    def test_slack_absorbs_tiny_increase(self, bump):
        report = maximum_principle_monitor(_scaled_trajectory(bump, [1.0, 1.0 + 1e-12]), slack=1e-8)
        assert report.ok

    def test_zero_trajectory(self, zero):
        report = maximum_principle_monitor(_scaled_trajectory(zero, [1.0, 1.0]))
        assert report.ok
        assert math.isnan(report.observed_decay_rate)


class TestWienerDecay:
    def test_small_data_decays(self, bump):
        small = bump * (0.2 / wiener_norm(bump, 1.0))
        report = wiener_decay_monitor(_scaled_trajectory(small, [1.0, 0.95, 0.9]))
        assert report.wiener1.applicable
        assert report.wiener2d.applicable
        assert report.ok
        assert report.threshold == pytest.approx(math.sqrt((4.0 - math.sqrt(13.0)) / 6.0))

    def test_growth_of_small_data_is_flagged(self, bump):
        small = bump * (0.2 / wiener_norm(bump, 1.0))
        report = wiener_decay_monitor(_scaled_trajectory(small, [1.0, 1.1]))
        assert not report.wiener1.ok
        assert not report.ok

    def test_large_data_is_not_applicable(self, bump):
        large = bump * (0.5 / wiener_norm(bump, 1.0))
        report = wiener_decay_monitor(_scaled_trajectory(large, [1.0, 1.1]))
        assert not report.wiener1.applicable
        assert report.wiener1.ok


class TestSeparableBump:
    """Derivatives of the compactly supported test function"""

    @pytest.fixture
    def eta(self):
        return SeparableBump(t_center=1.0, t_radius=0.5, x_center=0.5, x_radius=2.0)

    def _values(self, eta, t, x):
        return _profile((t - eta.t_center) / eta.t_radius) * _profile((x - eta.x_center) / eta.x_radius)

    def test_derivatives_against_differences(self, eta):
        x = np.linspace(-1.0, 2.0, 7)
        t, h = 1.2, 1e-6
        dt = (self._values(eta, t + h, x) - self._values(eta, t - h, x)) / (2.0 * h)
        dx = (self._values(eta, t, x + h) - self._values(eta, t, x - h)) / (2.0 * h)
        assert np.allclose(eta.dt(t, x, math.pi), dt, atol=1e-7)
        assert np.allclose(eta.dx(t, x, math.pi), dx, atol=1e-7)

    def test_vanishes_outside_support(self, eta):
        x = np.array([-2.0, 2.6])
        assert np.all(eta.dx(1.0, x, math.pi) == 0.0)
        assert np.all(eta.dt(1.6, np.array([0.5]), math.pi) == 0.0)

    def test_support_must_fit_the_torus(self):
        with pytest.raises(InvalidParameterError, match="fit inside the torus"):
            SeparableBump(0.5, 0.2, 0.0, 4.0).dx(0.5, np.zeros(3), math.pi)


class TestWeakForm:
    def test_zero_trajectory(self, zero, physics):
        traj = _scaled_trajectory(zero, [1.0] * 5)
        eta = SeparableBump(0.2, 0.15, 0.0, 10.0)
        report = weak_form_residual(traj, eta, physics)
        assert report.lhs == 0.0
        assert report.rhs == 0.0
        assert report.relative == 0.0

    def test_support_outside_time_span(self, zero, physics):
        traj = _scaled_trajectory(zero, [1.0, 1.0])
        with pytest.raises(InvalidParameterError, match="time span"):
            weak_form_residual(traj, SeparableBump(0.1, 0.5, 0.0, 1.0), physics)

    def test_short_run_with_step_samples(self, physics, quad):
        spec = GridSpec(128, 4.0 * math.pi)
        f0 = build_profile(ProfileSpec(kind=ProfileKind.GAUSSIAN_BUMP, width=2.0, target_slope=0.3), spec)
        eta = default_test_function(0.1, spec.half_period)
        functionals = weak_form_functionals(eta, spec, physics, quad)
        traj, _ = simulate(
            f0, physics, None, StepperConfig(t_final=0.1), quad, cadence=4,
            track_dissipation=False, functionals=functionals,
        )
        assert set(functionals) <= set(traj.samples.values)
        report = weak_form_residual(traj, eta, physics, quad)
        assert abs(report.lhs) > 0.0
        assert report.relative < 1e-3

    def test_sample_names_depend_on_the_bump(self):
        first = SeparableBump(0.5, 0.4, 0.0, 1.0).sample_names()
        second = SeparableBump(0.5, 0.4, 0.0, 2.0).sample_names()
        assert len(set(first) | set(second)) == 4


class TestStepSamples:
    def test_cumulative_integral_of_a_cubic_is_exact(self):
        times = np.array([0.0, 0.1, 0.25, 0.3, 0.55, 0.7, 1.0])
        samples = StepSamples(times, {DISSIPATION_SAMPLE: times ** 3 - times})
        assert DISSIPATION_SAMPLE in samples
        assert len(samples) == times.size
        expected = times ** 4 / 4.0 - times ** 2 / 2.0
        assert np.allclose(samples.cumulative(DISSIPATION_SAMPLE, times), expected, atol=1e-14)

    def test_single_sample_accumulates_nothing(self):
        samples = StepSamples(np.array([0.0]), {DISSIPATION_SAMPLE: [2.0]})
        assert np.array_equal(samples.cumulative(DISSIPATION_SAMPLE, [0.0]), [0.0])
        with pytest.raises(InvalidParameterError, match="single sample"):
            samples.interpolant(DISSIPATION_SAMPLE)

    @pytest.mark.parametrize("times,values,match", [
        ([], {}, "at least one"),
        ([0.0, 0.0], {}, "strictly increasing"),
        ([0.0, 1.0], {"d": [1.0]}, "1 values for 2 times"),
    ])
    def test_validation(self, times, values, match):
        with pytest.raises(InvalidParameterError, match=match):
            StepSamples(np.asarray(times, dtype=float), values)

    def test_unknown_series(self):
        samples = StepSamples(np.array([0.0, 1.0]), {})
        with pytest.raises(InvalidParameterError, match="No sample series"):
            samples.interpolant("missing")

    def test_collect_evaluates_each_state(self, bump):
        samples = StepSamples.collect([0.0, 1.0], [bump, bump * 2.0], {"peak": GridFunction.sup_norm})
        assert np.allclose(samples.values["peak"], [bump.sup_norm(), 2.0 * bump.sup_norm()])


class TestComputeRecord:
    def test_fields(self, bump):
        record = compute_record(bump, 0.5)
        assert record.t == 0.5
        assert record.sup_f == pytest.approx(float(np.max(bump.values)))
        assert record.sup_slope == pytest.approx(0.5, rel=1e-6)
        assert record.mean == pytest.approx(0.0, abs=1e-14)
        assert record.dissipation == pytest.approx(dissipation_integral(bump))

    def test_without_dissipation(self, bump):
        record = compute_record(bump, 0.0, with_dissipation=False)
        assert math.isnan(record.dissipation)
        assert set(record.to_dict()) >= {'t', 'l2_sq', 'wiener1', 'wiener2d'}

    def test_zero_state(self, zero):
        record = compute_record(GridFunction.zeros(zero.spec), 0.0)
        assert record.dissipation == 0.0
        assert record.l1 == 0.0
