"""
Verification Module
Cross-validation battery: independent routes to the same quantity must agree, and the
identities and monotonicity properties of the equation must hold along a short run
"""
import logging
import math
import time
from dataclasses import asdict, dataclass, replace
from typing import Callable, List, Optional

import numpy as np

from processors.constants import verify_claims
from processors.contour import (
    PhysParams,
    RegularizationParams,
    eval_rhs_arctan,
    eval_rhs_muskat,
    eval_T,
    eval_T_series,
    tail_bound,
)
from processors.diagnostics import (
    DISSIPATION_CONSTANT,
    DiagnosticsRecord,
    SeparableBump,
    default_test_function,
    energy_balance,
    log_kernel_identity,
    maximum_principle_monitor,
    weak_form_functionals,
    weak_form_residual,
    wiener_decay_monitor,
)
from processors.quadrature import QuadratureConfig
from processors.spectral import (
    GridFunction,
    GridSpec,
    derivative,
    forward_transform,
    inverse_transform,
    kernel_lambda_pow,
    lambda_pow,
)
from processors.timestepping import StepperConfig, Trajectory, simulate
from shared.exceptions import MuskatError
from shared.utils import format_duration, relative_error

logger = logging.getLogger(__name__)

ROUND_TRIP_TOLERANCE = 1e-12
KERNEL_TOLERANCE = 1e-2
KERNEL_EXPONENT = 0.5
MIN_KERNEL_ORDER = 1.0
FORM_TOLERANCE = 1e-6
SERIES_TOLERANCE = 1e-6
SERIES_TERMS = 6
SERIES_MAX_SLOPE = 0.3
TAIL_FRACTION = 1e-2
LOG_KERNEL_TOLERANCE = 1e-6
BALANCE_TOLERANCE = 1e-3
WEAK_FORM_TOLERANCE = 1e-3
LINEARIZATION_SLOPES = (0.01, 0.05, 0.1)
LINEARIZATION_FACTOR = 3.0
MIN_TEMPORAL_ORDER = 3.7
ROUNDOFF_LEVEL = 1e-11


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    value: float
    threshold: float
    detail: str = ''
    skipped: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


def _check(name: str, value: float, threshold: float, detail: str = '', passed: Optional[bool] = None) -> CheckResult:
    ok = value <= threshold if passed is None else passed
    return CheckResult(name=name, passed=bool(ok), value=float(value), threshold=float(threshold), detail=detail)


def _skipped(name: str, reason: str) -> CheckResult:
    return CheckResult(name=name, passed=True, value=math.nan, threshold=math.nan, detail=reason, skipped=True)


def _coarse_copy(g: GridFunction) -> Optional[GridFunction]:
    if g.spec.n < 16:
        return None
    return GridFunction(GridSpec(g.spec.n // 2, g.spec.half_period), g.values[::2])


def _observed_order(coarse_error: float, fine_error: float, ratio: float = 2.0) -> float:
    if fine_error <= 0.0 or coarse_error <= 0.0:
        return math.inf
    return math.log(coarse_error / fine_error) / math.log(ratio)


def check_spectral_round_trip(f0: GridFunction) -> CheckResult:
    error = relative_error(inverse_transform(forward_transform(f0)).values, f0.values)
    return _check('spectral_round_trip', error, ROUND_TRIP_TOLERANCE)


def check_kernel_vs_spectral(f0: GridFunction, s: float = KERNEL_EXPONENT) -> CheckResult:
    """Kernel and Fourier-multiplier forms of Lambda^s agree, and their gap shrinks under grid refinement"""
    fine_error = relative_error(kernel_lambda_pow(f0, s).values, lambda_pow(f0, s).values)
    coarse = _coarse_copy(f0)
    if coarse is None:
        return _check('kernel_vs_spectral', fine_error, KERNEL_TOLERANCE, 'grid too small for a refinement pair')
    coarse_error = relative_error(kernel_lambda_pow(coarse, s).values, lambda_pow(coarse, s).values)
    order = _observed_order(coarse_error, fine_error)
    converged = fine_error <= ROUNDOFF_LEVEL or order >= MIN_KERNEL_ORDER
    return _check(
        'kernel_vs_spectral',
        fine_error,
        KERNEL_TOLERANCE,
        f"s = {s}, error N/2 {coarse_error:.3e}, N {fine_error:.3e}, observed order {order:.2f}",
        passed=fine_error <= KERNEL_TOLERANCE and converged,
    )


def check_forms_agree(f0: GridFunction, p: PhysParams, quad: QuadratureConfig) -> CheckResult:
    error = relative_error(eval_rhs_muskat(f0, p, quad).values, eval_rhs_arctan(f0, p, quad).values)
    return _check('muskat_vs_arctan', error, FORM_TOLERANCE)


def check_series_vs_quadrature(f0: GridFunction, quad: QuadratureConfig) -> CheckResult:
    """eval_T against its Taylor truncation, on f0 rescaled to slope <= 0.3 if needed"""
    slope = derivative(f0, 1).sup_norm()
    g = f0 * (SERIES_MAX_SLOPE / slope) if slope > SERIES_MAX_SLOPE else f0
    error = relative_error(eval_T_series(g, SERIES_TERMS, quad).values, eval_T(g, quad).values)
    return _check(
        'series_vs_quadrature', error, SERIES_TOLERANCE,
        f"{SERIES_TERMS} terms at slope {min(slope, SERIES_MAX_SLOPE):.3g}",
    )


def check_tail_control(f0: GridFunction, quad: QuadratureConfig) -> CheckResult:
    """
    Halving the alpha cut-off changes T by no more than the tail bound, and the tail
    bound at the configured cut-off is small against T itself
    """
    spec = f0.spec
    radius = quad.resolved_tail_cut(spec)
    half_quad = quad.with_tail_cut(spec, 0.5 * radius)
    full = eval_T(f0, quad).values
    half = eval_T(f0, half_quad).values
    bound_full = tail_bound(f0, quad)
    bound_half = tail_bound(f0, half_quad)
    change = float(np.max(np.abs(full - half), initial=0.0))
    scale = float(np.max(np.abs(full), initial=0.0))
    consistent = change <= bound_half + bound_full + ROUNDOFF_LEVEL * max(scale, 1.0)
    small = bound_full <= TAIL_FRACTION * scale
    return _check(
        'tail_control',
        bound_full,
        TAIL_FRACTION * scale,
        f"R = {radius:.4g}: bound {bound_full:.3e}; R/2 change {change:.3e} vs bound {bound_half:.3e}",
        passed=consistent and small,
    )


def check_log_kernel_identity() -> CheckResult:
    value, expected = log_kernel_identity(1.0)
    return _check('log_kernel_identity', abs(value - expected), LOG_KERNEL_TOLERANCE, f"{value:.12f} vs 2 pi")


def check_dissipation_bound(records: List[DiagnosticsRecord]) -> CheckResult:
    tracked = [record for record in records if not math.isnan(record.dissipation)]
    if not tracked:
        return _skipped('dissipation_bound', 'dissipation not tracked')
    margins = [DISSIPATION_CONSTANT * record.l1 - record.dissipation for record in tracked]
    worst = min(margins)
    slack = 1e-8 * max(DISSIPATION_CONSTANT * record.l1 for record in tracked)
    return _check(
        'dissipation_bound', -worst, slack,
        f"smallest margin 4 pi sqrt(2) ||f||_L1 - D = {worst:.6e} over {len(tracked)} samples",
    )


def check_energy_balance(traj: Trajectory, records: List[DiagnosticsRecord], p: PhysParams) -> CheckResult:
    dissipation = [record.dissipation for record in records]
    if any(math.isnan(value) for value in dissipation):
        return _skipped('energy_balance', 'dissipation not tracked')
    reports = energy_balance(traj, p, dissipation=dissipation)
    worst = max(abs(report.relative_residual) for report in reports)
    return _check('energy_balance', worst, BALANCE_TOLERANCE, f"worst relative residual over {len(reports)} snapshots")


def check_maximum_principle(traj: Trajectory, slack: float) -> CheckResult:
    report = maximum_principle_monitor(traj, slack)
    worst = max(report.sup_f.max_violation, report.inf_f.max_violation,
                report.sup_slope.max_violation if report.sup_slope.applicable else 0.0)
    return _check(
        'maximum_principle', worst, slack,
        f"decay rate {report.observed_decay_rate:.4g}, slope below one: {report.slope_stayed_below_one}",
        passed=report.ok,
    )


def check_wiener_decay(traj: Trajectory, delta: float, slack: float) -> CheckResult:
    report = wiener_decay_monitor(traj, delta=delta, slack=slack)
    if not (report.wiener1.applicable or report.wiener2d.applicable):
        return _skipped('wiener_decay', f"||f0||_1 above the smallness threshold {report.threshold:.6f}")
    return _check(
        'wiener_decay',
        max(report.wiener1.max_violation, report.wiener2d.max_violation),
        slack,
        f"wiener1 applicable: {report.wiener1.applicable}, wiener{2 + delta:g} applicable: {report.wiener2d.applicable}",
        passed=report.ok,
    )


def check_weak_form(
    traj: Trajectory, p: PhysParams, quad: QuadratureConfig, eta: Optional[SeparableBump] = None
) -> CheckResult:
    """Weak-form residual for eta, by default the bump spanning the run"""
    if eta is None:
        eta = default_test_function(traj.times[-1], traj.states[0].spec.half_period)
    report = weak_form_residual(traj, eta, p, quad)
    return _check('weak_form', report.relative, WEAK_FORM_TOLERANCE, f"lhs {report.lhs:.6e}, rhs {report.rhs:.6e}")


def decay_rate_deviation(g: GridFunction, p: PhysParams, quad: QuadratureConfig) -> float:
    """|<f_t, f>/<f, f> + rho |xi_1|| for a single-mode f, measuring the nonlinear departure"""
    rhs = eval_rhs_arctan(g, p, quad).values
    rate = float(np.dot(rhs, g.values) / np.dot(g.values, g.values))
    xi = math.pi / g.spec.half_period
    return abs(rate + p.rho * xi)


def check_linearization(spec: GridSpec, p: PhysParams, quad: QuadratureConfig) -> CheckResult:
    """Single-mode deviation from the linear decay rate scales as slope^2"""
    xi = math.pi / spec.half_period
    deviations = []
    for slope in LINEARIZATION_SLOPES:
        mode = GridFunction.from_callable(spec, lambda x, a=slope / xi: a * np.sin(xi * x))
        deviations.append(decay_rate_deviation(mode, p, quad))
    worst = 0.0
    for (s0, d0), (s1, d1) in zip(zip(LINEARIZATION_SLOPES, deviations), zip(LINEARIZATION_SLOPES[1:], deviations[1:])):
        expected = (s1 / s0) ** 2
        observed = d1 / d0 if d0 > 0 else math.inf
        worst = max(worst, max(observed / expected, expected / observed))
    return _check(
        'linearization', worst, LINEARIZATION_FACTOR,
        'deviations ' + ', '.join(f"{d:.3e}" for d in deviations),
    )


def check_temporal_order(
    f0: GridFunction, p: PhysParams, r: Optional[RegularizationParams], stepper: StepperConfig, quad: QuadratureConfig
) -> CheckResult:
    """Fixed-dt refinement h, h/2, h/4 on a short horizon; observed order from successive differences"""
    horizon = min(stepper.t_final, 0.25)
    finals = []
    for steps in (4, 8, 16):
        config = replace(stepper, t_final=horizon, fixed_dt=horizon / steps)
        traj, _ = simulate(f0, p, r, config, quad, cadence=steps, track_dissipation=False, slope_subcritical=False)
        finals.append(traj.final.values)
    coarse = float(np.max(np.abs(finals[0] - finals[1]), initial=0.0))
    fine = float(np.max(np.abs(finals[1] - finals[2]), initial=0.0))
    scale = max(float(np.max(np.abs(finals[2]), initial=0.0)), 1e-300)
    order = _observed_order(coarse, fine)
    roundoff = fine <= ROUNDOFF_LEVEL * scale
    return CheckResult(
        name='temporal_order',
        passed=bool(roundoff or order >= MIN_TEMPORAL_ORDER),
        value=order,
        threshold=MIN_TEMPORAL_ORDER,
        detail=f"differences {coarse:.3e}, {fine:.3e}" + (' (round-off limited)' if roundoff else ''),
    )


def check_constants() -> CheckResult:
    report = verify_claims(0.0)
    return _check('constants', abs(report.c0_delta0 - report.closed_form_c0_delta0), 1e-10,
                  f"c0(0) = {report.c0_delta0:.16f}")


def _guarded(name: str, check: Callable[[], CheckResult]) -> CheckResult:
    started = time.time()
    try:
        result = check()
    except MuskatError as e:
        logger.error(f"Check {name} raised: {e}")
        result = CheckResult(name=name, passed=False, value=math.nan, threshold=math.nan, detail=str(e))
    except Exception as e:
        logger.exception(f"Check {name} failed unexpectedly")
        result = CheckResult(
            name=name, passed=False, value=math.nan, threshold=math.nan, detail=f"{type(e).__name__}: {e}"
        )
    logger.info(f"{'PASS' if result.passed else 'FAIL'} {name} ({format_duration(time.time() - started)})")
    return result


def run_battery(
    f0: GridFunction,
    p: PhysParams,
    quad: QuadratureConfig,
    stepper: StepperConfig,
    r: Optional[RegularizationParams] = None,
    cadence: int = 16,
    wiener_delta: float = 0.1,
    slack: float = 1e-8,
    weak_form: bool = True,
) -> List[CheckResult]:
    """
    Run every cross-validation check on one initial profile

    Args:
        f0: Initial profile
        p: Densities
        quad: Alpha quadrature under test
        stepper: Settings of the short run the trajectory checks use
        r: Regularization of that run; the conservation-law checks need r = None
        cadence: Snapshot cadence of the run
        wiener_delta: delta of the higher Wiener norm
        slack: Per-snapshot slack of the monotonicity checks
        weak_form: Include the weak-formulation residual

    Returns:
        list: one CheckResult per check; failures never raise
    """
    spec = f0.spec
    results = [
        _guarded('spectral_round_trip', lambda: check_spectral_round_trip(f0)),
        _guarded('kernel_vs_spectral', lambda: check_kernel_vs_spectral(f0)),
        _guarded('muskat_vs_arctan', lambda: check_forms_agree(f0, p, quad)),
        _guarded('series_vs_quadrature', lambda: check_series_vs_quadrature(f0, quad)),
        _guarded('tail_control', lambda: check_tail_control(f0, quad)),
        _guarded('log_kernel_identity', check_log_kernel_identity),
        _guarded('linearization', lambda: check_linearization(spec, p, quad)),
        _guarded('constants', check_constants),
    ]

    check_weak = weak_form and r is None
    eta = default_test_function(stepper.t_final, spec.half_period)
    functionals = weak_form_functionals(eta, spec, p, quad) if check_weak else None
    try:
        traj, records = simulate(
            f0, p, r, stepper, quad, cadence, wiener_delta=wiener_delta, track_dissipation=True, functionals=functionals
        )
    except MuskatError as e:
        logger.error(f"Verification run failed: {e}")
        failed = CheckResult(name='trajectory', passed=False, value=math.nan, threshold=math.nan, detail=str(e))
        return results + [failed]

    results.append(_guarded('dissipation_bound', lambda: check_dissipation_bound(records)))
    if r is None:
        results.append(_guarded('energy_balance', lambda: check_energy_balance(traj, records, p)))
    else:
        results.append(_skipped('energy_balance', 'regularized run'))
    results.append(_guarded('maximum_principle', lambda: check_maximum_principle(traj, slack)))
    results.append(_guarded('wiener_decay', lambda: check_wiener_decay(traj, wiener_delta, slack)))
    if check_weak:
        results.append(_guarded('weak_form', lambda: check_weak_form(traj, p, quad, eta)))
    else:
        results.append(_skipped('weak_form', 'disabled or regularized'))
    results.append(_guarded('temporal_order', lambda: check_temporal_order(f0, p, r, stepper, quad)))

    failed = [result.name for result in results if not result.passed]
    logger.info(f"Verification battery: {len(results) - len(failed)}/{len(results)} passed")
    if failed:
        logger.warning(f"Failed checks: {', '.join(failed)}")
    return results
