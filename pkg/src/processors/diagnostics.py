"""
Diagnostics Module
Monitored quantities along a trajectory and checks of the identities and bounds the
interface equation satisfies: the log conservation law, the dissipation bound,
maximum principles, Wiener-norm decay and the weak formulation
"""
import logging
import math
from dataclasses import asdict, dataclass
from typing import TYPE_CHECKING, Callable, Dict, List, Mapping, Optional, Sequence

import numpy as np
from scipy import integrate, interpolate

from processors.constants import solve_c0, threshold_sqrt
from processors.contour import PhysParams, arctan_flux, eval_rhs_arctan
from processors.quadrature import AlphaBlock, QuadratureConfig, integrate_alpha
from processors.spectral import GridFunction, GridSpec, derivative, forward_transform, wiener_norm
from shared.exceptions import InvalidParameterError
from shared.utils import first_index_where

if TYPE_CHECKING:
    from processors.timestepping import Trajectory

logger = logging.getLogger(__name__)

RESIDUAL_FLOOR = 1e-300
DISSIPATION_CONSTANT = 4.0 * math.pi * math.sqrt(2.0)
DISSIPATION_SAMPLE = 'dissipation'
TIME_QUADRATURE_LIMIT = 500

StepFunctional = Callable[[GridFunction], float]


@dataclass(frozen=True)
class DiagnosticsRecord:
    """Monitored quantities at one snapshot; dissipation is NaN when not evaluated"""

    t: float
    sup_f: float
    inf_f: float
    sup_slope: float
    l2_sq: float
    l1: float
    wiener1: float
    wiener2d: float
    dissipation: float
    mean: float

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class BalanceReport:
    """Residual of ||f||^2(t) + (rho/pi) int_0^t D ds = ||f0||^2"""

    t: float
    lhs: float
    rhs: float
    residual: float
    relative_residual: float

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class DissipationBound:
    dissipation: float
    bound: float
    error_bar: float
    ok: bool

    @property
    def ratio(self) -> float:
        return self.dissipation / self.bound if self.bound > 0 else 0.0


@dataclass(frozen=True)
class MonotonicityReport:
    quantity: str
    direction: str
    applicable: bool
    ok: bool
    max_violation: float
    first_violation_time: Optional[float]


@dataclass(frozen=True)
class MaximumPrincipleReport:
    sup_f: MonotonicityReport
    inf_f: MonotonicityReport
    sup_slope: MonotonicityReport
    slope_stayed_below_one: bool
    observed_decay_rate: float

    @property
    def ok(self) -> bool:
        return self.sup_f.ok and self.inf_f.ok and self.sup_slope.ok


@dataclass(frozen=True)
class WienerDecayReport:
    wiener1: MonotonicityReport
    wiener2d: MonotonicityReport
    threshold: float
    c0: float

    @property
    def ok(self) -> bool:
        return self.wiener1.ok and self.wiener2d.ok


@dataclass(frozen=True)
class WeakFormReport:
    lhs: float
    rhs: float
    residual: float
    relative: float


@dataclass(frozen=True)
class EnergyRate:
    """d/dt ||f||^2 from the right-hand side against -(rho/pi) D, with D/2 = I1 - I2"""

    rate: float
    expected: float
    i1: float
    i2: float


@dataclass(frozen=True, eq=False)
class StepSamples:
    """
    Scalar functionals of the state recorded at t = 0 and after every time step

    Time integrals of a sampled functional go through its not-a-knot cubic spline,
    which is fourth-order accurate in the step size.
    """

    times: np.ndarray
    values: Mapping[str, np.ndarray]

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        if times.ndim != 1 or times.size == 0:
            raise InvalidParameterError("Step samples need at least one sample time")
        if np.any(np.diff(times) <= 0.0):
            raise InvalidParameterError("Sample times must be strictly increasing")
        values = {name: np.asarray(series, dtype=float) for name, series in self.values.items()}
        for name, series in values.items():
            if series.shape != times.shape:
                raise InvalidParameterError(f"Sample series {name} has {series.size} values for {times.size} times")
        object.__setattr__(self, 'times', times)
        object.__setattr__(self, 'values', values)

    def __contains__(self, name: str) -> bool:
        return name in self.values

    def __len__(self) -> int:
        return self.times.size

    @classmethod
    def collect(cls, times: Sequence[float], states: Sequence[GridFunction],
                functionals: Mapping[str, StepFunctional]) -> 'StepSamples':
        """Evaluate every functional on a list of states"""
        values = {name: [functional(state) for state in states] for name, functional in functionals.items()}
        return cls(np.asarray(times, dtype=float), values)

    def interpolant(self, name: str) -> interpolate.CubicSpline:
        if name not in self.values:
            raise InvalidParameterError(f"No sample series named {name}")
        if len(self) < 2:
            raise InvalidParameterError(f"Sample series {name} has a single sample")
        return interpolate.CubicSpline(self.times, self.values[name])

    def cumulative(self, name: str, at: Sequence[float]) -> np.ndarray:
        """int_{t_0}^t of the sampled functional at each requested time"""
        at = np.asarray(at, dtype=float)
        if len(self) < 2:
            return np.zeros(at.shape)
        return self.interpolant(name).antiderivative()(at)


def _log_integrand(block: AlphaBlock) -> np.ndarray:
    alpha, d = block.alpha, block.d
    z = d / alpha
    values = np.log1p(z ** 2)
    if block.nodes.closure:
        # far images carry ln(1 + z^2) to quartic order, matching the cubic far field of T
        values = values + d ** 2 * block.nodes.even_sum(alpha, 2.0)
        values = values - 0.5 * d ** 4 * block.nodes.even_sum(alpha, 4.0)
        for image in block.image_alphas():
            zm2 = (d / image) ** 2
            values = values - (zm2 - 0.5 * zm2 ** 2 - np.log1p(zm2))
    return values


def _z_arctan_integrand(block: AlphaBlock) -> np.ndarray:
    alpha, d = block.alpha, block.d
    z = d / alpha
    values = z * np.arctan(z)
    if block.nodes.closure:
        values = values + d ** 2 * block.nodes.even_sum(alpha, 2.0)
        values = values - d ** 4 / 3.0 * block.nodes.even_sum(alpha, 4.0)
        for image in block.image_alphas():
            zm = d / image
            values = values + zm * np.arctan(zm) - zm ** 2 + zm ** 4 / 3.0
    return values


def _primitive_g(z: np.ndarray) -> np.ndarray:
    """G(z) = z arctan z - ln sqrt(1 + z^2)"""
    return z * np.arctan(z) - 0.5 * np.log1p(z ** 2)


def _g_integrand(block: AlphaBlock) -> np.ndarray:
    alpha, d = block.alpha, block.d
    values = _primitive_g(d / alpha)
    if block.nodes.closure:
        values = values + 0.5 * d ** 2 * block.nodes.even_sum(alpha, 2.0)
        values = values - d ** 4 / 12.0 * block.nodes.even_sum(alpha, 4.0)
        for image in block.image_alphas():
            zm = d / image
            values = values + _primitive_g(zm) - 0.5 * zm ** 2 + zm ** 4 / 12.0
    return values


def dissipation_integral(g: GridFunction, decimate: int = 1, quad: Optional[QuadratureConfig] = None) -> float:
    """
    D = int_torus dx int_R dalpha ln(1 + ((f(x) - f(x - alpha)) / alpha)^2)

    Args:
        g: Interface
        decimate: Stride applied to both the x samples and the alpha nodes
        quad: Alpha quadrature

    Returns:
        float: D >= 0
    """
    if decimate < 1:
        raise InvalidParameterError(f"decimate must be positive, got {decimate}")
    quad = quad or QuadratureConfig()
    spec = g.spec
    if decimate > 1:
        quad = quad.coarsened(spec, decimate)
    x_index = np.arange(0, spec.n, decimate)
    fx = derivative(g, 1).values
    inner = integrate_alpha(g, quad, _log_integrand, origin_value=np.log1p(fx ** 2), x_index=x_index)
    return spec.dx * decimate * float(np.sum(inner))


def dissipation_estimate(g: GridFunction, decimate: int = 1, quad: Optional[QuadratureConfig] = None):
    """
    D at stride `decimate` with the error bar |D(decimate) - D(2 decimate)|

    The integrand is smooth and periodic, so the coarse/fine gap already bounds the
    error and no extrapolation is applied.
    """
    value = dissipation_integral(g, decimate, quad)
    try:
        coarse = dissipation_integral(g, 2 * decimate, quad)
        error = abs(value - coarse)
    except InvalidParameterError:
        error = math.nan
    return value, error


def linear_dissipation(g: GridFunction) -> float:
    """Quadratic limit of D: 4 pi L sum_k |xi_k| |c_k|^2"""
    coeffs = forward_transform(g).coeffs
    return 4.0 * math.pi * g.spec.half_period * float(np.sum(np.abs(g.spec.xi) * np.abs(coeffs) ** 2))


def compute_record(
    g: GridFunction,
    t: float,
    quad: Optional[QuadratureConfig] = None,
    wiener_delta: float = 0.1,
    with_dissipation: bool = True,
    dissipation: Optional[float] = None,
) -> DiagnosticsRecord:
    """Evaluate every monitored quantity of one snapshot; a precomputed D is reused as given"""
    values = g.values
    if dissipation is None:
        dissipation = dissipation_integral(g, 1, quad) if with_dissipation else math.nan
    return DiagnosticsRecord(
        t=float(t),
        sup_f=float(np.max(values)),
        inf_f=float(np.min(values)),
        sup_slope=derivative(g, 1).sup_norm(),
        l2_sq=g.l2_norm() ** 2,
        l1=g.l1_norm(),
        wiener1=wiener_norm(g, 1.0),
        wiener2d=wiener_norm(g, 2.0 + wiener_delta),
        dissipation=dissipation,
        mean=g.mean(),
    )


def energy_balance(
    traj: 'Trajectory',
    p: PhysParams,
    quad: Optional[QuadratureConfig] = None,
    dissipation: Optional[Sequence[float]] = None,
) -> List[BalanceReport]:
    """
    Residual of the log conservation law at every snapshot

    int_0^t D ds comes from the per-step D samples of the trajectory when it carries
    them; otherwise the snapshot values are integrated by the trapezoid rule.

    Args:
        traj: Trajectory
        p: Densities
        quad: Alpha quadrature for D (used only without samples or dissipation)
        dissipation: Precomputed D at the snapshot times

    Returns:
        list: one BalanceReport per snapshot
    """
    times = np.asarray(traj.times)
    samples = traj.samples
    if samples is not None and DISSIPATION_SAMPLE in samples:
        dissipated = samples.cumulative(DISSIPATION_SAMPLE, times)
    else:
        if dissipation is None:
            dissipation = [dissipation_integral(state, 1, quad) for state in traj.states]
        dissipated = integrate.cumulative_trapezoid(np.asarray(dissipation, dtype=float), times, initial=0.0)
    reference = traj.states[0].l2_norm() ** 2
    reports = []
    for t, state, accumulated in zip(times, traj.states, dissipated):
        lhs = state.l2_norm() ** 2 + p.rho / math.pi * float(accumulated)
        residual = lhs - reference
        reports.append(BalanceReport(
            t=float(t),
            lhs=lhs,
            rhs=reference,
            residual=residual,
            relative_residual=residual / max(reference, RESIDUAL_FLOOR),
        ))
    return reports


def energy_rate(g: GridFunction, p: PhysParams, quad: Optional[QuadratureConfig] = None) -> EnergyRate:
    """Instantaneous form of the balance law on one state"""
    quad = quad or QuadratureConfig()
    dx = g.spec.dx
    fx = derivative(g, 1).values
    rate = 2.0 * dx * float(np.dot(g.values, eval_rhs_arctan(g, p, quad).values))
    expected = -p.rho / math.pi * dissipation_integral(g, 1, quad)
    i1 = dx * float(np.sum(integrate_alpha(g, quad, _z_arctan_integrand, origin_value=fx * np.arctan(fx))))
    i2 = dx * float(np.sum(integrate_alpha(g, quad, _g_integrand, origin_value=_primitive_g(fx))))
    return EnergyRate(rate=rate, expected=expected, i1=i1, i2=i2)


def log_kernel_identity(a: float = 1.0):
    """
    int_R ln(1 + a^2 / alpha^2) dalpha by adaptive quadrature, against its closed form 2 pi |a|

    Returns:
        tuple: (computed, closed form)
    """
    def integrand(alpha: float) -> float:
        return math.log1p(a * a / (alpha * alpha))

    inner, _ = integrate.quad(integrand, 0.0, 1.0, limit=200)
    outer, _ = integrate.quad(integrand, 1.0, math.inf, limit=200)
    return 2.0 * (inner + outer), 2.0 * math.pi * abs(a)


def dissipation_bound_check(g: GridFunction, quad: Optional[QuadratureConfig] = None) -> DissipationBound:
    """D <= 4 pi sqrt(2) ||f||_{L1}, up to the quadrature error bar"""
    value, error = dissipation_estimate(g, 1, quad)
    error = 0.0 if math.isnan(error) else error
    bound = DISSIPATION_CONSTANT * g.l1_norm()
    return DissipationBound(dissipation=value, bound=bound, error_bar=error, ok=value <= bound + error)


def _monotone(
    quantity: str, times: Sequence[float], values: Sequence[float], increasing: bool, slack: float, applicable: bool = True
) -> MonotonicityReport:
    direction = 'nondecreasing' if increasing else 'nonincreasing'
    values = np.asarray(values, dtype=float)
    steps = np.diff(values)
    violations = -steps if increasing else steps
    flags = list(violations > slack)
    first = first_index_where(flags)
    max_violation = float(np.max(violations, initial=0.0))
    ok = (first < 0) or not applicable
    if applicable and first >= 0:
        logger.warning(f"{quantity} is not {direction}: first violation at t = {times[first + 1]:.6g}")
    return MonotonicityReport(
        quantity=quantity,
        direction=direction,
        applicable=applicable,
        ok=ok,
        max_violation=max(max_violation, 0.0),
        first_violation_time=float(times[first + 1]) if first >= 0 else None,
    )


def maximum_principle_monitor(traj: 'Trajectory', slack: float = 1e-8) -> MaximumPrincipleReport:
    """
    sup f nonincreasing, inf f nondecreasing and ||f_x||_inf nonincreasing (when it starts below 1)
    along the recorded snapshots

    Args:
        traj: Trajectory
        slack: Allowed increase per snapshot interval

    Returns:
        MaximumPrincipleReport: violations are reported, never raised
    """
    times = traj.times
    sup_f = [float(np.max(state.values)) for state in traj.states]
    inf_f = [float(np.min(state.values)) for state in traj.states]
    slopes = [derivative(state, 1).sup_norm() for state in traj.states]
    amplitude = [state.sup_norm() for state in traj.states]
    duration = times[-1] - times[0]
    decay = math.nan
    if duration > 0 and amplitude[0] > 0 and amplitude[-1] > 0:
        decay = -math.log(amplitude[-1] / amplitude[0]) / duration
        logger.info(f"Observed sup-norm decay rate {decay:.6g} over t in [0, {duration:.6g}]")
    return MaximumPrincipleReport(
        sup_f=_monotone('sup_f', times, sup_f, increasing=False, slack=slack),
        inf_f=_monotone('inf_f', times, inf_f, increasing=True, slack=slack),
        sup_slope=_monotone('sup_slope', times, slopes, increasing=False, slack=slack, applicable=slopes[0] < 1.0),
        slope_stayed_below_one=max(slopes) < 1.0,
        observed_decay_rate=decay,
    )


def wiener_decay_monitor(
    traj: 'Trajectory',
    threshold: Optional[float] = None,
    delta: float = 0.1,
    slack: float = 1e-8,
) -> WienerDecayReport:
    """
    ||f||_1 nonincreasing whenever ||f0||_1 < threshold, and ||f||_{2+delta} nonincreasing
    whenever ||f0||_1 <= c0(delta)

    Args:
        traj: Trajectory
        threshold: Smallness threshold for ||f||_1 (default sqrt((4 - sqrt 13) / 6))
        delta: delta of the higher norm
        slack: Allowed increase per snapshot interval

    Returns:
        WienerDecayReport
    """
    threshold = threshold_sqrt() if threshold is None else threshold
    c0 = solve_c0(delta)
    times = traj.times
    first_norms = [wiener_norm(state, 1.0) for state in traj.states]
    higher_norms = [wiener_norm(state, 2.0 + delta) for state in traj.states]
    return WienerDecayReport(
        wiener1=_monotone('wiener1', times, first_norms, increasing=False, slack=slack,
                          applicable=first_norms[0] < threshold),
        wiener2d=_monotone(f'wiener{2.0 + delta:g}', times, higher_norms, increasing=False, slack=slack,
                           applicable=first_norms[0] <= c0),
        threshold=threshold,
        c0=c0,
    )


def _bump(u: np.ndarray) -> np.ndarray:
    inside = np.abs(u) < 1.0
    safe = np.where(inside, u, 0.0)
    return np.where(inside, np.exp(-1.0 / (1.0 - safe ** 2)), 0.0)


def _bump_slope(u: np.ndarray) -> np.ndarray:
    inside = np.abs(u) < 1.0
    safe = np.where(inside, u, 0.0)
    return np.where(inside, _bump(safe) * (-2.0 * safe / (1.0 - safe ** 2) ** 2), 0.0)


@dataclass(frozen=True)
class SeparableBump:
    """eta(t, x) = b((t - t_center)/t_radius) b((x - x_center)/x_radius), b(u) = exp(-1/(1 - u^2))"""

    t_center: float
    t_radius: float
    x_center: float
    x_radius: float

    @property
    def support(self):
        return self.t_center - self.t_radius, self.t_center + self.t_radius

    def _u(self, x: np.ndarray, half_period: float) -> np.ndarray:
        if self.x_radius >= half_period:
            raise InvalidParameterError("Test-function support must fit inside the torus")
        wrapped = np.mod(np.asarray(x, dtype=float) - self.x_center + half_period, 2.0 * half_period) - half_period
        return wrapped / self.x_radius

    def time_profile(self, t):
        return _bump(np.asarray((t - self.t_center) / self.t_radius, dtype=float))

    def time_slope(self, t):
        return _bump_slope(np.asarray((t - self.t_center) / self.t_radius, dtype=float)) / self.t_radius

    def space_profile(self, x: np.ndarray, half_period: float) -> np.ndarray:
        return _bump(self._u(x, half_period))

    def space_slope(self, x: np.ndarray, half_period: float) -> np.ndarray:
        return _bump_slope(self._u(x, half_period)) / self.x_radius

    def dt(self, t: float, x: np.ndarray, half_period: float) -> np.ndarray:
        return self.time_slope(t) * self.space_profile(x, half_period)

    def dx(self, t: float, x: np.ndarray, half_period: float) -> np.ndarray:
        return self.time_profile(t) * self.space_slope(x, half_period)

    def sample_names(self):
        """Names of the two time factors in StepSamples, keyed by the bump's parameters"""
        key = f"{self.t_center!r},{self.t_radius!r},{self.x_center!r},{self.x_radius!r}"
        return f"weak_mass[{key}]", f"weak_flux[{key}]"


def default_test_function(t_final: float, half_period: float) -> SeparableBump:
    """Bump centred in the run, covering 80% of its duration and half the torus"""
    return SeparableBump(t_center=0.5 * t_final, t_radius=0.4 * t_final, x_center=0.0, x_radius=0.5 * half_period)


def weak_form_functionals(
    eta: SeparableBump, spec: GridSpec, p: PhysParams, quad: Optional[QuadratureConfig] = None
) -> Dict[str, StepFunctional]:
    """
    The time factors of both sides of the weak form, for sampling after every step

    For separable eta the double integrals reduce to
        lhs = int b'(t) M(t) dt,  M(t) = int b(x) f(t, x) dx
        rhs = int b(t) F(t) dt,   F(t) = int b'(x) (rho/pi) int arctan(D_alpha f) dalpha dx
    """
    weight = eta.space_profile(spec.x, spec.half_period)
    slope = eta.space_slope(spec.x, spec.half_period)
    mass_name, flux_name = eta.sample_names()

    def mass(g: GridFunction) -> float:
        return spec.dx * float(np.dot(weight, g.values))

    def flux(g: GridFunction) -> float:
        return spec.dx * float(np.dot(slope, arctan_flux(g, p, quad).values))

    return {mass_name: mass, flux_name: flux}


def weak_form_residual(
    traj: 'Trajectory', eta: SeparableBump, p: PhysParams, quad: Optional[QuadratureConfig] = None
) -> WeakFormReport:
    """
    Both sides of int int eta_t f dx dt = int int eta_x (rho/pi) int arctan(D_alpha f) dalpha dx dt

    The spatial factors M(t) and F(t) come from the trajectory's per-step samples when it
    was run with weak_form_functionals(eta, ...), and from its snapshots otherwise. Their
    cubic splines are then integrated against the analytic time factors of eta.
    """
    times = np.asarray(traj.times)
    start, end = eta.support
    if start < times[0] or end > times[-1]:
        raise InvalidParameterError("Test function must be supported inside the trajectory's time span")
    spec = traj.states[0].spec
    mass_name, flux_name = eta.sample_names()
    samples = traj.samples
    if samples is None or mass_name not in samples or flux_name not in samples:
        logger.debug("Weak form sampled from the recorded snapshots only")
        samples = StepSamples.collect(traj.times, traj.states, weak_form_functionals(eta, spec, p, quad))
    mass = samples.interpolant(mass_name)
    flux = samples.interpolant(flux_name)

    def lhs_density(t: float) -> float:
        return float(eta.time_slope(t)) * float(mass(t))

    def rhs_density(t: float) -> float:
        return float(eta.time_profile(t)) * float(flux(t))

    lhs, _ = integrate.quad(lhs_density, start, end, limit=TIME_QUADRATURE_LIMIT, epsabs=0.0, epsrel=1e-11)
    rhs, _ = integrate.quad(rhs_density, start, end, limit=TIME_QUADRATURE_LIMIT, epsabs=0.0, epsrel=1e-11)
    residual = lhs - rhs
    scale = max(abs(lhs), abs(rhs), RESIDUAL_FLOOR)
    return WeakFormReport(lhs=lhs, rhs=rhs, residual=residual, relative=abs(residual) / scale)
