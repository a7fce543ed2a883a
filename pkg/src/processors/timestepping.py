"""
Time Stepping Module
Integrating-factor and classical Runge-Kutta integration of the semi-discrete
interface equation, with dt selection and the recording driver
"""
import logging
import math
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, List, Mapping, Optional, Tuple

import numpy as np

from processors.contour import ContourModel, PhysParams, RegularizationParams, linear_symbol_values
from processors.diagnostics import (
    DISSIPATION_SAMPLE,
    DiagnosticsRecord,
    StepFunctional,
    StepSamples,
    compute_record,
    dissipation_integral,
)
from processors.quadrature import QuadratureConfig
from processors.spectral import GridFunction, GridSpec, derivative
from shared.exceptions import InvalidParameterError, SimulationAbortedError, SlopeBoundViolationError
from shared.utils import format_duration

logger = logging.getLogger(__name__)


class Scheme(str, Enum):
    INTEGRATING_FACTOR_RK4 = 'integrating_factor_rk4'
    EXPLICIT_RK4 = 'explicit_rk4'


@dataclass(frozen=True)
class StepperConfig:
    """Scheme, CFL safety factor and horizon; fixed_dt overrides dt selection for refinement studies"""

    scheme: Scheme = Scheme.INTEGRATING_FACTOR_RK4
    cfl: float = 0.5
    dt_max: float = 1e-2
    t_final: float = 1.0
    fixed_dt: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, 'scheme', Scheme(self.scheme))
        if not 0.0 < self.cfl <= 1.0:
            raise InvalidParameterError(f"cfl must lie in (0, 1], got {self.cfl}")
        if not self.dt_max > 0:
            raise InvalidParameterError(f"dt_max must be positive, got {self.dt_max}")
        if not self.t_final > 0:
            raise InvalidParameterError(f"t_final must be positive, got {self.t_final}")
        if self.fixed_dt is not None and not self.fixed_dt > 0:
            raise InvalidParameterError(f"fixed_dt must be positive, got {self.fixed_dt}")


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Snapshots at strictly increasing times starting at 0, with optional per-step samples"""

    times: Tuple[float, ...]
    states: Tuple[GridFunction, ...] = field(repr=False)
    samples: Optional[StepSamples] = field(default=None, repr=False)

    def __post_init__(self):
        times = tuple(float(t) for t in self.times)
        states = tuple(self.states)
        if len(times) != len(states) or not times:
            raise InvalidParameterError("Trajectory needs one state per time and at least one snapshot")
        if times[0] != 0.0:
            raise InvalidParameterError(f"Trajectory must start at t = 0, got {times[0]}")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise InvalidParameterError("Trajectory times must be strictly increasing")
        object.__setattr__(self, 'times', times)
        object.__setattr__(self, 'states', states)

    def __len__(self) -> int:
        return len(self.times)

    @property
    def final(self) -> GridFunction:
        return self.states[-1]


def linear_symbol(k, p: PhysParams, r: Optional[RegularizationParams], spec: GridSpec):
    """
    Linear symbol at integer wavenumber(s) k

    -rho |xi_k| unregularized; regularized, the arctan term linearizes to
    -rho c_eps |xi_k|^(1-eps), joined by -eps C |xi_k|^(1-eps) - eps xi_k^2.
    """
    xi = math.pi * np.asarray(k, dtype=float) / spec.half_period
    values = linear_symbol_values(xi, p, r)
    return float(values) if np.ndim(values) == 0 else values


def _if_rk4(g: GridFunction, dt: float, model: ContourModel) -> GridFunction:
    spec = g.spec
    n = spec.n
    half = np.exp(0.5 * dt * model.linear_symbol(spec))
    full = half * half

    def nonlinear_hat(u_hat: np.ndarray) -> np.ndarray:
        u = GridFunction(spec, np.fft.irfft(u_hat, n=n))
        return np.fft.rfft(model.nonlinear(u))

    u_hat = np.fft.rfft(g.values)
    k1 = nonlinear_hat(u_hat)
    k2 = nonlinear_hat(half * (u_hat + 0.5 * dt * k1))
    k3 = nonlinear_hat(half * u_hat + 0.5 * dt * k2)
    k4 = nonlinear_hat(full * u_hat + dt * half * k3)
    new_hat = full * u_hat + dt / 6.0 * (full * k1 + 2.0 * half * (k2 + k3) + k4)
    return _checked(spec, np.fft.irfft(new_hat, n=n))


def _explicit_rk4(g: GridFunction, dt: float, model: ContourModel) -> GridFunction:
    spec = g.spec

    def rhs(values: np.ndarray) -> np.ndarray:
        return model.rhs(GridFunction(spec, values)).values

    u = g.values
    k1 = rhs(u)
    k2 = rhs(_finite(u + 0.5 * dt * k1))
    k3 = rhs(_finite(u + 0.5 * dt * k2))
    k4 = rhs(_finite(u + dt * k3))
    return _checked(spec, u + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4))


def _finite(values: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(values)):
        raise SimulationAbortedError("Non-finite values in a Runge-Kutta stage")
    return values


def _checked(spec: GridSpec, values: np.ndarray) -> GridFunction:
    return GridFunction(spec, _finite(values))


def step(g: GridFunction, dt: float, model: ContourModel, config: StepperConfig) -> GridFunction:
    """
    Advance one time step

    Args:
        g: Current state
        dt: Step size
        model: Right-hand side split into linear symbol and nonlinear remainder
        config: Stepper configuration (selects the scheme)

    Returns:
        GridFunction: state after dt

    Raises:
        SimulationAbortedError: If the step produces NaN or Inf
    """
    if not dt > 0:
        raise InvalidParameterError(f"dt must be positive, got {dt}")
    if config.scheme is Scheme.INTEGRATING_FACTOR_RK4:
        return _if_rk4(g, dt, model)
    return _explicit_rk4(g, dt, model)


def choose_dt(g: GridFunction, model: ContourModel, config: StepperConfig) -> float:
    """
    Step size from the slope-based CFL conditions

    The integrating-factor scheme is limited by the nonlinear term only,
    cfl dx / (rho |f_x|^2); the explicit scheme by cfl dx / (rho (1 + |f_x|^2))
    and, with viscosity, by cfl dx^2 / (2 eps).
    """
    if config.fixed_dt is not None:
        return config.fixed_dt
    dx = g.spec.dx
    rho = model.params.rho
    slope = derivative(g, 1).sup_norm()
    if config.scheme is Scheme.INTEGRATING_FACTOR_RK4:
        limit = config.cfl * dx / (rho * slope ** 2) if slope > 0 else math.inf
        return min(config.dt_max, limit)
    dt = min(config.dt_max, config.cfl * dx / (rho * (1.0 + slope ** 2)))
    if model.regularization is not None:
        dt = min(dt, config.cfl * dx ** 2 / (2.0 * model.regularization.eps))
    return dt


@dataclass
class _Recorder:
    cadence: int
    record: Callable[[GridFunction, float, Optional[float]], DiagnosticsRecord]
    functionals: Mapping[str, StepFunctional] = field(default_factory=dict)
    times: List[float] = field(default_factory=list)
    states: List[GridFunction] = field(default_factory=list)
    records: List[DiagnosticsRecord] = field(default_factory=list)
    sample_times: List[float] = field(default_factory=list)
    sample_values: Dict[str, List[float]] = field(default_factory=dict)

    def observe(self, g: GridFunction, t: float):
        """Evaluate every functional on the state reached after a step"""
        values = {}
        for name, functional in self.functionals.items():
            try:
                value = float(functional(g))
            except InvalidParameterError as error:
                raise SimulationAbortedError(f"Sampling {name} failed: {error}") from error
            if not math.isfinite(value):
                raise SimulationAbortedError(f"Non-finite {name} sample")
            values[name] = value
        self.sample_times.append(t)
        for name, value in values.items():
            self.sample_values.setdefault(name, []).append(value)

    def add(self, g: GridFunction, t: float):
        self.times.append(t)
        self.states.append(g)
        series = self.sample_values.get(DISSIPATION_SAMPLE)
        self.records.append(self.record(g, t, series[-1] if series else None))
        logger.debug(f"Recorded snapshot at t = {t:.6f}")

    def trajectory(self) -> Trajectory:
        samples = None
        if self.functionals:
            count = len(self.sample_times)
            values = {name: series[:count] for name, series in self.sample_values.items()}
            samples = StepSamples(np.asarray(self.sample_times), values)
        return Trajectory(tuple(self.times), tuple(self.states), samples)


def _aborted(error: Exception, g: GridFunction, t: float, step_number: int, recorder: _Recorder):
    return SimulationAbortedError(
        f"Simulation aborted at t = {t:.6g} (step {step_number}): {error}",
        state=g, t=t, trajectory=recorder.trajectory(),
    )


def simulate(
    f0: GridFunction,
    p: PhysParams,
    r: Optional[RegularizationParams],
    stepper: StepperConfig,
    quad: Optional[QuadratureConfig] = None,
    cadence: int = 16,
    *,
    form=None,
    wiener_delta: float = 0.1,
    track_dissipation: bool = True,
    slope_subcritical: Optional[bool] = None,
    functionals: Optional[Mapping[str, StepFunctional]] = None,
) -> Tuple[Trajectory, List[DiagnosticsRecord]]:
    """
    Solve the initial value problem f(x, 0) = f0 up to stepper.t_final

    Args:
        f0: Initial interface
        p: Densities (stable case)
        r: Regularization, or None for the contour equation itself
        stepper: Scheme and time-step settings
        quad: Alpha quadrature for the nonlinear term and the dissipation
        cadence: Record a snapshot every `cadence` steps (plus t = 0 and t_final)
        form: muskat or arctan right-hand side when unregularized
        wiener_delta: delta of the ||f||_{2+delta} column
        track_dissipation: Sample D(t) after every step; snapshots reuse the sampled value
        slope_subcritical: Abort if |f_x| reaches 1; defaults to whether f0 starts below 1
        functionals: Further scalar functionals sampled after every step into traj.samples

    Returns:
        tuple: (Trajectory, list of DiagnosticsRecord)

    Raises:
        SimulationAbortedError: On NaN/Inf, carrying the last finite state
        SlopeBoundViolationError: If a subcritical run reaches slope 1
    """
    if cadence < 1:
        raise InvalidParameterError(f"cadence must be positive, got {cadence}")
    quad = quad or QuadratureConfig()
    model = ContourModel(p, quad, r, form)
    if slope_subcritical is None:
        slope_subcritical = derivative(f0, 1).sup_norm() < 1.0

    sampled: Dict[str, StepFunctional] = dict(functionals or {})
    if track_dissipation:
        sampled[DISSIPATION_SAMPLE] = lambda g: dissipation_integral(g, 1, quad)

    def record(g: GridFunction, t: float, dissipation: Optional[float]) -> DiagnosticsRecord:
        return compute_record(
            g, t, quad=quad, wiener_delta=wiener_delta, with_dissipation=track_dissipation, dissipation=dissipation
        )

    recorder = _Recorder(cadence=cadence, record=record, functionals=sampled)
    recorder.observe(f0, 0.0)
    recorder.add(f0, 0.0)

    fixed_steps = None
    if stepper.fixed_dt is not None:
        fixed_steps = max(1, int(round(stepper.t_final / stepper.fixed_dt)))
        fixed_dt = stepper.t_final / fixed_steps

    logger.info(
        f"Simulating {model.form.value} form with {stepper.scheme.value} on N = {f0.spec.n}, "
        f"t_final = {stepper.t_final}"
    )
    started = time.time()
    g = f0
    t = 0.0
    steps = 0
    while True:
        if fixed_steps is not None:
            if steps >= fixed_steps:
                break
            dt = fixed_dt
        else:
            remaining = stepper.t_final - t
            if remaining <= 1e-12 * stepper.t_final:
                break
            dt = min(choose_dt(g, model, stepper), remaining)
        try:
            g_next = step(g, dt, model, stepper)
        except SimulationAbortedError as error:
            raise _aborted(error, g, t, steps + 1, recorder) from error
        steps += 1
        t = steps * fixed_dt if fixed_steps is not None else t + dt
        finished = (steps >= fixed_steps) if fixed_steps is not None else stepper.t_final - t <= 1e-12 * stepper.t_final
        if finished:
            t = stepper.t_final
        g = g_next

        slope = derivative(g, 1).sup_norm()
        if slope_subcritical and slope >= 1.0:
            raise SlopeBoundViolationError(
                f"Slope reached {slope:.6f} >= 1 at t = {t:.6g} in a subcritical run",
                state=g, t=t, trajectory=recorder.trajectory(),
            )
        try:
            recorder.observe(g, t)
        except SimulationAbortedError as error:
            raise _aborted(error, g, t, steps, recorder) from error
        if steps % cadence == 0 or finished:
            recorder.add(g, t)

    logger.info(f"Reached t = {t:.6g} in {steps} steps ({format_duration(time.time() - started)})")
    return recorder.trajectory(), recorder.records
