"""
Contour Equation Module
Right-hand sides of the 1D Muskat interface equation: the operator split -rho(Lambda f + T(f)),
the arctan divergence form, the regularized model and the Taylor-series oracle for T
"""
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np
from scipy import special

from processors.lattice_sums import far_image_sum, origin_correction
from processors.quadrature import AlphaBlock, QuadratureConfig, QuadratureRule, alpha_nodes, integrate_alpha
from processors.spectral import (
    GridFunction,
    GridSpec,
    apply_multiplier,
    derivative,
    fractional_symbol,
    interpolate,
    kernel_constant,
    lambda_pow,
    signum_multiplier,
)
from shared.exceptions import InvalidParameterError, SeriesDivergenceError, UnstableConfigurationError

logger = logging.getLogger(__name__)

MAX_REGULARIZATION = 0.25
ORIGIN_SERIES_TERMS = 3


@dataclass(frozen=True)
class PhysParams:
    """Densities of the upper (rho1) and lower (rho2) fluid"""

    rho1: float
    rho2: float

    def __post_init__(self):
        if not (math.isfinite(self.rho1) and math.isfinite(self.rho2)):
            raise InvalidParameterError("Densities must be finite")
        if self.rho2 <= self.rho1:
            raise UnstableConfigurationError(
                f"Stable case requires rho2 > rho1 (denser fluid below), got rho1={self.rho1}, rho2={self.rho2}"
            )

    @property
    def rho(self) -> float:
        return 0.5 * (self.rho2 - self.rho1)

    @classmethod
    def normalized(cls) -> 'PhysParams':
        """Preset with (rho2 - rho1) / (2 pi) = 1"""
        return cls(0.0, 2.0 * math.pi)


@dataclass(frozen=True)
class RegularizationParams:
    """The eps and universal constant C of the regularized model; big_c=None uses the calibrated default"""

    eps: float
    big_c: Optional[float] = None

    def __post_init__(self):
        if not 0.0 < self.eps <= MAX_REGULARIZATION:
            raise InvalidParameterError(f"Regularization eps must lie in (0, 1/4], got {self.eps}")
        if self.big_c is not None and not self.big_c > 0:
            raise InvalidParameterError(f"Regularization constant C must be positive, got {self.big_c}")

    def resolved_big_c(self, p: PhysParams) -> float:
        return self.big_c if self.big_c is not None else default_big_c(p)


def default_big_c(p: PhysParams) -> float:
    """2 rho / (pi c_m) with c_m the smallest kernel constant of Lambda^(1-eps), eps <= 1/4"""
    return 2.0 * p.rho / (math.pi * kernel_constant(1.0 - MAX_REGULARIZATION))


def transport_constant(eps: float) -> float:
    """(2/pi) Gamma(eps) sin(pi eps / 2): symbol of the linearized regularized arctan term"""
    if eps == 0.0:
        return 1.0
    return 2.0 / math.pi * special.gamma(eps) * math.sin(0.5 * math.pi * eps)


def linear_symbol_values(xi: np.ndarray, p: PhysParams, r: Optional[RegularizationParams] = None) -> np.ndarray:
    """Fourier-diagonal linear part evaluated at frequencies xi"""
    magnitude = np.abs(np.asarray(xi, dtype=float))
    if r is None:
        return -p.rho * magnitude
    power = magnitude ** (1.0 - r.eps)
    coefficient = p.rho * transport_constant(r.eps) + r.eps * r.resolved_big_c(p)
    return -coefficient * power - r.eps * magnitude ** 2


def _remainder(z: np.ndarray) -> np.ndarray:
    """z - arctan z"""
    return z - np.arctan(z)


def _t_integrand(block: AlphaBlock) -> np.ndarray:
    alpha, d, slope_diff = block.alpha, block.d, block.slope_diff
    z = d / alpha
    values = (slope_diff / alpha) * z ** 2 / (1.0 + z ** 2)
    if block.nodes.closure:
        values = values + slope_diff * d ** 2 * block.nodes.odd_sum(alpha, 3.0)
        for image in block.image_alphas():
            zm = d / image
            values = values - (slope_diff / image) * zm ** 4 / (1.0 + zm ** 2)
    return values


def _series_integrand(n_terms: int):
    def integrand(block: AlphaBlock) -> np.ndarray:
        alpha, d, slope_diff = block.alpha, block.d, block.slope_diff
        z = d / alpha
        values = np.zeros_like(d)
        for n in range(1, n_terms + 1):
            sign = -1.0 if n % 2 else 1.0
            term = (slope_diff / alpha) * z ** (2 * n)
            if block.nodes.closure:
                term = term + slope_diff * d ** (2 * n) * block.nodes.odd_sum(alpha, 2.0 * n + 1.0)
            values += sign * term
        return values

    return integrand


def _arctan_integrand(block: AlphaBlock) -> np.ndarray:
    alpha, d = block.alpha, block.d
    values = _remainder(d / alpha)
    if block.nodes.closure:
        values = values + d ** 3 / 3.0 * block.nodes.odd_sum(alpha, 3.0)
        for image in block.image_alphas():
            zm = d / image
            values = values + _remainder(zm) - zm ** 3 / 3.0
    return values


def _regularized_integrand(eps: float):
    def integrand(block: AlphaBlock) -> np.ndarray:
        alpha, d = block.alpha, block.d
        values = _remainder(d * np.abs(alpha) ** eps / alpha)
        if block.nodes.closure:
            values = values + d ** 3 / 3.0 * block.nodes.odd_sum(alpha, 3.0 - 3.0 * eps)
            for image in block.image_alphas():
                zm = d * np.abs(image) ** eps / image
                values = values + _remainder(zm) - zm ** 3 / 3.0
        return values

    return integrand


def delta_quotient(g: GridFunction, x_index: int, alpha: float) -> float:
    """
    Difference quotient (f(x) - f(x - alpha)) / alpha at a grid point

    Args:
        g: Grid function
        x_index: Grid index of x
        alpha: Offset; off-grid values use band-limited interpolation

    Returns:
        float: the quotient, or f_x(x) when |alpha| < dx/100
    """
    spec = g.spec
    if abs(alpha) < spec.dx / 100.0:
        return float(derivative(g, 1).values[x_index])
    x = spec.x[x_index]
    shifted = float(interpolate(g, np.array([x - alpha]))[0])
    return (float(g.values[x_index]) - shifted) / alpha


def eval_T(g: GridFunction, quad: Optional[QuadratureConfig] = None) -> GridFunction:
    """
    Nonlinear correction T(f) = (1/pi) int (f_x(x) - f_x(x - alpha))/alpha * D^2/(1 + D^2) dalpha

    Args:
        g: Interface
        quad: Alpha quadrature (default: grid-aligned trapezoid closed with periodic images)

    Returns:
        GridFunction: T(g)
    """
    quad = quad or QuadratureConfig()
    fx = derivative(g, 1).values
    fxx = derivative(g, 2).values
    origin = fxx * fx ** 2 / (1.0 + fx ** 2)
    integral = integrate_alpha(g, quad, _t_integrand, origin_value=origin, needs_slope=True)
    return GridFunction(g.spec, integral / math.pi)


def eval_T_series(g: GridFunction, n_terms: int, quad: Optional[QuadratureConfig] = None) -> GridFunction:
    """
    Truncated Taylor expansion -(1/pi) sum_{n<=n_terms} (-1)^n int d_x(D) D^(2n) dalpha

    Raises:
        SeriesDivergenceError: If the slope reaches 1
    """
    if n_terms < 1:
        raise InvalidParameterError(f"n_terms must be positive, got {n_terms}")
    quad = quad or QuadratureConfig()
    fx = derivative(g, 1).values
    fxx = derivative(g, 2).values
    slope = float(np.max(np.abs(fx)))
    if slope >= 1.0:
        raise SeriesDivergenceError(f"Taylor series of T diverges for slope {slope:.4f} >= 1")
    origin = np.zeros(g.spec.n)
    for n in range(1, n_terms + 1):
        sign = -1.0 if n % 2 else 1.0
        origin += sign * fxx * fx ** (2 * n)
    integral = integrate_alpha(g, quad, _series_integrand(n_terms), origin_value=origin, needs_slope=True)
    return GridFunction(g.spec, -integral / math.pi)


def arctan_remainder_integral(g: GridFunction, quad: Optional[QuadratureConfig] = None) -> np.ndarray:
    """int R(D_alpha f) dalpha with R(z) = z - arctan z"""
    quad = quad or QuadratureConfig()
    fx = derivative(g, 1).values
    return integrate_alpha(g, quad, _arctan_integrand, origin_value=_remainder(fx))


def origin_series_correction(fx: np.ndarray, eps: float, step: float, midpoint: bool = False) -> np.ndarray:
    """
    Origin-node correction for R(D^eps_alpha f) ~ sum_k a_k |alpha|^((2k+1) eps) near alpha = 0

    with a_k = (-1)^(k+1) f_x^(2k+1) / (2k+1). The first ORIGIN_SERIES_TERMS powers get their
    own zeta weights, and the rest of R(f_x) takes the weight of the next power. Where
    |f_x| >= 1 the expansion diverges, so all of R(f_x) takes the weight of the cubic term.
    """
    fx = np.asarray(fx, dtype=float)
    weights = [origin_correction((2 * k + 1) * eps, step, midpoint=midpoint) for k in range(1, ORIGIN_SERIES_TERMS + 2)]
    remainder = _remainder(fx)
    inside = np.abs(fx) < 1.0
    z = np.where(inside, fx, 0.0)
    correction = np.zeros_like(fx)
    partial = np.zeros_like(fx)
    for k in range(1, ORIGIN_SERIES_TERMS + 1):
        term = (-1.0) ** (k + 1) * z ** (2 * k + 1) / (2 * k + 1)
        correction += weights[k - 1] * term
        partial += term
    correction += weights[-1] * (np.where(inside, remainder, 0.0) - partial)
    return np.where(inside, correction, weights[0] * remainder)


def regularized_remainder_integral(g: GridFunction, eps: float, quad: Optional[QuadratureConfig] = None) -> np.ndarray:
    """int R(D^eps_alpha f) dalpha, with the origin node corrected for the |alpha|^((2k+1) eps) cusps"""
    quad = quad or QuadratureConfig()
    nodes = alpha_nodes(g.spec, quad)
    fx = derivative(g, 1).values
    integral = integrate_alpha(g, quad, _regularized_integrand(eps))
    midpoint = quad.rule is QuadratureRule.MIDPOINT
    return integral + origin_series_correction(fx, eps, nodes.step, midpoint=midpoint)


def arctan_flux(g: GridFunction, p: PhysParams, quad: Optional[QuadratureConfig] = None) -> GridFunction:
    """(rho/pi) int arctan(D_alpha f) dalpha, whose x-derivative is the arctan-form right-hand side"""
    linear = signum_multiplier(g).values
    return GridFunction(g.spec, p.rho * linear - p.rho / math.pi * arctan_remainder_integral(g, quad))


def eval_rhs_muskat(g: GridFunction, p: PhysParams, quad: Optional[QuadratureConfig] = None) -> GridFunction:
    """f_t = -rho (Lambda f + T(f)), with T projected to mean zero"""
    correction = eval_T(g, quad)
    correction = GridFunction(g.spec, correction.values - correction.mean())
    return -p.rho * (lambda_pow(g, 1.0) + correction)


def eval_rhs_arctan(g: GridFunction, p: PhysParams, quad: Optional[QuadratureConfig] = None) -> GridFunction:
    """
    f_t = (rho/pi) d_x int arctan(D_alpha f) dalpha

    The linear part of arctan is applied through its exact symbol -rho|xi|; only
    R(z) = z - arctan z goes through the alpha quadrature.
    """
    remainder = GridFunction(g.spec, arctan_remainder_integral(g, quad))
    return -p.rho * lambda_pow(g, 1.0) - (p.rho / math.pi) * derivative(remainder, 1)


def eval_rhs_regularized(
    g: GridFunction,
    p: PhysParams,
    r: RegularizationParams,
    quad: Optional[QuadratureConfig] = None,
    include_transport: bool = True,
) -> GridFunction:
    """
    Regularized model -eps C Lambda^(1-eps) f + eps f_xx + (rho/pi) d_x int arctan(D^eps_alpha f) dalpha

    Args:
        g: Interface
        p: Densities
        r: Regularization eps and C
        quad: Alpha quadrature
        include_transport: False drops the whole arctan term, leaving the linear viscous part

    Returns:
        GridFunction: the right-hand side
    """
    power = 1.0 - r.eps
    viscous = apply_multiplier(
        g, -r.eps * r.resolved_big_c(p) * fractional_symbol(g.spec, power) - r.eps * g.spec.rxi ** 2
    )
    if not include_transport:
        return viscous
    linear = apply_multiplier(g, -p.rho * transport_constant(r.eps) * fractional_symbol(g.spec, power))
    remainder = GridFunction(g.spec, regularized_remainder_integral(g, r.eps, quad))
    return viscous + linear - (p.rho / math.pi) * derivative(remainder, 1)


def tail_bound(g: GridFunction, quad: Optional[QuadratureConfig] = None) -> float:
    """
    Bound on the part of the real-line alpha integral of T left out by the quadrature

    Truncated at R < L: osc(f_x) osc(f)^2 / (pi R^2). Closed with images: the
    far-image remainder, bounded through |alpha + 2Lm| >= (2|m| - 1) L.
    """
    quad = quad or QuadratureConfig()
    spec = g.spec
    osc = g.oscillation()
    osc_x = derivative(g, 1).oscillation()
    if quad.closes_periodically(spec):
        far = far_image_sum(spec.half_period, quad.images, 5.0)
        return 2.0 * spec.half_period * osc_x * osc ** 4 * far / math.pi
    radius = quad.resolved_tail_cut(spec)
    return osc_x * osc ** 2 / (math.pi * radius ** 2)


class RhsForm(str, Enum):
    MUSKAT = 'muskat'
    ARCTAN = 'arctan'
    REGULARIZED = 'regularized'


@dataclass(frozen=True)
class ContourModel:
    """
    A right-hand side split into its Fourier-diagonal linear part and a nonlinear remainder

    rhs(g) = linear_symbol * g_hat + nonlinear(g); the time steppers integrate the first
    part exactly and the second by Runge-Kutta stages.
    """

    params: PhysParams
    quad: QuadratureConfig = field(default_factory=QuadratureConfig)
    regularization: Optional[RegularizationParams] = None
    form: Optional[RhsForm] = None
    include_nonlinear: bool = True

    def __post_init__(self):
        form = RhsForm(self.form) if self.form is not None else None
        if self.regularization is not None:
            if form not in (None, RhsForm.REGULARIZED):
                raise InvalidParameterError(f"Form {form.value} cannot carry regularization parameters")
            form = RhsForm.REGULARIZED
        elif form is RhsForm.REGULARIZED:
            raise InvalidParameterError("Regularized form requires RegularizationParams")
        object.__setattr__(self, 'form', form or RhsForm.MUSKAT)

    def linear_symbol(self, spec: GridSpec) -> np.ndarray:
        """Linear symbol on the real-FFT half spectrum"""
        return linear_symbol_values(spec.rxi, self.params, self.regularization)

    def nonlinear(self, g: GridFunction) -> np.ndarray:
        if not self.include_nonlinear:
            return np.zeros(g.spec.n)
        rho = self.params.rho
        if self.form is RhsForm.MUSKAT:
            # T is an x-derivative; drop the mean its quadrature leaves behind
            values = -rho * eval_T(g, self.quad).values
            return values - values.mean()
        if self.form is RhsForm.ARCTAN:
            remainder = GridFunction(g.spec, arctan_remainder_integral(g, self.quad))
        else:
            remainder = GridFunction(g.spec, regularized_remainder_integral(g, self.regularization.eps, self.quad))
        return -(rho / math.pi) * derivative(remainder, 1).values

    def rhs(self, g: GridFunction) -> GridFunction:
        linear = apply_multiplier(g, self.linear_symbol(g.spec))
        return GridFunction(g.spec, linear.values + self.nonlinear(g))
