"""
Spectral Module
Periodic grid representation, discrete Fourier transforms, Fourier multipliers
(derivatives and fractional powers of the Laplacian) and Wiener norms on the torus [-L, L)
"""
import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from scipy import special

from processors.lattice_sums import image_power_sums, riemann_zeta
from shared.exceptions import InvalidParameterError, SpectralContractError
from shared.utils import is_power_of_two

logger = logging.getLogger(__name__)

HERMITIAN_TOLERANCE = 1e-10
KERNEL_S_RANGE = (0.05, 0.95)
CALIBRATION_POINTS = 2 ** 14


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid with N points on the torus [-L, L)"""

    n: int
    half_period: float

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or self.n < 8 or not is_power_of_two(int(self.n)):
            raise InvalidParameterError(f"Grid size must be a power of two >= 8, got {self.n}")
        if not math.isfinite(self.half_period) or self.half_period <= 0:
            raise InvalidParameterError(f"Half-period must be positive, got {self.half_period}")

    @property
    def dx(self) -> float:
        return 2.0 * self.half_period / self.n

    @property
    def x(self) -> np.ndarray:
        return -self.half_period + np.arange(self.n) * self.dx

    @property
    def wavenumbers(self) -> np.ndarray:
        """Integer wavenumbers k in FFT order"""
        return np.fft.fftfreq(self.n, d=1.0 / self.n).astype(int)

    @property
    def xi(self) -> np.ndarray:
        """Frequencies pi*k/L in FFT order"""
        return math.pi * self.wavenumbers / self.half_period

    @property
    def rxi(self) -> np.ndarray:
        """Frequencies of the real-FFT half spectrum, k = 0..N/2"""
        return math.pi * np.arange(self.n // 2 + 1) / self.half_period


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Samples values[j] = f(-L + j*dx) of a real periodic function"""

    spec: GridSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (self.spec.n,):
            raise InvalidParameterError(
                f"Expected {self.spec.n} samples, got array of shape {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise InvalidParameterError("Grid function contains non-finite samples")
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)

    @classmethod
    def from_callable(cls, spec: GridSpec, func: Callable[[np.ndarray], np.ndarray]) -> 'GridFunction':
        return cls(spec, func(spec.x))

    @classmethod
    def zeros(cls, spec: GridSpec) -> 'GridFunction':
        return cls(spec, np.zeros(spec.n))

    def shifted(self, cells: int) -> 'GridFunction':
        """Translate the graph by a whole number of grid cells to the right"""
        return GridFunction(self.spec, np.roll(self.values, cells))

    def _same_grid(self, other: 'GridFunction') -> 'GridFunction':
        if not isinstance(other, GridFunction):
            return NotImplemented
        if other.spec != self.spec:
            raise InvalidParameterError(f"Grid mismatch: {self.spec} against {other.spec}")
        return other

    def __add__(self, other: 'GridFunction') -> 'GridFunction':
        other = self._same_grid(other)
        if other is NotImplemented:
            return NotImplemented
        return GridFunction(self.spec, self.values + other.values)

    def __sub__(self, other: 'GridFunction') -> 'GridFunction':
        other = self._same_grid(other)
        if other is NotImplemented:
            return NotImplemented
        return GridFunction(self.spec, self.values - other.values)

    def __neg__(self) -> 'GridFunction':
        return GridFunction(self.spec, -self.values)

    def __mul__(self, scalar: float) -> 'GridFunction':
        return GridFunction(self.spec, scalar * self.values)

    __rmul__ = __mul__

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def l2_norm(self) -> float:
        return math.sqrt(self.spec.dx * float(np.dot(self.values, self.values)))

    def l1_norm(self) -> float:
        # composite trapezoid on a periodic grid
        return self.spec.dx * float(np.sum(np.abs(self.values)))

    def mean(self) -> float:
        return float(np.mean(self.values))

    def oscillation(self) -> float:
        return float(np.max(self.values) - np.min(self.values))


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Fourier coefficients in FFT order with f(x) = sum_k coeffs[k] exp(i*pi*k*x/L)"""

    spec: GridSpec
    coeffs: np.ndarray = field(repr=False)

    def coefficient(self, k: int) -> complex:
        """Coefficient of integer wavenumber k in {-N/2, ..., N/2 - 1}"""
        return complex(self.coeffs[k % self.spec.n])

    def hermitian_defect(self) -> float:
        mirrored = np.conj(self.coeffs[(-np.arange(self.spec.n)) % self.spec.n])
        return float(np.max(np.abs(self.coeffs - mirrored)))


def _alternating_sign(spec: GridSpec) -> np.ndarray:
    return np.where(spec.wavenumbers % 2 == 0, 1.0, -1.0)


def forward_transform(g: GridFunction) -> Spectrum:
    """
    Fourier coefficients of a grid function under the torus normalization

    Args:
        g: Grid function

    Returns:
        Spectrum: coeffs[k] such that g(x_j) = sum_k coeffs[k] exp(i*pi*k*x_j/L)
    """
    n = g.spec.n
    coeffs = np.fft.fft(g.values) / n * _alternating_sign(g.spec)
    return Spectrum(g.spec, coeffs)


def inverse_transform(s: Spectrum) -> GridFunction:
    """
    Real samples from Hermitian-symmetric coefficients

    Args:
        s: Spectrum

    Returns:
        GridFunction: samples on the grid of s.spec

    Raises:
        SpectralContractError: If coefficients are not Hermitian within tolerance
    """
    scale = max(1.0, float(np.max(np.abs(s.coeffs), initial=0.0)))
    defect = s.hermitian_defect()
    if defect > HERMITIAN_TOLERANCE * scale:
        raise SpectralContractError(
            f"Coefficients are not Hermitian-symmetric (defect {defect:.3e})"
        )
    values = np.fft.ifft(s.coeffs * _alternating_sign(s.spec)).real * s.spec.n
    return GridFunction(s.spec, values)


def apply_multiplier(g: GridFunction, symbol: np.ndarray) -> GridFunction:
    """Apply a Fourier multiplier given on the real-FFT half spectrum k = 0..N/2"""
    transformed = np.fft.rfft(g.values) * symbol
    return GridFunction(g.spec, np.fft.irfft(transformed, n=g.spec.n))


def fractional_symbol(spec: GridSpec, s: float) -> np.ndarray:
    """|xi|^s on the half spectrum with the zero mode sent to 0"""
    symbol = spec.rxi ** s
    symbol[0] = 0.0
    return symbol


def lambda_pow(g: GridFunction, s: float) -> GridFunction:
    """
    Fractional power Lambda^s with Fourier symbol |xi|^s

    Args:
        g: Grid function
        s: Exponent in [0, 2]

    Returns:
        GridFunction: Lambda^s g, with the mean annihilated
    """
    if not 0.0 <= s <= 2.0:
        raise InvalidParameterError(f"Fractional exponent must lie in [0, 2], got {s}")
    return apply_multiplier(g, fractional_symbol(g.spec, s))


def derivative_symbol(spec: GridSpec, order: int) -> np.ndarray:
    symbol = (1j * spec.rxi) ** order
    if order % 2 == 1:
        symbol[-1] = 0.0
    return symbol


def derivative(g: GridFunction, order: int = 1) -> GridFunction:
    """
    Spectral derivative with symbol (i*pi*k/L)^order; odd orders zero the Nyquist mode

    Args:
        g: Grid function
        order: 1, 2 or 3

    Returns:
        GridFunction: the derivative
    """
    if order not in (1, 2, 3):
        raise InvalidParameterError(f"Derivative order must be 1, 2 or 3, got {order}")
    return apply_multiplier(g, derivative_symbol(g.spec, order))


def signum_multiplier(g: GridFunction) -> GridFunction:
    """Multiplier i*sgn(xi); its x-derivative is -Lambda"""
    symbol = 1j * np.sign(g.spec.rxi)
    symbol[-1] = 0.0
    return apply_multiplier(g, symbol)


def wiener_norm(g: GridFunction, s: float) -> float:
    """
    Discrete Wiener norm sum_k |xi_k|^s |coeffs[k]|

    Args:
        g: Grid function
        s: Nonnegative weight exponent; s = 0 includes the mean

    Returns:
        float: the norm
    """
    if s < 0:
        raise InvalidParameterError(f"Wiener exponent must be nonnegative, got {s}")
    coeffs = forward_transform(g).coeffs
    return float(np.sum(np.abs(g.spec.xi) ** s * np.abs(coeffs)))


def interpolate(g: GridFunction, points: np.ndarray) -> np.ndarray:
    """Band-limited trigonometric interpolation at arbitrary points"""
    points = np.atleast_1d(np.asarray(points, dtype=float))
    half = forward_transform(g).coeffs[: g.spec.n // 2 + 1]
    weights = np.full(half.shape, 2.0)
    weights[0] = 1.0
    weights[-1] = 1.0
    phases = np.exp(1j * np.outer(points, g.spec.rxi))
    return (phases @ (weights * half)).real


def translate(values: np.ndarray, spec: GridSpec, alpha: np.ndarray) -> np.ndarray:
    """
    Rows f(x - alpha_i) for each shift alpha_i, by band-limited interpolation

    Args:
        values: Samples of f
        spec: Grid
        alpha: 1-D array of shifts

    Returns:
        np.ndarray: shape (len(alpha), N)
    """
    alpha = np.asarray(alpha, dtype=float)
    phases = np.exp(-1j * np.outer(alpha, spec.rxi))
    return np.fft.irfft(np.fft.rfft(values)[None, :] * phases, n=spec.n, axis=1)


def _paired_kernel_sum(
    values: np.ndarray, second: np.ndarray, spec: GridSpec, s: float, tail_cut: float
) -> np.ndarray:
    """Uncalibrated kernel form of Lambda^s on the grid of `spec`"""
    n = spec.n
    dx = spec.dx
    steps = int(round(tail_cut / dx))
    offsets = np.arange(1, steps + 1)
    alpha = offsets * dx
    kernel = alpha ** (-1.0 - s)
    closure = math.isclose(tail_cut, spec.half_period, rel_tol=1e-12)
    if closure:
        even, _ = image_power_sums(alpha, 2.0 * spec.half_period, 1.0 + s)
        kernel = kernel + even
    weights = np.full(steps, dx)
    weights[-1] *= 0.5
    index = np.arange(n)
    total = np.zeros(n)
    for j, weight, kern in zip(offsets, weights, kernel):
        paired = 2.0 * values - values[(index - j) % n] - values[(index + j) % n]
        total += weight * kern * paired
    # trapezoid defect of the alpha^(1-s) behavior at the origin
    total += riemann_zeta(s - 1.0) * second * dx ** (2.0 - s)
    return total


@lru_cache(maxsize=64)
def kernel_constant(s: float) -> float:
    """
    Normalization c(s) of the kernel form, calibrated on cos(x) with L = pi

    The kernel form applied to cos(x) at x = 0 must return |xi|^s cos(0) = 1.
    """
    spec = GridSpec(CALIBRATION_POINTS, math.pi)
    dx = spec.dx
    steps = spec.n // 2
    alpha = np.arange(1, steps + 1) * dx
    even, _ = image_power_sums(alpha, 2.0 * math.pi, 1.0 + s)
    kernel = alpha ** (-1.0 - s) + even
    weights = np.full(steps, dx)
    weights[-1] *= 0.5
    paired = 2.0 - 2.0 * np.cos(alpha)
    raw = float(np.sum(weights * kernel * paired)) - riemann_zeta(s - 1.0) * dx ** (2.0 - s)
    constant = 1.0 / raw
    logger.info(f"Calibrated kernel constant c({s:g}) = {constant:.15f}")
    return constant


def kernel_constant_closed_form(s: float) -> float:
    """4^(s/2) Gamma((1+s)/2) / (sqrt(pi) |Gamma(-s/2)|)"""
    return 2.0 ** s * special.gamma(0.5 * (1.0 + s)) / (math.sqrt(math.pi) * abs(special.gamma(-0.5 * s)))


def kernel_lambda_pow(g: GridFunction, s: float, tail_cut: Optional[float] = None) -> GridFunction:
    """
    Lambda^s through its singular-integral kernel c(s) PV int (g(x) - g(x - alpha)) / |alpha|^(1+s)

    Args:
        g: Spectrally resolved grid function
        s: Exponent in (0.05, 0.95)
        tail_cut: Truncation radius; the default L sums all periodic images

    Returns:
        GridFunction: kernel evaluation, for cross-validation of lambda_pow
    """
    lo, hi = KERNEL_S_RANGE
    if not lo < s < hi:
        raise InvalidParameterError(f"Kernel exponent must lie in ({lo}, {hi}), got {s}")
    spec = g.spec
    tail_cut = spec.half_period if tail_cut is None else tail_cut
    if not 0.0 < tail_cut <= spec.half_period * (1.0 + 1e-12):
        raise InvalidParameterError(f"tail_cut must lie in (0, L], got {tail_cut}")
    second = derivative(g, 2).values
    raw = _paired_kernel_sum(g.values, second, spec, s, tail_cut)
    return GridFunction(spec, kernel_constant(s) * raw)
