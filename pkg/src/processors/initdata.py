"""
Initial Data Module
Library of initial interface profiles and the mollified approximation of initial data
"""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
from scipy import integrate, signal

from processors.spectral import GridFunction, GridSpec, derivative, forward_transform, wiener_norm
from shared.exceptions import InvalidParameterError

logger = logging.getLogger(__name__)

RESOLUTION_TOLERANCE = 1e-10


class ProfileKind(str, Enum):
    GAUSSIAN_BUMP = 'gaussian_bump'
    COMPACT_BUMP = 'compact_bump'
    SINGLE_MODE = 'single_mode'
    MULTI_MODE = 'multi_mode'
    CUSTOM_SAMPLES = 'custom_samples'


@dataclass(frozen=True)
class ProfileSpec:
    """
    Initial profile description

    target_slope / target_wiener1 rescale the built profile so that ||f0_x||_inf or
    ||f0||_1 takes the requested value. The mean is removed unless remove_mean is False.
    """

    kind: ProfileKind = ProfileKind.GAUSSIAN_BUMP
    amplitude: float = 1.0
    width: float = 4.0
    mode: int = 1
    seed: int = 0
    center: float = 0.0
    n_modes: int = 8
    target_slope: Optional[float] = None
    target_wiener1: Optional[float] = None
    remove_mean: bool = True
    samples: Optional[Sequence[float]] = None

    def __post_init__(self):
        object.__setattr__(self, 'kind', ProfileKind(self.kind))
        if not math.isfinite(self.amplitude):
            raise InvalidParameterError("Profile amplitude must be finite")
        if not self.width > 0:
            raise InvalidParameterError(f"Profile width must be positive, got {self.width}")
        if self.mode < 1 or self.n_modes < 1:
            raise InvalidParameterError("mode and n_modes must be positive")
        if self.target_slope is not None and self.target_wiener1 is not None:
            raise InvalidParameterError("Give at most one of target_slope and target_wiener1")
        if self.kind is ProfileKind.CUSTOM_SAMPLES and self.samples is None:
            raise InvalidParameterError("custom_samples profiles need samples")


def _periodic_offset(spec: GridSpec, center: float) -> np.ndarray:
    L = spec.half_period
    return np.mod(spec.x - center + L, 2.0 * L) - L


def _compact(u: np.ndarray) -> np.ndarray:
    inside = np.abs(u) < 1.0
    safe = np.where(inside, u, 0.0)
    return np.where(inside, np.exp(-1.0 / (1.0 - safe ** 2)), 0.0)


def _raw_profile(spec: ProfileSpec, grid: GridSpec) -> np.ndarray:
    a = spec.amplitude
    offset = _periodic_offset(grid, spec.center)
    if spec.kind is ProfileKind.GAUSSIAN_BUMP:
        return a * np.exp(-(offset / spec.width) ** 2)
    if spec.kind is ProfileKind.COMPACT_BUMP:
        return a * _compact(offset / spec.width)
    if spec.kind is ProfileKind.SINGLE_MODE:
        return a * np.sin(math.pi * spec.mode * grid.x / grid.half_period)
    if spec.kind is ProfileKind.MULTI_MODE:
        rng = np.random.default_rng(spec.seed)
        modes = np.arange(1, spec.n_modes + 1)
        weights = rng.normal(size=spec.n_modes) / modes ** 2
        phases = rng.uniform(0.0, 2.0 * math.pi, size=spec.n_modes)
        angles = math.pi * np.outer(grid.x, modes) / grid.half_period + phases
        return a * np.sin(angles) @ weights
    samples = np.asarray(spec.samples, dtype=float)
    if samples.shape != (grid.n,):
        raise InvalidParameterError(f"custom_samples needs {grid.n} samples, got shape {samples.shape}")
    return samples.copy()


def _warn_if_unresolved(g: GridFunction, kind: ProfileKind):
    magnitudes = np.abs(forward_transform(g).coeffs)
    peak = float(np.max(magnitudes))
    if peak == 0.0:
        return
    high = np.abs(g.spec.wavenumbers) >= 3 * g.spec.n // 8
    tail = float(np.max(magnitudes[high]))
    if tail > RESOLUTION_TOLERANCE * peak:
        logger.warning(
            f"Profile {kind.value} is not resolved on N = {g.spec.n}: "
            f"spectral tail {tail / peak:.2e} of the peak exceeds {RESOLUTION_TOLERANCE:.0e}"
        )


def build_profile(spec: ProfileSpec, grid: GridSpec) -> GridFunction:
    """
    Sample an initial profile on the grid

    Args:
        spec: Profile description
        grid: Target grid

    Returns:
        GridFunction: the profile, mean-free by default
    """
    values = _raw_profile(spec, grid)
    if spec.remove_mean:
        values = values - values.mean()
    g = GridFunction(grid, values)

    if spec.target_slope is not None or spec.target_wiener1 is not None:
        if spec.target_slope is not None:
            current, target = derivative(g, 1).sup_norm(), spec.target_slope
        else:
            current, target = wiener_norm(g, 1.0), spec.target_wiener1
        if current == 0.0:
            raise InvalidParameterError("Cannot rescale a flat profile to a nonzero target")
        g = g * (target / current)

    _warn_if_unresolved(g, spec.kind)
    summary = describe_profile(g)
    logger.info(
        f"Built {spec.kind.value} profile: sup {summary['sup_norm']:.6g}, "
        f"slope {summary['sup_slope']:.6g}, wiener1 {summary['wiener1']:.6g}"
    )
    return g


def describe_profile(g: GridFunction) -> dict:
    """||f0||_inf, ||f0_x||_inf and ||f0||_1"""
    return {
        'sup_norm': g.sup_norm(),
        'sup_slope': derivative(g, 1).sup_norm(),
        'wiener1': wiener_norm(g, 1.0),
    }


@lru_cache(maxsize=1)
def _unit_mass() -> float:
    mass, _ = integrate.quad(lambda u: math.exp(-1.0 / (1.0 - u * u)), -1.0, 1.0)
    return mass


@dataclass(frozen=True)
class Mollifier:
    """zeta_eps(x) = zeta(x/eps)/eps with zeta(u) = C exp(-1/(1 - u^2)) on |u| < 1"""

    eps: float

    def __post_init__(self):
        if not self.eps > 0:
            raise InvalidParameterError(f"Mollifier scale must be positive, got {self.eps}")

    @property
    def support_radius(self) -> float:
        return self.eps

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return _compact(np.asarray(x, dtype=float) / self.eps) / (_unit_mass() * self.eps)

    def weights(self, grid: GridSpec) -> np.ndarray:
        """
        Symmetric discrete kernel on offsets -J..J (J dx < eps) with sum(w) dx = 1

        A scale below dx leaves only the central weight 1/dx.
        """
        reach = int(math.ceil(self.eps / grid.dx)) - 1
        reach = max(0, min(reach, grid.n // 2 - 1))
        half = self(np.arange(reach + 1) * grid.dx)
        kernel = np.concatenate([half[:0:-1], half])
        total = float(np.sum(kernel)) * grid.dx
        if total == 0.0:
            kernel = np.zeros(2 * reach + 1)
            kernel[reach] = 1.0
            total = grid.dx
        return kernel / total


def mollifier(eps: float) -> Mollifier:
    """The standard even bump of unit mass at scale eps"""
    return Mollifier(eps)


def mollify_approx(f0: GridFunction, eps: float) -> GridFunction:
    """
    (zeta_eps * f0)(x) / (1 + eps x^2), with x measured from the torus center

    The convolution is a direct sum over the compact support of zeta_eps.
    """
    grid = f0.spec
    kernel = mollifier(eps).weights(grid) * grid.dx
    kernel = kernel / kernel.sum()
    reach = kernel.size // 2
    padded = np.pad(f0.values, reach, mode='wrap')
    smoothed = signal.convolve(padded, kernel, mode='valid', method='direct')
    return GridFunction(grid, smoothed / (1.0 + eps * grid.x ** 2))


@dataclass(frozen=True)
class MollificationReport:
    eps: float
    sup_before: float
    sup_after: float
    slope_before: float
    slope_after: float
    slope_bound: float

    @property
    def within_bound(self) -> bool:
        return self.slope_after <= self.slope_bound

    @property
    def subcritical(self) -> bool:
        return self.slope_after < 1.0


def mollification_report(f0: GridFunction, eps: float) -> MollificationReport:
    """
    Sup and slope of f0 and of its mollified approximation

    slope_bound is ||f0_x||_inf + 2 max(eps^(1/3), eps) ||f0||_inf, which holds for every eps.
    """
    approx = mollify_approx(f0, eps)
    sup_before = f0.sup_norm()
    slope_before = derivative(f0, 1).sup_norm()
    return MollificationReport(
        eps=eps,
        sup_before=sup_before,
        sup_after=approx.sup_norm(),
        slope_before=slope_before,
        slope_after=derivative(approx, 1).sup_norm(),
        slope_bound=slope_before + 2.0 * max(eps ** (1.0 / 3.0), eps) * sup_before,
    )
