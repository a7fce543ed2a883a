"""
Alpha Quadrature Module
Node sets and the blocked, optionally threaded evaluation engine for integrals
of the form  int dalpha F(x, alpha)  with F built from f(x) - f(x - alpha)
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import lru_cache
from typing import Callable, Dict, Optional

import numpy as np

from processors.lattice_sums import image_offsets, image_power_sums
from processors.spectral import GridFunction, GridSpec, derivative, translate
from shared.exceptions import InvalidParameterError, QuadratureConvergenceError
from shared.utils import batch_process

logger = logging.getLogger(__name__)

ALIGNMENT_TOLERANCE = 1e-9


class QuadratureRule(str, Enum):
    TRAPEZOID = 'trapezoid'
    MIDPOINT = 'midpoint'


@dataclass(frozen=True)
class QuadratureConfig:
    """
    Alpha-integration settings

    alpha_points and tail_cut default to N and L, which puts the nodes on the grid
    (spacing dx) and closes the integral over the real line with periodic images.
    """

    alpha_points: Optional[int] = None
    tail_cut: Optional[float] = None
    rule: QuadratureRule = QuadratureRule.TRAPEZOID
    images: int = 4
    workers: int = 1
    block_size: int = 64
    verify: bool = False
    refinement_tol: float = 1e-6

    def __post_init__(self):
        if self.alpha_points is not None and (self.alpha_points < 2 or self.alpha_points % 2):
            raise InvalidParameterError(f"alpha_points must be a positive even integer, got {self.alpha_points}")
        if self.tail_cut is not None and not self.tail_cut > 0:
            raise InvalidParameterError(f"tail_cut must be positive, got {self.tail_cut}")
        if self.images < 0:
            raise InvalidParameterError(f"images must be nonnegative, got {self.images}")
        if self.workers < 1 or self.block_size < 1:
            raise InvalidParameterError("workers and block_size must be positive")
        if not self.refinement_tol > 0:
            raise InvalidParameterError(f"refinement_tol must be positive, got {self.refinement_tol}")
        object.__setattr__(self, 'rule', QuadratureRule(self.rule))

    def resolved_tail_cut(self, spec: GridSpec) -> float:
        tail_cut = spec.half_period if self.tail_cut is None else self.tail_cut
        if tail_cut > spec.half_period * (1.0 + 1e-12):
            raise InvalidParameterError(
                f"tail_cut {tail_cut} exceeds the half-period {spec.half_period}"
            )
        return min(tail_cut, spec.half_period)

    def resolved_points(self, spec: GridSpec) -> int:
        if self.alpha_points is not None:
            return self.alpha_points
        half = max(1, int(round(self.resolved_tail_cut(spec) / spec.dx)))
        return 2 * half

    def closes_periodically(self, spec: GridSpec) -> bool:
        return math.isclose(self.resolved_tail_cut(spec), spec.half_period, rel_tol=1e-12)

    def coarsened(self, spec: GridSpec, factor: int) -> 'QuadratureConfig':
        points = self.resolved_points(spec)
        if points % (2 * factor):
            raise InvalidParameterError(f"Cannot coarsen {points} alpha points by {factor}")
        return replace(self, alpha_points=points // factor, tail_cut=self.resolved_tail_cut(spec), verify=False)

    def with_tail_cut(self, spec: GridSpec, tail_cut: float) -> 'QuadratureConfig':
        """Same node spacing on a different truncation radius"""
        step = self.resolved_tail_cut(spec) / (self.resolved_points(spec) // 2)
        half = max(1, int(round(tail_cut / step)))
        return replace(self, alpha_points=2 * half, tail_cut=tail_cut, verify=False)


@dataclass(frozen=True, eq=False)
class AlphaNodes:
    """Quadrature nodes on [-tail_cut, tail_cut], excluding the origin"""

    alpha: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    shifts: Optional[np.ndarray] = field(repr=False)
    origin_weight: float
    step: float
    closure: bool
    period: float
    offsets: np.ndarray = field(repr=False)
    rule: QuadratureRule

    def odd_sum(self, alpha: np.ndarray, power: float) -> np.ndarray:
        return image_power_sums(alpha, self.period, power)[1]

    def even_sum(self, alpha: np.ndarray, power: float) -> np.ndarray:
        return image_power_sums(alpha, self.period, power)[0]


@lru_cache(maxsize=32)
def alpha_nodes(spec: GridSpec, quad: QuadratureConfig) -> AlphaNodes:
    """Build (and cache) the node set of a quadrature configuration on a grid"""
    tail_cut = quad.resolved_tail_cut(spec)
    half = quad.resolved_points(spec) // 2
    step = tail_cut / half
    index = np.arange(1, half + 1, dtype=float)
    if quad.rule is QuadratureRule.TRAPEZOID:
        positive = index * step
        positive_weights = np.full(half, step)
        positive_weights[-1] *= 0.5
        origin_weight = step
    else:
        positive = (index - 0.5) * step
        positive_weights = np.full(half, step)
        origin_weight = 0.0
    alpha = np.concatenate([-positive[::-1], positive])
    weights = np.concatenate([positive_weights[::-1], positive_weights])

    ratio = alpha / spec.dx
    rounded = np.round(ratio)
    shifts = rounded.astype(int) if np.all(np.abs(ratio - rounded) < ALIGNMENT_TOLERANCE) else None

    closure = quad.closes_periodically(spec)
    period = 2.0 * spec.half_period
    offsets = image_offsets(period, quad.images) if closure else np.zeros(0)
    logger.debug(
        f"Alpha nodes: {alpha.size} points, step {step:.4g}, rule {quad.rule.value}, "
        f"{'grid-aligned' if shifts is not None else 'interpolated'}, closure={closure}"
    )
    return AlphaNodes(
        alpha=alpha,
        weights=weights,
        shifts=shifts,
        origin_weight=origin_weight,
        step=step,
        closure=closure,
        period=period,
        offsets=offsets,
        rule=quad.rule,
    )


@dataclass(frozen=True, eq=False)
class AlphaBlock:
    """A block of nodes with the differences the integrands are built from"""

    alpha: np.ndarray
    d: np.ndarray
    slope_diff: Optional[np.ndarray]
    nodes: AlphaNodes

    def image_alphas(self):
        """Yield alpha + 2Lm for every explicit image m"""
        for offset in self.nodes.offsets:
            yield self.alpha + offset


Integrand = Callable[[AlphaBlock], np.ndarray]


def _shifted_rows(values: np.ndarray, spec: GridSpec, nodes: AlphaNodes, rows: np.ndarray, x_index: np.ndarray):
    if nodes.shifts is not None:
        return values[(x_index[None, :] - nodes.shifts[rows][:, None]) % spec.n]
    return translate(values, spec, nodes.alpha[rows])[:, x_index]


def integrate_alpha(
    g: GridFunction,
    quad: QuadratureConfig,
    integrand: Integrand,
    origin_value: Optional[np.ndarray] = None,
    needs_slope: bool = False,
    x_index: Optional[np.ndarray] = None,
) -> np.ndarray:
    """
    Evaluate sum_j w_j F(x, alpha_j) plus the origin node for every x

    Args:
        g: Integrated function
        quad: Quadrature configuration
        integrand: Maps an AlphaBlock to the (B, n_x) integrand values
        origin_value: Integrand at alpha = 0, one value per grid point
        needs_slope: Also provide f_x(x) - f_x(x - alpha) to the integrand
        x_index: Grid indices where the integral is wanted (default: all)

    Returns:
        np.ndarray: the integral at the requested points

    Raises:
        QuadratureConvergenceError: If quad.verify is set and halving the nodes changes the result
    """
    spec = g.spec
    nodes = alpha_nodes(spec, quad)
    x_index = np.arange(spec.n) if x_index is None else np.asarray(x_index)
    values = g.values
    slope = derivative(g, 1).values if needs_slope else None

    def block_sum(rows: np.ndarray) -> np.ndarray:
        d = values[x_index][None, :] - _shifted_rows(values, spec, nodes, rows, x_index)
        slope_diff = None
        if slope is not None:
            slope_diff = slope[x_index][None, :] - _shifted_rows(slope, spec, nodes, rows, x_index)
        block = AlphaBlock(alpha=nodes.alpha[rows][:, None], d=d, slope_diff=slope_diff, nodes=nodes)
        return nodes.weights[rows] @ integrand(block)

    blocks = list(batch_process(np.arange(nodes.alpha.size), quad.block_size))
    partials: Dict[int, np.ndarray] = {}
    if quad.workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=quad.workers) as executor:
            futures = {executor.submit(block_sum, rows): i for i, rows in enumerate(blocks)}
            for future in as_completed(futures):
                partials[futures[future]] = future.result()
    else:
        for i, rows in enumerate(blocks):
            partials[i] = block_sum(rows)

    total = np.zeros(x_index.size)
    # fixed reduction order keeps threaded runs bit-identical
    for i in range(len(blocks)):
        total += partials[i]
    if origin_value is not None and nodes.origin_weight:
        total += nodes.origin_weight * np.asarray(origin_value)[x_index]

    if quad.verify:
        _check_refinement(g, quad, integrand, origin_value, needs_slope, x_index, total)
    return total


def _check_refinement(g, quad, integrand, origin_value, needs_slope, x_index, fine):
    spec = g.spec
    if quad.resolved_points(spec) % 4:
        logger.warning("Skipping quadrature refinement check: alpha_points not divisible by 4")
        return
    coarse = integrate_alpha(g, quad.coarsened(spec, 2), integrand, origin_value, needs_slope, x_index)
    scale = max(float(np.max(np.abs(fine), initial=0.0)), 1e-12)
    mismatch = float(np.max(np.abs(fine - coarse), initial=0.0)) / scale
    if mismatch > quad.refinement_tol:
        raise QuadratureConvergenceError(
            f"Alpha quadrature not converged: relative change {mismatch:.3e} under node halving "
            f"exceeds {quad.refinement_tol:.1e}"
        )
    logger.debug(f"Quadrature refinement check passed (relative change {mismatch:.3e})")
