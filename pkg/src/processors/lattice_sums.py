"""
Lattice Sums Module
Closed-form sums over the periodic images alpha + 2Lm of a quadrature node,
and the zeta-function corrections of the trapezoid rule at algebraic singularities
"""
import logging

import numpy as np
from scipy import special

logger = logging.getLogger(__name__)


def riemann_zeta(s: float) -> float:
    """Riemann zeta at any real s != 1, including negative arguments"""
    return float(special.zetac(s)) + 1.0


def image_power_sums(alpha: np.ndarray, period: float, power: float):
    """
    Sums over the nonzero periodic images of every node

    For each alpha returns
        even = sum_{m != 0} |alpha + m*period|^(-power)
        odd  = sum_{m != 0} sgn(alpha + m*period) |alpha + m*period|^(-power)

    Args:
        alpha: Nodes inside [-period/2, period/2]
        period: Image spacing (2L on the torus)
        power: Exponent, must exceed 1

    Returns:
        tuple: (even, odd) arrays shaped like alpha
    """
    alpha = np.asarray(alpha, dtype=float)
    shift = np.abs(alpha) / period
    upper = special.zeta(power, 1.0 + shift)
    lower = special.zeta(power, 1.0 - shift)
    scale = period ** (-power)
    even = scale * (upper + lower)
    odd = np.sign(alpha) * scale * (upper - lower)
    return even, odd


def image_offsets(period: float, images: int) -> np.ndarray:
    """Offsets m*period for 0 < |m| <= images, ordered -images..-1, 1..images"""
    m = np.concatenate([np.arange(-images, 0), np.arange(1, images + 1)])
    return m.astype(float) * period


def far_image_sum(half_period: float, images: int, power: float) -> float:
    """
    Upper bound of sum_{|m| > images} |alpha + 2Lm|^(-power) valid for every |alpha| <= L

    Uses |alpha + 2Lm| >= (2|m| - 1)L, so the bound is 2 (2L)^(-power) zeta(power, images + 1/2).
    """
    return 2.0 * (2.0 * half_period) ** (-power) * float(special.zeta(power, images + 0.5))


def origin_correction(exponent: float, step: float, midpoint: bool = False) -> float:
    """
    Weight that restores the integral of |alpha|^exponent near alpha = 0

    The symmetric rule sum_{j != 0} h u(jh) misses 2 zeta(-exponent) h^(1+exponent) A
    for u ~ A |alpha|^exponent; the midpoint rule misses 2 zeta(-exponent, 1/2) h^(1+exponent) A.
    The returned factor multiplies A.
    """
    zeta_value = riemann_zeta(-exponent)
    if midpoint:
        zeta_value *= 2.0 ** (-exponent) - 1.0
    return -2.0 * zeta_value * step ** (1.0 + exponent)
