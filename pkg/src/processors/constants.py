"""
Constants Module
Reproduction of the explicit smallness constants: the weighted series
2 sum_{n>=1} (2n+1)^(2+delta) c^(2n), its threshold c0(delta), the closed-form
radical at delta = 0 and the threshold of g(x) = 2x^2(3 - x^2)/(1 - x^2)^2
"""
import logging
import math
from dataclasses import asdict, dataclass
from functools import lru_cache
from typing import Dict, Tuple

from shared.exceptions import ConstantsMismatchError, InvalidParameterError, SeriesDivergenceError

logger = logging.getLogger(__name__)

REFERENCE_C0 = 0.2199617648835399
REFERENCE_THRESHOLD = 0.256400964
MATCH_TOLERANCE = 1e-10
THRESHOLD_TOLERANCE = 1e-9
BISECTION_ITERATIONS = 200
MAX_TERMS = 100000


@dataclass(frozen=True)
class ConstantsReport:
    delta: float
    c0: float
    series_value_at_c0: float
    tail_bound: float
    n_terms_used: int
    closed_form_threshold_sqrt: float
    closed_form_c0_delta0: float
    c0_delta0: float
    sharp_g_root: float
    g_at_threshold: float
    series_at_one_fifth: float
    c0_delta_tenth: float

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


def weighted_series(power: float, c: float, tol: float = 1e-16) -> Tuple[float, float, int]:
    """
    2 sum_{n>=1} (2n+1)^power c^(2n) with a rigorous tail bound

    After term N the ratio of consecutive terms is at most r = c^2 (1 + 2/(2N+1))^power,
    so the tail is below 2 term_N r / (1 - r) once r < 1.

    Args:
        power: Exponent of the odd integers
        c: Base in [0, 1)
        tol: Required bound on the neglected tail

    Returns:
        tuple: (value, tail bound, number of terms)
    """
    if not 0.0 <= c < 1.0:
        raise SeriesDivergenceError(f"Series requires 0 <= c < 1, got {c}")
    if c == 0.0:
        return 0.0, 0.0, 0
    total = 0.0
    c_squared = c * c
    for n in range(1, MAX_TERMS + 1):
        term = 2.0 * (2 * n + 1) ** power * c_squared ** n
        total += term
        ratio = c_squared * (1.0 + 2.0 / (2 * n + 1)) ** power
        if ratio < 1.0:
            tail = term * ratio / (1.0 - ratio)
            if tail < tol:
                return total, tail, n
    raise SeriesDivergenceError(f"Series did not reach tolerance {tol} within {MAX_TERMS} terms at c = {c}")


def series_sum(delta: float, c: float, tol: float = 1e-16) -> float:
    """2 sum_{n>=1} (2n+1)^(2+delta) c^(2n) to absolute accuracy tol"""
    if delta < 0:
        raise InvalidParameterError(f"delta must be nonnegative, got {delta}")
    return weighted_series(2.0 + delta, c, tol)[0]


@lru_cache(maxsize=32)
def solve_c0(delta: float, tol: float = 1e-15) -> float:
    """
    Largest c with series_sum(delta, c) <= 1, by bisection on [0, 1)

    Args:
        delta: Nonnegative exponent offset
        tol: Bracket width at which bisection stops

    Returns:
        float: the lower end of the final bracket, so the series there is <= 1
    """
    if delta < 0:
        raise InvalidParameterError(f"delta must be nonnegative, got {delta}")
    lo, hi = 0.0, 1.0
    for _ in range(BISECTION_ITERATIONS):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        if series_sum(delta, mid, tol=1e-18) <= 1.0:
            lo = mid
        else:
            hi = mid
    logger.debug(f"c0({delta}) = {lo:.16f} (bracket width {hi - lo:.1e})")
    return lo


def closed_form_c0() -> float:
    """(1/3) sqrt(7 - 14 5^(2/3) / cbrt(9 sqrt 39 - 38) + 2 cbrt(5 (9 sqrt 39 - 38)))"""
    inner = 9.0 * math.sqrt(39.0) - 38.0
    radicand = 7.0 - 14.0 * 5.0 ** (2.0 / 3.0) / inner ** (1.0 / 3.0) + 2.0 * (5.0 * inner) ** (1.0 / 3.0)
    return math.sqrt(radicand) / 3.0


def threshold_sqrt() -> float:
    """sqrt((4 - sqrt 13) / 6)"""
    return math.sqrt((4.0 - math.sqrt(13.0)) / 6.0)


def sharp_g_root() -> float:
    """Positive root of g(x) = 1, sqrt((4 - sqrt 13) / 3)"""
    return math.sqrt((4.0 - math.sqrt(13.0)) / 3.0)


def g_function(x: float) -> float:
    """2x^2(3 - x^2)/(1 - x^2)^2 for 0 <= x < 1"""
    if not 0.0 <= x < 1.0:
        raise InvalidParameterError(f"g requires 0 <= x < 1, got {x}")
    y = x * x
    return 2.0 * y * (3.0 - y) / (1.0 - y) ** 2


def _require(name: str, actual: float, expected: float, tolerance: float):
    if abs(actual - expected) > tolerance:
        raise ConstantsMismatchError(
            f"{name}: got {actual:.16g}, expected {expected:.16g} (tolerance {tolerance:.0e})"
        )


def verify_claims(delta: float = 0.0, tol: float = 1e-15) -> ConstantsReport:
    """
    Assemble the constants report for delta and check every reference value

    Raises:
        ConstantsMismatchError: If any value misses its reference beyond tolerance
    """
    c0 = solve_c0(delta, tol)
    value, tail, terms = weighted_series(2.0 + delta, c0, 1e-18) if c0 > 0 else (0.0, 0.0, 0)
    c0_delta0 = solve_c0(0.0, tol)
    radical = closed_form_c0()
    threshold = threshold_sqrt()
    root = sharp_g_root()
    at_one_fifth = series_sum(0.1, 0.2)
    c0_tenth = solve_c0(0.1, tol)

    _require("c0(0) against the reference value", c0_delta0, REFERENCE_C0, MATCH_TOLERANCE)
    _require("c0(0) against the closed-form radical", c0_delta0, radical, MATCH_TOLERANCE)
    _require("sqrt((4 - sqrt 13) / 6)", threshold, REFERENCE_THRESHOLD, THRESHOLD_TOLERANCE)
    _require("g at its sharp root", g_function(root), 1.0, MATCH_TOLERANCE)
    if not value <= 1.0 + 1e-12:
        raise ConstantsMismatchError(f"Series at c0({delta}) is {value:.16g} > 1")
    if not at_one_fifth < 1.0:
        raise ConstantsMismatchError(f"Series at delta = 0.1, c = 1/5 is {at_one_fifth:.16g}, not below 1")
    if not c0_tenth >= 0.2:
        raise ConstantsMismatchError(f"c0(0.1) = {c0_tenth:.16g} is below 1/5")

    logger.info(f"Constants reproduced: c0({delta}) = {c0:.16f}, c0(0) = {c0_delta0:.16f}")
    return ConstantsReport(
        delta=delta,
        c0=c0,
        series_value_at_c0=value,
        tail_bound=tail,
        n_terms_used=terms,
        closed_form_threshold_sqrt=threshold,
        closed_form_c0_delta0=radical,
        c0_delta0=c0_delta0,
        sharp_g_root=root,
        g_at_threshold=g_function(threshold),
        series_at_one_fifth=at_one_fifth,
        c0_delta_tenth=c0_tenth,
    )
