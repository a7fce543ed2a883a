"""
Shared Utilities Module
Common utility functions used across the simulator, its writers and its front end
"""
import hashlib
import logging
import math
import re
from typing import Any, Iterator, List, Sequence

import numpy as np

logger = logging.getLogger(__name__)

_PI_EXPRESSION = re.compile(
    r'^\s*(?P<num>[-+]?(\d+(\.\d*)?|\.\d+)([eE][-+]?\d+)?)?\s*\*?\s*pi\s*(/\s*(?P<den>\d+(\.\d*)?([eE][-+]?\d+)?))?\s*$'
)


def generate_hash(text: str) -> str:
    """
    Generate MD5 hash of text

    Args:
        text: Text to hash

    Returns:
        str: MD5 hash as hex string
    """
    return hashlib.md5(text.encode('utf-8')).hexdigest()


def format_duration(seconds: float) -> str:
    """
    Format duration in seconds to human-readable string

    Args:
        seconds: Duration in seconds

    Returns:
        str: Formatted duration (e.g., "2m 30s")
    """
    if seconds < 60:
        return f"{seconds:.1f}s"
    elif seconds < 3600:
        minutes = int(seconds // 60)
        secs = int(seconds % 60)
        return f"{minutes}m {secs}s"
    else:
        hours = int(seconds // 3600)
        minutes = int((seconds % 3600) // 60)
        return f"{hours}h {minutes}m"


def parse_real(text: str) -> float:
    """
    Parse a real number, accepting multiples of pi such as "16*pi", "pi/4" or "2*pi/3"

    Args:
        text: Raw value from a config file

    Returns:
        float: Parsed value

    Raises:
        ValueError: If the text is neither a float nor a pi expression
    """
    match = _PI_EXPRESSION.match(text)
    if match:
        numerator = float(match.group('num')) if match.group('num') else 1.0
        denominator = float(match.group('den')) if match.group('den') else 1.0
        return numerator * math.pi / denominator
    return float(text)


def is_power_of_two(value: int) -> bool:
    """Check whether a positive integer is a power of two"""
    return value > 0 and (value & (value - 1)) == 0


def relative_error(actual: Any, expected: Any, floor: float = 1e-300) -> float:
    """
    Max-norm relative error between two arrays (or scalars)

    Args:
        actual: Computed values
        expected: Reference values
        floor: Guard for the denominator when both sides vanish

    Returns:
        float: max|actual - expected| / max(max|expected|, max|actual|, floor)
    """
    actual = np.asarray(actual, dtype=float)
    expected = np.asarray(expected, dtype=float)
    scale = max(float(np.max(np.abs(expected), initial=0.0)), float(np.max(np.abs(actual), initial=0.0)), floor)
    return float(np.max(np.abs(actual - expected), initial=0.0)) / scale


def batch_process(items: Sequence[Any], batch_size: int = 25) -> Iterator[Sequence[Any]]:
    """
    Split items into consecutive slices

    Args:
        items: Sequence to split
        batch_size: Number of items per slice; the last one may be shorter

    Yields:
        Slices of items in order
    """
    for i in range(0, len(items), batch_size):
        yield items[i:i + batch_size]


def first_index_where(flags: List[bool]) -> int:
    """Index of the first True entry, or -1"""
    for index, flag in enumerate(flags):
        if flag:
            return index
    return -1
