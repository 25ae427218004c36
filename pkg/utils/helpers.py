"""Helper utility functions."""

from typing import List, Optional, Sequence

import numpy as np

_TRUE = {'1', 'true', 'yes', 'on'}
_FALSE = {'0', 'false', 'no', 'off', ''}


def parse_bool(value: str) -> bool:
    """Parse a manifest flag value.

    Args:
        value: Raw string (true/false, yes/no, 1/0, on/off)

    Returns:
        Parsed boolean

    Raises:
        ValueError: unrecognised value
    """
    normalized = str(value).strip().lower()
    if normalized in _TRUE:
        return True
    if normalized in _FALSE:
        return False
    raise ValueError(f"not a boolean: '{value}'")


def parse_float_list(value: str) -> List[float]:
    """Parse a comma-separated list of reals (e.g. ``0.3,0.5,1``).

    Args:
        value: Raw string

    Returns:
        List of floats, in the given order
    """
    items = [item.strip() for item in str(value).split(',')]
    return [float(item) for item in items if item]


def format_mean_std(values: Sequence[float], decimals: int = 4, unit: str = '') -> str:
    """Format a sample as ``mean ± std``.

    Args:
        values: Sample values
        decimals: Number of decimal places
        unit: Suffix appended to both numbers (e.g. 's')

    Returns:
        Formatted string, or 'n/a' for an empty sample
    """
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        return 'n/a'
    std = values.std(ddof=1) if values.size > 1 else 0.0
    return f"{values.mean():.{decimals}f}{unit} ± {std:.{decimals}f}{unit}"


def median_improvement(initial: Sequence[float], final: Sequence[float]) -> Optional[float]:
    """Relative improvement of the median final value over the median initial value.

    Returns:
        ``1 - median(final) / median(initial)``, or None when undefined
    """
    if len(initial) == 0 or len(final) == 0:
        return None
    start = float(np.median(initial))
    if start == 0.0:
        return None
    return 1.0 - float(np.median(final)) / start
