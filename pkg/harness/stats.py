"""Paired Wilcoxon signed-rank test.

Zero differences are dropped and tied magnitudes get mid-ranks. Up to
``EXACT_MAX_N`` non-zero pairs the p-value comes from enumerating all sign
assignments; above that a tie-corrected normal approximation with continuity
correction is used.
"""

from typing import NamedTuple, Sequence

import numpy as np
from scipy import stats

from core.exceptions import ShapeError

EXACT_MAX_N = 15
MIN_PAIRS = 6


class WilcoxonResult(NamedTuple):
    statistic: float
    p_value: float
    n_effective: int
    exact: bool
    degenerate: bool = False


def _exact_p(doubled_ranks: np.ndarray, observed: int) -> float:
    # distribution of the doubled W+ over all 2^n sign patterns
    total = int(doubled_ranks.sum())
    counts = np.zeros(total + 1, dtype=np.float64)
    counts[0] = 1.0
    for r in doubled_ranks:
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[:total + 1 - r]
        counts = counts + shifted
    probs = counts / counts.sum()
    lower = probs[:observed + 1].sum()
    upper = probs[observed:].sum()
    return float(min(1.0, 2.0 * min(lower, upper)))


def wilcoxon_signed_rank(a: Sequence[float], b: Sequence[float]) -> WilcoxonResult:
    """Two-sided test of ``a - b`` symmetric about zero.

    The statistic is W+, the rank sum of positive differences.

    Args:
        a: First sample, one value per run
        b: Second sample, paired with ``a`` by position

    Returns:
        WilcoxonResult; ``degenerate`` when every difference is zero

    Raises:
        ShapeError: samples of different length, not 1-D, or fewer than
            ``MIN_PAIRS`` pairs
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ShapeError(f"paired samples must be equal-length vectors, got {a.shape} and {b.shape}")
    if a.size < MIN_PAIRS:
        raise ShapeError(f"need at least {MIN_PAIRS} pairs, got {a.size}")

    diffs = a - b
    diffs = diffs[diffs != 0.0]
    n = diffs.size
    if n == 0:
        return WilcoxonResult(0.0, 1.0, 0, exact=True, degenerate=True)

    ranks = stats.rankdata(np.abs(diffs))  # mid-ranks on ties
    w_plus = float(ranks[diffs > 0].sum())

    if n <= EXACT_MAX_N:
        # mid-ranks are multiples of 0.5, so doubling keeps everything integral
        doubled = np.rint(2.0 * ranks).astype(np.int64)
        observed = int(np.rint(2.0 * w_plus))
        return WilcoxonResult(w_plus, _exact_p(doubled, observed), n, exact=True)

    mean = n * (n + 1) / 4.0
    _, tie_counts = np.unique(ranks, return_counts=True)
    variance = n * (n + 1) * (2 * n + 1) / 24.0 - float(np.sum(tie_counts ** 3 - tie_counts)) / 48.0
    if variance <= 0.0:
        return WilcoxonResult(w_plus, 1.0, n, exact=False, degenerate=True)
    deviation = abs(w_plus - mean) - 0.5
    z = max(deviation, 0.0) / np.sqrt(variance)
    p_value = float(min(1.0, 2.0 * stats.norm.sf(z)))
    return WilcoxonResult(w_plus, p_value, n, exact=False)
