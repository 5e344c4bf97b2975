"""Index selection shared by the particle steppers."""
from __future__ import annotations

import numpy as np


def pick_index(weights: np.ndarray, u: float) -> int:
    """Index k with probability weights[k] / sum(weights), by linear scan of the running sum."""
    cs = weights.cumsum()
    k = int(cs.searchsorted(u * cs[-1], side="right"))
    last = weights.shape[0] - 1
    if k > last:
        k = last
    while k > 0 and not weights[k] > 0:
        k -= 1
    return k


def pick_category(totals, u: float) -> int:
    """Category index in fixed order, proportional to ``totals``; zero categories are never chosen."""
    target = u * sum(totals)
    acc = 0.0
    chosen = -1
    for c, w in enumerate(totals):
        if w > 0:
            chosen = c
            acc += w
            if target < acc:
                return c
    return chosen


def grown(arr: np.ndarray, size: int) -> np.ndarray:
    out = np.zeros(max(2 * arr.shape[0], size, 8))
    out[: arr.shape[0]] = arr
    return out
