"""
Threshold and survivor selection from per-client anomaly scores.
"""
from enum import Enum
from typing import Mapping, Sequence, TypeVar

import numpy as np

from utils.exceptions import InputError

T = TypeVar("T")

# relative slack so that rounding in mean + lambda * sigma cannot split ties
TIE_RTOL = 1e-9


class FilterDirection(str, Enum):
    """Which side of the threshold is rejected."""

    EXCLUDE_ABOVE = "exclude_above"
    EXCLUDE_BELOW = "exclude_below"


def threshold_stats(errors: Sequence[float], lam: float) -> tuple[float, float, float]:
    """
    Mean, population standard deviation and threshold of the scores.

    Args:
        errors: One score per client
        lam: Standard-deviation multiplier

    Returns:
        (mean, sigma, tau) with tau = mean + lam * sigma

    Raises:
        InputError: on an empty or non-finite score list
    """
    values = np.asarray(errors, dtype=np.float64)
    if values.size == 0:
        raise InputError("threshold needs at least one score")
    if not np.all(np.isfinite(values)):
        raise InputError("scores must be finite")
    if np.all(values == values[0]):
        mean, sigma = float(values[0]), 0.0
    else:
        mean, sigma = float(values.mean()), float(values.std())
    return mean, sigma, mean + lam * sigma


def threshold(errors: Sequence[float], lam: float) -> float:
    """tau = mean(errors) + lam * population_std(errors)."""
    return threshold_stats(errors, lam)[2]


def keep_mask(errors: Sequence[float], tau: float, direction: FilterDirection) -> np.ndarray:
    """Boolean survivors mask; scores equal to tau are kept in both directions."""
    values = np.asarray(errors, dtype=np.float64)
    slack = TIE_RTOL * abs(tau)
    if FilterDirection(direction) is FilterDirection.EXCLUDE_ABOVE:
        return values <= tau + slack
    return values >= tau - slack


def filter_updates(updates: Sequence[T], errors: Sequence[float], tau: float,
                   direction: FilterDirection = FilterDirection.EXCLUDE_ABOVE,
                   min_survivors: int = 1) -> tuple[list[T], bool]:
    """
    Select the updates allowed into aggregation.

    Args:
        updates: Client updates (any objects), aligned with ``errors``
        errors: Anomaly scores
        tau: Threshold
        direction: Rejection side
        min_survivors: Smallest acceptable survivor count

    Returns:
        (survivors, fallback) where fallback is True when too few survived
        and every update was kept instead
    """
    if len(updates) != len(errors):
        raise InputError(f"{len(updates)} updates but {len(errors)} scores")
    mask = keep_mask(errors, tau, direction)
    survivors = [u for u, keep in zip(updates, mask) if keep]
    if len(survivors) < min_survivors:
        return list(updates), True
    return survivors, False


def survivors_by_id(errors: Mapping[int, float], tau: float,
                    direction: FilterDirection = FilterDirection.EXCLUDE_ABOVE,
                    min_survivors: int = 1) -> tuple[tuple[int, ...], bool]:
    """``filter_updates`` over a client-id -> score mapping, returning sorted ids."""
    ids = sorted(errors)
    kept, fallback = filter_updates(ids, [errors[i] for i in ids], tau, direction, min_survivors)
    return tuple(kept), fallback
