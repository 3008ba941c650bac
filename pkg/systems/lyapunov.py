"""
Two-trajectory (Benettin) largest Lyapunov exponent
"""
import logging
from typing import Callable, Optional

import numpy as np

from reservoir.errors import ReservoirError, require

logger = logging.getLogger(__name__)

DEFAULT_SEPARATION = 1e-8


def benettin(
    advance: Callable[[np.ndarray], np.ndarray],
    y0: np.ndarray,
    intervals: int,
    interval_time: float,
    separation: float = DEFAULT_SEPARATION,
    direction: Optional[np.ndarray] = None,
) -> float:
    """Average log stretch of a renormalized nearby pair

    advance maps a (d, 2) batch of states over one renormalization interval;
    column 0 is the reference, column 1 the perturbed copy.
    """
    require(intervals >= 1, "need at least one renormalization interval", {"intervals": intervals})
    require(interval_time > 0.0, "interval time must be positive")

    y0 = np.asarray(y0, dtype=float)
    if direction is None:
        direction = np.ones_like(y0)
    direction = direction / np.linalg.norm(direction)

    pair = np.stack([y0, y0 + separation * direction], axis=1)
    total = 0.0
    for _ in range(intervals):
        pair = advance(pair)
        delta = pair[:, 1] - pair[:, 0]
        distance = np.linalg.norm(delta)
        if not distance > 0.0:
            raise ReservoirError(ReservoirError.DIVERGED, "perturbed trajectory collapsed or became non-finite")
        total += np.log(distance / separation)
        pair[:, 1] = pair[:, 0] + delta * (separation / distance)

    exponent = total / (intervals * interval_time)
    logger.debug(f"Benettin estimate over {intervals} intervals: {exponent:.6f}")
    return float(exponent)
