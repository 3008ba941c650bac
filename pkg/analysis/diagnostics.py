"""
Climate diagnostics: time-series Lyapunov exponent, energy audit and section distances
"""
import logging
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy import stats
from scipy.spatial import cKDTree

from reservoir.errors import ReservoirError, require

from .poincare import PoincareSet

logger = logging.getLogger(__name__)

# Nearest-neighbour divergence defaults, in samples
THEILER_WINDOW = 50
NEIGHBOURS = 5
MAX_HORIZON = 150
FIT_WINDOW = 20
MIN_PAIRS = 10

CHAOS_THRESHOLD = 0.05
TWO_PI = 2.0 * np.pi

PointsLike = Union[PoincareSet, np.ndarray]


@dataclass(frozen=True, eq=False)
class EnergyAudit:
    """Energy statistics of a trajectory; deviations are taken against the first sample"""

    mean: float
    max_abs_dev: float
    dev_series: np.ndarray

    def to_dict(self):
        return {"mean": self.mean, "max_abs_dev": self.max_abs_dev, "samples": int(self.dev_series.size)}


@dataclass(frozen=True, eq=False)
class DivergenceFit:
    exponent: float
    r_squared: float
    window_start: int
    curve: np.ndarray


def delay_embed(series: np.ndarray, dimension: int, lag: int = 1) -> np.ndarray:
    """Stack lagged copies of every row; (d * dimension) x (N - (dimension - 1) lag)"""
    require(dimension >= 1 and lag >= 1, "embedding dimension and lag must be positive")
    series = np.atleast_2d(series)
    length = series.shape[1] - (dimension - 1) * lag
    require(length >= 1, "series too short for the embedding", {"N": series.shape[1]})
    return np.vstack([series[:, k * lag : k * lag + length] for k in range(dimension)])


def divergence_curve(
    series: np.ndarray,
    theiler: int = THEILER_WINDOW,
    neighbours: int = NEIGHBOURS,
    max_horizon: int = MAX_HORIZON,
) -> np.ndarray:
    """Mean log distance between initially nearest points, against horizon in samples"""
    points = np.atleast_2d(np.asarray(series, dtype=float)).T
    usable = points.shape[0] - max_horizon
    if usable <= 2 * theiler + neighbours + 1:
        raise ReservoirError(
            ReservoirError.INSUFFICIENT_RECURRENCE,
            "insufficient recurrence",
            {"samples": points.shape[0], "max_horizon": max_horizon, "theiler": theiler},
        )

    candidates = points[:usable]
    tree = cKDTree(candidates)
    k = min(usable, neighbours + 2 * theiler + 2)
    distances, indices = tree.query(candidates, k=k)

    reference = np.arange(usable)[:, None]
    valid = (np.abs(indices - reference) > theiler) & (distances > 0.0) & np.isfinite(distances)
    # first `neighbours` valid columns per row
    valid &= np.cumsum(valid, axis=1) <= neighbours
    rows, cols = np.nonzero(valid)
    if rows.size < MIN_PAIRS:
        raise ReservoirError(ReservoirError.INSUFFICIENT_RECURRENCE, "insufficient recurrence", {"pairs": int(rows.size)})

    i = rows
    j = indices[rows, cols]
    curve = np.empty(max_horizon)
    for h in range(max_horizon):
        separation = np.linalg.norm(points[i + h] - points[j + h], axis=1)
        separation = separation[separation > 0.0]
        curve[h] = np.mean(np.log(separation)) if separation.size else -np.inf
    logger.debug(f"Divergence curve from {rows.size} neighbour pairs over {max_horizon} samples")
    return curve


def fit_divergence(curve: np.ndarray, dt: float, fit_window: int = FIT_WINDOW) -> DivergenceFit:
    """Slope of the sliding window with the largest R^2"""
    require(2 <= fit_window <= curve.size, "fit window must fit inside the curve", {"fit_window": fit_window})
    times = np.arange(fit_window) * dt
    best = None
    for start in range(curve.size - fit_window + 1):
        segment = curve[start : start + fit_window]
        if not np.all(np.isfinite(segment)):
            continue
        fit = stats.linregress(times, segment)
        r_squared = fit.rvalue**2 if np.isfinite(fit.rvalue) else 0.0
        if best is None or r_squared > best.r_squared:
            best = DivergenceFit(float(fit.slope), float(r_squared), start, curve)
    if best is None:
        raise ReservoirError(ReservoirError.INSUFFICIENT_RECURRENCE, "insufficient recurrence", {"reason": "no finite window"})
    return best


def series_lyapunov(
    series: np.ndarray,
    dt: float,
    theiler: int = THEILER_WINDOW,
    neighbours: int = NEIGHBOURS,
    max_horizon: int = MAX_HORIZON,
    fit_window: int = FIT_WINDOW,
    embedding: int = 1,
    lag: int = 1,
) -> float:
    """Largest Lyapunov exponent (per unit time) of a d x N series by nearest-neighbour divergence

    Rows are used directly as the state; embedding > 1 adds delay coordinates.
    """
    require(dt > 0.0, "dt must be positive", {"dt": dt})
    series = np.atleast_2d(np.asarray(series, dtype=float))
    require(bool(np.all(np.isfinite(series))), "series must be finite")
    if embedding > 1:
        series = delay_embed(series, embedding, lag)

    curve = divergence_curve(series, theiler, neighbours, max_horizon)
    fit = fit_divergence(curve, dt, fit_window)
    logger.info(f"Series Lyapunov exponent {fit.exponent:.4f} (R^2 {fit.r_squared:.3f}, window at {fit.window_start})")
    return fit.exponent


def energy_audit(traj: np.ndarray, energy_fn: Callable[[np.ndarray], np.ndarray]) -> EnergyAudit:
    """Energy along traj (d x N) relative to its first sample"""
    traj = np.atleast_2d(np.asarray(traj, dtype=float))
    require(traj.shape[1] >= 1, "energy audit needs at least one sample")
    energy = np.asarray(energy_fn(traj), dtype=float).reshape(-1)
    deviation = energy - energy[0]
    return EnergyAudit(mean=float(np.mean(energy)), max_abs_dev=float(np.max(np.abs(deviation))), dev_series=deviation)


def _points(points: PointsLike) -> np.ndarray:
    if isinstance(points, PoincareSet):
        points = points.points
    return np.atleast_2d(np.asarray(points, dtype=float))


def climate_distance(a: PointsLike, b: PointsLike, periodic: Optional[Sequence[bool]] = None) -> float:
    """Symmetric mean nearest-neighbour distance between two point sets

    Periodic coordinates (period 2 pi) use the minimal-image difference.
    """
    pa = _points(a)
    pb = _points(b)
    if pa.shape[0] == 0 or pb.shape[0] == 0:
        raise ReservoirError(ReservoirError.EMPTY_SET, "climate distance of an empty set", {"sizes": [len(pa), len(pb)]})
    require(pa.shape[1] == pb.shape[1], "point sets differ in dimension", {"a": pa.shape, "b": pb.shape})

    d = pa.shape[1]
    periodic = tuple(periodic) if periodic is not None else (False,) * d
    require(len(periodic) == d, "periodic mask does not match the point dimension", {"d": d})

    boxsize = np.empty(d)
    shifted_a = np.empty_like(pa)
    shifted_b = np.empty_like(pb)
    for column, wraps in enumerate(periodic):
        if wraps:
            boxsize[column] = TWO_PI
            shifted_a[:, column] = _wrap(pa[:, column])
            shifted_b[:, column] = _wrap(pb[:, column])
        else:
            low = min(pa[:, column].min(), pb[:, column].min())
            span = max(pa[:, column].max(), pb[:, column].max()) - low
            # a box wider than twice the span never wraps a nearest distance
            boxsize[column] = 2.0 * span + 1.0
            shifted_a[:, column] = pa[:, column] - low
            shifted_b[:, column] = pb[:, column] - low

    forward, _ = cKDTree(shifted_b, boxsize=boxsize).query(shifted_a)
    backward, _ = cKDTree(shifted_a, boxsize=boxsize).query(shifted_b)
    return float(0.5 * (np.mean(forward) + np.mean(backward)))


def _wrap(values: np.ndarray) -> np.ndarray:
    wrapped = np.mod(values, TWO_PI)
    return np.where(wrapped >= TWO_PI, 0.0, wrapped)


def classify_regular_chaotic(exponent: float, threshold: float = CHAOS_THRESHOLD) -> str:
    """'chaotic' when the exponent exceeds threshold, else 'regular'"""
    return "chaotic" if exponent > threshold else "regular"
