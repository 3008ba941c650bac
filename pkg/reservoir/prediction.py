"""
Closed-loop prediction with a trained reservoir and prediction-quality metrics
"""
import logging
import os
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .core import ReservoirState
from .errors import ReservoirError, require
from .training import TrainedModel

logger = logging.getLogger(__name__)

DIVERGENCE_LIMIT = float(os.getenv("RC_DIVERGENCE_LIMIT", "1e6"))
VALID_TIME_THRESHOLD = float(os.getenv("RC_VALID_TIME_THRESHOLD", "0.25"))
CLIMATE_TRANSIENT = 500

Projector = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class PredictionRun:
    """Outputs of one autonomous run; outputs[:, k] is the prediction after step k + 1"""

    beta: Union[float, np.ndarray]
    initial_input: np.ndarray
    initial_reservoir_state: ReservoirState
    steps: int
    outputs: np.ndarray
    final_state: ReservoirState
    diverged_at: Optional[int] = None

    @property
    def diverged(self) -> bool:
        return self.diverged_at is not None

    @property
    def completed_steps(self) -> int:
        return self.outputs.shape[1]

    def settled(self, transient: int = CLIMATE_TRANSIENT) -> np.ndarray:
        """Outputs with the first transient steps removed"""
        return self.outputs[:, transient:]


def closed_loop(
    model: TrainedModel,
    beta: Union[float, Sequence[float]],
    u0: Sequence[float],
    r0: ReservoirState,
    steps: int,
    projector: Optional[Projector] = None,
    divergence_limit: float = DIVERGENCE_LIMIT,
) -> PredictionRun:
    """Run the reservoir autonomously, feeding each output back as the next input

    beta is either one value held for the whole run or a schedule with one
    value per step. The run stops early, flagged, when an output component
    leaves [-divergence_limit, divergence_limit] or becomes non-finite.
    """
    res = model.reservoir
    require(steps >= 1, "closed loop needs at least one step", {"steps": steps})
    u = np.asarray(u0, dtype=float)
    require(u.shape == (res.config.d_in,), "initial input dimension does not match d_in", {"shape": u.shape})
    require(r0.r.shape == (res.size,), "initial state dimension does not match d_r")

    if np.ndim(beta) == 0:
        betas = np.full(steps, float(beta))
    else:
        betas = np.asarray(beta, dtype=float)
        require(betas.shape == (steps,), "beta schedule must have one value per step", {"length": betas.size})
    if not (np.all(np.isfinite(u)) and np.all(np.isfinite(betas))):
        raise ReservoirError(ReservoirError.NON_FINITE_DRIVE, "non-finite drive")

    outputs = np.empty((res.config.d_out, steps))
    r = r0.r
    diverged_at = None
    for k in range(steps):
        r = res.advance(r, u, betas[k])
        v = model.readout(r)
        if projector is not None:
            v = projector(v)
        if not np.all(np.isfinite(v)) or np.max(np.abs(v)) > divergence_limit:
            diverged_at = k + 1
            outputs = outputs[:, :k]
            logger.warning(f"Closed-loop run diverged at step {diverged_at}")
            break
        outputs[:, k] = v
        u = v

    return PredictionRun(
        beta=float(beta) if np.ndim(beta) == 0 else betas,
        initial_input=np.asarray(u0, dtype=float),
        initial_reservoir_state=r0,
        steps=steps,
        outputs=outputs,
        final_state=ReservoirState(r.copy()),
        diverged_at=diverged_at,
    )


def continue_from_training(
    model: TrainedModel, steps: int, projector: Optional[Projector] = None
) -> PredictionRun:
    """Continue the last training segment: r0 is the final training state and u0 = W_out r0

    outputs[:, k] estimates sample T + 1 + k of the last segment's series,
    where samples 0..T-1 were used for training.
    """
    r0 = model.final_state
    beta = model.manifest.betas[-1]
    return closed_loop(model, beta, model.readout(r0.r), r0, steps, projector=projector)


def raise_if_diverged(run: PredictionRun) -> None:
    """Turn a flagged run into a numerical failure"""
    if run.diverged:
        raise ReservoirError(
            ReservoirError.DIVERGED,
            f"diverged at step {run.diverged_at}",
            {"beta": run.beta if np.ndim(run.beta) == 0 else None, "completed_steps": run.completed_steps},
        )


def normalized_error(pred: np.ndarray, truth: np.ndarray) -> np.ndarray:
    """e(t) = |pred(t) - truth(t)| / RMS(truth), one value per column"""
    pred = np.atleast_2d(np.asarray(pred, dtype=float))
    truth = np.atleast_2d(np.asarray(truth, dtype=float))
    require(pred.shape == truth.shape, "prediction and truth differ in shape", {"pred": pred.shape, "truth": truth.shape})
    scale = np.sqrt(np.mean(np.sum(truth**2, axis=0)))
    if not scale > 0.0:
        raise ReservoirError(ReservoirError.CONTRACT_VIOLATION, "truth has zero RMS")
    return np.linalg.norm(pred - truth, axis=0) / scale


def valid_time(
    pred: np.ndarray,
    truth: np.ndarray,
    threshold: float = VALID_TIME_THRESHOLD,
    lyapunov: float = 0.0,
    dt: float = 1.0,
) -> float:
    """Time until the normalized error first exceeds threshold, in Lyapunov times when lyapunov > 0"""
    errors = normalized_error(pred, truth)
    exceeded = np.nonzero(errors > threshold)[0]
    index = int(exceeded[0]) if exceeded.size else errors.size
    horizon = index * dt
    return lyapunov * horizon if lyapunov > 0.0 else horizon
