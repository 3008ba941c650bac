"""
Random search over reservoir hyperparameters with a held-out validation span
"""
import logging
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from scipy import stats

from reservoir.core import ReservoirConfig, build_reservoir, drive
from reservoir.errors import ReservoirError, require
from reservoir.prediction import continue_from_training, valid_time
from reservoir.training import Corpus, train

logger = logging.getLogger(__name__)

SEARCH_PARAMETERS = ("density", "spectral_radius", "leak", "input_scale", "log10_ridge")


@dataclass
class Trial:
    """One sampled configuration and its validation scores; lower loss is better"""

    index: int
    config: ReservoirConfig
    validation_rmse: float = float("nan")
    valid_time: float = 0.0
    loss: float = float("inf")
    status: str = "pending"

    def to_dict(self) -> Dict[str, Any]:
        return {
            "index": self.index,
            "density": self.config.density,
            "spectral_radius": self.config.spectral_radius,
            "leak": self.config.leak,
            "input_scale": self.config.input_scale,
            "ridge": self.config.ridge,
            "validation_rmse": self.validation_rmse,
            "valid_time": self.valid_time,
            "loss": self.loss,
            "status": self.status,
        }

    @property
    def succeeded(self) -> bool:
        return self.status == "ok" and bool(np.isfinite(self.loss))


@dataclass(frozen=True, eq=False)
class ValidationSpan:
    """Held-out continuation of the last training segment: samples T .. T + steps"""

    beta: float
    series: np.ndarray
    dt: float

    @property
    def steps(self) -> int:
        return self.series.shape[1] - 1


def sample_configs(
    base: ReservoirConfig, ranges: Dict[str, Sequence[float]], budget: int, seed: int
) -> List[ReservoirConfig]:
    """Draw budget configurations uniformly inside ranges, the ridge log-uniformly

    Parameters without a range keep their base value.
    """
    require(budget >= 1, "search budget must be at least 1", {"budget": budget})
    for name, bounds in ranges.items():
        if name not in SEARCH_PARAMETERS:
            raise ReservoirError(ReservoirError.CONFIG_INVALID, f"hyperopt/ranges: unknown parameter {name}")
        low, high = bounds
        if not low <= high:
            raise ReservoirError(ReservoirError.CONFIG_INVALID, f"hyperopt/ranges/{name}: empty range [{low}, {high}]")

    rng = np.random.default_rng(seed)
    configs = []
    for _ in range(budget):
        changes = {}
        for name in SEARCH_PARAMETERS:
            if name not in ranges:
                continue
            low, high = ranges[name]
            if name != "log10_ridge":
                changes[name] = float(rng.uniform(low, high))
            elif low == high:
                changes["ridge"] = 10.0**low
            else:
                changes["ridge"] = float(stats.loguniform(10.0**low, 10.0**high).rvs(random_state=rng))
        configs.append(base.replace(**changes))
    return configs


def evaluate_trial(
    trial: Trial, corpus: Corpus, validation: ValidationSpan, washout: int, threshold: float, weight: float
) -> Trial:
    """Train on the corpus, then score one-step error and closed-loop valid time on the held-out span"""
    try:
        model = train(build_reservoir(trial.config), corpus, washout)

        held = validation.series
        states = drive(model.reservoir, model.final_state, held[:, :-1], np.full(validation.steps, validation.beta))
        trial.validation_rmse = float(np.sqrt(np.mean((model.w_out @ states - held[:, 1:]) ** 2)))

        run = continue_from_training(model, validation.steps)
        if run.completed_steps > 0:
            truth = held[:, 1 : 1 + run.completed_steps]
            trial.valid_time = valid_time(run.outputs, truth, threshold, dt=validation.dt)

        span = validation.steps * validation.dt
        if np.isfinite(trial.validation_rmse) and trial.validation_rmse > 0.0:
            trial.loss = float(np.log(trial.validation_rmse) - weight * trial.valid_time / span)
            trial.status = "ok"
        else:
            trial.status = "failed: non-finite validation error"
    except ReservoirError as e:
        trial.status = f"failed: {e.message}"
        logger.warning(f"Trial {trial.index} failed: {e}")
    return trial


def random_search(
    base: ReservoirConfig,
    ranges: Dict[str, Sequence[float]],
    corpus: Corpus,
    validation: ValidationSpan,
    budget: int,
    washout: int,
    threshold: float,
    weight: float = 1.0,
    seed: int = 0,
    threads: Optional[int] = None,
) -> List[Trial]:
    """Evaluate budget sampled configurations in parallel; trials come back ranked by loss"""
    trials = [Trial(index, config) for index, config in enumerate(sample_configs(base, ranges, budget, seed))]
    logger.info(f"Random search: {budget} trials on {len(corpus.segments)} segments, {threads or 1} workers")

    with ThreadPoolExecutor(max_workers=threads or 1) as executor:
        futures = {
            executor.submit(evaluate_trial, trial, corpus, validation, washout, threshold, weight): trial.index
            for trial in trials
        }
        for future in as_completed(futures):
            trial = future.result()
            logger.info(
                f"Trial {trial.index}: rmse={trial.validation_rmse:.3e} valid_time={trial.valid_time:.2f} "
                f"loss={trial.loss:.4f} ({trial.status})"
            )

    ranked = sorted(trials, key=lambda t: (t.loss, t.index))
    logger.info(f"Best trial {ranked[0].index} with loss {ranked[0].loss:.4f}")
    return ranked
