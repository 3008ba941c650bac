"""
Training corpora, open-loop state harvesting and ridge-regression readout
"""
import hashlib
import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from .core import Reservoir, ReservoirState, initial_state
from .errors import ReservoirError, require

logger = logging.getLogger(__name__)

DEFAULT_WASHOUT = 100
WARN_CONDITION = 1e12
SINGULAR_CONDITION = 1e15


@dataclass(frozen=True, eq=False)
class TrajectorySegment:
    """Observed states (d_in x T, columns are time steps) recorded under one control parameter"""

    beta: float
    states: np.ndarray
    dt: float

    def __post_init__(self):
        states = np.asarray(self.states, dtype=float)
        require(states.ndim == 2 and states.shape[1] >= 1, "segment must be a d_in x T matrix with T >= 1")
        require(bool(np.all(np.isfinite(states))), "segment states must be finite", {"beta": self.beta})
        require(bool(np.isfinite(self.beta)), "segment beta must be finite")
        require(self.dt > 0.0, "segment dt must be positive", {"dt": self.dt})
        object.__setattr__(self, "states", states)

    @property
    def d_in(self) -> int:
        return self.states.shape[0]

    @property
    def length(self) -> int:
        return self.states.shape[1]


@dataclass(frozen=True, eq=False)
class Corpus:
    """Ordered training segments; beta(t) is the step function over their concatenation"""

    segments: Tuple[TrajectorySegment, ...]

    @property
    def d_in(self) -> int:
        return self.segments[0].d_in

    @property
    def dt(self) -> float:
        return self.segments[0].dt

    @property
    def betas(self) -> List[float]:
        return [float(segment.beta) for segment in self.segments]

    @property
    def lengths(self) -> List[int]:
        return [segment.length for segment in self.segments]

    @property
    def total_length(self) -> int:
        return sum(self.lengths)

    def beta_series(self) -> np.ndarray:
        """beta(t) expanded to one value per time step"""
        return np.repeat(np.asarray(self.betas), self.lengths)

    def input_series(self) -> np.ndarray:
        """All segment states concatenated in time"""
        return np.concatenate([segment.states for segment in self.segments], axis=1)

    def content_hash(self) -> str:
        digest = hashlib.sha256()
        for segment in self.segments:
            digest.update(repr(float(segment.beta)).encode())
            digest.update(np.ascontiguousarray(segment.states).tobytes())
        return digest.hexdigest()


@dataclass(frozen=True)
class TrainingManifest:
    """Everything needed to repeat a training run"""

    betas: Tuple[float, ...]
    lengths: Tuple[int, ...]
    washout: int
    ridge: float
    reservoir_seed: int
    state_seed: int
    training_rmse: float
    corpus_hash: str

    def to_dict(self) -> Dict[str, Any]:
        return {
            "betas": list(self.betas),
            "lengths": list(self.lengths),
            "washout": self.washout,
            "ridge": self.ridge,
            "reservoir_seed": self.reservoir_seed,
            "state_seed": self.state_seed,
            "training_rmse": self.training_rmse,
            "corpus_hash": self.corpus_hash,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TrainingManifest":
        return cls(
            betas=tuple(float(beta) for beta in data["betas"]),
            lengths=tuple(int(length) for length in data["lengths"]),
            washout=int(data["washout"]),
            ridge=float(data["ridge"]),
            reservoir_seed=int(data["reservoir_seed"]),
            state_seed=int(data["state_seed"]),
            training_rmse=float(data["training_rmse"]),
            corpus_hash=data.get("corpus_hash", ""),
        )


@dataclass(frozen=True, eq=False)
class TrainedModel:
    """Reservoir with its fitted readout and the state reached at the end of training"""

    reservoir: Reservoir
    w_out: np.ndarray
    final_state: ReservoirState
    manifest: TrainingManifest

    def __post_init__(self):
        config = self.reservoir.config
        require(
            self.w_out.shape == (config.d_out, config.d_r), "w_out shape does not match reservoir", {"shape": self.w_out.shape}
        )

    def readout(self, r: np.ndarray) -> np.ndarray:
        """Output v = W_out r"""
        return self.w_out @ r


def assemble_corpus(segments: Sequence[TrajectorySegment]) -> Corpus:
    """Check that segments agree on d_in and dt and keep their order"""
    segments = tuple(segments)
    require(len(segments) > 0, "corpus needs at least one segment")

    reference = segments[0]
    for index, segment in enumerate(segments):
        if segment.d_in != reference.d_in:
            raise ReservoirError(
                ReservoirError.CONTRACT_VIOLATION,
                f"segment {index} has d_in={segment.d_in}, expected {reference.d_in}",
                {"segment": index},
            )
        if not np.isclose(segment.dt, reference.dt, rtol=1e-12, atol=0.0):
            raise ReservoirError(
                ReservoirError.CONTRACT_VIOLATION,
                f"segment {index} has dt={segment.dt}, expected {reference.dt}",
                {"segment": index},
            )

    return Corpus(segments)


def harvest_states(
    res: Reservoir, corpus: Corpus, washout: int, state0: Optional[ReservoirState] = None
) -> Tuple[np.ndarray, np.ndarray, ReservoirState]:
    """Drive the reservoir through the corpus and collect (state, next observation) pairs

    The state after feeding u(t) is paired with u(t + dt). The first washout
    pairs of every segment are dropped and the reservoir is not reset between
    segments. Returns (V, U, final_state).
    """
    require(corpus.d_in == res.config.d_in, "corpus d_in does not match reservoir", {"d_in": corpus.d_in})
    require(washout >= 0, "washout must be non-negative", {"washout": washout})
    for index, length in enumerate(corpus.lengths):
        if washout >= length:
            raise ReservoirError(
                ReservoirError.CONTRACT_VIOLATION,
                f"washout {washout} is not shorter than segment {index} (T={length})",
                {"segment": index},
            )

    if state0 is None:
        state0 = initial_state(res.config)

    columns = sum(length - washout - 1 for length in corpus.lengths)
    v = np.empty((res.size, columns))
    u = np.empty((corpus.d_in, columns))

    r = state0.r
    column = 0
    for segment in corpus.segments:
        states = segment.states
        beta = float(segment.beta)
        for t in range(segment.length):
            r = res.advance(r, states[:, t], beta)
            if washout <= t < segment.length - 1:
                v[:, column] = r
                u[:, column] = states[:, t + 1]
                column += 1

    logger.debug(f"Harvested {columns} training pairs from {len(corpus.segments)} segments")
    return v, u, ReservoirState(r.copy())


def ridge_readout(v: np.ndarray, u: np.ndarray, ridge: float) -> np.ndarray:
    """Readout W_out = U V^T (V V^T + lambda I)^-1 via a Cholesky solve"""
    require(v.ndim == 2 and u.ndim == 2, "V and U must be matrices")
    require(v.shape[1] == u.shape[1], "V and U differ in length", {"V": v.shape, "U": u.shape})
    require(v.shape[1] >= 1, "ridge regression needs at least one training pair")
    require(ridge >= 0.0, "ridge parameter must be non-negative", {"ridge": ridge})

    gram = v @ v.T
    cross = v @ u.T
    if ridge > 0.0:
        gram[np.diag_indices_from(gram)] += ridge
    else:
        condition = np.linalg.cond(gram)
        if not np.isfinite(condition) or condition > SINGULAR_CONDITION:
            raise ReservoirError(ReservoirError.SINGULAR_SYSTEM, "regularization required", {"condition": float(condition)})
        if condition > WARN_CONDITION:
            logger.warning(f"Unregularized readout solve is ill-conditioned (condition {condition:.3g})")

    try:
        factor = linalg.cho_factor(gram, check_finite=False)
        solution = linalg.cho_solve(factor, cross, check_finite=False)
    except linalg.LinAlgError:
        if ridge == 0.0:
            raise ReservoirError(ReservoirError.SINGULAR_SYSTEM, "regularization required")
        logger.warning("Cholesky factorization failed, falling back to a symmetric solve")
        solution = linalg.solve(gram, cross, assume_a="sym")

    return solution.T


def one_step_rmse(w_out: np.ndarray, v: np.ndarray, u: np.ndarray) -> float:
    """Root-mean-square one-step error of a readout over harvested pairs"""
    if v.shape[1] == 0:
        return float("nan")
    return float(np.sqrt(np.mean((w_out @ v - u) ** 2)))


def train(
    res: Reservoir,
    corpus: Corpus,
    washout: int = DEFAULT_WASHOUT,
    state_seed: Optional[int] = None,
) -> TrainedModel:
    """Harvest states and fit the readout with the reservoir's ridge parameter"""
    state_seed = res.config.seed if state_seed is None else state_seed
    state0 = initial_state(res.config, state_seed)

    v, u, final_state = harvest_states(res, corpus, washout, state0)
    w_out = ridge_readout(v, u, res.config.ridge)
    rmse = one_step_rmse(w_out, v, u)

    manifest = TrainingManifest(
        betas=tuple(corpus.betas),
        lengths=tuple(corpus.lengths),
        washout=int(washout),
        ridge=float(res.config.ridge),
        reservoir_seed=int(res.config.seed),
        state_seed=int(state_seed),
        training_rmse=rmse,
        corpus_hash=corpus.content_hash(),
    )
    logger.info(f"Trained readout on {v.shape[1]} pairs, betas={list(corpus.betas)}, one-step RMSE {rmse:.3e}")
    return TrainedModel(reservoir=res, w_out=w_out, final_state=final_state, manifest=manifest)
