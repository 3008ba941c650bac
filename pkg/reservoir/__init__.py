"""
Parameter-aware reservoir computing: construction, training and closed-loop prediction
"""
from .core import Reservoir, ReservoirConfig, ReservoirState, build_reservoir, drive, estimate_spectral_radius, step
from .errors import ReservoirError
from .prediction import PredictionRun, closed_loop, valid_time
from .training import Corpus, TrainedModel, TrajectorySegment, assemble_corpus, ridge_readout, train

__version__ = "1.0.0"
__all__ = [
    "Corpus",
    "PredictionRun",
    "Reservoir",
    "ReservoirConfig",
    "ReservoirError",
    "ReservoirState",
    "TrainedModel",
    "TrajectorySegment",
    "assemble_corpus",
    "build_reservoir",
    "closed_loop",
    "drive",
    "estimate_spectral_radius",
    "ridge_readout",
    "step",
    "train",
    "valid_time",
]
