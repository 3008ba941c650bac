"""
Model document: a trained reservoir persisted as one versioned JSON file

Floats are written with their shortest round-trip repr, so a loaded model
reproduces the saved one bit for bit. The adjacency matrix is stored as
(row, col, value) triplets in CSR order.
"""
import json
import logging
from typing import Any, Dict, Optional

import numpy as np
from scipy import sparse

from reservoir.core import Reservoir, ReservoirConfig, ReservoirState
from reservoir.errors import ReservoirError
from reservoir.training import TrainedModel, TrainingManifest

logger = logging.getLogger(__name__)

FORMAT_NAME = "parameter-aware-reservoir-model"
FORMAT_VERSION = 1


def model_to_dict(model: TrainedModel, system: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """Self-describing document for a trained model; system records how inputs are built from beta"""
    res = model.reservoir
    a = res.a.tocoo()
    return {
        "format": FORMAT_NAME,
        "format_version": FORMAT_VERSION,
        "config": res.config.to_dict(),
        "seeds": {"reservoir": model.manifest.reservoir_seed, "state": model.manifest.state_seed},
        "adjacency": {
            "shape": list(a.shape),
            "rows": a.row.tolist(),
            "cols": a.col.tolist(),
            "values": a.data.tolist(),
        },
        "w_in": res.w_in.tolist(),
        "b": res.b.tolist(),
        "w_out": model.w_out.tolist(),
        "final_state": model.final_state.r.tolist(),
        "manifest": model.manifest.to_dict(),
        "system": system or {},
    }


def model_from_dict(data: Dict[str, Any]) -> TrainedModel:
    if data.get("format") != FORMAT_NAME:
        raise ReservoirError(ReservoirError.CONFIG_INVALID, "not a reservoir model document", {"format": data.get("format")})
    if data.get("format_version") != FORMAT_VERSION:
        raise ReservoirError(
            ReservoirError.CONFIG_INVALID,
            f"unsupported model format version {data.get('format_version')}",
            {"supported": FORMAT_VERSION},
        )

    try:
        config = ReservoirConfig.from_dict(data["config"])
        adjacency = data["adjacency"]
        n_rows, n_cols = adjacency["shape"]
        a = sparse.csr_matrix(
            (
                np.asarray(adjacency["values"], dtype=float),
                (np.asarray(adjacency["rows"], dtype=int), np.asarray(adjacency["cols"], dtype=int)),
            ),
            shape=(n_rows, n_cols),
        )
        reservoir = Reservoir(
            a=a,
            w_in=np.asarray(data["w_in"], dtype=float).reshape(config.d_r, config.d_in),
            b=np.asarray(data["b"], dtype=float),
            config=config,
        )
        return TrainedModel(
            reservoir=reservoir,
            w_out=np.asarray(data["w_out"], dtype=float).reshape(config.d_out, config.d_r),
            final_state=ReservoirState(np.asarray(data["final_state"], dtype=float)),
            manifest=TrainingManifest.from_dict(data["manifest"]),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise ReservoirError(ReservoirError.CONFIG_INVALID, f"malformed model document: {e}")


def save_model(model: TrainedModel, path: str, system: Optional[Dict[str, Any]] = None) -> None:
    try:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(model_to_dict(model, system), f)
    except OSError as e:
        raise ReservoirError(ReservoirError.IO_FAILURE, f"cannot write model {path}: {e}")
    logger.info(f"Saved model d_r={model.reservoir.size} to {path}")


def load_model(path: str) -> TrainedModel:
    return load_model_document(path)[0]


def load_model_document(path: str):
    """(TrainedModel, system description) from a model file"""
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise ReservoirError(ReservoirError.CONFIG_INVALID, f"model {path} is not valid JSON: {e}")
    except OSError as e:
        raise ReservoirError(ReservoirError.IO_FAILURE, f"cannot read model {path}: {e}")

    model = model_from_dict(data)
    logger.info(f"Loaded model d_r={model.reservoir.size} trained on betas {list(model.manifest.betas)} from {path}")
    return model, data.get("system", {})
