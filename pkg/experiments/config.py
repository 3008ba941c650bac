"""
Experiment configuration: JSON schema, dataclasses, presets and process-level defaults
"""
import json
import logging
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np
import psutil
from jsonschema import Draft7Validator

from analysis.poincare import SectionPredicate
from reservoir.core import ReservoirConfig
from reservoir.errors import ReservoirError
from reservoir.prediction import CLIMATE_TRANSIENT, DIVERGENCE_LIMIT, VALID_TIME_THRESHOLD
from reservoir.training import DEFAULT_WASHOUT

logger = logging.getLogger(__name__)

PRESET_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "presets")
PRESETS = ("fig1a", "fig1b", "fig2", "fig4", "fig5", "fig6", "fig7")

OUTPUT_DIR = os.getenv("RC_OUTPUT_DIR", "runs")


def default_threads() -> int:
    """Worker count from RC_THREADS, else the number of physical cores"""
    configured = os.getenv("RC_THREADS")
    if configured:
        return max(1, int(configured))
    return psutil.cpu_count(logical=False) or 1


_NUMBER = {"type": "number"}
_RANGE = {"type": "array", "items": _NUMBER, "minItems": 2, "maxItems": 2}
_BETAS = {"type": "array", "items": _NUMBER}

EXPERIMENT_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "type": "object",
    "additionalProperties": False,
    "required": ["name", "system", "training", "reservoir"],
    "properties": {
        "name": {"type": "string"},
        "description": {"type": "string"},
        "system": {"enum": ["pendulum", "standard_map"]},
        "system_params": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "k": _NUMBER,
                "linear_kick": {"type": "boolean"},
                "dt": {"type": "number", "exclusiveMinimum": 0},
                "substeps": {"type": "integer", "minimum": 1},
                "scheme": {"enum": ["gauss4", "midpoint"]},
            },
        },
        "mode": {"enum": ["shared", "per_beta"]},
        "training": {
            "type": "object",
            "additionalProperties": False,
            "required": ["length"],
            "properties": {
                "betas": _BETAS,
                "length": {"type": "integer", "minimum": 2},
                "transient": {"type": "integer", "minimum": 0},
                "washout": {"type": "integer", "minimum": 0},
            },
        },
        "reservoir": {
            "type": "object",
            "additionalProperties": False,
            "required": ["d_r", "density", "spectral_radius", "leak", "input_scale", "ridge"],
            "properties": {
                "d_r": {"type": "integer", "minimum": 1},
                "density": {"type": "number", "minimum": 0, "maximum": 1},
                "spectral_radius": {"type": "number", "exclusiveMinimum": 0},
                "leak": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "input_scale": {"type": "number", "exclusiveMinimum": 0},
                "ridge": {"type": "number", "minimum": 0},
                "parameter_aware": {"type": "boolean"},
            },
        },
        "prediction": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "steps": {"type": "integer", "minimum": 1},
                "climate_transient": {"type": "integer", "minimum": 0},
                "project_outputs": {"type": "boolean"},
                "valid_time_threshold": {"type": "number", "exclusiveMinimum": 0},
                "divergence_limit": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "evaluation": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "betas": _BETAS,
                "random": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["count", "low", "high"],
                    "properties": {
                        "count": {"type": "integer", "minimum": 0},
                        "low": _NUMBER,
                        "high": _NUMBER,
                        "seed": {"type": "integer"},
                    },
                },
                "include_training": {"type": "boolean"},
                "compare_truth": {"type": "boolean"},
            },
        },
        "section": {
            "type": ["object", "null"],
            "additionalProperties": False,
            "required": ["trigger_variable"],
            "properties": {
                "trigger_variable": {"type": "integer", "minimum": 0},
                "direction": {"enum": ["ascending", "descending", "any"]},
                "gate_variable": {"type": ["integer", "null"], "minimum": 0},
                "gate_sign": {"enum": ["positive", "negative", None]},
            },
        },
        "lyapunov": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "theiler": {"type": "integer", "minimum": 0},
                "neighbours": {"type": "integer", "minimum": 1},
                "max_horizon": {"type": "integer", "minimum": 2},
                "fit_window": {"type": "integer", "minimum": 2},
                "chaos_threshold": _NUMBER,
                "horizon": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "hyperopt": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "budget": {"type": "integer", "minimum": 1},
                "validation_steps": {"type": "integer", "minimum": 1},
                "valid_time_weight": {"type": "number", "minimum": 0},
                "ranges": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "density": _RANGE,
                        "spectral_radius": _RANGE,
                        "leak": _RANGE,
                        "input_scale": _RANGE,
                        "log10_ridge": _RANGE,
                    },
                },
            },
        },
        "seed": {"type": "integer"},
        "output_dir": {"type": "string"},
    },
}


@dataclass
class TrainingSettings:
    length: int
    betas: List[float] = field(default_factory=list)
    transient: int = 0
    washout: int = DEFAULT_WASHOUT

    def to_dict(self) -> Dict[str, Any]:
        return {"betas": list(self.betas), "length": self.length, "transient": self.transient, "washout": self.washout}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TrainingSettings":
        return cls(
            length=int(data["length"]),
            betas=[float(beta) for beta in data.get("betas", [])],
            transient=int(data.get("transient", 0)),
            washout=int(data.get("washout", DEFAULT_WASHOUT)),
        )


@dataclass
class PredictionSettings:
    steps: int = 10_000
    climate_transient: int = CLIMATE_TRANSIENT
    project_outputs: bool = False
    valid_time_threshold: float = VALID_TIME_THRESHOLD
    divergence_limit: float = DIVERGENCE_LIMIT

    def to_dict(self) -> Dict[str, Any]:
        return {
            "steps": self.steps,
            "climate_transient": self.climate_transient,
            "project_outputs": self.project_outputs,
            "valid_time_threshold": self.valid_time_threshold,
            "divergence_limit": self.divergence_limit,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "PredictionSettings":
        defaults = cls()
        return cls(
            steps=int(data.get("steps", defaults.steps)),
            climate_transient=int(data.get("climate_transient", defaults.climate_transient)),
            project_outputs=bool(data.get("project_outputs", defaults.project_outputs)),
            valid_time_threshold=float(data.get("valid_time_threshold", defaults.valid_time_threshold)),
            divergence_limit=float(data.get("divergence_limit", defaults.divergence_limit)),
        )


@dataclass
class EvaluationSettings:
    """Betas at which diagrams are drawn: explicit values, seeded random draws and optionally the training betas"""

    betas: List[float] = field(default_factory=list)
    random: Optional[Dict[str, Any]] = None
    include_training: bool = True
    compare_truth: bool = True

    def to_dict(self) -> Dict[str, Any]:
        data = {"betas": list(self.betas), "include_training": self.include_training, "compare_truth": self.compare_truth}
        if self.random is not None:
            data["random"] = dict(self.random)
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "EvaluationSettings":
        return cls(
            betas=[float(beta) for beta in data.get("betas", [])],
            random=dict(data["random"]) if data.get("random") is not None else None,
            include_training=bool(data.get("include_training", True)),
            compare_truth=bool(data.get("compare_truth", True)),
        )

    def random_betas(self) -> List[float]:
        if not self.random or int(self.random["count"]) == 0:
            return []
        rng = np.random.default_rng(int(self.random.get("seed", 0)))
        draws = rng.uniform(float(self.random["low"]), float(self.random["high"]), int(self.random["count"]))
        return [float(beta) for beta in draws]


@dataclass
class LyapunovSettings:
    theiler: int = 50
    neighbours: int = 5
    max_horizon: int = 150
    fit_window: int = 20
    chaos_threshold: float = 0.05
    horizon: float = 2000.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "theiler": self.theiler,
            "neighbours": self.neighbours,
            "max_horizon": self.max_horizon,
            "fit_window": self.fit_window,
            "chaos_threshold": self.chaos_threshold,
            "horizon": self.horizon,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "LyapunovSettings":
        defaults = cls().to_dict()
        defaults.update(data)
        return cls(**defaults)

    def estimator_options(self) -> Dict[str, int]:
        return {
            "theiler": self.theiler,
            "neighbours": self.neighbours,
            "max_horizon": self.max_horizon,
            "fit_window": self.fit_window,
        }


@dataclass
class HyperoptSettings:
    """Random-search budget and uniform sampling ranges (ridge is sampled in log10)"""

    budget: int = 20
    validation_steps: int = 500
    valid_time_weight: float = 1.0
    ranges: Dict[str, List[float]] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "budget": self.budget,
            "validation_steps": self.validation_steps,
            "valid_time_weight": self.valid_time_weight,
            "ranges": {key: list(value) for key, value in self.ranges.items()},
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "HyperoptSettings":
        return cls(
            budget=int(data.get("budget", 20)),
            validation_steps=int(data.get("validation_steps", 500)),
            valid_time_weight=float(data.get("valid_time_weight", 1.0)),
            ranges={key: [float(low), float(high)] for key, (low, high) in data.get("ranges", {}).items()},
        )


@dataclass
class ExperimentConfig:
    """One experiment: ground-truth system, training corpus, reservoir and evaluation settings"""

    name: str
    system: str
    training: TrainingSettings
    reservoir: Dict[str, Any]
    system_params: Dict[str, Any] = field(default_factory=dict)
    mode: str = "shared"
    prediction: PredictionSettings = field(default_factory=PredictionSettings)
    evaluation: EvaluationSettings = field(default_factory=EvaluationSettings)
    section: Optional[SectionPredicate] = None
    lyapunov: LyapunovSettings = field(default_factory=LyapunovSettings)
    hyperopt: HyperoptSettings = field(default_factory=HyperoptSettings)
    seed: int = 0
    output_dir: Optional[str] = None
    description: str = ""

    def reservoir_config(self, d: int, dt: float, seed: Optional[int] = None) -> ReservoirConfig:
        """ReservoirConfig for observables of dimension d sampled every dt"""
        data = dict(self.reservoir)
        data.update({"d_in": d, "d_out": d, "dt": dt, "seed": self.seed if seed is None else seed})
        return ReservoirConfig.from_dict(data)

    def evaluation_betas(self) -> List[float]:
        """Explicit, random and (when requested) training betas, duplicates removed, order kept"""
        betas = list(self.evaluation.betas) + self.evaluation.random_betas()
        if self.evaluation.include_training and self.mode == "shared":
            betas = list(self.training.betas) + betas
        return list(dict.fromkeys(betas))

    def resolved_output_dir(self) -> str:
        return self.output_dir or os.path.join(OUTPUT_DIR, self.name)

    def to_dict(self) -> Dict[str, Any]:
        data = {
            "name": self.name,
            "description": self.description,
            "system": self.system,
            "system_params": dict(self.system_params),
            "mode": self.mode,
            "training": self.training.to_dict(),
            "reservoir": dict(self.reservoir),
            "prediction": self.prediction.to_dict(),
            "evaluation": self.evaluation.to_dict(),
            "section": self.section.to_dict() if self.section is not None else None,
            "lyapunov": self.lyapunov.to_dict(),
            "hyperopt": self.hyperopt.to_dict(),
            "seed": self.seed,
        }
        if self.output_dir is not None:
            data["output_dir"] = self.output_dir
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ExperimentConfig":
        validate_experiment(data)
        section = data.get("section")
        return cls(
            name=data["name"],
            description=data.get("description", ""),
            system=data["system"],
            system_params=dict(data.get("system_params", {})),
            mode=data.get("mode", "shared"),
            training=TrainingSettings.from_dict(data["training"]),
            reservoir=dict(data["reservoir"]),
            prediction=PredictionSettings.from_dict(data.get("prediction", {})),
            evaluation=EvaluationSettings.from_dict(data.get("evaluation", {})),
            section=SectionPredicate.from_dict(section) if section else None,
            lyapunov=LyapunovSettings.from_dict(data.get("lyapunov", {})),
            hyperopt=HyperoptSettings.from_dict(data.get("hyperopt", {})),
            seed=int(data.get("seed", 0)),
            output_dir=data.get("output_dir"),
        )


def validate_experiment(data: Dict[str, Any]) -> None:
    """Schema check; the error names the JSON path of the first offending field"""
    errors = sorted(Draft7Validator(EXPERIMENT_SCHEMA).iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        first = errors[0]
        location = "/".join(str(part) for part in first.absolute_path) or "<root>"
        raise ReservoirError(
            ReservoirError.CONFIG_INVALID,
            f"{location}: {first.message}",
            {"errors": [f"{'/'.join(str(p) for p in e.absolute_path) or '<root>'}: {e.message}" for e in errors]},
        )
    if data.get("mode", "shared") == "shared" and not data["training"].get("betas"):
        raise ReservoirError(ReservoirError.CONFIG_INVALID, "training/betas: shared mode needs at least one training beta")


class ExperimentConfigManager:
    """Loads experiment files or shipped presets and applies command-line overrides"""

    def __init__(self, preset_dir: str = PRESET_DIR):
        self.preset_dir = preset_dir

    def resolve(self, name_or_path: str) -> str:
        """Path of an experiment file given either a path or a preset name"""
        if os.path.exists(name_or_path):
            return name_or_path
        preset = os.path.join(self.preset_dir, f"{name_or_path}.json")
        if os.path.exists(preset):
            return preset
        raise ReservoirError(
            ReservoirError.CONFIG_INVALID,
            f"config {name_or_path} is neither a file nor a preset",
            {"presets": self.list_presets()},
        )

    def list_presets(self) -> List[str]:
        if not os.path.isdir(self.preset_dir):
            return []
        return sorted(name[:-5] for name in os.listdir(self.preset_dir) if name.endswith(".json"))

    def load(self, name_or_path: str, seed: Optional[int] = None, output_dir: Optional[str] = None) -> ExperimentConfig:
        path = self.resolve(name_or_path)
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = json.load(f)
        except json.JSONDecodeError as e:
            raise ReservoirError(ReservoirError.CONFIG_INVALID, f"config {path} is not valid JSON: {e}")
        except OSError as e:
            raise ReservoirError(ReservoirError.IO_FAILURE, f"cannot read config {path}: {e}")

        config = ExperimentConfig.from_dict(data)
        if seed is not None:
            config.seed = seed
        if output_dir is not None:
            config.output_dir = output_dir

        logger.info(
            f"Loaded experiment {config.name} from {path}: system={config.system}, mode={config.mode}, "
            f"{len(config.training.betas)} training betas, seed={config.seed}"
        )
        return config

    def save(self, config: ExperimentConfig, path: str) -> None:
        try:
            with open(path, "w", encoding="utf-8") as f:
                json.dump(config.to_dict(), f, indent=2, ensure_ascii=False)
        except OSError as e:
            raise ReservoirError(ReservoirError.IO_FAILURE, f"cannot write config {path}: {e}")
        logger.info(f"Saved experiment {config.name} to {path}")
