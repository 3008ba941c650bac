"""
Subcommand implementations: simulate, train, predict, kam, poincare, lyapunov, hyperopt, plot

Each command writes its files into an output directory and finishes with a
manifest.json merged on the calling thread after any parallel work.
"""
import logging
import os
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from analysis.diagnostics import CHAOS_THRESHOLD, classify_regular_chaotic, climate_distance, energy_audit, series_lyapunov
from analysis.poincare import KamDiagram, PoincareSet, SectionPredicate
from reservoir.core import build_reservoir
from reservoir.errors import ReservoirError, require
from reservoir.prediction import (
    PredictionRun,
    closed_loop,
    continue_from_training,
    raise_if_diverged,
    valid_time,
)
from reservoir.training import Corpus, TrainedModel, TrajectorySegment, assemble_corpus, train
from systems import ModelSystem, get_system

from .artifact import load_model_document, save_model
from .config import ExperimentConfig, default_threads
from .emit import (
    ensure_dir,
    read_diagram_csv,
    read_series_csv,
    scatter_svg,
    write_csv,
    write_diagram_csv,
    write_json,
    write_manifest,
    write_series_csv,
)
from .hyperopt import ValidationSpan, random_search

logger = logging.getLogger(__name__)

MODEL_FILE = "model.json"


@dataclass
class BetaResult:
    """Outcome of one beta of a diagram sweep"""

    beta: float
    status: str = "ok"
    model_section: Optional[PoincareSet] = None
    truth_section: Optional[PoincareSet] = None
    distance: Optional[float] = None
    model_exponent: Optional[float] = None
    truth_exponent: Optional[float] = None
    energy_deviation: Optional[float] = None
    chaos_threshold: float = CHAOS_THRESHOLD

    def to_dict(self) -> Dict[str, Any]:
        data = {"beta": self.beta, "status": self.status}
        if self.model_section is not None:
            data["model_points"] = len(self.model_section)
        if self.truth_section is not None:
            data["truth_points"] = len(self.truth_section)
        for name in ("distance", "model_exponent", "truth_exponent", "energy_deviation"):
            value = getattr(self, name)
            if value is not None:
                data[name] = value
        if self.model_exponent is not None:
            data["model_regime"] = classify_regular_chaotic(self.model_exponent, self.chaos_threshold)
        if self.truth_exponent is not None:
            data["truth_regime"] = classify_regular_chaotic(self.truth_exponent, self.chaos_threshold)
        return data


def build_system(config: ExperimentConfig) -> ModelSystem:
    return get_system(config.system, config.system_params)


def system_description(config: ExperimentConfig) -> Dict[str, Any]:
    """What a model file needs to rebuild inputs from beta"""
    return {
        "name": config.system,
        "params": dict(config.system_params),
        "project_outputs": config.prediction.project_outputs,
        "section": config.section.to_dict() if config.section is not None else None,
    }


def section_predicate(config: Optional[ExperimentConfig], system: ModelSystem) -> Optional[SectionPredicate]:
    if config is not None and config.section is not None:
        return config.section
    return system.default_predicate()


def training_corpus(system: ModelSystem, betas: Sequence[float], length: int, transient: int = 0) -> Corpus:
    """One segment per beta, generated together"""
    series = system.generate_many(list(betas), length, transient)
    return assemble_corpus([TrajectorySegment(beta, states, system.dt) for beta, states in zip(betas, series)])


def train_model(config: ExperimentConfig, system: ModelSystem, corpus: Corpus, seed: Optional[int] = None) -> TrainedModel:
    reservoir = build_reservoir(config.reservoir_config(system.d, system.dt, seed))
    return train(reservoir, corpus, config.training.washout)


def predict_climate(
    model: TrainedModel,
    system: ModelSystem,
    beta: float,
    steps: int,
    project_outputs: bool = False,
    divergence_limit: Optional[float] = None,
) -> PredictionRun:
    """Closed loop at beta started from the final training state and the input encoding beta"""
    projector = system.projector() if project_outputs else None
    options = {} if divergence_limit is None else {"divergence_limit": divergence_limit}
    return closed_loop(model, beta, system.initial_input(beta), model.final_state, steps, projector, **options)


def _fan_out(function, items: Sequence[Any], threads: int) -> List[Any]:
    """Apply function to every item on a thread pool; results keep the item order"""
    results: List[Any] = [None] * len(items)
    with ThreadPoolExecutor(max_workers=max(1, threads)) as executor:
        futures = {executor.submit(function, item): index for index, item in enumerate(items)}
        for future in as_completed(futures):
            results[futures[future]] = future.result()
    return results


def cmd_simulate(
    config: ExperimentConfig, out_dir: str, betas: Optional[Sequence[float]] = None, steps: Optional[int] = None
) -> Dict[str, Any]:
    """Ground-truth trajectories as CSV (t, state columns, then any further observable columns)"""
    system = build_system(config)
    betas = list(betas) if betas else (config.training.betas or config.evaluation_betas())
    require(len(betas) > 0, "simulate needs at least one beta")
    steps = config.training.length if steps is None else steps
    require(steps >= 0, "steps must be non-negative", {"steps": steps})
    ensure_dir(out_dir)

    extra_names = [name for name in system.observable_names if name not in system.state_names]
    series = system.generate_many(betas, steps)
    files, entries = [], []
    for index, (beta, observables) in enumerate(zip(betas, series)):
        states = system.to_states(observables)
        extra = observables[[system.observable_names.index(name) for name in extra_names]]
        path = os.path.join(out_dir, f"trajectory_{index:03d}.csv")
        write_series_csv(path, np.vstack([states, extra]), system.dt, [*system.state_names, *extra_names])
        files.append(path)
        entry = {"beta": beta, "file": os.path.basename(path), "samples": int(observables.shape[1])}
        energy = system.energy(observables) if observables.shape[1] else None
        if energy is not None:
            entry["energy0"] = float(energy[0])
        entries.append(entry)

    logger.info(f"Simulated {len(betas)} {system.name} trajectories of {steps} samples into {out_dir}")
    write_manifest(out_dir, "simulate", config.to_dict(), files, entries)
    return {"files": [os.path.basename(f) for f in files], "entries": entries}


def cmd_train(config: ExperimentConfig, out_dir: str, threads: Optional[int] = None) -> Dict[str, Any]:
    """Train the shared model, or one model per evaluation beta in per_beta mode, and save model files"""
    system = build_system(config)
    ensure_dir(out_dir)
    description = system_description(config)

    if config.mode == "per_beta":
        betas = config.evaluation_betas()
        require(len(betas) > 0, "per_beta mode needs evaluation betas")
        series = system.generate_many(betas, config.training.length, config.training.transient)

        def fit(index: int) -> str:
            corpus = assemble_corpus([TrajectorySegment(betas[index], series[index], system.dt)])
            model = train_model(config, system, corpus)
            path = os.path.join(out_dir, f"model_{index:03d}.json")
            save_model(model, path, description)
            return path

        files = _fan_out(fit, list(range(len(betas))), threads or default_threads())
        entries = [{"beta": beta, "file": os.path.basename(path)} for beta, path in zip(betas, files)]
    else:
        corpus = training_corpus(system, config.training.betas, config.training.length, config.training.transient)
        model = train_model(config, system, corpus)
        path = os.path.join(out_dir, MODEL_FILE)
        save_model(model, path, description)
        files = [path]
        entries = [{"file": MODEL_FILE, **model.manifest.to_dict()}]

    write_manifest(out_dir, "train", config.to_dict(), files, entries)
    return {"files": [os.path.basename(f) for f in files], "entries": entries}


def _system_from_document(description: Dict[str, Any], config: Optional[ExperimentConfig]) -> ModelSystem:
    if description.get("name"):
        return get_system(description["name"], description.get("params"))
    if config is not None:
        return build_system(config)
    raise ReservoirError(ReservoirError.CONFIG_INVALID, "model file does not name its system and no config was given")


def cmd_predict(
    model_path: str,
    out_dir: str,
    beta: Optional[float] = None,
    steps: Optional[int] = None,
    config: Optional[ExperimentConfig] = None,
    continue_training: bool = False,
    lyapunov: Optional[float] = None,
) -> Dict[str, Any]:
    """Closed-loop prediction CSV; a diverged run still writes its partial CSV, then fails"""
    model, description = load_model_document(model_path)
    system = _system_from_document(description, config)
    steps = steps or (config.prediction.steps if config is not None else 10_000)
    project = bool(description.get("project_outputs", False))
    ensure_dir(out_dir)

    summary: Dict[str, Any] = {"model": os.path.basename(model_path), "steps": steps}
    if continue_training:
        projector = system.projector() if project else None
        run = continue_from_training(model, steps, projector)
        beta = run.beta
        start = model.manifest.lengths[-1] + 1
    else:
        require(beta is not None, "predict needs --beta unless continuing the training run")
        run = predict_climate(model, system, beta, steps, project)
        start = 1
    summary["beta"] = beta

    path = os.path.join(out_dir, "prediction.csv")
    write_series_csv(path, run.outputs, system.dt, system.observable_names, start=start)
    summary["rows"] = run.completed_steps
    summary["diverged_at"] = run.diverged_at

    if continue_training and run.completed_steps > 0:
        total = start + run.completed_steps
        transient = config.training.transient if config is not None else 0
        truth = system.generate(beta, total, transient)[:, start:]
        if lyapunov is None:
            horizon = config.lyapunov.horizon if config is not None else 2000.0
            lyapunov = system.lyapunov(beta, horizon)
        threshold = config.prediction.valid_time_threshold if config is not None else None
        options = {} if threshold is None else {"threshold": threshold}
        summary["lyapunov"] = lyapunov
        summary["valid_time"] = valid_time(run.outputs, truth, lyapunov=max(lyapunov, 0.0), dt=system.dt, **options)
        logger.info(f"Valid time {summary['valid_time']:.3f} (Lyapunov exponent {lyapunov:.4f})")

    if run.completed_steps and system.energy(run.outputs[:, :1]) is not None:
        summary["energy"] = energy_audit(run.outputs, system.energy).to_dict()

    write_manifest(out_dir, "predict", config.to_dict() if config else None, [path], [summary])
    raise_if_diverged(run)
    return summary


def _load_models(config: ExperimentConfig, model_path: Optional[str], betas: List[float], system: ModelSystem, threads: int):
    """One model per beta: the shared model file, a freshly trained shared model, or per-beta models"""
    if model_path is not None:
        model, _ = load_model_document(model_path)
        return [model] * len(betas)
    if config.mode == "per_beta":
        series = system.generate_many(betas, config.training.length, config.training.transient)

        def fit(index: int) -> Optional[TrainedModel]:
            try:
                corpus = assemble_corpus([TrajectorySegment(betas[index], series[index], system.dt)])
                return train_model(config, system, corpus)
            except ReservoirError as e:
                logger.warning(f"Training at beta={betas[index]} failed: {e}")
                return None

        return _fan_out(fit, list(range(len(betas))), threads)

    corpus = training_corpus(system, config.training.betas, config.training.length, config.training.transient)
    model = train_model(config, system, corpus)
    return [model] * len(betas)


def diagram_sweep(
    config: ExperimentConfig,
    system: ModelSystem,
    betas: List[float],
    models: List[Optional[TrainedModel]],
    threads: int,
    classify: bool = False,
) -> List[BetaResult]:
    """Model (and optionally true) sections for every beta, one worker per beta"""
    predicate = section_predicate(config, system)
    settings = config.prediction
    points = settings.steps - settings.climate_transient
    require(points > 0, "prediction steps must exceed the climate transient")

    truths = None
    if config.evaluation.compare_truth:
        logger.info(f"Generating {len(betas)} ground-truth orbits of {points} samples")
        truths = system.generate_many(betas, points)

    def evaluate(index: int) -> BetaResult:
        beta = betas[index]
        result = BetaResult(beta=beta, chaos_threshold=config.lyapunov.chaos_threshold)
        if models[index] is None:
            result.status = "failed: training failed"
            return result
        try:
            run = predict_climate(
                models[index], system, beta, settings.steps, settings.project_outputs, settings.divergence_limit
            )
            raise_if_diverged(run)
            settled = run.settled(settings.climate_transient)
            result.model_section = system.section(settled, beta, predicate)
            if system.energy(settled[:, :1]) is not None:
                result.energy_deviation = energy_audit(settled, system.energy).max_abs_dev
            if classify:
                result.model_exponent = series_lyapunov(settled, system.dt, **config.lyapunov.estimator_options())
                result.truth_exponent = system.lyapunov(beta, config.lyapunov.horizon)

            if truths is not None:
                result.truth_section = system.section(truths[index], beta, predicate)
                result.distance = climate_distance(
                    system.project(result.model_section.points),
                    system.project(result.truth_section.points),
                    system.periodic,
                )
        except ReservoirError as e:
            result.status = f"failed: {e.message}"
            logger.warning(f"Diagram at beta={beta} failed: {e}")
        return result

    results = _fan_out(evaluate, list(range(len(betas))), threads)
    failed = sum(1 for result in results if result.status != "ok")
    logger.info(f"Diagram sweep over {len(betas)} betas finished, {failed} failed")
    return results


def _projected_groups(system: ModelSystem, diagram: KamDiagram) -> Dict[float, np.ndarray]:
    return {section.beta: system.project(section.points) for section in diagram}


def cmd_kam(
    config: ExperimentConfig,
    out_dir: str,
    model_path: Optional[str] = None,
    betas: Optional[Sequence[float]] = None,
    threads: Optional[int] = None,
    classify: bool = False,
) -> Dict[str, Any]:
    """Model and true KAM diagrams over the evaluation betas, with per-beta climate distances"""
    system = build_system(config)
    betas = list(betas) if betas is not None else config.evaluation_betas()
    require(len(betas) > 0, "kam needs a non-empty beta list")
    duplicates = sorted({beta for beta in betas if betas.count(beta) > 1})
    require(not duplicates, f"duplicate betas {duplicates}", {"betas": duplicates})
    threads = threads or default_threads()
    ensure_dir(out_dir)

    models = _load_models(config, model_path, betas, system, threads)
    results = diagram_sweep(config, system, betas, models, threads, classify)

    model_diagram = KamDiagram("model")
    truth_diagram = KamDiagram("machine")
    for result in results:
        if result.model_section is not None:
            model_diagram.add(result.model_section)
        if result.truth_section is not None:
            truth_diagram.add(result.truth_section)

    files = [write_diagram_csv(os.path.join(out_dir, "diagram_model.csv"), model_diagram, system.state_names)]
    panels = [("model", _projected_groups(system, model_diagram))]
    if config.evaluation.compare_truth:
        files.append(write_diagram_csv(os.path.join(out_dir, "diagram_truth.csv"), truth_diagram, system.state_names))
        panels.append(("truth", _projected_groups(system, truth_diagram)))
    files.append(scatter_svg(os.path.join(out_dir, "kam.svg"), panels, system.viewport, system.projection_names))

    entries = [result.to_dict() for result in results]
    distances = [result.distance for result in results if result.distance is not None]
    summary = {
        "betas": len(betas),
        "failed": sum(1 for result in results if result.status != "ok"),
        "median_distance": float(np.median(distances)) if distances else None,
    }
    if classify:
        threshold = config.lyapunov.chaos_threshold
        pairs = [(r.model_exponent, r.truth_exponent) for r in results if r.model_exponent is not None]
        agree = [classify_regular_chaotic(m, threshold) == classify_regular_chaotic(t, threshold) for m, t in pairs]
        summary["regime_agreement"] = float(np.mean(agree)) if agree else None

    write_manifest(out_dir, "kam", config.to_dict(), files, entries, {"summary": summary})
    return {"summary": summary, "entries": entries}


def _observable_block(system: ModelSystem, names: List[str], series: np.ndarray) -> np.ndarray:
    """Observable rows of a CSV series, in the system's observable order"""
    if all(name in names for name in system.observable_names):
        return series[[names.index(name) for name in system.observable_names]]
    raise ReservoirError(
        ReservoirError.CONFIG_INVALID,
        f"series lacks observable columns {list(system.observable_names)}",
        {"columns": names},
    )


def cmd_poincare(config: ExperimentConfig, input_path: str, out_dir: str, beta: float = float("nan")) -> Dict[str, Any]:
    """Section of one trajectory or prediction CSV"""
    system = build_system(config)
    names, series, dt = read_series_csv(input_path)
    observables = _observable_block(system, names, series)
    system.dt = dt
    ensure_dir(out_dir)

    section = system.section(observables, beta, section_predicate(config, system))
    diagram = KamDiagram("model")
    diagram.add(section)
    files = [
        write_diagram_csv(os.path.join(out_dir, "section.csv"), diagram, system.state_names),
        scatter_svg(
            os.path.join(out_dir, "section.svg"),
            [(os.path.basename(input_path), _projected_groups(system, diagram))],
            system.viewport,
            system.projection_names,
        ),
    ]
    entries = [{"input": os.path.basename(input_path), "points": len(section)}]
    write_manifest(out_dir, "poincare", config.to_dict(), files, entries)
    return {"points": len(section)}


def cmd_lyapunov(
    config: ExperimentConfig,
    out_dir: str,
    input_path: Optional[str] = None,
    model_path: Optional[str] = None,
    beta: Optional[float] = None,
) -> Dict[str, Any]:
    """Largest Lyapunov exponent of a CSV series, of a model's closed-loop output, or of the true system"""
    system = build_system(config)
    options = config.lyapunov.estimator_options()
    ensure_dir(out_dir)

    if input_path is not None:
        names, series, dt = read_series_csv(input_path)
        exponent = series_lyapunov(_observable_block(system, names, series), dt, **options)
        report = {"source": os.path.basename(input_path), "method": "nearest-neighbour divergence"}
    elif model_path is not None:
        require(beta is not None, "lyapunov of a model needs --beta")
        model, _ = load_model_document(model_path)
        run = predict_climate(model, system, beta, config.prediction.steps, config.prediction.project_outputs)
        raise_if_diverged(run)
        exponent = series_lyapunov(run.settled(config.prediction.climate_transient), system.dt, **options)
        report = {"source": os.path.basename(model_path), "beta": beta, "method": "nearest-neighbour divergence"}
    else:
        require(beta is not None, "lyapunov of the true system needs --beta")
        exponent = system.lyapunov(beta, config.lyapunov.horizon)
        report = {"source": system.name, "beta": beta, "method": "tangent/two-trajectory renormalization"}

    report["exponent"] = exponent
    report["regime"] = classify_regular_chaotic(exponent, config.lyapunov.chaos_threshold)
    path = os.path.join(out_dir, "lyapunov.json")
    write_json(path, report)
    write_manifest(out_dir, "lyapunov", config.to_dict(), [path], [report])
    logger.info(f"Largest Lyapunov exponent {exponent:.4f} ({report['regime']})")
    return report


def validation_span(config: ExperimentConfig, system: ModelSystem, beta: float, steps: int) -> ValidationSpan:
    """Samples T .. T + steps of the last training orbit"""
    length = config.training.length
    series = system.generate(beta, length + steps + 1, config.training.transient)
    return ValidationSpan(beta=beta, series=series[:, length:], dt=system.dt)


def cmd_hyperopt(
    config: ExperimentConfig, out_dir: str, budget: Optional[int] = None, threads: Optional[int] = None
) -> Dict[str, Any]:
    """Random search around the configured reservoir; writes the ranked trials and the best configuration"""
    system = build_system(config)
    settings = config.hyperopt
    budget = budget or settings.budget
    betas = config.training.betas or config.evaluation_betas()[:1]
    require(len(betas) > 0, "hyperopt needs at least one training beta")
    ensure_dir(out_dir)

    corpus = training_corpus(system, betas, config.training.length, config.training.transient)
    validation = validation_span(config, system, betas[-1], settings.validation_steps)
    trials = random_search(
        config.reservoir_config(system.d, system.dt),
        settings.ranges,
        corpus,
        validation,
        budget,
        config.training.washout,
        config.prediction.valid_time_threshold,
        settings.valid_time_weight,
        seed=config.seed,
        threads=threads or default_threads(),
    )

    columns = [
        "rank",
        "index",
        "density",
        "spectral_radius",
        "leak",
        "input_scale",
        "ridge",
        "validation_rmse",
        "valid_time",
        "loss",
    ]
    table = [[rank] + [trial.to_dict()[name] for name in columns[1:]] for rank, trial in enumerate(trials)]
    files = [write_csv(os.path.join(out_dir, "trials.csv"), columns, np.array(table, dtype=float))]

    entries = [trial.to_dict() for trial in trials]
    best = trials[0]
    if not best.succeeded:
        write_manifest(out_dir, "hyperopt", config.to_dict(), files, entries)
        raise ReservoirError(ReservoirError.DIVERGED, f"all {len(trials)} hyperopt trials failed", {"status": best.status})

    best_reservoir = {key: value for key, value in best.config.to_dict().items() if key in config.reservoir}
    files.append(write_json(os.path.join(out_dir, "best_reservoir.json"), best_reservoir))

    write_manifest(out_dir, "hyperopt", config.to_dict(), files, entries)
    return {"best": best.to_dict(), "trials": len(trials)}


def cmd_plot(config: ExperimentConfig, inputs: Sequence[str], out_path: str) -> Dict[str, Any]:
    """Scatter SVG of one or more diagram CSVs side by side"""
    require(len(inputs) > 0, "plot needs at least one diagram CSV")
    system = build_system(config)
    panels = []
    for path in inputs:
        names, diagram = read_diagram_csv(path)
        if names != list(system.state_names):
            raise ReservoirError(ReservoirError.CONFIG_INVALID, f"{path} columns {names} do not match {system.name}")
        panels.append((os.path.basename(path), _projected_groups(system, diagram)))

    directory = os.path.dirname(out_path)
    if directory:
        ensure_dir(directory)
    scatter_svg(out_path, panels, system.viewport, system.projection_names)
    logger.info(f"Plotted {len(inputs)} diagrams into {out_path}")
    return {"file": out_path, "panels": len(panels)}
