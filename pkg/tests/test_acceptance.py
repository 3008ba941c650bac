"""
End-to-end replication runs on the shipped presets

Every class here trains full-size reservoirs and is marked slow.
"""

import numpy as np
import pytest

from analysis.diagnostics import energy_audit, series_lyapunov
from experiments.config import ExperimentConfigManager
from experiments.runner import build_system, diagram_sweep, train_model, training_corpus
from reservoir.prediction import continue_from_training, valid_time
from systems.pendulum import PendulumState, pendulum_lyapunov

PENDULUM_SEEDS = [0, 1, 2, 3, 4]
MAP_SEEDS = [0, 1, 2]

# 3 Lyapunov times at a reference exponent of 0.163, in time units
CHAOTIC_HORIZON = 3.0 / 0.163


def preset(name):
    config = ExperimentConfigManager().load(name)
    system = build_system(config)
    corpus = training_corpus(system, config.training.betas, config.training.length, config.training.transient)
    return config, system, corpus


def sweep(config, system, corpus, betas, seed, classify=False):
    """Results of one freshly drawn reservoir over betas"""
    model = train_model(config, system, corpus, seed=seed)
    results = diagram_sweep(config, system, betas, [model] * len(betas), threads=4, classify=classify)
    assert all(result.status == "ok" for result in results), [result.status for result in results]
    return results


@pytest.mark.slow
class TestQuasiPeriodicReplication:
    """Test a standard reservoir on the quasi-periodic pendulum orbit"""

    def test_training_fit(self):
        """Test the preset reaches a one-step training error below 1e-3"""
        config, system, corpus = preset("fig1a")
        model = train_model(config, system, corpus)
        assert model.manifest.training_rmse < 1e-3

    def test_climate_and_energy(self):
        """Test the median section distance and energy fluctuation over five reservoir draws"""
        config, system, corpus = preset("fig1a")
        results = [sweep(config, system, corpus, [1.35], seed)[0] for seed in PENDULUM_SEEDS]
        assert np.median([result.distance for result in results]) <= 0.05
        assert np.median([result.energy_deviation for result in results]) <= 1e-3


@pytest.mark.slow
class TestChaoticReplication:
    """Test a standard reservoir on the chaotic pendulum orbit"""

    @pytest.fixture(scope="class")
    def continuations(self):
        config, system, corpus = preset("fig1b")
        steps = config.prediction.steps
        runs = [continue_from_training(train_model(config, system, corpus, seed=seed), steps) for seed in PENDULUM_SEEDS]
        start = config.training.length + 1
        truth = system.generate(2.04, start + steps)[:, start:]
        return config, system, runs, truth

    def test_valid_time(self, continuations):
        """Test the median valid time covers three Lyapunov times of the reference exponent"""
        config, system, runs, truth = continuations
        threshold = config.prediction.valid_time_threshold
        times = [
            valid_time(run.outputs, truth[:, : run.completed_steps], threshold, dt=system.dt) if run.completed_steps else 0.0
            for run in runs
        ]
        assert np.median(times) >= CHAOTIC_HORIZON

    def test_energy_fluctuation(self, continuations):
        """Test the closed-loop energy stays within 0.1 of its start"""
        _, system, runs, _ = continuations
        assert all(not run.diverged for run in runs)
        deviations = [energy_audit(run.outputs, system.energy).max_abs_dev for run in runs]
        assert np.median(deviations) <= 0.1

    def test_series_exponent_matches_benettin(self, continuations):
        """Test the exponent read off the predicted series agrees with the true system"""
        config, system, runs, _ = continuations
        reference = pendulum_lyapunov(PendulumState.from_beta(2.04), config.lyapunov.horizon)
        options = config.lyapunov.estimator_options()
        exponents = [series_lyapunov(run.settled(config.prediction.climate_transient), system.dt, **options) for run in runs]
        assert np.median(exponents) == pytest.approx(reference, abs=0.05)


@pytest.mark.slow
class TestParameterAwarePendulum:
    """Test one parameter-aware reservoir across several pendulum orbits"""

    def test_training_and_held_out_climates(self):
        """Test median section distances at the four training betas and at beta = 2.0"""
        config, system, corpus = preset("fig4")
        betas = config.evaluation_betas()
        assert betas == [-1.84, 1.0, 1.45, 1.98, 2.0]
        distances = np.array(
            [[result.distance for result in sweep(config, system, corpus, betas, seed)] for seed in PENDULUM_SEEDS]
        )
        assert np.all(np.median(distances, axis=0) <= 0.1)


@pytest.mark.slow
class TestStandardMapDiagrams:
    """Test KAM diagrams of the standard map at held-out betas"""

    def test_regular_diagram(self):
        """Test at least 70% of the held-out K = 0.5 sections lie within 0.15 rad"""
        config, system, corpus = preset("fig6")
        betas = config.evaluation.random_betas()
        assert len(betas) == 26
        fractions = []
        for seed in MAP_SEEDS:
            distances = np.array([result.distance for result in sweep(config, system, corpus, betas, seed)])
            fractions.append(np.mean(distances <= 0.15))
        assert np.median(fractions) >= 0.7

    def test_mixed_regime_classification(self):
        """Test regular and chaotic labels agree at 70% of the held-out K = 1 betas"""
        config, system, corpus = preset("fig7")
        betas = config.evaluation.random_betas()
        assert len(betas) == 24
        agreements = []
        for seed in MAP_SEEDS:
            results = sweep(config, system, corpus, betas, seed, classify=True)
            labels = [result.to_dict() for result in results]
            agreements.append(np.mean([entry["model_regime"] == entry["truth_regime"] for entry in labels]))
        assert np.median(agreements) >= 0.7
