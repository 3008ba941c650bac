"""
Tests for reservoir construction, spectral radius scaling and the state update
"""

import numpy as np
import pytest
from scipy import sparse

from reservoir.core import (
    Reservoir,
    ReservoirConfig,
    ReservoirState,
    build_reservoir,
    drive,
    estimate_spectral_radius,
    initial_state,
    rescale_spectral_radius,
    step,
)
from reservoir.errors import ReservoirError


RESERVOIR_TUPLES = [
    (500, 0.48, 1.48),
    (500, 0.36, 2.66),
    (1000, 0.97, 1.13),
    (1500, 3.6e-3, 1.62),
    (1000, 0.66, 0.77),
]


def dense_radius(a):
    return float(np.max(np.abs(np.linalg.eigvals(a.toarray()))))


def make_config(**changes):
    data = {
        "d_r": 40,
        "density": 0.2,
        "spectral_radius": 0.9,
        "leak": 0.5,
        "input_scale": 0.5,
        "ridge": 1e-6,
        "d_in": 2,
        "d_out": 2,
        "seed": 3,
    }
    data.update(changes)
    return ReservoirConfig.from_dict(data)


def scalar_reservoir(leak=0.5):
    config = make_config(d_r=1, d_in=1, d_out=1, density=1.0, leak=leak)
    return Reservoir(a=sparse.csr_matrix([[1.0]]), w_in=np.array([[1.0]]), b=np.array([1.0]), config=config)


class TestSpectralRadius:
    """Test the spectral radius estimate"""

    def test_diagonal_matrix(self):
        """Test the largest magnitude wins regardless of sign"""
        assert estimate_spectral_radius(np.diag([2.0, -3.0])) == pytest.approx(3.0, rel=1e-9)

    def test_zero_matrix(self):
        """Test an all-zero matrix has radius zero"""
        assert estimate_spectral_radius(np.zeros((5, 5))) == 0.0
        assert estimate_spectral_radius(sparse.csr_matrix((5, 5))) == 0.0

    def test_planted_spectrum(self):
        """Test a similarity transform of a known spectrum"""
        rng = np.random.default_rng(11)
        eigenvalues = np.concatenate([[5.0], rng.uniform(-4.0, 4.0, 49)])
        q, _ = np.linalg.qr(rng.normal(size=(50, 50)))
        m = q @ np.diag(eigenvalues) @ q.T
        assert estimate_spectral_radius(m) == pytest.approx(5.0, rel=1e-6)

    def test_rotation_pair(self):
        """Test a complex-conjugate dominant pair"""
        angle = 0.3
        rotation = 2.0 * np.array([[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]])
        assert estimate_spectral_radius(rotation) == pytest.approx(2.0, rel=1e-8)

    def test_large_planted_spectrum(self):
        """Test the sparse eigenvalue path on a known spectrum"""
        rng = np.random.default_rng(12)
        eigenvalues = np.concatenate([[5.0, -4.999], rng.uniform(-4.9, 4.9, 198)])
        q, _ = np.linalg.qr(rng.normal(size=(200, 200)))
        m = sparse.csr_matrix(q @ np.diag(eigenvalues) @ q.T)
        assert estimate_spectral_radius(m) == pytest.approx(5.0, rel=1e-10)

    def test_crowded_spectral_edge(self):
        """Test a dense random draw, whose largest eigenvalues nearly tie, against the full eigenvalue solve"""
        rng = np.random.default_rng(0)
        m = sparse.csr_matrix(rng.uniform(-1.0, 1.0, (400, 400)) * (rng.random((400, 400)) < 0.9))
        assert estimate_spectral_radius(m) == pytest.approx(dense_radius(m), rel=1e-9)

    def test_rescale(self):
        """Test rescaling hits the requested radius"""
        scaled = rescale_spectral_radius(np.diag([2.0, -3.0]), 1.5)
        assert estimate_spectral_radius(scaled) == pytest.approx(1.5, rel=1e-9)

    def test_rescale_zero_radius(self):
        """Test rescaling a nilpotent matrix is a degenerate draw"""
        with pytest.raises(ReservoirError) as exc_info:
            rescale_spectral_radius(np.zeros((3, 3)), 1.0)
        assert exc_info.value.code == ReservoirError.DEGENERATE_DRAW


class TestReservoirConfig:
    """Test configuration validation"""

    def test_round_trip(self):
        """Test to_dict and from_dict agree"""
        config = make_config()
        assert ReservoirConfig.from_dict(config.to_dict()) == config

    def test_replace(self):
        """Test replace changes only the named fields"""
        config = make_config().replace(leak=0.25)
        assert config.leak == 0.25
        assert config.d_r == 40

    @pytest.mark.parametrize(
        "changes",
        [{"leak": 0.0}, {"leak": 1.5}, {"density": 1.2}, {"spectral_radius": 0.0}, {"ridge": -1.0}, {"d_out": 3}],
    )
    def test_invalid(self, changes):
        """Test invalid hyperparameters are contract violations"""
        with pytest.raises(ReservoirError) as exc_info:
            make_config(**changes)
        assert exc_info.value.code == ReservoirError.CONTRACT_VIOLATION
        assert exc_info.value.exit_code == 1


class TestBuildReservoir:
    """Test reservoir construction"""

    def test_deterministic(self):
        """Test the same seed gives identical matrices"""
        first = build_reservoir(make_config())
        second = build_reservoir(make_config())
        assert (first.a != second.a).nnz == 0
        np.testing.assert_array_equal(first.w_in, second.w_in)
        np.testing.assert_array_equal(first.b, second.b)

    def test_seed_override(self):
        """Test an explicit seed is recorded in the config"""
        res = build_reservoir(make_config(), seed=9)
        assert res.config.seed == 9
        assert (res.a != build_reservoir(make_config(seed=9)).a).nnz == 0

    def test_scaled_radius_and_ranges(self):
        """Test the adjacency radius and the input weight ranges"""
        config = make_config(input_scale=0.7)
        res = build_reservoir(config)
        assert estimate_spectral_radius(res.a) == pytest.approx(config.spectral_radius, rel=1e-6)
        assert np.all(np.abs(res.w_in) <= 0.7)
        assert np.all(np.abs(res.b) <= 0.7)
        assert res.w_in.shape == (40, 2)

    @pytest.mark.slow
    @pytest.mark.parametrize("seed", [0, 1, 2])
    @pytest.mark.parametrize("d_r,density,rho", RESERVOIR_TUPLES)
    def test_radius_matches_full_eigenvalue_solve(self, d_r, density, rho, seed):
        """Test the rescaled adjacency of the preset tuples has exactly the requested radius"""
        res = build_reservoir(make_config(d_r=d_r, density=density, spectral_radius=rho, seed=seed))
        assert dense_radius(res.a) == pytest.approx(rho, rel=1e-6)

    def test_standard_reservoir_has_no_bias(self):
        """Test parameter_aware=False zeroes the bias"""
        res = build_reservoir(make_config(parameter_aware=False))
        np.testing.assert_array_equal(res.b, np.zeros(40))

    def test_empty_adjacency_is_degenerate(self):
        """Test a zero-density draw is rejected after the redraw budget"""
        with pytest.raises(ReservoirError) as exc_info:
            build_reservoir(make_config(density=0.0))
        assert exc_info.value.code == ReservoirError.DEGENERATE_DRAW
        assert exc_info.value.exit_code == 2

    def test_initial_state(self):
        """Test the start state is deterministic and inside [-1, 1]"""
        first = initial_state(make_config())
        second = initial_state(make_config())
        np.testing.assert_array_equal(first.r, second.r)
        assert first.is_bounded()
        assert not np.array_equal(first.r, initial_state(make_config(), seed=4).r)


class TestStateUpdate:
    """Test the leaky tanh update"""

    def test_scalar_update(self):
        """Test r' = (1 - a) r + a tanh(A r + W_in u + beta b) on a 1-node reservoir"""
        state = step(scalar_reservoir(), ReservoirState(np.array([1.0])), [1.0], 1.0)
        assert state.r[0] == pytest.approx(0.5 + 0.5 * np.tanh(3.0), abs=1e-15)

    def test_full_leak(self):
        """Test leak 1 forgets the previous state"""
        state = step(scalar_reservoir(leak=1.0), ReservoirState(np.array([0.2])), [0.5], -0.3)
        assert state.r[0] == pytest.approx(np.tanh(0.2 + 0.5 - 0.3), abs=1e-15)

    def test_drive_matches_steps(self):
        """Test open-loop drive equals repeated single steps"""
        res = build_reservoir(make_config())
        state = initial_state(res.config)
        rng = np.random.default_rng(1)
        inputs = rng.normal(size=(2, 25))
        betas = rng.uniform(-1.0, 1.0, 25)

        states = drive(res, state, inputs, betas)
        current = state
        for k in range(25):
            current = step(res, current, inputs[:, k], betas[k])
            np.testing.assert_allclose(states[:, k], current.r, rtol=0, atol=1e-14)

    def test_drive_keeps_start_state(self):
        """Test drive does not modify the start state"""
        res = build_reservoir(make_config())
        state = initial_state(res.config)
        before = state.r.copy()
        drive(res, state, np.ones((2, 5)), np.zeros(5))
        np.testing.assert_array_equal(state.r, before)

    def test_states_stay_bounded(self):
        """Test |r| <= 1 after large inputs"""
        res = build_reservoir(make_config())
        states = drive(res, initial_state(res.config), 1e3 * np.ones((2, 10)), np.full(10, 50.0))
        assert np.all(np.abs(states) <= 1.0)

    def test_non_finite_input(self):
        """Test NaN inputs are rejected"""
        res = build_reservoir(make_config())
        with pytest.raises(ReservoirError) as exc_info:
            step(res, initial_state(res.config), [np.nan, 0.0], 0.0)
        assert exc_info.value.code == ReservoirError.NON_FINITE_DRIVE

    def test_non_finite_beta(self):
        """Test an infinite beta is rejected in drive"""
        res = build_reservoir(make_config())
        with pytest.raises(ReservoirError) as exc_info:
            drive(res, initial_state(res.config), np.zeros((2, 3)), [0.0, np.inf, 0.0])
        assert exc_info.value.code == ReservoirError.NON_FINITE_DRIVE

    def test_wrong_input_dimension(self):
        """Test a mismatched input vector is a contract violation"""
        res = build_reservoir(make_config())
        with pytest.raises(ReservoirError) as exc_info:
            step(res, initial_state(res.config), [1.0, 2.0, 3.0], 0.0)
        assert exc_info.value.code == ReservoirError.CONTRACT_VIOLATION


class TestReservoirError:
    """Test the error type"""

    def test_to_dict(self):
        """Test error dictionary format"""
        error = ReservoirError(ReservoirError.DIVERGED, "diverged at step 4", {"beta": 1.0})
        assert error.to_dict() == {"code": 203, "message": "diverged at step 4", "data": {"beta": 1.0}}
        assert "Numerical failure 203" in str(error)

    def test_to_dict_without_data(self):
        """Test data is omitted when absent"""
        assert ReservoirError(ReservoirError.IO_FAILURE, "disk full").to_dict() == {"code": 102, "message": "disk full"}
