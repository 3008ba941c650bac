"""
Tests for Poincare sections, KAM diagrams and climate diagnostics
"""

import numpy as np
import pytest

from analysis.diagnostics import (
    classify_regular_chaotic,
    climate_distance,
    delay_embed,
    energy_audit,
    fit_divergence,
    series_lyapunov,
)
from analysis.poincare import (
    ASCENDING_OMEGA1_SECTION,
    GATED_OMEGA1_SECTION,
    Direction,
    GateSign,
    KamDiagram,
    PoincareSet,
    SectionPredicate,
    poincare_section,
)
from reservoir.errors import ReservoirError
from systems.standard_map import standard_map_orbit


@pytest.fixture
def circle():
    t = np.arange(0.0, 4.0 * np.pi, 0.01)
    return np.vstack([np.cos(t), np.sin(t)])


def logistic_series(n, x0=0.1):
    x = np.empty(n)
    x[0] = x0
    for i in range(1, n):
        x[i] = 4.0 * x[i - 1] * (1.0 - x[i - 1])
    return x[None, :]


class TestSectionPredicate:
    """Test predicate construction"""

    def test_gate_fields_together(self):
        """Test a gate needs both its variable and its sign"""
        with pytest.raises(ReservoirError):
            SectionPredicate(1, gate_variable=0)

    def test_round_trip(self):
        """Test to_dict and from_dict agree"""
        assert SectionPredicate.from_dict(GATED_OMEGA1_SECTION.to_dict()) == GATED_OMEGA1_SECTION
        assert SectionPredicate.from_dict({"trigger_variable": 1, "direction": "ascending"}) == ASCENDING_OMEGA1_SECTION

    def test_default_pendulum_section(self):
        """Test the default section triggers on omega1 and keeps theta1 > 0"""
        assert GATED_OMEGA1_SECTION.trigger_variable == 1
        assert GATED_OMEGA1_SECTION.gate_variable == 0
        assert GATED_OMEGA1_SECTION.gate_sign is GateSign.POSITIVE
        assert GATED_OMEGA1_SECTION.direction is Direction.ANY

    def test_string_values_are_coerced(self):
        """Test plain strings become enum members"""
        pred = SectionPredicate(0, "descending", 1, "negative")
        assert pred.direction is Direction.DESCENDING
        assert pred.gate_sign is GateSign.NEGATIVE

    def test_index_out_of_range(self):
        """Test variables beyond the trajectory dimension are rejected"""
        with pytest.raises(ReservoirError):
            poincare_section(np.zeros((2, 10)), 0.1, SectionPredicate(3))


class TestPoincareSection:
    """Test crossing detection and interpolation"""

    def test_constant_has_no_crossings(self):
        """Test a trajectory that never crosses gives an empty set"""
        section = poincare_section(np.ones((2, 100)), 0.1, SectionPredicate(0))
        assert section.empty
        assert section.points.shape == (0, 2)

    def test_ascending_crossings(self, circle):
        """Test cos t crosses upward at 3 pi / 2 + 2 k pi"""
        section = poincare_section(circle, 0.01, SectionPredicate(0, Direction.ASCENDING), beta=0.5)
        np.testing.assert_allclose(section.times, [1.5 * np.pi, 3.5 * np.pi], atol=1e-4)
        np.testing.assert_allclose(section.points[:, 0], 0.0, atol=1e-12)
        np.testing.assert_allclose(section.points[:, 1], -1.0, atol=1e-4)
        assert section.beta == 0.5

    def test_descending_crossings(self, circle):
        """Test cos t crosses downward at pi / 2 + 2 k pi"""
        section = poincare_section(circle, 0.01, SectionPredicate(0, Direction.DESCENDING))
        np.testing.assert_allclose(section.times, [0.5 * np.pi, 2.5 * np.pi], atol=1e-4)

    def test_any_direction(self, circle):
        """Test both directions together"""
        section = poincare_section(circle, 0.01, SectionPredicate(0))
        assert len(section) == 4

    def test_gate(self, circle):
        """Test the gate keeps crossings where the gate variable has the requested sign"""
        section = poincare_section(circle, 0.01, SectionPredicate(0, Direction.ANY, 1, GateSign.POSITIVE))
        np.testing.assert_allclose(section.times, [0.5 * np.pi, 2.5 * np.pi], atol=1e-4)
        assert np.all(section.points[:, 1] > 0.0)

    def test_exact_zero_sample(self):
        """Test a sample exactly on the surface counts once"""
        traj = np.array([[-1.0, 0.0, 1.0]])
        section = poincare_section(traj, 1.0, SectionPredicate(0, Direction.ASCENDING))
        np.testing.assert_allclose(section.times, [1.0])

    def test_short_trajectory(self):
        """Test a single sample cannot be sectioned"""
        with pytest.raises(ReservoirError):
            poincare_section(np.zeros((2, 1)), 0.1, SectionPredicate(0))


class TestKamDiagram:
    """Test diagram tables"""

    def test_rows_round_trip(self):
        """Test rows() and from_rows() agree"""
        diagram = KamDiagram("model")
        diagram.add(PoincareSet(0.5, np.array([[1.0, 2.0], [3.0, 4.0]])))
        diagram.add(PoincareSet(1.5, np.array([[5.0, 6.0]])))
        rows = diagram.rows()
        np.testing.assert_array_equal(rows[:, :2], [[0.5, 0], [0.5, 1], [1.5, 0]])

        restored = KamDiagram.from_rows("model", rows)
        assert restored.betas == [0.5, 1.5]
        np.testing.assert_array_equal(restored.entries[0.5].points, [[1.0, 2.0], [3.0, 4.0]])

    def test_duplicate_beta(self):
        """Test one beta cannot be added twice"""
        diagram = KamDiagram("machine")
        diagram.add(PoincareSet(0.5, np.zeros((1, 2))))
        with pytest.raises(ReservoirError):
            diagram.add(PoincareSet(0.5, np.zeros((1, 2))))

    def test_empty_rows(self):
        """Test an empty diagram has an empty table"""
        assert KamDiagram("model").rows().shape[0] == 0
        assert len(KamDiagram.from_rows("model", np.empty((0, 4)))) == 0


class TestClimateDistance:
    """Test the symmetric nearest-neighbour distance"""

    def test_identical_sets(self):
        """Test a set is at distance zero from itself"""
        points = np.random.default_rng(0).uniform(size=(50, 2))
        assert climate_distance(points, points) == 0.0

    def test_shifted_point(self):
        """Test the distance between two single points"""
        assert climate_distance(np.array([[0.0, 0.0]]), np.array([[0.1, 0.1]])) == pytest.approx(np.sqrt(0.02))

    def test_symmetric(self):
        """Test d(a, b) = d(b, a)"""
        rng = np.random.default_rng(1)
        a = rng.uniform(size=(30, 2))
        b = rng.uniform(size=(20, 2))
        assert climate_distance(a, b) == pytest.approx(climate_distance(b, a))

    def test_periodic_coordinate(self):
        """Test periodic coordinates use the shorter way round"""
        a = np.array([[0.05, 1.0]])
        b = np.array([[2.0 * np.pi - 0.05, 1.0]])
        assert climate_distance(a, b, periodic=(True, False)) == pytest.approx(0.1)
        assert climate_distance(a, b) == pytest.approx(2.0 * np.pi - 0.1)

    def test_accepts_sections(self):
        """Test PoincareSets can be compared directly"""
        a = PoincareSet(0.0, np.array([[0.0, 0.0]]))
        b = PoincareSet(0.0, np.array([[0.0, 2.0]]))
        assert climate_distance(a, b) == pytest.approx(2.0)

    def test_empty_set(self):
        """Test an empty set has no distance"""
        with pytest.raises(ReservoirError) as exc_info:
            climate_distance(np.empty((0, 2)), np.ones((3, 2)))
        assert exc_info.value.code == ReservoirError.EMPTY_SET

    def test_two_samples_of_one_invariant_circle(self):
        """Test disjoint stretches of one regular K = 0.5 orbit give nearly the same set"""
        orbit = standard_map_orbit(np.pi, 1.76, 0.5, 4000).T
        assert climate_distance(orbit[:2000], orbit[2000:], periodic=(True, True)) <= 0.02


class TestSeriesLyapunov:
    """Test the nearest-neighbour divergence estimator"""

    def test_rotation_does_not_diverge(self):
        """Test a pure rotation has exponent zero"""
        t = 0.1 * np.arange(3000)
        exponent = series_lyapunov(np.vstack([np.sin(t), np.cos(t)]), 0.1)
        assert abs(exponent) <= 0.01

    def test_logistic_map(self):
        """Test the fully chaotic logistic map gives ln 2 per iterate"""
        dt = 5.0 * np.log(2.0)
        exponent = series_lyapunov(logistic_series(50000), dt, theiler=1, neighbours=1, max_horizon=8, fit_window=6)
        assert exponent == pytest.approx(0.2, abs=0.02)

    def test_constant_slope_map(self):
        """Test a tent map of slope 1.99 gives ln(1.99) per iterate"""
        slope = 1.99
        x = np.empty(50000)
        x[0] = 0.3
        for i in range(1, x.size):
            x[i] = slope * min(x[i - 1], 1.0 - x[i - 1])
        dt = np.log(slope) / 0.2
        exponent = series_lyapunov(x[None, :], dt, theiler=1, neighbours=1, max_horizon=8, fit_window=6)
        assert exponent == pytest.approx(0.2, abs=0.02)

    def test_insufficient_recurrence(self):
        """Test a short series is rejected"""
        with pytest.raises(ReservoirError) as exc_info:
            series_lyapunov(np.ones((2, 100)), 0.1)
        assert exc_info.value.code == ReservoirError.INSUFFICIENT_RECURRENCE
        assert "insufficient recurrence" in exc_info.value.message

    def test_fit_picks_linear_window(self):
        """Test the fit finds the straight segment of a saturating curve"""
        curve = np.concatenate([0.3 * np.arange(20), np.full(20, 0.3 * 19)])
        fit = fit_divergence(curve, 0.5, fit_window=10)
        assert fit.exponent == pytest.approx(0.6)
        assert fit.r_squared == pytest.approx(1.0)

    def test_delay_embed(self):
        """Test lagged rows are stacked"""
        embedded = delay_embed(np.arange(6.0)[None, :], 3, lag=2)
        np.testing.assert_array_equal(embedded, [[0.0, 1.0], [2.0, 3.0], [4.0, 5.0]])

    def test_classify(self):
        """Test the regular/chaotic threshold"""
        assert classify_regular_chaotic(0.2) == "chaotic"
        assert classify_regular_chaotic(0.01) == "regular"
        assert classify_regular_chaotic(0.05) == "regular"
        assert classify_regular_chaotic(0.3, threshold=0.5) == "regular"


class TestEnergyAudit:
    """Test energy statistics"""

    def test_audit(self):
        """Test deviations are taken against the first sample"""
        traj = np.array([[1.0, 2.0, 0.5], [0.0, 0.0, 0.0]])
        audit = energy_audit(traj, lambda y: y[0] + y[1])
        assert audit.mean == pytest.approx(3.5 / 3.0)
        assert audit.max_abs_dev == pytest.approx(1.0)
        np.testing.assert_allclose(audit.dev_series, [0.0, 1.0, -0.5])
        assert audit.to_dict()["samples"] == 3
