"""
Double-pendulum oscillator with identical rods, in rescaled time

Observable and trajectory rows are ordered (theta1, omega1, theta2, omega2).
Angles are kept unwrapped; wrapping happens only when sections are projected.
"""
import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from analysis.poincare import GATED_OMEGA1_SECTION, PoincareSet, SectionPredicate, poincare_section
from reservoir.errors import require

from .base import ModelSystem
from .lyapunov import DEFAULT_SEPARATION, benettin

logger = logging.getLogger(__name__)

SAMPLE_DT = 0.2
SUBSTEPS = 12
ITERATION_TOLERANCE = 1e-13
MAX_ITERATIONS = 25
ENERGY_DRIFT_BUDGET = 1e-6

# Fixed initial values; theta2(0) is the control parameter
THETA1_0 = 0.6
OMEGA1_0 = 0.0
OMEGA2_0 = 0.0

_SQRT3 = np.sqrt(3.0)
SCHEMES = {
    "gauss4": (
        np.array([[0.25, 0.25 - _SQRT3 / 6.0], [0.25 + _SQRT3 / 6.0, 0.25]]),
        np.array([0.5, 0.5]),
    ),
    "midpoint": (np.array([[0.5]]), np.array([1.0])),
}


@dataclass(frozen=True)
class PendulumState:
    """Angles (radians) and angular velocities (radians per rescaled time unit)"""

    theta1: float
    theta2: float
    omega1: float
    omega2: float

    def as_vector(self) -> np.ndarray:
        return np.array([self.theta1, self.omega1, self.theta2, self.omega2])

    @classmethod
    def from_vector(cls, y: Sequence[float]) -> "PendulumState":
        return cls(theta1=float(y[0]), theta2=float(y[2]), omega1=float(y[1]), omega2=float(y[3]))

    @classmethod
    def from_beta(cls, beta: float) -> "PendulumState":
        return cls(theta1=THETA1_0, theta2=float(beta), omega1=OMEGA1_0, omega2=OMEGA2_0)


def pendulum_rhs(y: np.ndarray) -> np.ndarray:
    """Time derivative of y = (theta1, omega1, theta2, omega2); trailing axes are batched"""
    theta1, omega1, theta2, omega2 = y[0], y[1], y[2], y[3]
    delta = theta1 - theta2
    c = np.cos(delta)
    s = np.sin(delta)
    sin1 = np.sin(theta1)
    sin2 = np.sin(theta2)
    w1 = omega1 * omega1
    w2 = omega2 * omega2
    denominator = 16.0 - 9.0 * c * c

    domega1 = -(9.0 * c * s * w1 + 6.0 * s * w2 + 18.0 * sin1 - 9.0 * c * sin2) / denominator
    domega2 = (24.0 * s * w1 + 9.0 * c * s * w2 + 27.0 * c * sin1 - 24.0 * sin2) / denominator
    return np.stack([omega1, domega1, omega2, domega2])


def pendulum_derivs(s: PendulumState) -> np.ndarray:
    """(omega1, omega2, d omega1/dt, d omega2/dt) at state s"""
    dy = pendulum_rhs(s.as_vector())
    return np.array([dy[0], dy[2], dy[1], dy[3]])


def pendulum_energy(y) -> np.ndarray:
    """E = 2 w1^2/3 + w2^2/6 + [w1 w2 cos(t1 - t2) - cos t2 - 3 cos t1]/2

    Accepts a PendulumState or an array with rows (theta1, omega1, theta2, omega2).
    """
    if isinstance(y, PendulumState):
        y = y.as_vector()
    y = np.asarray(y, dtype=float)
    theta1, omega1, theta2, omega2 = y[0], y[1], y[2], y[3]
    return (
        2.0 * omega1**2 / 3.0
        + omega2**2 / 6.0
        + (omega1 * omega2 * np.cos(theta1 - theta2) - np.cos(theta2) - 3.0 * np.cos(theta1)) / 2.0
    )


class CollocationIntegrator:
    """Fixed-step implicit Runge-Kutta (Gauss collocation) for the pendulum equations

    Stage equations are solved by fixed-point iteration, started from the
    previous step's stages; the contraction factor is about h*L/2 at h = 0.2 / 12.
    """

    def __init__(self, dt: float = SAMPLE_DT, substeps: int = SUBSTEPS, scheme: str = "gauss4"):
        require(dt > 0.0, "dt must be positive", {"dt": dt})
        require(substeps >= 1, "substeps must be at least 1", {"substeps": substeps})
        require(scheme in SCHEMES, f"unknown integrator scheme {scheme}", {"schemes": sorted(SCHEMES)})
        self.dt = dt
        self.substeps = substeps
        self.scheme = scheme
        self.h = dt / substeps
        self.a, self.b = SCHEMES[scheme]
        self.unconverged = 0

    def advance(self, y: np.ndarray, substeps: int) -> np.ndarray:
        """Advance a (4,) or (4, B) state by a number of substeps"""
        y = np.array(y, dtype=float)
        stages = np.stack([pendulum_rhs(y)] * len(self.b))
        for _ in range(substeps):
            y, stages = self._substep(y, stages)
        return y

    def _substep(self, y: np.ndarray, stages: np.ndarray):
        h = self.h
        for _ in range(MAX_ITERATIONS):
            points = y + h * np.tensordot(self.a, stages, axes=1)
            updated = np.stack([pendulum_rhs(points[i]) for i in range(len(self.b))])
            change = h * np.max(np.abs(updated - stages))
            stages = updated
            if change <= ITERATION_TOLERANCE:
                break
        else:
            self.unconverged += 1
        return y + h * np.tensordot(self.b, stages, axes=1), stages

    def trajectory(self, y0: np.ndarray, samples: int) -> np.ndarray:
        """Samples at t = dt, 2 dt, ...; shape (4, samples) or (4, B, samples)"""
        y = np.array(y0, dtype=float)
        out = np.empty(y.shape + (samples,))
        stages = np.stack([pendulum_rhs(y)] * len(self.b))
        for k in range(samples):
            for _ in range(self.substeps):
                y, stages = self._substep(y, stages)
            out[..., k] = y
        if self.unconverged:
            logger.debug(f"{self.unconverged} substeps hit the iteration limit")
        return out


def pendulum_integrate(
    s0: PendulumState, steps: int, dt: float = SAMPLE_DT, substeps: int = SUBSTEPS, scheme: str = "gauss4"
) -> np.ndarray:
    """Trajectory (4 x steps) sampled at t = dt, 2 dt, ...; warns when energy drifts beyond budget"""
    require(steps >= 0, "steps must be non-negative", {"steps": steps})
    y0 = s0.as_vector()
    if steps == 0:
        return np.empty((4, 0))

    trajectory = CollocationIntegrator(dt, substeps, scheme).trajectory(y0, steps)
    drift = relative_energy_drift(y0, trajectory)
    if drift > ENERGY_DRIFT_BUDGET:
        logger.warning(f"Pendulum energy drift {drift:.3e} exceeds budget {ENERGY_DRIFT_BUDGET:.0e}")
    return trajectory


def relative_energy_drift(y0: np.ndarray, trajectory: np.ndarray) -> float:
    """max |E(t) - E(0)| / |E(0)| over a trajectory"""
    e0 = pendulum_energy(y0)
    return float(np.max(np.abs(pendulum_energy(trajectory) - e0)) / abs(e0))


def pendulum_lyapunov(
    s0: PendulumState,
    horizon: float,
    dt: float = SAMPLE_DT,
    substeps: int = SUBSTEPS,
    separation: float = DEFAULT_SEPARATION,
    interval: float = 1.0,
    scheme: str = "gauss4",
) -> float:
    """Benettin estimate, renormalizing the separation every interval time units"""
    integrator = CollocationIntegrator(dt, substeps, scheme)
    per_interval = max(1, int(round(interval / integrator.h)))
    intervals = max(1, int(horizon / interval))
    return benettin(
        lambda pair: integrator.advance(pair, per_interval),
        s0.as_vector(),
        intervals,
        per_interval * integrator.h,
        separation=separation,
    )


def wrap_pm_pi(angle: np.ndarray) -> np.ndarray:
    """Angle mapped to [-pi, pi)"""
    return np.mod(np.asarray(angle) + np.pi, 2.0 * np.pi) - np.pi


class PendulumSystem(ModelSystem):
    """Double pendulum labelled by beta = theta2(0), other initial values fixed"""

    name = "pendulum"
    observable_names = ("theta1", "omega1", "theta2", "omega2")
    state_names = observable_names
    projection_names = ("theta2", "omega2")
    periodic = (True, False)
    viewport = (-np.pi, np.pi, -3.5, 3.5)

    def __init__(self, dt: float = SAMPLE_DT, substeps: int = SUBSTEPS, scheme: str = "gauss4"):
        super().__init__(dt)
        self.substeps = substeps
        self.scheme = scheme

    def initial_input(self, beta: float) -> np.ndarray:
        return PendulumState.from_beta(beta).as_vector()

    def generate(self, beta: float, steps: int, transient: int = 0) -> np.ndarray:
        return self.generate_many([beta], steps, transient)[0]

    def generate_many(self, betas: Sequence[float], steps: int, transient: int = 0) -> list:
        """All betas are integrated together as one batch"""
        require(steps >= 0 and transient >= 0, "steps and transient must be non-negative")
        if steps == 0 or len(betas) == 0:
            return [np.empty((4, 0)) for _ in betas]

        y0 = np.stack([self.initial_input(beta) for beta in betas], axis=1)
        total = transient + steps
        integrator = CollocationIntegrator(self.dt, self.substeps, self.scheme)
        logger.info(f"Integrating {len(betas)} pendulum trajectories for {total} samples")
        path = integrator.trajectory(y0, total - 1) if total > 1 else np.empty((4, len(betas), 0))
        series = np.concatenate([y0[:, :, None], path], axis=2)[:, :, transient:]

        drifts = [relative_energy_drift(y0[:, i], series[:, i, :]) for i in range(len(betas))]
        if max(drifts) > ENERGY_DRIFT_BUDGET:
            logger.warning(f"Pendulum energy drift {max(drifts):.3e} exceeds budget {ENERGY_DRIFT_BUDGET:.0e}")
        return [series[:, i, :].copy() for i in range(len(betas))]

    def to_states(self, observables: np.ndarray) -> np.ndarray:
        return np.asarray(observables, dtype=float)

    def default_predicate(self) -> SectionPredicate:
        return GATED_OMEGA1_SECTION

    def section(self, observables: np.ndarray, beta: float, predicate: Optional[SectionPredicate] = None) -> PoincareSet:
        return poincare_section(observables, self.dt, predicate or self.default_predicate(), beta=beta)

    def project(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(points)
        if points.size == 0:
            return np.empty((0, 2))
        return np.column_stack([wrap_pm_pi(points[:, 2]), points[:, 3]])

    def energy(self, observables: np.ndarray) -> np.ndarray:
        return pendulum_energy(observables)

    def lyapunov(self, beta: float, horizon: float) -> float:
        return pendulum_lyapunov(PendulumState.from_beta(beta), horizon, self.dt, self.substeps, scheme=self.scheme)
