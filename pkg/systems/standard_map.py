"""
Chirikov standard map (kicked rotor) on the 2-torus and its sine/cosine observable
"""
import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from analysis.poincare import PoincareSet, SectionPredicate
from reservoir.errors import ReservoirError, require

from .base import ModelSystem

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi
THETA_0 = np.pi
ANGLE_EPSILON = 1e-300


def wrap_angle(x):
    """Value mod 2 pi, guaranteed inside [0, 2 pi)"""
    wrapped = np.mod(x, TWO_PI)
    # mod can round up to exactly 2 pi for tiny negative inputs
    wrapped = np.where(wrapped >= TWO_PI, 0.0, wrapped)
    return float(wrapped) if wrapped.ndim == 0 else wrapped


@dataclass(frozen=True)
class MapState:
    theta: float
    p: float

    def as_vector(self) -> np.ndarray:
        return np.array([self.theta, self.p])


def standard_map_step(s: MapState, k: float, linear_kick: bool = False) -> MapState:
    """theta' = (theta + p) mod 2pi; p' = (p + K sin theta') mod 2pi

    linear_kick replaces the kick K sin theta' by K theta'.
    """
    theta = wrap_angle(s.theta + s.p)
    kick = k * theta if linear_kick else k * np.sin(theta)
    return MapState(theta=theta, p=wrap_angle(s.p + kick))


def standard_map_orbit(theta0: float, p0: float, k: float, n: int, linear_kick: bool = False) -> np.ndarray:
    """Iterates 1..n as a 2 x n array of (theta, p); the start point is not included"""
    require(n >= 0, "iteration count must be non-negative", {"n": n})
    orbit = np.empty((2, n))
    s = MapState(wrap_angle(theta0), wrap_angle(p0))
    for i in range(n):
        s = standard_map_step(s, k, linear_kick)
        orbit[0, i] = s.theta
        orbit[1, i] = s.p
    return orbit


def map_jacobian(s: MapState, k: float) -> np.ndarray:
    """Derivative of the sine-kick map at s (determinant 1)"""
    kc = k * np.cos(s.theta + s.p)
    return np.array([[1.0, 1.0], [kc, 1.0 + kc]])


def map_lyapunov(theta0: float, p0: float, k: float, n: int, transient: int = 0) -> float:
    """Largest Lyapunov exponent per iteration by tangent-map iteration with renormalization"""
    require(n >= 1, "need at least one iteration", {"n": n})
    s = MapState(wrap_angle(theta0), wrap_angle(p0))
    for _ in range(transient):
        s = standard_map_step(s, k)

    v = np.array([1.0, 1.0]) / np.sqrt(2.0)
    total = 0.0
    for _ in range(n):
        v = map_jacobian(s, k) @ v
        s = standard_map_step(s, k)
        norm = np.linalg.norm(v)
        total += np.log(norm)
        v /= norm

    exponent = total / n
    logger.debug(f"Tangent-map exponent at K={k} over {n} iterations: {exponent:.6f}")
    return float(exponent)


def encode_map_state(s: MapState) -> np.ndarray:
    """Observable [sin theta, sin p, cos theta, cos p]"""
    return np.array([np.sin(s.theta), np.sin(s.p), np.cos(s.theta), np.cos(s.p)])


def decode_map_state(o: Sequence[float]) -> MapState:
    """Angles recovered from the (sin, cos) pairs, which need not lie on the unit circle"""
    o = np.asarray(o, dtype=float)
    require(o.shape == (4,), "map observable must have 4 components", {"shape": o.shape})
    angles = decode_observables(o.reshape(4, 1))[:, 0]
    return MapState(theta=float(angles[0]), p=float(angles[1]))


def encode_observables(states: np.ndarray) -> np.ndarray:
    """2 x N (theta, p) columns to 4 x N observables"""
    theta, p = states[0], states[1]
    return np.stack([np.sin(theta), np.sin(p), np.cos(theta), np.cos(p)])


def decode_observables(observables: np.ndarray) -> np.ndarray:
    """4 x N observables to 2 x N (theta, p) in [0, 2 pi)"""
    observables = np.asarray(observables, dtype=float)
    sines = observables[0:2]
    cosines = observables[2:4]
    undetermined = (np.abs(sines) < ANGLE_EPSILON) & (np.abs(cosines) < ANGLE_EPSILON)
    if np.any(undetermined):
        column = int(np.nonzero(undetermined.any(axis=0))[0][0])
        raise ReservoirError(ReservoirError.UNDETERMINED_ANGLE, "undetermined angle", {"column": column})
    return wrap_angle(np.arctan2(sines, cosines))


def project_to_circle(v: np.ndarray) -> np.ndarray:
    """Rescale each (sin, cos) pair of an observable to unit length"""
    v = np.array(v, dtype=float)
    for i in (0, 1):
        norm = np.hypot(v[i], v[i + 2])
        if norm > 0.0:
            v[i] /= norm
            v[i + 2] /= norm
    return v


class StandardMapSystem(ModelSystem):
    """Standard map orbits labelled by beta = p0 / 2 pi with theta0 = pi"""

    name = "standard_map"
    observable_names = ("sin_theta", "sin_p", "cos_theta", "cos_p")
    state_names = ("theta", "p")
    projection_names = ("theta", "p")
    periodic = (True, True)
    viewport = (0.0, TWO_PI, 0.0, TWO_PI)

    def __init__(self, k: float, linear_kick: bool = False):
        super().__init__(1.0)
        self.k = float(k)
        self.linear_kick = linear_kick

    def start(self, beta: float) -> MapState:
        return MapState(THETA_0, wrap_angle(TWO_PI * beta))

    def initial_input(self, beta: float) -> np.ndarray:
        return encode_map_state(self.start(beta))

    def generate(self, beta: float, steps: int, transient: int = 0) -> np.ndarray:
        require(steps >= 0 and transient >= 0, "steps and transient must be non-negative")
        s = self.start(beta)
        if steps + transient <= 1:
            states = s.as_vector()[:, None][:, transient : transient + steps]
        else:
            orbit = standard_map_orbit(s.theta, s.p, self.k, steps + transient - 1, self.linear_kick)
            states = np.concatenate([s.as_vector()[:, None], orbit], axis=1)[:, transient:]
        return encode_observables(states)

    def to_states(self, observables: np.ndarray) -> np.ndarray:
        return decode_observables(observables)

    def section(self, observables: np.ndarray, beta: float, predicate: Optional[SectionPredicate] = None) -> PoincareSet:
        """Every iterate of a map is a section point"""
        states = self.to_states(observables)
        return PoincareSet(beta=float(beta), points=states.T.copy())

    def project(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(points)
        if points.size == 0:
            return np.empty((0, 2))
        return wrap_angle(points[:, :2])

    def projector(self):
        return project_to_circle

    def lyapunov(self, beta: float, horizon: float) -> float:
        s = self.start(beta)
        return map_lyapunov(s.theta, s.p, self.k, max(1, int(horizon)))