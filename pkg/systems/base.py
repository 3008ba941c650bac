"""
Ground-truth system interface
"""
from abc import ABC, abstractmethod
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from analysis.poincare import PoincareSet, SectionPredicate


class ModelSystem(ABC):
    """Abstract base class for the systems the reservoir learns

    A system turns a control parameter beta into an initial condition,
    generates observable time series (d x N, one column per sample), and knows
    how its sections are taken and projected for diagrams.
    """

    name: str = ""
    observable_names: Tuple[str, ...] = ()
    state_names: Tuple[str, ...] = ()
    projection_names: Tuple[str, ...] = ()
    periodic: Tuple[bool, ...] = ()
    viewport: Tuple[float, float, float, float] = (0.0, 1.0, 0.0, 1.0)

    def __init__(self, dt: float):
        self.dt = dt

    @property
    def d(self) -> int:
        return len(self.observable_names)

    @abstractmethod
    def initial_input(self, beta: float) -> np.ndarray:
        """Observable vector of the initial condition labelled by beta"""
        pass

    @abstractmethod
    def generate(self, beta: float, steps: int, transient: int = 0) -> np.ndarray:
        """Observables at samples transient .. transient + steps - 1 (sample 0 is the initial condition)"""
        pass

    @abstractmethod
    def to_states(self, observables: np.ndarray) -> np.ndarray:
        """Physical state columns (state_names order) for the given observables"""
        pass

    @abstractmethod
    def section(self, observables: np.ndarray, beta: float, predicate: Optional[SectionPredicate] = None) -> PoincareSet:
        """Section points of an observable series"""
        pass

    @abstractmethod
    def project(self, points: np.ndarray) -> np.ndarray:
        """Plot/distance coordinates (n x 2) of section points"""
        pass

    @abstractmethod
    def lyapunov(self, beta: float, horizon: float) -> float:
        """Largest Lyapunov exponent of the true motion labelled by beta (per unit time)"""
        pass

    def generate_many(self, betas: Sequence[float], steps: int, transient: int = 0) -> list:
        """Observable series for several betas"""
        return [self.generate(beta, steps, transient) for beta in betas]

    def default_predicate(self) -> Optional[SectionPredicate]:
        return None

    def energy(self, observables: np.ndarray) -> Optional[np.ndarray]:
        """Energy per sample, or None when the system has no energy function"""
        return None

    def projector(self) -> Optional[Callable[[np.ndarray], np.ndarray]]:
        """Map applied to fed-back outputs when projection is enabled"""
        return None
