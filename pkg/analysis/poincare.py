"""
Poincare surfaces of section and KAM diagrams
"""
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Iterator, List, Optional

import numpy as np

from reservoir.errors import ReservoirError, require

logger = logging.getLogger(__name__)


class Direction(str, Enum):
    ASCENDING = "ascending"
    DESCENDING = "descending"
    ANY = "any"


class GateSign(str, Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"


@dataclass(frozen=True)
class SectionPredicate:
    """Zero crossings of one trajectory row, optionally gated on the sign of another row"""

    trigger_variable: int
    direction: Direction = Direction.ANY
    gate_variable: Optional[int] = None
    gate_sign: Optional[GateSign] = None

    def __post_init__(self):
        object.__setattr__(self, "direction", Direction(self.direction))
        if self.gate_sign is not None:
            object.__setattr__(self, "gate_sign", GateSign(self.gate_sign))
        require(
            (self.gate_variable is None) == (self.gate_sign is None),
            "gate_variable and gate_sign must be given together",
        )

    def validate(self, d: int) -> None:
        """Check indices against the trajectory dimension"""
        require(0 <= self.trigger_variable < d, "trigger variable out of range", {"index": self.trigger_variable, "d": d})
        if self.gate_variable is not None:
            require(0 <= self.gate_variable < d, "gate variable out of range", {"index": self.gate_variable, "d": d})

    def to_dict(self) -> Dict[str, Any]:
        return {
            "trigger_variable": self.trigger_variable,
            "direction": self.direction.value,
            "gate_variable": self.gate_variable,
            "gate_sign": self.gate_sign.value if self.gate_sign is not None else None,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SectionPredicate":
        return cls(
            trigger_variable=int(data["trigger_variable"]),
            direction=Direction(data.get("direction", Direction.ANY.value)),
            gate_variable=data.get("gate_variable"),
            gate_sign=data.get("gate_sign"),
        )


# Pendulum sections: omega1 = 0 with theta1 > 0, and omega1 = 0 with d(omega1)/dt > 0
GATED_OMEGA1_SECTION = SectionPredicate(1, Direction.ANY, gate_variable=0, gate_sign=GateSign.POSITIVE)
ASCENDING_OMEGA1_SECTION = SectionPredicate(1, Direction.ASCENDING)


@dataclass(frozen=True, eq=False)
class PoincareSet:
    """Section points (n x d, one row per crossing) labelled by beta"""

    beta: float
    points: np.ndarray
    times: Optional[np.ndarray] = None

    def __post_init__(self):
        points = np.asarray(self.points, dtype=float)
        if points.size == 0:
            points = points.reshape(0, points.shape[1] if points.ndim == 2 else 0)
        require(points.ndim == 2, "section points must be an n x d matrix", {"shape": points.shape})
        object.__setattr__(self, "points", points)

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def empty(self) -> bool:
        return len(self) == 0


@dataclass
class KamDiagram:
    """Table beta -> PoincareSet from one source ("machine" for ground truth, "model" for the reservoir)"""

    source: str
    entries: Dict[float, PoincareSet] = field(default_factory=dict)

    def add(self, section: PoincareSet) -> None:
        beta = float(section.beta)
        if beta in self.entries:
            raise ReservoirError(ReservoirError.CONTRACT_VIOLATION, f"beta {beta} already in diagram", {"source": self.source})
        self.entries[beta] = section

    @property
    def betas(self) -> List[float]:
        return list(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[PoincareSet]:
        return iter(self.entries.values())

    def rows(self) -> np.ndarray:
        """Table with columns (beta, point_index, coordinates...)"""
        blocks = []
        for beta, section in self.entries.items():
            n = len(section)
            if n == 0:
                continue
            blocks.append(np.column_stack([np.full(n, beta), np.arange(n), section.points]))
        if not blocks:
            return np.empty((0, 2))
        return np.vstack(blocks)

    @classmethod
    def from_rows(cls, source: str, rows: np.ndarray) -> "KamDiagram":
        """Inverse of rows(); betas with no points are not recoverable"""
        diagram = cls(source)
        rows = np.atleast_2d(rows)
        if rows.size == 0:
            return diagram
        for beta in dict.fromkeys(rows[:, 0].tolist()):
            block = rows[rows[:, 0] == beta]
            diagram.add(PoincareSet(beta=beta, points=block[np.argsort(block[:, 1]), 2:]))
        return diagram


def poincare_section(
    traj: np.ndarray, dt: float, pred: SectionPredicate, beta: float = float("nan")
) -> PoincareSet:
    """Linearly interpolated crossings of traj (d x N) through the predicate's surface

    A crossing lies between samples i and i+1 when the trigger goes from
    strictly negative to non-negative (ascending) or from strictly positive to
    non-positive (descending). The gate is applied to the interpolated point.
    """
    traj = np.asarray(traj, dtype=float)
    require(traj.ndim == 2 and traj.shape[1] >= 2, "section needs a d x N trajectory with N >= 2", {"shape": traj.shape})
    require(dt > 0.0, "dt must be positive", {"dt": dt})
    pred.validate(traj.shape[0])

    x = traj[pred.trigger_variable]
    x0 = x[:-1]
    x1 = x[1:]
    rising = (x0 < 0.0) & (x1 >= 0.0)
    falling = (x0 > 0.0) & (x1 <= 0.0)
    if pred.direction is Direction.ASCENDING:
        mask = rising
    elif pred.direction is Direction.DESCENDING:
        mask = falling
    else:
        mask = rising | falling

    index = np.nonzero(mask)[0]
    fraction = x0[index] / (x0[index] - x1[index])
    points = traj[:, index] + fraction * (traj[:, index + 1] - traj[:, index])
    times = (index + fraction) * dt

    if pred.gate_variable is not None:
        gate = points[pred.gate_variable]
        keep = gate > 0.0 if pred.gate_sign is GateSign.POSITIVE else gate < 0.0
        points = points[:, keep]
        times = times[keep]

    logger.debug(f"Section at beta={beta}: {points.shape[1]} crossings in {traj.shape[1]} samples")
    return PoincareSet(beta=beta, points=points.T.copy(), times=times)
