"""
Ground-truth Hamiltonian systems the reservoir is trained on
"""
from typing import Any, Dict, Optional

from reservoir.errors import ReservoirError

from .base import ModelSystem
from .pendulum import PendulumState, PendulumSystem, pendulum_derivs, pendulum_energy, pendulum_integrate, pendulum_lyapunov
from .standard_map import (
    MapState,
    StandardMapSystem,
    decode_map_state,
    encode_map_state,
    map_lyapunov,
    standard_map_orbit,
    standard_map_step,
)

SYSTEMS = {
    PendulumSystem.name: PendulumSystem,
    StandardMapSystem.name: StandardMapSystem,
}


def get_system(name: str, params: Optional[Dict[str, Any]] = None) -> ModelSystem:
    """Instantiate a system by name with its parameters"""
    if name not in SYSTEMS:
        raise ReservoirError(ReservoirError.CONFIG_INVALID, f"unknown system {name}", {"systems": sorted(SYSTEMS)})
    try:
        return SYSTEMS[name](**(params or {}))
    except TypeError as e:
        raise ReservoirError(ReservoirError.CONFIG_INVALID, f"system_params: {e}", {"system": name})


__all__ = [
    "MapState",
    "ModelSystem",
    "PendulumState",
    "PendulumSystem",
    "StandardMapSystem",
    "decode_map_state",
    "encode_map_state",
    "get_system",
    "map_lyapunov",
    "pendulum_derivs",
    "pendulum_energy",
    "pendulum_integrate",
    "pendulum_lyapunov",
    "standard_map_orbit",
    "standard_map_step",
]
