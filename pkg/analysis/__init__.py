"""
Climate diagnostics for true and reservoir-generated trajectories
"""
from .diagnostics import EnergyAudit, classify_regular_chaotic, climate_distance, energy_audit, series_lyapunov
from .poincare import Direction, GateSign, KamDiagram, PoincareSet, SectionPredicate, poincare_section

__all__ = [
    "Direction",
    "EnergyAudit",
    "GateSign",
    "KamDiagram",
    "PoincareSet",
    "SectionPredicate",
    "classify_regular_chaotic",
    "climate_distance",
    "energy_audit",
    "poincare_section",
    "series_lyapunov",
]
