"""Deployment optimizer for a dynamic drone small cell serving sliced BB and MTC traffic."""
from .channel import HIGH_URBAN, PRESETS, SUBURBAN, URBAN, AntennaConfig, Environment
from .coverage import ServiceRequirements, lap_baseline, max_slicing_ratio, mple
from .geometry import CellSpec, smallest_bounding_circle
from .optimizer import Budget, DesignPoint, OptimizationResult, optimize

__version__ = "0.1.0"

__all__ = [
    "AntennaConfig", "Budget", "CellSpec", "DesignPoint", "Environment", "HIGH_URBAN", "OptimizationResult",
    "PRESETS", "SUBURBAN", "ServiceRequirements", "URBAN", "lap_baseline", "max_slicing_ratio", "mple",
    "optimize", "smallest_bounding_circle",
]
