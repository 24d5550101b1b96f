"""Faceted prism crystal growth: crystalline curvature, exterior drift-diffusion and facet dynamics."""
from ._accel import HAS_NUMBA
from .config import SimConfig
from .dynamics import KineticParams, facet_velocity, integrate_curvature_flow
from .energy import Anisotropy, crystalline_curvature, curvature_oracle, gamma, surface_energy, wulff_shape
from .errors import (
    ConfigError,
    DegenerateGeometry,
    DomainError,
    FlowError,
    NoConvergence,
    PrismGrowthError,
    StabilityError,
)
from .geometry import BasePolygon, CrystalState, measures

__version__ = "0.1.0"

__all__ = [
    "HAS_NUMBA",
    "Anisotropy",
    "BasePolygon",
    "ConfigError",
    "CrystalState",
    "DegenerateGeometry",
    "DomainError",
    "FlowError",
    "KineticParams",
    "NoConvergence",
    "PrismGrowthError",
    "SimConfig",
    "StabilityError",
    "crystalline_curvature",
    "curvature_oracle",
    "facet_velocity",
    "gamma",
    "integrate_curvature_flow",
    "measures",
    "surface_energy",
    "wulff_shape",
]
